use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::Vec2;
use super::world::{AgentState, ArmMode, VisitorState, WorldState};
use crate::dsl::Association;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset needs at least {needed} samples, has {found}")]
    TooShort { needed: usize, found: usize },
    #[error("record {index}: time step {found} differs from {expected}")]
    NonUniform {
        index: usize,
        expected: f64,
        found: f64,
    },
    #[error("line {line}: {source}")]
    Record {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: unknown arm mode `{mode}`")]
    ArmMode { line: usize, mode: String },
    #[error("label count {labels} does not match sample count {samples}")]
    LabelCount { labels: usize, samples: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub x: f64,
    pub y: f64,
    pub body_yaw: f64,
    pub head_yaw: f64,
    pub arm_mode: ArmModeName,
    pub arm_dir: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmModeName {
    Idle,
    Pointing,
    Waving,
}

/// The on-disk form of one world sample. Shared by dataset and trace files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub t: f64,
    pub agent: AgentRecord,
    pub visitor: Vec2,
    pub stand: Vec2,
    pub front_of_stand: Vec2,
}

impl From<&WorldState> for StateRecord {
    fn from(w: &WorldState) -> Self {
        let a = &w.agent;
        StateRecord {
            t: w.time,
            agent: AgentRecord {
                x: a.position.x,
                y: a.position.y,
                body_yaw: a.body_yaw,
                head_yaw: a.head_yaw,
                arm_mode: match a.arm_mode {
                    ArmMode::Idle => ArmModeName::Idle,
                    ArmMode::Pointing { .. } => ArmModeName::Pointing,
                    ArmMode::Waving { .. } => ArmModeName::Waving,
                },
                arm_dir: a.arm_mode.angle(),
            },
            visitor: w.visitor.position,
            stand: w.stand,
            front_of_stand: w.front_of_stand,
        }
    }
}

impl StateRecord {
    /// Rebuilds a world state. Rates and velocities are not stored; they are
    /// recovered by differencing against `prev`.
    pub fn to_world(&self, prev: Option<&WorldState>) -> WorldState {
        let a = &self.agent;
        let arm_mode = match a.arm_mode {
            ArmModeName::Idle => ArmMode::Idle,
            ArmModeName::Pointing => ArmMode::Pointing {
                direction: a.arm_dir,
            },
            ArmModeName::Waving => ArmMode::Waving { phase: a.arm_dir },
        };
        let position = Vec2::new(a.x, a.y);
        let mut w = WorldState {
            time: self.t,
            agent: AgentState {
                position,
                body_yaw: a.body_yaw,
                head_yaw: a.head_yaw,
                arm_mode,
                ..AgentState::default()
            },
            visitor: VisitorState {
                position: self.visitor,
                velocity: Vec2::ZERO,
            },
            stand: self.stand,
            front_of_stand: self.front_of_stand,
        };
        if let Some(p) = prev {
            let dt = self.t - p.time;
            if dt > 0.0 {
                w.agent.linear_velocity = (position - p.agent.position) * (1.0 / dt);
                w.agent.body_yaw_rate =
                    super::geometry::wrap_angle(a.body_yaw - p.agent.body_yaw) / dt;
                w.agent.head_yaw_rate = (a.head_yaw - p.agent.head_yaw) / dt;
                w.visitor.velocity = (self.visitor - p.visitor.position) * (1.0 / dt);
            }
        }
        w
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetLine {
    #[serde(flatten)]
    state: StateRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<Association>>,
}

/// World samples at a uniform time step, optionally with the ground-truth
/// active associations of each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<WorldState>,
    dt: f64,
    labels: Option<Vec<Vec<Association>>>,
}

impl Dataset {
    pub fn new(samples: Vec<WorldState>, dt: f64) -> Self {
        Self {
            samples,
            dt,
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<Vec<Association>>) -> Result<Self, DatasetError> {
        if labels.len() != self.samples.len() {
            return Err(DatasetError::LabelCount {
                labels: labels.len(),
                samples: self.samples.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn samples(&self) -> &[WorldState] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn labels(&self) -> Option<&[Vec<Association>]> {
        self.labels.as_deref()
    }

    pub fn truncate(&mut self, len: usize) {
        self.samples.truncate(len);
        if let Some(l) = &mut self.labels {
            l.truncate(len);
        }
    }

    /// Visitor-stand distance of every sample.
    pub fn distances(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(WorldState::visitor_stand_distance)
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), DatasetError> {
        for (i, w) in self.samples.iter().enumerate() {
            let line = DatasetLine {
                state: w.into(),
                labels: self.labels.as_ref().map(|l| l[i].clone()),
            };
            serde_json::to_writer(&mut out, &line).map_err(|e| DatasetError::Record {
                line: i + 1,
                source: e,
            })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, DatasetError> {
        let mut samples: Vec<WorldState> = Vec::new();
        let mut labels = Vec::new();
        let mut any_labels = false;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DatasetLine =
                serde_json::from_str(&line).map_err(|e| DatasetError::Record {
                    line: i + 1,
                    source: e,
                })?;
            any_labels |= rec.labels.is_some();
            labels.push(rec.labels.unwrap_or_default());
            samples.push(rec.state.to_world(samples.last()));
        }
        if samples.is_empty() {
            return Err(DatasetError::TooShort {
                needed: 1,
                found: 0,
            });
        }
        let dt = if samples.len() > 1 {
            samples[1].time - samples[0].time
        } else {
            0.0
        };
        for i in 1..samples.len() {
            let step = samples[i].time - samples[i - 1].time;
            if !(dt > 0.0) || (step - dt).abs() > 1e-6 * dt.max(1.0) {
                return Err(DatasetError::NonUniform {
                    index: i,
                    expected: dt,
                    found: step,
                });
            }
        }
        let ds = Dataset::new(samples, dt);
        if any_labels {
            ds.with_labels(labels)
        } else {
            Ok(ds)
        }
    }

    pub fn from_jsonl_str(text: &str) -> Result<Self, DatasetError> {
        Self::read_jsonl(text.as_bytes())
    }
}
