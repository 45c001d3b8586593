//! A live world for teleoperated demonstrations, script runs and replays.
//! Transport-agnostic: the server crate drives it tick by tick.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_script, validate, PrimitiveRegistry};
use crate::engine::{compile, tick, BehaviorTree, Memory};
use crate::sim::{
    ArmDirective, Dataset, MotorCommands, Scenario, SimError, Simulator, Vec2, WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Idle,
    DemoRecording,
    ScriptRunning,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmRequest {
    #[default]
    None,
    Wave,
    PointAtStand,
    PointAtVisitor,
    Freeze,
}

/// Teleoperation request, every axis normalized to [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlInput {
    /// Body-frame velocity request: x forward, y left.
    pub drive: Vec2,
    pub turn: f64,
    pub head: f64,
    pub arm_request: ArmRequest,
}

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("not allowed in {found:?} mode (needs {expected:?})")]
    WrongMode { expected: Mode, found: Mode },
    #[error("cannot go from {from:?} to {to:?}")]
    IllegalTransition { from: Mode, to: Mode },
    #[error("input component `{0}` outside [-1, 1]")]
    InputRange(&'static str),
    #[error("recording has {0} samples, needs at least 2")]
    TooShort(usize),
    #[error("{0}")]
    Script(String),
    #[error("no script loaded")]
    NoScript,
    #[error("{0}")]
    Sim(String),
}

impl From<SimError> for SessionError {
    fn from(e: SimError) -> Self {
        SessionError::Sim(e.to_string())
    }
}

impl ControlInput {
    pub fn validate(&self) -> Result<(), SessionError> {
        for (name, v) in [
            ("drive.x", self.drive.x),
            ("drive.y", self.drive.y),
            ("turn", self.turn),
            ("head", self.head),
        ] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(SessionError::InputRange(name));
            }
        }
        Ok(())
    }

    /// Scales the request by the agent's limits.
    pub fn commands(&self, world: &WorldState, limits: &crate::sim::AgentLimits) -> MotorCommands {
        let nonzero = |v: f64| (v != 0.0).then_some(v);
        let drive = self.drive.rotate(world.agent.body_yaw) * limits.v_max;
        MotorCommands {
            wheels_rotation: nonzero(self.turn * limits.omega_max),
            wheels_translation: (drive != Vec2::ZERO).then_some(drive),
            head: nonzero(self.head * limits.head_rate_max),
            arm: match self.arm_request {
                ArmRequest::None => None,
                ArmRequest::Wave => Some(ArmDirective::Wave),
                ArmRequest::Freeze => Some(ArmDirective::Freeze),
                ArmRequest::PointAtStand => Some(ArmDirective::PointAt {
                    x: world.stand.x,
                    y: world.stand.y,
                }),
                ArmRequest::PointAtVisitor => Some(ArmDirective::PointAt {
                    x: world.visitor.position.x,
                    y: world.visitor.position.y,
                }),
            },
        }
    }
}

/// What clients see after each tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickFrame {
    pub tick: u64,
    pub mode: Mode,
    pub world: WorldState,
    /// Visitor-stand distance.
    pub d: f64,
    pub active: Vec<String>,
    pub branches: Vec<String>,
}

/// Leaf and branch names of a loaded script, for drawing the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeOutline {
    pub leaves: Vec<String>,
    pub branches: Vec<String>,
}

pub struct Session {
    scenario: Scenario,
    hz: f64,
    sim: Simulator,
    mode: Mode,
    ticks: u64,
    input: ControlInput,
    recording: Vec<WorldState>,
    sealed: Option<Dataset>,
    tree: Option<BehaviorTree>,
    memory: Memory,
    replay: Option<(Dataset, usize)>,
}

impl Session {
    pub fn new(scenario: Scenario, hz: f64) -> Result<Self, SessionError> {
        let sim = Simulator::new(scenario.clone(), hz)?;
        Ok(Self {
            scenario,
            hz,
            sim,
            mode: Mode::Idle,
            ticks: 0,
            input: ControlInput::default(),
            recording: Vec::new(),
            sealed: None,
            tree: None,
            memory: Memory::new(),
            replay: None,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn world(&self) -> &WorldState {
        self.sim.world()
    }

    pub fn hz(&self) -> f64 {
        self.hz
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Ticks completed since the session started.
    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn recording_len(&self) -> usize {
        self.recording.len()
    }

    fn enter(&mut self, to: Mode) -> Result<(), SessionError> {
        if self.mode != Mode::Idle {
            return Err(SessionError::IllegalTransition {
                from: self.mode,
                to,
            });
        }
        self.mode = to;
        Ok(())
    }

    fn reset_world(&mut self) -> Result<(), SessionError> {
        self.sim = Simulator::new(self.scenario.clone(), self.hz)?;
        Ok(())
    }

    /// Starts a fresh scenario run and records every tick.
    pub fn start_recording(&mut self) -> Result<(), SessionError> {
        self.enter(Mode::DemoRecording)?;
        self.reset_world()?;
        self.input = ControlInput::default();
        self.sealed = None;
        self.recording = vec![*self.sim.world()];
        Ok(())
    }

    /// Holds `input` until it is replaced.
    pub fn apply_input(&mut self, input: ControlInput) -> Result<(), SessionError> {
        if self.mode != Mode::DemoRecording {
            return Err(SessionError::WrongMode {
                expected: Mode::DemoRecording,
                found: self.mode,
            });
        }
        input.validate()?;
        self.input = input;
        Ok(())
    }

    fn seal(&mut self) -> Result<Dataset, SessionError> {
        let samples = std::mem::take(&mut self.recording);
        self.mode = Mode::Idle;
        if samples.len() < 2 {
            return Err(SessionError::TooShort(samples.len()));
        }
        Ok(Dataset::new(samples, self.sim.dt()))
    }

    /// Ends the recording. Also collects a recording the scenario ended on
    /// its own.
    pub fn finish_recording(&mut self) -> Result<Dataset, SessionError> {
        if let Some(ds) = self.sealed.take() {
            return Ok(ds);
        }
        if self.mode != Mode::DemoRecording {
            return Err(SessionError::WrongMode {
                expected: Mode::DemoRecording,
                found: self.mode,
            });
        }
        self.seal()
    }

    /// Parses and checks a script; diagnostics come back verbatim.
    pub fn load_script(
        &mut self,
        text: &str,
        registry: &PrimitiveRegistry,
    ) -> Result<TreeOutline, SessionError> {
        if self.mode != Mode::Idle {
            return Err(SessionError::WrongMode {
                expected: Mode::Idle,
                found: self.mode,
            });
        }
        let ast = parse_script(text).map_err(|e| SessionError::Script(e.to_string()))?;
        let checked = validate(&ast, registry).map_err(|e| SessionError::Script(e.to_string()))?;
        let tree = compile(&checked).with_limits(self.scenario.limits);
        let outline = TreeOutline {
            leaves: tree.leaves.iter().map(|l| l.name.clone()).collect(),
            branches: tree.invocations.iter().map(|i| i.path.clone()).collect(),
        };
        self.tree = Some(tree);
        Ok(outline)
    }

    pub fn run_script(&mut self) -> Result<(), SessionError> {
        if self.tree.is_none() {
            return Err(SessionError::NoScript);
        }
        self.enter(Mode::ScriptRunning)?;
        self.reset_world()?;
        self.memory = Memory::new();
        Ok(())
    }

    pub fn start_replay(&mut self, dataset: Dataset) -> Result<(), SessionError> {
        if dataset.is_empty() {
            return Err(SessionError::TooShort(0));
        }
        self.enter(Mode::Replay)?;
        self.recording = dataset.samples().to_vec();
        self.replay = Some((dataset, 0));
        Ok(())
    }

    /// Back to idle from any mode. A recording in progress is discarded.
    pub fn stop(&mut self) {
        self.mode = Mode::Idle;
        self.recording.clear();
        self.replay = None;
    }

    /// Advances one tick. Idle sessions do not tick.
    pub fn step(&mut self) -> Option<TickFrame> {
        let (active, branches) = match self.mode {
            Mode::Idle => return None,
            Mode::DemoRecording => {
                let cmds = self.input.commands(self.sim.world(), &self.scenario.limits);
                let w = *self.sim.step(&cmds);
                self.recording.push(w);
                (Vec::new(), Vec::new())
            }
            Mode::ScriptRunning => {
                let tree = self.tree.as_ref().expect("running implies a script");
                let (act, cmds, mem) = tick(tree, self.sim.world(), &self.memory);
                self.memory = mem;
                self.sim.step(&cmds);
                (
                    act.names(tree).into_iter().map(str::to_owned).collect(),
                    act.active_branches
                        .iter()
                        .map(|&i| tree.invocations[i].path.clone())
                        .collect(),
                )
            }
            Mode::Replay => {
                let (ds, pos) = self.replay.as_mut().expect("replay implies data");
                let labels = ds
                    .labels()
                    .map(|l| l[*pos].iter().map(ToString::to_string).collect())
                    .unwrap_or_default();
                let w = ds.samples()[*pos];
                *pos += 1;
                let done = *pos >= ds.len();
                self.ticks += 1;
                let mut frame = TickFrame {
                    tick: self.ticks,
                    mode: Mode::Replay,
                    d: w.visitor_stand_distance(),
                    world: w,
                    active: labels,
                    branches: Vec::new(),
                };
                if done {
                    self.stop();
                    frame.mode = Mode::Idle;
                }
                return Some(frame);
            }
        };
        self.ticks += 1;
        let mut frame = TickFrame {
            tick: self.ticks,
            mode: self.mode,
            world: *self.sim.world(),
            d: self.sim.world().visitor_stand_distance(),
            active,
            branches,
        };
        if self.sim.ended().is_some() {
            if self.mode == Mode::DemoRecording {
                self.sealed = self.seal().ok();
            }
            self.mode = Mode::Idle;
        }
        // the final frame of a run already reports idle
        frame.mode = self.mode;
        Some(frame)
    }
}
