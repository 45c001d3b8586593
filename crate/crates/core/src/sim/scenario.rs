use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::{Bounds, Vec2};
use super::motor::AgentLimits;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    /// Time (s) at which the visitor reaches `at`.
    pub t: f64,
    pub at: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitorScript {
    pub waypoints: Vec<Waypoint>,
    /// Standard deviation of the per-tick heading jitter (rad).
    #[serde(default)]
    pub noise_scale: f64,
    #[serde(default = "default_visitor_speed")]
    pub max_speed: f64,
}

fn default_visitor_speed() -> f64 {
    1.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentStart {
    pub position: Vec2,
    #[serde(default)]
    pub yaw: f64,
}

/// A corridor layout, a visitor trajectory and the agent's starting pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub corridor: Corridor,
    pub stand: Vec2,
    pub front_of_stand: Vec2,
    pub agent: AgentStart,
    pub visitor: VisitorScript,
    #[serde(default)]
    pub seed: u64,
    /// The run ends once the visitor is this close to the stand.
    #[serde(default)]
    pub stop_radius: Option<f64>,
    #[serde(default)]
    pub limits: AgentLimits,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario has no visitor waypoints")]
    NoWaypoints,
    #[error("waypoint times must be strictly increasing (waypoint {0})")]
    NonIncreasingTimes(usize),
    #[error("{what} at ({x}, {y}) lies outside the corridor")]
    OutOfBounds { what: String, x: f64, y: f64 },
    #[error("corridor dimensions must be positive")]
    BadCorridor,
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing scenario: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Scenario {
    pub fn bounds(&self) -> Bounds {
        Bounds::corridor(self.corridor.length, self.corridor.width)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.corridor.length > 0.0 && self.corridor.width > 0.0) {
            return Err(ScenarioError::BadCorridor);
        }
        let wps = &self.visitor.waypoints;
        if wps.is_empty() {
            return Err(ScenarioError::NoWaypoints);
        }
        if let Some(i) = (1..wps.len()).find(|&i| wps[i].t <= wps[i - 1].t) {
            return Err(ScenarioError::NonIncreasingTimes(i));
        }
        let b = self.bounds();
        let points = [
            ("stand".to_string(), self.stand),
            ("front_of_stand".to_string(), self.front_of_stand),
            ("agent start".to_string(), self.agent.position),
        ]
        .into_iter()
        .chain(
            wps.iter()
                .enumerate()
                .map(|(i, w)| (format!("waypoint {i}"), w.at)),
        );
        for (what, p) in points {
            if !b.contains(p) {
                return Err(ScenarioError::OutOfBounds {
                    what,
                    x: p.x,
                    y: p.y,
                });
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Time of the last waypoint: the visitor trajectory ends there.
    pub fn duration(&self) -> f64 {
        self.visitor.waypoints.last().map_or(0.0, |w| w.t)
    }

    fn with_path(name: &str, waypoints: &[(f64, f64, f64)]) -> Self {
        Scenario {
            name: name.to_owned(),
            corridor: Corridor {
                length: 5.0,
                width: 3.0,
            },
            stand: Vec2::new(0.2, 2.8),
            front_of_stand: Vec2::new(1.8, 1.0),
            agent: AgentStart {
                position: Vec2::new(1.3, 2.7),
                yaw: -FRAC_PI_2,
            },
            visitor: VisitorScript {
                waypoints: waypoints
                    .iter()
                    .map(|&(t, x, y)| Waypoint {
                        t,
                        at: Vec2::new(x, y),
                    })
                    .collect(),
                noise_scale: 0.05,
                max_speed: default_visitor_speed(),
            },
            seed: 7,
            stop_radius: None,
            limits: AgentLimits::default(),
        }
    }

    /// The 5 m x 3 m corridor with the stand at its far end and side. The
    /// visitor pauses at the entrance, walks straight down the corridor,
    /// turns toward the stand about 2 m from it, and the run ends when the
    /// visitor reaches it.
    pub fn corridor() -> Self {
        Scenario {
            stop_radius: Some(0.6),
            ..Self::with_path(
                "corridor",
                &[
                    (0.0, 4.95, 0.05),
                    (2.0, 4.95, 0.05),
                    (6.0, 1.2, 0.6),
                    (8.5, 0.4, 2.3),
                ],
            )
        }
    }

    /// The visitor walks the length of the corridor and leaves again
    /// without visiting the stand.
    pub fn pass_by() -> Self {
        Self::with_path(
            "pass_by",
            &[
                (0.0, 4.95, 0.05),
                (2.0, 4.95, 0.05),
                (6.5, 0.8, 0.4),
                (8.0, 0.8, 0.4),
                (12.5, 4.95, 0.05),
                (14.0, 4.95, 0.05),
            ],
        )
    }

    /// The visitor passes the stand, comes back to it, then leaves.
    pub fn leave_return() -> Self {
        Self::with_path(
            "leave_return",
            &[
                (0.0, 4.95, 0.05),
                (2.0, 4.95, 0.05),
                (6.5, 0.8, 0.5),
                (9.0, 3.5, 0.6),
                (12.0, 0.9, 2.0),
                (13.5, 0.9, 2.0),
                (18.0, 4.95, 0.05),
                (19.5, 4.95, 0.05),
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for s in [
            Scenario::corridor(),
            Scenario::pass_by(),
            Scenario::leave_return(),
        ] {
            s.validate().unwrap();
        }
    }

    #[test]
    fn toml_round_trip() {
        let s = Scenario::corridor();
        assert_eq!(Scenario::from_toml_str(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn non_increasing_waypoints_are_rejected() {
        let mut s = Scenario::corridor();
        s.visitor.waypoints[2].t = 1.0;
        assert!(matches!(
            s.validate(),
            Err(ScenarioError::NonIncreasingTimes(2))
        ));
    }

    #[test]
    fn stand_is_at_the_far_end_and_side() {
        let s = Scenario::corridor();
        assert!(s.stand.x < 0.1 * s.corridor.length);
        assert!(s.stand.y > 0.9 * s.corridor.width);
        // the visitor enters at the opposite end
        assert!(s.visitor.waypoints[0].at.x > 0.9 * s.corridor.length);
    }
}
