use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use crate::dsl::Entity;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ArmMode {
    #[default]
    Idle,
    /// Pointing along a world-frame heading (rad).
    Pointing { direction: f64 },
    /// Waving, with the current wave phase in [0, 2pi).
    Waving { phase: f64 },
}

impl ArmMode {
    pub fn name(&self) -> &'static str {
        match self {
            ArmMode::Idle => "idle",
            ArmMode::Pointing { .. } => "pointing",
            ArmMode::Waving { .. } => "waving",
        }
    }

    /// Pointing direction or wave phase; zero when idle.
    pub fn angle(&self) -> f64 {
        match *self {
            ArmMode::Idle => 0.0,
            ArmMode::Pointing { direction } => direction,
            ArmMode::Waving { phase } => phase,
        }
    }

    pub fn from_parts(name: &str, angle: f64) -> Option<Self> {
        Some(match name {
            "idle" => ArmMode::Idle,
            "pointing" => ArmMode::Pointing { direction: angle },
            "waving" => ArmMode::Waving { phase: angle },
            _ => return None,
        })
    }
}

/// The robot (or the human demonstrator standing in for it).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    /// World-frame heading of the body (rad).
    pub body_yaw: f64,
    pub body_yaw_rate: f64,
    /// World-frame planar velocity (m/s). The base is holonomic.
    pub linear_velocity: Vec2,
    /// Head yaw relative to the body (rad).
    pub head_yaw: f64,
    pub head_yaw_rate: f64,
    pub arm_mode: ArmMode,
}

impl AgentState {
    pub fn at(position: Vec2, body_yaw: f64) -> Self {
        Self {
            position,
            body_yaw,
            ..Self::default()
        }
    }

    /// World-frame gaze heading.
    pub fn gaze(&self) -> f64 {
        self.body_yaw + self.head_yaw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VisitorState {
    pub position: Vec2,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub time: f64,
    pub agent: AgentState,
    pub visitor: VisitorState,
    pub stand: Vec2,
    pub front_of_stand: Vec2,
}

impl WorldState {
    pub fn entity(&self, e: Entity) -> Vec2 {
        match e {
            Entity::Visitor => self.visitor.position,
            Entity::Stand => self.stand,
            Entity::FrontOfStand => self.front_of_stand,
        }
    }

    /// Visitor to stand distance.
    pub fn visitor_stand_distance(&self) -> f64 {
        self.visitor.position.distance(self.stand)
    }
}
