use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::{wrap_angle, Bounds, Vec2};
use super::world::{AgentState, ArmMode, WorldState};
use crate::dsl::{MotorModel, Resource};

/// Kinematic limits and controller gains of the agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentLimits {
    /// Maximum planar speed (m/s).
    pub v_max: f64,
    /// Maximum body yaw rate (rad/s).
    pub omega_max: f64,
    /// Stand-off distance kept by `go_toward` (m).
    pub d_safe: f64,
    pub k_omega: f64,
    pub k_v: f64,
    /// Head yaw is limited to `[-head_limit, head_limit]` relative to the body.
    pub head_limit: f64,
    pub head_rate_max: f64,
    pub k_head: f64,
    /// Wave phase rate (rad/s).
    pub wave_rate: f64,
    /// Peak head rate and period of the `head_search` sweep.
    pub search_rate: f64,
    pub search_period: f64,
}

impl Default for AgentLimits {
    fn default() -> Self {
        Self {
            v_max: 0.5,
            omega_max: 1.0,
            d_safe: 0.6,
            k_omega: 1.5,
            k_v: 0.8,
            head_limit: 1.0,
            head_rate_max: 1.5,
            k_head: 3.0,
            wave_rate: TAU,
            search_rate: 0.8,
            search_period: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArmDirective {
    PointAt { x: f64, y: f64 },
    Wave,
    Freeze,
}

/// One command per resource; `None` leaves the resource at rest.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotorCommands {
    /// Body yaw rate (rad/s).
    pub wheels_rotation: Option<f64>,
    /// World-frame planar velocity (m/s).
    pub wheels_translation: Option<Vec2>,
    /// Head yaw rate (rad/s).
    pub head: Option<f64>,
    pub arm: Option<ArmDirective>,
}

impl MotorCommands {
    pub fn set(&mut self, cmd: ResourceCommand) {
        match cmd {
            ResourceCommand::Rotation(w) => self.wheels_rotation = Some(w),
            ResourceCommand::Translation(v) => self.wheels_translation = Some(v),
            ResourceCommand::Head(h) => self.head = Some(h),
            ResourceCommand::Arm(a) => self.arm = Some(a),
        }
    }

    pub fn is_set(&self, r: Resource) -> bool {
        match r {
            Resource::WheelsRotation => self.wheels_rotation.is_some(),
            Resource::WheelsTranslation => self.wheels_translation.is_some(),
            Resource::Head => self.head.is_some(),
            Resource::Arm => self.arm.is_some(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResourceCommand {
    Rotation(f64),
    Translation(Vec2),
    Head(f64),
    Arm(ArmDirective),
}

impl ResourceCommand {
    pub fn resource(&self) -> Resource {
        match self {
            ResourceCommand::Rotation(_) => Resource::WheelsRotation,
            ResourceCommand::Translation(_) => Resource::WheelsTranslation,
            ResourceCommand::Head(_) => Resource::Head,
            ResourceCommand::Arm(_) => Resource::Arm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MotorError {
    #[error("unknown motor primitive `{0}`")]
    UnknownPrimitive(String),
    #[error("`{0}` needs a target")]
    MissingTarget(String),
}

/// Command issued by the named built-in primitive.
pub fn motor_command(
    primitive: &str,
    target: Option<Vec2>,
    world: &WorldState,
    limits: &AgentLimits,
) -> Result<ResourceCommand, MotorError> {
    let model = MotorModel::from_name(primitive)
        .ok_or_else(|| MotorError::UnknownPrimitive(primitive.into()))?;
    command_for(model, target, world, limits)
        .ok_or_else(|| MotorError::MissingTarget(primitive.into()))
}

/// Command issued by `model` acting on `target` from `world`. `None` only
/// when a targeting model has no target.
pub fn command_for(
    model: MotorModel,
    target: Option<Vec2>,
    world: &WorldState,
    limits: &AgentLimits,
) -> Option<ResourceCommand> {
    let agent = &world.agent;
    let target = if model.requires_target() {
        Some(target?)
    } else {
        None
    };
    let bearing = || (target.unwrap() - agent.position).angle();
    Some(match model {
        MotorModel::TurnToward => {
            let err = wrap_angle(bearing() - agent.body_yaw);
            ResourceCommand::Rotation(
                (limits.k_omega * err).clamp(-limits.omega_max, limits.omega_max),
            )
        }
        MotorModel::TurnStop => ResourceCommand::Rotation(0.0),
        MotorModel::GoToward => {
            let t = target.unwrap();
            let range = agent.position.distance(t);
            let speed = (limits.k_v * (range - limits.d_safe)).clamp(0.0, limits.v_max);
            ResourceCommand::Translation(agent.position.direction_to(t) * speed)
        }
        MotorModel::GoStop => ResourceCommand::Translation(Vec2::ZERO),
        MotorModel::LookAt => {
            let err = wrap_angle(bearing() - agent.gaze());
            ResourceCommand::Head(
                (limits.k_head * err).clamp(-limits.head_rate_max, limits.head_rate_max),
            )
        }
        MotorModel::HeadSearch => ResourceCommand::Head(
            limits.search_rate * (TAU * world.time / limits.search_period).cos(),
        ),
        MotorModel::PointToward => {
            let t = target.unwrap();
            ResourceCommand::Arm(ArmDirective::PointAt { x: t.x, y: t.y })
        }
        MotorModel::Waving => ResourceCommand::Arm(ArmDirective::Wave),
        MotorModel::ArmFreeze => ResourceCommand::Arm(ArmDirective::Freeze),
    })
}

/// Advances the agent by one explicit Euler step. Unset channels come to
/// rest; all limits are re-applied.
pub fn integrate_agent(
    agent: &AgentState,
    cmds: &MotorCommands,
    dt: f64,
    limits: &AgentLimits,
    bounds: &Bounds,
) -> AgentState {
    let yaw_rate = cmds
        .wheels_rotation
        .unwrap_or(0.0)
        .clamp(-limits.omega_max, limits.omega_max);
    let velocity = cmds
        .wheels_translation
        .unwrap_or(Vec2::ZERO)
        .clamp_norm(limits.v_max);
    let head_rate = cmds
        .head
        .unwrap_or(0.0)
        .clamp(-limits.head_rate_max, limits.head_rate_max);

    let position = bounds.clamp(agent.position + velocity * dt);
    let head_yaw = (agent.head_yaw + head_rate * dt).clamp(-limits.head_limit, limits.head_limit);
    let arm_mode = match cmds.arm {
        None | Some(ArmDirective::Freeze) => ArmMode::Idle,
        Some(ArmDirective::Wave) => {
            let prev = match agent.arm_mode {
                ArmMode::Waving { phase } => phase,
                _ => 0.0,
            };
            ArmMode::Waving {
                phase: (prev + limits.wave_rate * dt).rem_euclid(TAU),
            }
        }
        Some(ArmDirective::PointAt { x, y }) => ArmMode::Pointing {
            direction: (Vec2::new(x, y) - agent.position).angle(),
        },
    };

    AgentState {
        position,
        body_yaw: wrap_angle(agent.body_yaw + yaw_rate * dt),
        body_yaw_rate: yaw_rate,
        linear_velocity: (position - agent.position) * (1.0 / dt),
        head_yaw,
        head_yaw_rate: (head_yaw - agent.head_yaw) / dt,
        arm_mode,
    }
}

/// Wave phase advance between two arm states, as a rate. Non-waving states
/// count as phase zero.
pub fn wave_phase_rate(prev: &ArmMode, cur: &ArmMode, dt: f64) -> f64 {
    match *cur {
        ArmMode::Waving { phase } => {
            let before = match *prev {
                ArmMode::Waving { phase } => phase,
                _ => 0.0,
            };
            wrap_angle(phase - before) / dt
        }
        _ => 0.0,
    }
}

/// The arm state as a point in the plane: a unit vector along the pointing
/// direction, or the origin when not pointing.
pub fn pointing_vector(arm: &ArmMode) -> Vec2 {
    match *arm {
        ArmMode::Pointing { direction } => Vec2::from_angle(direction),
        _ => Vec2::ZERO,
    }
}
