//! Planar kinematic world: a corridor with a stand, a scripted visitor and
//! a holonomic agent driven by the motor primitives.

mod dataset;
mod geometry;
mod motor;
mod scenario;
mod simulator;
mod world;

pub use dataset::{AgentRecord, ArmModeName, Dataset, DatasetError, StateRecord};
pub use geometry::{wrap_angle, Bounds, Vec2};
pub use motor::{
    command_for, integrate_agent, motor_command, pointing_vector, wave_phase_rate, AgentLimits,
    ArmDirective, MotorCommands, MotorError, ResourceCommand,
};
pub use scenario::{AgentStart, Corridor, Scenario, ScenarioError, VisitorScript, Waypoint};
pub use simulator::{initial_world, step_world, RunEnd, SimError, Simulator};
pub use world::{AgentState, ArmMode, VisitorState, WorldState};
