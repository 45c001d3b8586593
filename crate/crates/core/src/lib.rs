//! Reactive behavior scripts and the machinery around them.
//!
//! * [`dsl`] parses, validates and pretty-prints `.pf` scripts.
//! * [`engine`] compiles checked scripts into behavior trees and ticks them.
//! * [`sim`] is the 2D corridor world the scripts act in.
//! * [`learn`] turns a recorded demonstration back into a script.
//! * [`session`] hosts a live world for teleoperated recording and script runs.

pub mod dsl;
pub mod engine;
pub mod learn;
pub mod session;
pub mod sim;

pub use dsl::{
    format_script, parse_script, validate, Association, CheckedScript, EvalExpr, PrimitiveRegistry,
    Resource, ScriptAst, Statement,
};
pub use engine::{compile, tick, ActivationSet, BehaviorTree, Memory, Trace};
pub use learn::{learn, LearnOutcome, LearnerConfig};
pub use sim::{Dataset, MotorCommands, Scenario, Simulator, WorldState};
