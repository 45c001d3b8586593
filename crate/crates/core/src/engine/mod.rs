//! Runtime for checked scripts: compile to a behavior tree, then tick it at
//! a fixed rate against a world.

mod run;
mod tick;
mod tree;

pub use run::{read_trace, run, scenario_ticks, synth_demo, Trace, TraceLine, TraceRecord};
pub use tick::{
    arbitrate, tick, ActivationSet, Arbitration, Candidate, Memory, TargetMemory, TieWarning,
};
pub use tree::{compile, BehaviorTree, Invocation, Leaf, LeafId, LeafKind};

/// Default tick rate (Hz).
pub const DEFAULT_HZ: f64 = 50.0;
