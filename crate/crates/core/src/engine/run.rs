use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::tick::{tick, ActivationSet, Memory};
use super::tree::BehaviorTree;
use crate::dsl::{Association, CheckedScript};
use crate::sim::{
    Dataset, DatasetError, MotorCommands, RunEnd, Scenario, SimError, Simulator, StateRecord,
    WorldState,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub tick: u64,
    pub world: WorldState,
    pub activation: ActivationSet,
    pub commands: MotorCommands,
}

/// A closed-loop run: the world as the engine saw it at each tick, what was
/// active and what was commanded.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Set when the scenario ended before the requested tick count.
    pub truncated: bool,
    pub end: Option<RunEnd>,
    pub dt: f64,
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub tick: u64,
    #[serde(flatten)]
    pub state: StateRecord,
    pub active: Vec<String>,
    pub commands: MotorCommands,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Active motor associations at every tick.
    pub fn labels(&self, tree: &BehaviorTree) -> Vec<Vec<Association>> {
        self.records
            .iter()
            .map(|r| {
                let mut v: Vec<Association> = r
                    .activation
                    .active
                    .iter()
                    .map(|&i| &tree.leaves[i])
                    .filter(|l| !l.is_sensor())
                    .map(|l| l.association())
                    .collect();
                v.sort();
                v.dedup();
                v
            })
            .collect()
    }

    pub fn to_dataset(&self, tree: &BehaviorTree) -> Dataset {
        Dataset::new(self.records.iter().map(|r| r.world).collect(), self.dt)
            .with_labels(self.labels(tree))
            .expect("one label set per record")
    }

    pub fn lines(&self, tree: &BehaviorTree) -> Vec<TraceLine> {
        self.records
            .iter()
            .map(|r| TraceLine {
                tick: r.tick,
                state: (&r.world).into(),
                active: r
                    .activation
                    .names(tree)
                    .into_iter()
                    .map(str::to_owned)
                    .collect(),
                commands: r.commands,
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, tree: &BehaviorTree, mut out: W) -> std::io::Result<()> {
        for line in self.lines(tree) {
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceLine>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| DatasetError::Record {
                line: i + 1,
                source: e,
            })?,
        );
    }
    Ok(out)
}

/// Ticks the tree against the simulator `ticks` times, or until the
/// scenario ends. The simulator's limits override the tree's.
pub fn run(tree: &BehaviorTree, sim: &mut Simulator, ticks: u64) -> Trace {
    let tree_limits = sim.scenario().limits;
    let mut mem = Memory::new();
    let mut records = Vec::with_capacity(ticks.min(1 << 16) as usize);
    let mut end = None;
    let local;
    let tree = if tree.limits == tree_limits {
        tree
    } else {
        local = tree.clone().with_limits(tree_limits);
        &local
    };
    for k in 0..ticks {
        if let Some(e) = sim.ended() {
            end = Some(e);
            break;
        }
        let world = *sim.world();
        let (activation, commands, next) = tick(tree, &world, &mem);
        mem = next;
        sim.step(&commands);
        records.push(TraceRecord {
            tick: k,
            world,
            activation,
            commands,
        });
    }
    Trace {
        truncated: end.is_some(),
        end: end.or_else(|| sim.ended()),
        records,
        dt: sim.dt(),
    }
}

/// Number of ticks that covers the whole visitor trajectory.
pub fn scenario_ticks(scenario: &Scenario, hz: f64) -> u64 {
    (scenario.duration() * hz).ceil() as u64 + 1
}

/// Records a demonstration by running `script` in closed loop. Ground-truth
/// labels are the active motor associations of each sample.
pub fn synth_demo(
    script: &CheckedScript,
    scenario: &Scenario,
    seed: u64,
    hz: f64,
) -> Result<Dataset, SimError> {
    let tree = super::compile(script);
    let mut sim = Simulator::with_seed(scenario.clone(), seed, hz)?;
    let trace = run(&tree, &mut sim, scenario_ticks(scenario, hz));
    Ok(trace.to_dataset(&tree))
}
