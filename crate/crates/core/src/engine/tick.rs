use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tree::{BehaviorTree, Leaf, LeafId, LeafKind};
use crate::dsl::{CheckedEval, Resource};
use crate::sim::{command_for, MotorCommands, Vec2, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetMemory {
    pub pose: Vec2,
    pub last_update: u64,
    pub visible: bool,
}

/// What the agent knows between ticks: the last pose reported by each
/// sensor. Poses only change when a sensor primitive runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Memory {
    pub target_store: BTreeMap<String, TargetMemory>,
    pub tick_count: u64,
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pose of a target that has been seen at least once.
    pub fn pose(&self, target: &str) -> Option<Vec2> {
        self.target_store
            .get(target)
            .filter(|m| m.visible)
            .map(|m| m.pose)
    }

    pub fn seen(&self, target: &str) -> bool {
        self.pose(target).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieWarning {
    pub resource: Resource,
    pub winner: LeafId,
    pub tied: Vec<LeafId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<'a> {
    pub leaf: LeafId,
    pub resource: Resource,
    pub priority: &'a [u32],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Arbitration {
    pub winners: BTreeMap<Resource, LeafId>,
    pub warnings: Vec<TieWarning>,
}

/// Highest priority wins each resource; among equals the earliest declared
/// leaf (lowest id) wins and the tie is reported.
pub fn arbitrate(eligible: &[Candidate<'_>]) -> Arbitration {
    let mut by_resource: BTreeMap<Resource, Vec<&Candidate>> = BTreeMap::new();
    for c in eligible {
        by_resource.entry(c.resource).or_default().push(c);
    }
    let mut out = Arbitration::default();
    for (resource, cands) in by_resource {
        let top = cands.iter().map(|c| c.priority).max().expect("non-empty");
        let mut best: Vec<LeafId> = cands
            .iter()
            .filter(|c| c.priority == top)
            .map(|c| c.leaf)
            .collect();
        best.sort_unstable();
        let winner = best[0];
        out.winners.insert(resource, winner);
        if best.len() > 1 {
            out.warnings.push(TieWarning {
                resource,
                winner,
                tied: best,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActivationSet {
    /// Sensors that ran and motor leaves that won their resource.
    pub active: BTreeSet<LeafId>,
    pub per_resource_winner: BTreeMap<Resource, LeafId>,
    /// Invocations whose whole guard chain held.
    pub active_branches: BTreeSet<usize>,
    pub warnings: Vec<TieWarning>,
}

impl ActivationSet {
    pub fn is_active(&self, leaf: LeafId) -> bool {
        self.active.contains(&leaf)
    }

    pub fn names<'t>(&self, tree: &'t BehaviorTree) -> Vec<&'t str> {
        self.active
            .iter()
            .map(|&i| tree.leaves[i].name.as_str())
            .collect()
    }
}

fn holds(
    eval: Option<&CheckedEval>,
    tree: &BehaviorTree,
    world: &WorldState,
    mem: &Memory,
) -> bool {
    match eval {
        None => true,
        Some(CheckedEval::Seen { target }) => mem.seen(target),
        Some(CheckedEval::Close { target, range }) => mem
            .pose(target)
            .is_some_and(|p| p.distance(world.agent.position) <= *range),
        Some(CheckedEval::Distance(expr)) => {
            let Some(feat) = tree.registry.distance() else {
                return false;
            };
            match (mem.pose(&feat.from), mem.pose(&feat.to)) {
                (Some(a), Some(b)) => expr.test_distance(a.distance(b)).unwrap_or(false),
                _ => false,
            }
        }
    }
}

fn branch_states(tree: &BehaviorTree, world: &WorldState, mem: &Memory) -> Vec<bool> {
    // parents precede children in the invocation list
    let mut open = Vec::with_capacity(tree.invocations.len());
    for inv in &tree.invocations {
        let parent_open = inv.parent.is_none_or(|p| open[p]);
        open.push(parent_open && holds(inv.evaluation.as_ref(), tree, world, mem));
    }
    open
}

fn eligible(
    leaf: &Leaf,
    open: &[bool],
    tree: &BehaviorTree,
    world: &WorldState,
    mem: &Memory,
) -> bool {
    if !leaf.ancestors.iter().all(|&a| open[a]) {
        return false;
    }
    if let LeafKind::Motor {
        target: Some(t), ..
    } = &leaf.kind
    {
        if !mem.seen(t) {
            return false;
        }
    }
    holds(leaf.evaluation.as_ref(), tree, world, mem)
}

/// One evaluation of the tree: sensors first, then guards and arbitration
/// against the refreshed memory, then commands for the winners.
pub fn tick(
    tree: &BehaviorTree,
    world: &WorldState,
    mem: &Memory,
) -> (ActivationSet, MotorCommands, Memory) {
    let mut next = mem.clone();
    let mut act = ActivationSet::default();

    let open = branch_states(tree, world, mem);
    for leaf in tree.leaves.iter().filter(|l| l.is_sensor()) {
        let LeafKind::Sensor { target, entity } = &leaf.kind else {
            unreachable!()
        };
        if eligible(leaf, &open, tree, world, mem) {
            next.target_store.insert(
                target.clone(),
                TargetMemory {
                    pose: world.entity(*entity),
                    last_update: mem.tick_count,
                    visible: true,
                },
            );
            act.active.insert(leaf.id);
        }
    }

    let open = branch_states(tree, world, &next);
    act.active_branches = open
        .iter()
        .enumerate()
        .filter_map(|(i, &o)| o.then_some(i))
        .collect();
    let candidates: Vec<Candidate> = tree
        .motor_leaves()
        .filter(|l| eligible(l, &open, tree, world, &next))
        .map(|l| Candidate {
            leaf: l.id,
            resource: l.resource().expect("motor leaf"),
            priority: &l.priority,
        })
        .collect();
    let arb = arbitrate(&candidates);

    let mut cmds = MotorCommands::default();
    for &id in arb.winners.values() {
        let LeafKind::Motor { model, target, .. } = &tree.leaves[id].kind else {
            unreachable!()
        };
        let pose = target.as_deref().and_then(|t| next.pose(t));
        if let Some(c) = command_for(*model, pose, world, &tree.limits) {
            cmds.set(c);
        }
        act.active.insert(id);
    }
    act.per_resource_winner = arb.winners;
    act.warnings = arb.warnings;
    next.tick_count += 1;
    (act, cmds, next)
}
