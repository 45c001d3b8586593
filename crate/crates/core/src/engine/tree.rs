use std::collections::BTreeMap;

use crate::dsl::{
    Association, CheckedEval, CheckedScript, CheckedStatement, Entity, MotorModel,
    PrimitiveRegistry, Resolution, Resource, Statement,
};
use crate::sim::AgentLimits;

pub type LeafId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum LeafKind {
    Sensor {
        target: String,
        entity: Entity,
    },
    Motor {
        model: MotorModel,
        resource: Resource,
        target: Option<String>,
    },
}

/// One primitive statement, reached through a chain of node invocations.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub id: LeafId,
    /// Unique, human-readable: the invocation path and the association,
    /// e.g. `A/turn_toward:visitor`.
    pub name: String,
    pub statement: Statement,
    pub kind: LeafKind,
    pub evaluation: Option<CheckedEval>,
    /// Node invocations from the root down, as indices into
    /// [`BehaviorTree::invocations`].
    pub ancestors: Vec<usize>,
    /// Priorities along the ancestor chain followed by the leaf's own,
    /// compared lexicographically.
    pub priority: Vec<u32>,
}

impl Leaf {
    pub fn resource(&self) -> Option<Resource> {
        match self.kind {
            LeafKind::Motor { resource, .. } => Some(resource),
            LeafKind::Sensor { .. } => None,
        }
    }

    pub fn association(&self) -> Association {
        Association {
            primitive: self.statement.head.clone(),
            target: self.statement.target.clone(),
        }
    }

    pub fn is_sensor(&self) -> bool {
        matches!(self.kind, LeafKind::Sensor { .. })
    }
}

/// One expansion of a `node` body.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub node: String,
    pub path: String,
    pub evaluation: Option<CheckedEval>,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorTree {
    pub leaves: Vec<Leaf>,
    pub invocations: Vec<Invocation>,
    pub registry: PrimitiveRegistry,
    pub limits: AgentLimits,
}

impl BehaviorTree {
    pub fn with_limits(mut self, limits: AgentLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn leaf_by_name(&self, name: &str) -> Option<&Leaf> {
        self.leaves.iter().find(|l| l.name == name)
    }

    pub fn motor_leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.leaves.iter().filter(|l| !l.is_sensor())
    }
}

struct Builder<'a> {
    script: &'a CheckedScript,
    leaves: Vec<Leaf>,
    invocations: Vec<Invocation>,
    names: BTreeMap<String, usize>,
}

impl Builder<'_> {
    fn unique(&mut self, base: String) -> String {
        let n = self.names.entry(base.clone()).or_insert(0);
        *n += 1;
        if *n == 1 {
            base
        } else {
            format!("{base}#{n}")
        }
    }

    fn expand(
        &mut self,
        stmts: &[CheckedStatement],
        parent: Option<usize>,
        prefix: &str,
        prio: &[u32],
    ) {
        for cs in stmts {
            let s = &cs.statement;
            let mut priority = prio.to_vec();
            priority.push(s.priority);
            let chain = match parent {
                Some(p) => {
                    let mut c = self.ancestors_of(p);
                    c.push(p);
                    c
                }
                None => Vec::new(),
            };
            let kind = match &cs.resolution {
                Resolution::Node { name } => {
                    let path = self.unique(format!("{prefix}{name}"));
                    let idx = self.invocations.len();
                    self.invocations.push(Invocation {
                        node: name.clone(),
                        path: path.clone(),
                        evaluation: cs.evaluation.clone(),
                        parent,
                    });
                    let body = &self.script.nodes[name];
                    self.expand(body, Some(idx), &format!("{path}/"), &priority);
                    continue;
                }
                Resolution::Sensor { target } => LeafKind::Sensor {
                    target: target.clone(),
                    entity: self
                        .script
                        .registry
                        .target_entity(target)
                        .expect("validated sensor target"),
                },
                Resolution::Motor { model, resource } => LeafKind::Motor {
                    model: *model,
                    resource: *resource,
                    target: s.target.clone(),
                },
            };
            let assoc = Association {
                primitive: s.head.clone(),
                target: s.target.clone(),
            };
            let name = self.unique(format!("{prefix}{assoc}"));
            self.leaves.push(Leaf {
                id: self.leaves.len(),
                name,
                statement: s.clone(),
                kind,
                evaluation: cs.evaluation.clone(),
                ancestors: chain,
                priority,
            });
        }
    }

    fn ancestors_of(&self, inv: usize) -> Vec<usize> {
        let mut chain = Vec::new();
        let mut cur = self.invocations[inv].parent;
        while let Some(p) = cur {
            chain.push(p);
            cur = self.invocations[p].parent;
        }
        chain.reverse();
        chain
    }
}

/// Expands node invocations into one leaf per primitive statement. Leaves
/// are numbered in declaration order, depth first.
pub fn compile(script: &CheckedScript) -> BehaviorTree {
    let mut b = Builder {
        script,
        leaves: Vec::new(),
        invocations: Vec::new(),
        names: BTreeMap::new(),
    };
    b.expand(&script.statements, None, "", &[]);
    BehaviorTree {
        leaves: b.leaves,
        invocations: b.invocations,
        registry: script.registry.clone(),
        limits: AgentLimits::default(),
    }
}
