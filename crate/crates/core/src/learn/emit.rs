use std::collections::BTreeSet;

use super::tree::{FlatLeaf, HierarchicalTree};
use crate::dsl::{PrimitiveRegistry, ScriptAst, Statement};

/// Every emitted statement has this priority.
pub const EMITTED_PRIORITY: u32 = 1;

fn leaf_statement(l: &FlatLeaf) -> Statement {
    let mut s = Statement::new(l.association.primitive.clone()).priority(EMITTED_PRIORITY);
    if let Some(t) = &l.association.target {
        s = s.targeting(t.clone());
    }
    s
}

/// Renders a factorized tree as a script: sensors for every target the
/// script needs, one guarded invocation per group, then the ungrouped
/// leaves with their own guards.
pub fn emit_script(tree: &HierarchicalTree, registry: &PrimitiveRegistry, round: f64) -> ScriptAst {
    let mut ast = ScriptAst::default();
    let all_leaves = || {
        tree.groups
            .iter()
            .flat_map(|g| g.members.iter())
            .chain(&tree.ungrouped)
    };
    if all_leaves().next().is_none() {
        return ast;
    }

    let mut needed: BTreeSet<&str> = all_leaves()
        .filter_map(|l| l.association.target.as_deref())
        .collect();
    let guarded = tree
        .groups
        .iter()
        .map(|g| g.interval)
        .chain(tree.ungrouped.iter().map(|l| l.interval));
    if guarded.into_iter().any(|i| i.to_eval(round).is_some()) {
        if let Some(d) = registry.distance() {
            needed.insert(&d.from);
            needed.insert(&d.to);
        }
    }
    for (target, _) in registry.targets() {
        if needed.contains(target) {
            if let Some(sensor) = registry.sensor_for(target) {
                ast.statements
                    .push(Statement::new(sensor).priority(EMITTED_PRIORITY));
            }
        }
    }

    for g in &tree.groups {
        let mut call = Statement::new(g.name.clone()).priority(EMITTED_PRIORITY);
        if let Some(e) = g.interval.to_eval(round) {
            call = call.whenever(e);
        }
        ast.statements.push(call);
        ast.add_node(
            g.name.clone(),
            g.members.iter().map(leaf_statement).collect(),
        );
    }
    for l in &tree.ungrouped {
        let mut s = leaf_statement(l);
        if let Some(e) = l.interval.to_eval(round) {
            s = s.whenever(e);
        }
        ast.statements.push(s);
    }
    ast
}
