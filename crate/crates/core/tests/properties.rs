//! Properties of the script runtime and the language front end over
//! generated scripts and worlds.

use std::collections::{BTreeMap, BTreeSet};

use playlearn_core::dsl::{EvalExpr, Span};
use playlearn_core::engine::{compile, run, tick, Trace};
use playlearn_core::sim::{initial_world, Vec2};
use playlearn_core::{
    format_script, parse_script, validate, Association, BehaviorTree, Memory, PrimitiveRegistry,
    Resource, Scenario, ScriptAst, Simulator, Statement, WorldState,
};
use proptest::prelude::*;
use proptest::sample::subsequence;

fn pepper() -> PrimitiveRegistry {
    PrimitiveRegistry::pepper()
}

fn threshold() -> impl Strategy<Value = f64> {
    (50u32..600).prop_map(|c| c as f64 / 100.0)
}

fn guard(targeted: bool) -> impl Strategy<Value = Option<EvalExpr>> {
    let named = if targeted {
        prop_oneof![Just("seen"), Just("close")]
            .prop_map(|n| Some(EvalExpr::Named(n.into())))
            .boxed()
    } else {
        Just(None).boxed()
    };
    prop_oneof![
        2 => Just(None),
        1 => named,
        1 => threshold().prop_map(|c| Some(EvalExpr::above(c))),
        1 => threshold().prop_map(|c| Some(EvalExpr::below(c))),
        1 => (threshold(), threshold()).prop_map(|(a, b)| (a != b).then(|| EvalExpr::Interval {
            lower: a.min(b),
            upper: a.max(b),
        })),
    ]
}

fn motor(a: Association, priority: u32) -> BoxedStrategy<Statement> {
    guard(a.target.is_some())
        .prop_map(move |g| {
            let mut s = Statement::new(a.primitive.clone()).priority(priority);
            if let Some(t) = &a.target {
                s = s.targeting(t.clone());
            }
            if let Some(g) = g {
                s = s.whenever(g);
            }
            s
        })
        .boxed()
}

/// Scripts with distinct associations and distinct priorities: some
/// sensors, up to five top-level motor statements and an optional node.
fn script(all_sensors: bool) -> impl Strategy<Value = ScriptAst> {
    let assocs = pepper().associations();
    let n = assocs.len();
    (
        subsequence(assocs, 0..=8),
        prop::collection::vec(any::<bool>(), 3),
        0usize..=3,
        Just(()).prop_perturb(move |_, mut rng| {
            let mut p: Vec<u32> = (1..=n as u32 + 1).collect();
            for i in (1..p.len()).rev() {
                p.swap(i, rng.random_range(0..=i));
            }
            p
        }),
        guard(false),
    )
        .prop_flat_map(move |(mut picked, sensors, inner, prio, call_guard)| {
            // subsequence keeps registry order; rotate for variety
            let k = prio[0] as usize % picked.len().max(1);
            picked.rotate_left(k);
            let inner = inner.min(picked.len());
            let body = picked.split_off(picked.len() - inner);
            let top: Vec<_> = picked
                .into_iter()
                .enumerate()
                .map(|(i, a)| motor(a, prio[i]))
                .collect();
            let off = top.len();
            let inner_s: Vec<_> = body
                .into_iter()
                .enumerate()
                .map(|(i, a)| motor(a, prio[off + i]))
                .collect();
            let call_prio = prio[prio.len() - 1];
            (
                top,
                inner_s,
                Just(sensors),
                Just(call_guard),
                Just(call_prio),
            )
        })
        .prop_map(move |(top, inner, sensors, call_guard, call_prio)| {
            let reg = pepper();
            let mut ast = ScriptAst::default();
            for ((target, _), on) in reg.targets().zip(sensors) {
                if on || all_sensors {
                    ast.statements
                        .push(Statement::new(reg.sensor_for(target).unwrap()));
                }
            }
            ast.statements.extend(top);
            if !inner.is_empty() {
                let mut call = Statement::new("N").priority(call_prio);
                if let Some(g) = call_guard {
                    call = call.whenever(g);
                }
                ast.statements.push(call);
                ast.add_node("N", inner);
            }
            ast
        })
}

fn world() -> impl Strategy<Value = WorldState> {
    (
        0.0..5.0f64,
        0.0..3.0f64,
        0.0..5.0f64,
        0.0..3.0f64,
        -3.1..3.1f64,
    )
        .prop_map(|(ax, ay, vx, vy, yaw)| {
            let mut w = initial_world(&Scenario::corridor());
            w.agent.position = Vec2::new(ax, ay);
            w.agent.body_yaw = yaw;
            w.visitor.position = Vec2::new(vx, vy);
            w
        })
}

fn scenario() -> impl Strategy<Value = Scenario> {
    prop_oneof![
        Just(Scenario::corridor()),
        Just(Scenario::pass_by()),
        Just(Scenario::leave_return())
    ]
}

fn tree(ast: &ScriptAst) -> BehaviorTree {
    compile(&validate(ast, &pepper()).expect("generated scripts are valid"))
}

fn run_on(tree: &BehaviorTree, sc: &Scenario, seed: u64) -> Trace {
    let mut sim = Simulator::with_seed(sc.clone(), seed, 10.0).unwrap();
    run(tree, &mut sim, 120)
}

fn motors_by_resource(
    tree: &BehaviorTree,
    active: &BTreeSet<usize>,
) -> BTreeMap<Resource, Vec<String>> {
    let mut out: BTreeMap<Resource, Vec<String>> = BTreeMap::new();
    for &i in active {
        let l = &tree.leaves[i];
        if let Some(r) = l.resource() {
            out.entry(r).or_default().push(l.association().to_string());
        }
    }
    out
}

fn strip_spans(ast: &ScriptAst) -> ScriptAst {
    let mut c = ast.clone();
    c.statements
        .iter_mut()
        .for_each(|s| s.span = Span::default());
    for n in c.node_defs.values_mut() {
        n.span = Span::default();
        n.body.iter_mut().for_each(|s| s.span = Span::default());
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn one_motor_leaf_per_resource(ast in script(false), sc in scenario(), seed in any::<u64>()) {
        let t = tree(&ast);
        for rec in run_on(&t, &sc, seed).records {
            for (r, held) in motors_by_resource(&t, &rec.activation.active) {
                prop_assert!(held.len() == 1, "tick {}: {r:?} held by {held:?}", rec.tick);
            }
        }
    }

    #[test]
    fn statement_order_is_irrelevant_with_unique_priorities(
        ast in script(false),
        sc in scenario(),
        seed in any::<u64>(),
        order in any::<prop::sample::Index>(),
    ) {
        let mut shuffled = ast.clone();
        let n = shuffled.statements.len().max(1);
        shuffled.statements.rotate_left(order.index(n));
        shuffled.statements.reverse();
        let (a, b) = (tree(&ast), tree(&shuffled));
        let (ta, tb) = (run_on(&a, &sc, seed), run_on(&b, &sc, seed));
        prop_assert_eq!(ta.len(), tb.len());
        for (ra, rb) in ta.records.iter().zip(&tb.records) {
            prop_assert_eq!(ra.commands, rb.commands);
            prop_assert_eq!(motors_by_resource(&a, &ra.activation.active), motors_by_resource(&b, &rb.activation.active));
            prop_assert!(ra.activation.warnings.is_empty());
        }
    }

    #[test]
    fn node_leaves_need_their_branch_guard(ast in script(true), w in world()) {
        let t = tree(&ast);
        let d = w.visitor_stand_distance();
        let (act, _, _) = tick(&t, &w, &Memory::new());
        let call = ast.statements.iter().find(|s| s.head == "N");
        for &i in &act.active {
            let leaf = &t.leaves[i];
            if leaf.ancestors.is_empty() {
                continue;
            }
            let g = call.and_then(|c| c.evaluation.as_ref());
            prop_assert!(
                g.and_then(|g| g.test_distance(d)) != Some(false),
                "{} active at d = {d} under {:?}", leaf.name, g
            );
            prop_assert!(act.active_branches.contains(&leaf.ancestors[0]));
        }
    }

    #[test]
    fn lowering_a_lower_bound_never_deactivates(w in world(), c in threshold(), drop in threshold()) {
        let active = |c: f64| {
            let src = format!("visitor_tracking\nstand_tracking\nwaving whenever d > {c}\n");
            let t = tree(&parse_script(&src).unwrap());
            let (act, _, _) = tick(&t, &w, &Memory::new());
            act.active.iter().any(|&i| !t.leaves[i].is_sensor())
        };
        let lower = (c - drop).max(0.0);
        prop_assert!(!active(c) || active(lower));
        prop_assert_eq!(active(c), w.visitor_stand_distance() > c);
    }

    #[test]
    fn raising_an_upper_bound_never_deactivates(w in world(), c in threshold(), rise in threshold()) {
        let active = |c: f64| {
            let src = format!("visitor_tracking\nstand_tracking\nwaving whenever d < {c}\n");
            let t = tree(&parse_script(&src).unwrap());
            let (act, _, _) = tick(&t, &w, &Memory::new());
            act.active.iter().any(|&i| !t.leaves[i].is_sensor())
        };
        prop_assert!(!active(c) || active(c + rise));
    }

    #[test]
    fn seeded_runs_repeat_exactly(ast in script(false), sc in scenario(), seed in any::<u64>()) {
        let t = tree(&ast);
        let bytes = |tr: &Trace| {
            let mut v = Vec::new();
            tr.write_jsonl(&t, &mut v).unwrap();
            v
        };
        prop_assert_eq!(bytes(&run_on(&t, &sc, seed)), bytes(&run_on(&t, &sc, seed)));
    }

    #[test]
    fn printing_then_parsing_is_the_identity(ast in script(false)) {
        let text = format_script(&ast);
        let back = parse_script(&text).unwrap();
        prop_assert_eq!(strip_spans(&back), strip_spans(&ast));
        prop_assert_eq!(format_script(&back), text);
    }

    #[test]
    fn agent_and_visitor_stay_in_the_corridor(ast in script(false), sc in scenario(), seed in any::<u64>()) {
        let t = tree(&ast);
        let b = sc.bounds();
        for rec in run_on(&t, &sc, seed).records {
            for p in [rec.world.agent.position, rec.world.visitor.position] {
                prop_assert!(b.contains(p), "{p:?} outside at tick {}", rec.tick);
            }
        }
    }
}
