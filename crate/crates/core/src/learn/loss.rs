use thiserror::Error;

use crate::dsl::{CheckedScript, ScriptAst};
use crate::engine::{compile, tick, Memory};
use crate::sim::{integrate_agent, wrap_angle, AgentState, Dataset, Scenario};

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("need at least 2 samples, have {0}")]
    TooShort(usize),
    #[error("dataset layout does not match scenario `{0}`")]
    Layout(String),
}

fn state_error(a: &AgentState, b: &AgentState) -> f64 {
    (a.position - b.position).norm_sq()
        + wrap_angle(a.body_yaw - b.body_yaw).powi(2)
        + (a.head_yaw - b.head_yaw).powi(2)
}

/// Mean squared one-step prediction error of `script` over the dataset.
/// Each step starts from the demonstrated state with a fresh memory, runs
/// one engine tick and one agent step, and compares position, body yaw
/// and head yaw with the next demonstrated state.
pub fn imitation_loss(
    dataset: &Dataset,
    script: &CheckedScript,
    scenario: &Scenario,
) -> Result<f64, LossError> {
    let s = dataset.samples();
    if s.len() < 2 {
        return Err(LossError::TooShort(s.len()));
    }
    let same = |a: crate::sim::Vec2, b: crate::sim::Vec2| a.distance(b) < 1e-9;
    if !same(s[0].stand, scenario.stand) || !same(s[0].front_of_stand, scenario.front_of_stand) {
        return Err(LossError::Layout(scenario.name.clone()));
    }
    let tree = compile(script).with_limits(scenario.limits);
    let bounds = scenario.bounds();
    let total: f64 = s
        .windows(2)
        .map(|w| {
            let (_, cmds, _) = tick(&tree, &w[0], &Memory::new());
            let dt = w[1].time - w[0].time;
            let predicted = integrate_agent(&w[0].agent, &cmds, dt, &scenario.limits, &bounds);
            state_error(&predicted, &w[1].agent)
        })
        .sum();
    Ok(total / (s.len() - 1) as f64)
}

/// The same script with the guards of its guarded top-level statements
/// rotated by one place, so every branch fires on another branch's range.
pub fn rotate_guards(ast: &ScriptAst) -> ScriptAst {
    let mut out = ast.clone();
    let idx: Vec<usize> = out
        .statements
        .iter()
        .enumerate()
        .filter(|(_, s)| s.evaluation.as_ref().is_some_and(|e| e.uses_distance()))
        .map(|(i, _)| i)
        .collect();
    if idx.len() < 2 {
        return out;
    }
    let evals: Vec<_> = idx
        .iter()
        .map(|&i| out.statements[i].evaluation.clone())
        .collect();
    for (k, &i) in idx.iter().enumerate() {
        out.statements[i].evaluation = evals[(k + 1) % evals.len()].clone();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_script, validate, PrimitiveRegistry};
    use crate::engine::synth_demo;

    const SRC: &str = "\
visitor_tracking
stand_tracking
A whenever d > 4.5
B whenever d < 2.5

node A:
    turn_toward targeting visitor
    waving

node B:
    point_toward targeting stand
    go_toward targeting stand
";

    fn checked(src: &str) -> CheckedScript {
        validate(&parse_script(src).unwrap(), &PrimitiveRegistry::pepper()).unwrap()
    }

    #[test]
    fn a_script_explains_its_own_demo() {
        let sc = Scenario::corridor();
        let s = checked(SRC);
        let ds = synth_demo(&s, &sc, 5, 50.0).unwrap();
        assert!(imitation_loss(&ds, &s, &sc).unwrap() <= 1e-12);
        // also after a trip through the file format
        let back = Dataset::from_jsonl_str(&ds.to_jsonl()).unwrap();
        assert!(imitation_loss(&back, &s, &sc).unwrap() <= 1e-12);
    }

    #[test]
    fn standing_still_does_not_explain_motion() {
        let sc = Scenario::corridor();
        let ds = synth_demo(&checked(SRC), &sc, 5, 50.0).unwrap();
        let still = checked("go_stop\nturn_stop\n");
        assert!(imitation_loss(&ds, &still, &sc).unwrap() > 0.0);
    }

    #[test]
    fn rotated_guards_swap_branches() {
        let ast = parse_script(SRC).unwrap();
        let r = rotate_guards(&ast);
        assert_eq!(r.statements[2].evaluation, ast.statements[3].evaluation);
        assert_eq!(r.statements[3].evaluation, ast.statements[2].evaluation);
        assert_eq!(rotate_guards(&r), ast);
    }

    #[test]
    fn short_or_mismatched_data_is_rejected() {
        let sc = Scenario::corridor();
        let s = checked(SRC);
        let mut ds = synth_demo(&s, &sc, 5, 50.0).unwrap();
        let mut other = sc.clone();
        other.stand.x += 1.0;
        assert!(matches!(
            imitation_loss(&ds, &s, &other),
            Err(LossError::Layout(_))
        ));
        ds.truncate(1);
        assert_eq!(imitation_loss(&ds, &s, &sc), Err(LossError::TooShort(1)));
    }
}
