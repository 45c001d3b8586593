//! Learning scripts from demonstrations: decode which sensor-motor
//! associations were active, fit a distance guard to each, group guards
//! that agree and print the result as a script.

mod config;
mod decode;
mod emit;
mod loss;
mod models;
mod tree;
mod viterbi;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ConfigError, LearnerConfig};
pub use decode::{
    decode_resource, detect_activations, emission_table, ActivationMatrix, DecodeError,
    ResourcePath,
};
pub use emit::{emit_script, EMITTED_PRIORITY};
pub use loss::{imitation_loss, rotate_guards, LossError};
pub use models::{emission_loglik, gaussian_loglik, Feature, FeatureScale, InverseModel};
pub use tree::{
    build_flat_tree, drop_short_runs, factorize, fit_evaluation, group_name, runs, FitError,
    FlatLeaf, FlatTree, Group, HierarchicalTree, Interval,
};
pub use viterbi::{brute_force_decode, path_score, viterbi, viterbi_with};

use crate::dsl::{format_script, Association, PrimitiveRegistry, Resource, ScriptAst};
use crate::sim::Dataset;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("dataset sampled at {found:.3} Hz, config expects {expected} Hz")]
    Rate { expected: f64, found: f64 },
    #[error("registry has no distance feature to guard on")]
    NoDistance,
}

/// One contiguous decoded activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub resource: Resource,
    pub association: Association,
    pub t_start: f64,
    pub t_end: f64,
    pub d_start: f64,
    pub d_end: f64,
    /// Long enough to count toward the association's guard.
    pub kept: bool,
}

/// Sidecar written next to a learned script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnReport {
    pub samples: usize,
    pub dt: f64,
    pub bands: Vec<Band>,
    pub flat: FlatTree,
    pub tree: HierarchicalTree,
    pub config: LearnerConfig,
}

impl LearnReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub script: ScriptAst,
    /// `script` in canonical form.
    pub text: String,
    pub matrix: ActivationMatrix,
    pub report: LearnReport,
}

/// Interaction distance at every sample.
pub fn distance_feature(dataset: &Dataset, registry: &PrimitiveRegistry) -> Option<Vec<f64>> {
    let feat = registry.distance()?;
    let from = registry.target_entity(&feat.from)?;
    let to = registry.target_entity(&feat.to)?;
    Some(
        dataset
            .samples()
            .iter()
            .map(|w| w.entity(from).distance(w.entity(to)))
            .collect(),
    )
}

fn bands(
    dataset: &Dataset,
    matrix: &ActivationMatrix,
    phi: &[f64],
    min_support: usize,
) -> Vec<Band> {
    let s = dataset.samples();
    let mut out = Vec::new();
    for rp in &matrix.resources {
        for (i, a) in rp.states.iter().enumerate() {
            let w: Vec<bool> = rp.path.iter().map(|&p| p == i + 1).collect();
            for (start, end) in runs(&w) {
                out.push(Band {
                    resource: rp.resource,
                    association: a.clone(),
                    t_start: s[start].time,
                    t_end: s[end - 1].time,
                    d_start: phi[start],
                    d_end: phi[end - 1],
                    kept: end - start >= min_support,
                });
            }
        }
    }
    out
}

/// The whole pipeline: decode, fit guards, build and factorize the flat
/// tree, emit the script.
pub fn learn(
    dataset: &Dataset,
    registry: &PrimitiveRegistry,
    config: &LearnerConfig,
) -> Result<LearnOutcome, LearnError> {
    config.validate()?;
    if let Some(hz) = config.hz {
        let found = 1.0 / dataset.dt();
        if dataset.len() >= 2 && (found - hz).abs() > 1e-6 * hz {
            return Err(LearnError::Rate {
                expected: hz,
                found,
            });
        }
    }
    let phi = distance_feature(dataset, registry).ok_or(LearnError::NoDistance)?;
    let matrix = detect_activations(dataset, registry, config)?;
    let flat = build_flat_tree(&matrix, &phi, registry, config);
    let tree = factorize(&flat, config.delta);
    let script = emit_script(&tree, registry, config.round);
    Ok(LearnOutcome {
        text: format_script(&script),
        script,
        report: LearnReport {
            samples: dataset.len(),
            dt: dataset.dt(),
            bands: bands(dataset, &matrix, &phi, config.min_support),
            flat,
            tree,
            config: config.clone(),
        },
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_script, validate};
    use crate::engine::synth_demo;
    use crate::sim::Scenario;

    #[test]
    fn waving_everywhere_is_learned_unguarded() {
        let reg = PrimitiveRegistry::pepper();
        let s = validate(&parse_script("waving\n").unwrap(), &reg).unwrap();
        let ds = synth_demo(&s, &Scenario::corridor(), 2, 50.0).unwrap();
        let out = learn(&ds, &reg, &LearnerConfig::default()).unwrap();
        assert_eq!(out.text, "waving, priority of 1\n");
        validate(&out.script, &reg).unwrap();
        assert_eq!(out.report.bands.len(), 1);
        let back = LearnReport::from_json(&out.report.to_json()).unwrap();
        assert_eq!(back, out.report);
    }

    #[test]
    fn rate_mismatch_is_reported() {
        let reg = PrimitiveRegistry::pepper();
        let s = validate(&parse_script("waving\n").unwrap(), &reg).unwrap();
        let ds = synth_demo(&s, &Scenario::corridor(), 2, 50.0).unwrap();
        let cfg = LearnerConfig {
            hz: Some(20.0),
            ..Default::default()
        };
        assert!(matches!(
            learn(&ds, &reg, &cfg),
            Err(LearnError::Rate { .. })
        ));
    }
}
