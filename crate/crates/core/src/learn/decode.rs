use thiserror::Error;

use super::config::LearnerConfig;
use super::models::{gaussian_loglik, Feature, FeatureScale, InverseModel};
use super::viterbi::viterbi;
use crate::dsl::{Association, PrimitiveRegistry, Resource};
use crate::sim::{AgentLimits, Dataset};

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("need at least 2 samples to decode, have {0}")]
    TooShort(usize),
    #[error("no inverse models for {0}")]
    NoModels(Resource),
}

/// Decoded states of one resource. State 0 is idle; state `i > 0` is
/// `states[i - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourcePath {
    pub resource: Resource,
    pub states: Vec<Association>,
    /// One state per sample.
    pub path: Vec<usize>,
}

impl ResourcePath {
    pub fn label(&self, t: usize) -> Option<&Association> {
        self.path[t].checked_sub(1).map(|i| &self.states[i])
    }
}

/// Per-resource decoded activations over a dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActivationMatrix {
    pub len: usize,
    pub resources: Vec<ResourcePath>,
}

impl ActivationMatrix {
    /// Binary activation of one association.
    pub fn active(&self, a: &Association) -> Vec<bool> {
        for rp in &self.resources {
            if let Some(i) = rp.states.iter().position(|s| s == a) {
                return rp.path.iter().map(|&p| p == i + 1).collect();
            }
        }
        vec![false; self.len]
    }

    /// Active associations at sample `t`, in resource order.
    pub fn labels_at(&self, t: usize) -> Vec<Association> {
        self.resources
            .iter()
            .filter_map(|rp| rp.label(t).cloned())
            .collect()
    }

    /// Every association active at least once, with its resource.
    pub fn associations(&self) -> Vec<(Resource, Association)> {
        let mut out = Vec::new();
        for rp in &self.resources {
            for (i, a) in rp.states.iter().enumerate() {
                if rp.path.contains(&(i + 1)) {
                    out.push((rp.resource, a.clone()));
                }
            }
        }
        out
    }
}

/// Log-emissions for each transition of the dataset: column 0 is idle, then
/// one column per model.
pub fn emission_table(
    dataset: &Dataset,
    models: &[InverseModel],
    lambda_idle: f64,
    limits: &AgentLimits,
) -> Vec<Vec<f64>> {
    let s = dataset.samples();
    let resource = models[0].resource;
    let observed: Vec<Feature> = s
        .windows(2)
        .map(|w| Feature::observe(resource, &w[0].agent, &w[1].agent, w[1].time - w[0].time))
        .collect();
    let scale = FeatureScale::fit(resource, &observed);
    // The normalizing term only separates models with different sigmas;
    // with one shared sigma the idle threshold is a residual of sigma.
    let widest = models.iter().map(|m| m.sigma).fold(0.0, f64::max);
    s.windows(2)
        .zip(&observed)
        .map(|(w, obs)| {
            let dt = w[1].time - w[0].time;
            let mut row = Vec::with_capacity(models.len() + 1);
            row.push(lambda_idle);
            for m in models {
                let r = scale.residual(&m.predict(&w[0], dt, limits), obs);
                let ll = gaussian_loglik(r, m.sigma);
                row.push(if m.model.is_stop() {
                    // a stop primitive looks exactly like idle at rest
                    lambda_idle + ll
                } else {
                    ll - (m.sigma / widest).ln()
                });
            }
            row
        })
        .collect()
}

/// Most likely idle/association sequence for one resource, one state per
/// sample. The state of a sample is the one that moved it to the next
/// sample; the final sample repeats the last decoded state.
pub fn decode_resource(
    dataset: &Dataset,
    models: &[InverseModel],
    lambda_idle: f64,
    limits: &AgentLimits,
) -> Result<Vec<usize>, DecodeError> {
    if dataset.len() < 2 {
        return Err(DecodeError::TooShort(dataset.len()));
    }
    let Some(first) = models.first() else {
        return Err(DecodeError::NoModels(Resource::WheelsRotation));
    };
    if models.iter().any(|m| m.resource != first.resource) {
        panic!("models span several resources");
    }
    let mut path = viterbi(&emission_table(dataset, models, lambda_idle, limits));
    path.push(*path.last().expect("non-empty"));
    Ok(path)
}

/// Decodes every resource of the registry, one thread per resource.
pub fn detect_activations(
    dataset: &Dataset,
    registry: &PrimitiveRegistry,
    config: &LearnerConfig,
) -> Result<ActivationMatrix, DecodeError> {
    if dataset.len() < 2 {
        return Err(DecodeError::TooShort(dataset.len()));
    }
    let per_resource: Vec<Vec<InverseModel>> = registry
        .resources()
        .into_iter()
        .map(|r| InverseModel::for_resource(registry, r, |a| config.sigma_for(a)))
        .filter(|m| !m.is_empty())
        .collect();
    let results: Vec<Result<ResourcePath, DecodeError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = per_resource
            .iter()
            .map(|models| {
                scope.spawn(move || {
                    let path =
                        decode_resource(dataset, models, config.lambda_idle, &config.limits)?;
                    Ok(ResourcePath {
                        resource: models[0].resource,
                        states: models.iter().map(|m| m.association.clone()).collect(),
                        path,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("decoder thread panicked"))
            .collect()
    });
    Ok(ActivationMatrix {
        len: dataset.len(),
        resources: results.into_iter().collect::<Result<_, _>>()?,
    })
}
