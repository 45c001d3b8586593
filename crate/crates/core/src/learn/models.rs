use crate::dsl::{Association, MotorModel, PrimitiveRegistry, Resource};
use crate::sim::{
    command_for, integrate_agent, pointing_vector, wave_phase_rate, wrap_angle, AgentLimits,
    AgentState, Bounds, MotorCommands, Vec2, WorldState,
};

/// Observable motion of one resource between two samples. Components are
/// grouped; each group is compared as a vector.
///
/// * rotation: body yaw rate
/// * translation: planar velocity
/// * head: head yaw rate
/// * arm: wave phase rate, then the pointing unit vector
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    values: [f64; 3],
    resource: Resource,
}

#[allow(clippy::single_range_in_vec_init)]
fn groups(r: Resource) -> &'static [std::ops::Range<usize>] {
    match r {
        Resource::WheelsRotation | Resource::Head => &[0..1],
        Resource::WheelsTranslation => &[0..2],
        Resource::Arm => &[0..1, 1..3],
    }
}

impl Feature {
    pub fn observe(resource: Resource, prev: &AgentState, next: &AgentState, dt: f64) -> Self {
        let values = match resource {
            Resource::WheelsRotation => [wrap_angle(next.body_yaw - prev.body_yaw) / dt, 0.0, 0.0],
            Resource::WheelsTranslation => {
                let v = (next.position - prev.position) * (1.0 / dt);
                [v.x, v.y, 0.0]
            }
            Resource::Head => [(next.head_yaw - prev.head_yaw) / dt, 0.0, 0.0],
            Resource::Arm => {
                let p = pointing_vector(&next.arm_mode);
                [
                    wave_phase_rate(&prev.arm_mode, &next.arm_mode, dt),
                    p.x,
                    p.y,
                ]
            }
        };
        Self { values, resource }
    }

    fn group(&self, g: usize) -> &[f64] {
        &self.values[groups(self.resource)[g].clone()]
    }
}

/// Spread of each feature group over a dataset, used to put residuals on a
/// common scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScale {
    resource: Resource,
    scale: Vec<f64>,
}

/// Smallest scale; keeps constant features from dividing by zero.
pub const MIN_SCALE: f64 = 1e-6;

impl FeatureScale {
    pub fn fit(resource: Resource, observed: &[Feature]) -> Self {
        let n = observed.len().max(1) as f64;
        let scale = groups(resource)
            .iter()
            .enumerate()
            .map(|(g, range)| {
                let mut mean = vec![0.0; range.len()];
                for f in observed {
                    for (m, v) in mean.iter_mut().zip(f.group(g)) {
                        *m += v / n;
                    }
                }
                let var: f64 = observed
                    .iter()
                    .map(|f| {
                        f.group(g)
                            .iter()
                            .zip(&mean)
                            .map(|(v, m)| (v - m).powi(2))
                            .sum::<f64>()
                    })
                    .sum::<f64>()
                    / n;
                var.sqrt().max(MIN_SCALE)
            })
            .collect();
        Self { resource, scale }
    }

    pub fn unit(resource: Resource) -> Self {
        Self {
            resource,
            scale: vec![1.0; groups(resource).len()],
        }
    }

    /// Length of `a - b` in normalized units.
    pub fn residual(&self, a: &Feature, b: &Feature) -> f64 {
        (0..self.scale.len())
            .map(|g| {
                let d2: f64 = a
                    .group(g)
                    .iter()
                    .zip(b.group(g))
                    .map(|(x, y)| (x - y).powi(2))
                    .sum();
                d2 / self.scale[g].powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// How one association is expected to move its resource.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseModel {
    pub association: Association,
    pub resource: Resource,
    pub model: MotorModel,
    pub sigma: f64,
    target: Option<crate::dsl::Entity>,
}

impl InverseModel {
    pub fn new(registry: &PrimitiveRegistry, association: Association, sigma: f64) -> Option<Self> {
        let model = registry.motor_model(&association.primitive)?;
        let target = match &association.target {
            Some(t) => Some(registry.target_entity(t)?),
            None => None,
        };
        Some(Self {
            resource: model.resource(),
            model,
            association,
            sigma,
            target,
        })
    }

    /// Models for every association on `resource`, in registry order.
    pub fn for_resource(
        registry: &PrimitiveRegistry,
        resource: Resource,
        sigma: impl Fn(&Association) -> f64,
    ) -> Vec<Self> {
        registry
            .associations_on(resource)
            .into_iter()
            .filter_map(|a| {
                let s = sigma(&a);
                Self::new(registry, a, s)
            })
            .collect()
    }

    /// The feature a one-step simulation of this association would produce
    /// from `prev`.
    pub fn predict(&self, prev: &WorldState, dt: f64, limits: &AgentLimits) -> Feature {
        let target = self.target.map(|e| prev.entity(e));
        let mut cmds = MotorCommands::default();
        if let Some(c) = command_for(self.model, target, prev, limits) {
            cmds.set(c);
        }
        let next = integrate_agent(&prev.agent, &cmds, dt, limits, &UNBOUNDED);
        Feature::observe(self.resource, &prev.agent, &next, dt)
    }
}

const UNBOUNDED: Bounds = Bounds {
    min: Vec2 {
        x: f64::NEG_INFINITY,
        y: f64::NEG_INFINITY,
    },
    max: Vec2 {
        x: f64::INFINITY,
        y: f64::INFINITY,
    },
};

/// Gaussian log-density of a residual, without the normalizing constant.
pub fn gaussian_loglik(residual: f64, sigma: f64) -> f64 {
    -(residual * residual) / (2.0 * sigma * sigma)
}

/// Log-likelihood that `model` produced the step `x_prev -> x_t`, on the
/// normalized scale of `scale`.
pub fn emission_loglik(
    model: &InverseModel,
    scale: &FeatureScale,
    x_prev: &WorldState,
    x_t: &WorldState,
    limits: &AgentLimits,
) -> f64 {
    let dt = x_t.time - x_prev.time;
    let predicted = model.predict(x_prev, dt, limits);
    let observed = Feature::observe(model.resource, &x_prev.agent, &x_t.agent, dt);
    gaussian_loglik(scale.residual(&predicted, &observed), model.sigma)
}
