use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An actuator group. At most one primitive drives a resource per tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    WheelsRotation,
    WheelsTranslation,
    Head,
    Arm,
}

impl Resource {
    pub const ALL: [Resource; 4] = [
        Resource::WheelsRotation,
        Resource::WheelsTranslation,
        Resource::Head,
        Resource::Arm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Resource::WheelsRotation => "wheels_rotation",
            Resource::WheelsTranslation => "wheels_translation",
            Resource::Head => "head",
            Resource::Arm => "arm",
        }
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// World object a sensor primitive reads its target from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entity {
    Visitor,
    Stand,
    FrontOfStand,
}

/// Built-in motor behaviors the simulator knows how to execute. Registry
/// entries bind a primitive name to one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotorModel {
    TurnToward,
    TurnStop,
    GoToward,
    GoStop,
    LookAt,
    HeadSearch,
    PointToward,
    Waving,
    ArmFreeze,
}

impl MotorModel {
    pub fn resource(self) -> Resource {
        match self {
            MotorModel::TurnToward | MotorModel::TurnStop => Resource::WheelsRotation,
            MotorModel::GoToward | MotorModel::GoStop => Resource::WheelsTranslation,
            MotorModel::LookAt | MotorModel::HeadSearch => Resource::Head,
            MotorModel::PointToward | MotorModel::Waving | MotorModel::ArmFreeze => Resource::Arm,
        }
    }

    pub fn requires_target(self) -> bool {
        matches!(
            self,
            MotorModel::TurnToward
                | MotorModel::GoToward
                | MotorModel::LookAt
                | MotorModel::PointToward
        )
    }

    /// Stop primitives command their resource to rest.
    pub fn is_stop(self) -> bool {
        matches!(
            self,
            MotorModel::TurnStop | MotorModel::GoStop | MotorModel::ArmFreeze
        )
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "turn_toward" => MotorModel::TurnToward,
            "turn_stop" => MotorModel::TurnStop,
            "go_toward" => MotorModel::GoToward,
            "go_stop" => MotorModel::GoStop,
            "look_at" => MotorModel::LookAt,
            "head_search" => MotorModel::HeadSearch,
            "point_toward" => MotorModel::PointToward,
            "waving" => MotorModel::Waving,
            "arm_freeze" => MotorModel::ArmFreeze,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NamedEvaluation {
    /// The statement's target was refreshed by its sensor this tick.
    Seen,
    /// The agent is within `range` meters of the statement's target.
    Close { range: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PrimitiveSpec {
    Sensor { target: String },
    Motor { model: MotorModel },
}

impl PrimitiveSpec {
    pub fn resource(&self) -> Option<Resource> {
        match self {
            PrimitiveSpec::Sensor { .. } => None,
            PrimitiveSpec::Motor { model } => Some(model.resource()),
        }
    }

    pub fn requires_target(&self) -> bool {
        match self {
            PrimitiveSpec::Sensor { .. } => false,
            PrimitiveSpec::Motor { model } => model.requires_target(),
        }
    }
}

/// The distance feature `d` usable in evaluations: the planar distance
/// between two targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceFeature {
    pub from: String,
    pub to: String,
}

/// A motor primitive bound to a target, or a lone non-targeting primitive.
/// Rendered as `primitive:target` or `primitive`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Association {
    pub primitive: String,
    pub target: Option<String>,
}

impl Association {
    pub fn new(primitive: impl Into<String>, target: Option<&str>) -> Self {
        Self {
            primitive: primitive.into(),
            target: target.map(str::to_owned),
        }
    }
}

impl fmt::Display for Association {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.target {
            Some(t) => write!(f, "{}:{}", self.primitive, t),
            None => f.write_str(&self.primitive),
        }
    }
}

impl FromStr for Association {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (p, t) = match s.split_once(':') {
            Some((p, t)) => (p, Some(t)),
            None => (s, None),
        };
        if p.is_empty() || t.is_some_and(str::is_empty) {
            return Err(RegistryError::BadAssociation(s.to_owned()));
        }
        Ok(Association::new(p, t))
    }
}

impl Serialize for Association {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Association {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("malformed association identifier `{0}`")]
    BadAssociation(String),
    #[error("sensor `{sensor}` provides undeclared target `{target}`")]
    UndeclaredTarget { sensor: String, target: String },
    #[error("unknown motor model `{model}` for primitive `{primitive}`")]
    UnknownModel { primitive: String, model: String },
    #[error("primitive `{0}` declared twice")]
    Duplicate(String),
    #[error("distance feature refers to undeclared target `{0}`")]
    DistanceTarget(String),
    #[error("reading registry: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing registry: {0}")]
    Toml(#[from] toml::de::Error),
}

/// Primitives, targets and named evaluations a script may refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveRegistry {
    primitives: IndexMap<String, PrimitiveSpec>,
    targets: IndexMap<String, Entity>,
    evaluations: IndexMap<String, NamedEvaluation>,
    distance: Option<DistanceFeature>,
}

impl PrimitiveRegistry {
    pub fn builder() -> RegistryBuilder {
        RegistryBuilder::default()
    }

    /// The mobile-humanoid primitive set: eight motor primitives over four
    /// resources, one tracking sensor per target, and `d` as the
    /// visitor-stand distance.
    pub fn pepper() -> Self {
        // Target order is also the learner's tie order between targets
        // that command the same saturated motion; the fixed stand wins
        // over the moving visitor.
        let mut b = Self::builder()
            .target("stand", Entity::Stand)
            .target("visitor", Entity::Visitor)
            .target("front_of_stand", Entity::FrontOfStand)
            .sensor("stand_tracking", "stand")
            .sensor("visitor_tracking", "visitor")
            .sensor("front_of_stand_tracking", "front_of_stand");
        for name in [
            "turn_toward",
            "turn_stop",
            "go_toward",
            "go_stop",
            "look_at",
            "point_toward",
            "waving",
            "arm_freeze",
        ] {
            b = b.motor(name, MotorModel::from_name(name).expect("built-in model"));
        }
        b.evaluation("seen", NamedEvaluation::Seen)
            .evaluation("close", NamedEvaluation::Close { range: 1.0 })
            .distance("visitor", "stand")
            .build()
            .expect("pepper registry is well formed")
    }

    /// Registry for the ball grasping example: a ball detector, a head
    /// search, gaze tracking and a reach-style grasp on the arm.
    pub fn grasping() -> Self {
        Self::builder()
            .target("ball", Entity::Visitor)
            .sensor("ball_detection", "ball")
            .motor("head_search", MotorModel::HeadSearch)
            .motor("look_at", MotorModel::LookAt)
            .motor("grasp", MotorModel::PointToward)
            .evaluation("seen", NamedEvaluation::Seen)
            .evaluation("close", NamedEvaluation::Close { range: 1.0 })
            .build()
            .expect("grasping registry is well formed")
    }

    /// Loads a registry description from TOML.
    ///
    /// ```toml
    /// targets = { ball = "visitor" }
    /// sensors = { ball_detection = "ball" }
    /// motors = { look_at = "look_at", grasp = "point_toward" }
    /// [evaluations]
    /// seen = { kind = "seen" }
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self, RegistryError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            targets: IndexMap<String, Entity>,
            #[serde(default)]
            sensors: IndexMap<String, String>,
            #[serde(default)]
            motors: IndexMap<String, String>,
            #[serde(default)]
            evaluations: IndexMap<String, NamedEvaluation>,
            distance: Option<DistanceFeature>,
        }
        let file: File = toml::from_str(text)?;
        let mut b = Self::builder();
        for (name, entity) in file.targets {
            b = b.target(&name, entity);
        }
        for (name, target) in file.sensors {
            b = b.sensor(&name, &target);
        }
        for (name, model) in file.motors {
            let m = MotorModel::from_name(&model).ok_or_else(|| RegistryError::UnknownModel {
                primitive: name.clone(),
                model: model.clone(),
            })?;
            b = b.motor(&name, m);
        }
        for (name, e) in file.evaluations {
            b = b.evaluation(&name, e);
        }
        if let Some(d) = file.distance {
            b = b.distance(&d.from, &d.to);
        }
        b.build()
    }

    pub fn from_path(path: &Path) -> Result<Self, RegistryError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn primitive(&self, name: &str) -> Option<&PrimitiveSpec> {
        self.primitives.get(name)
    }

    pub fn primitives(&self) -> impl Iterator<Item = (&str, &PrimitiveSpec)> {
        self.primitives.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn targets(&self) -> impl Iterator<Item = (&str, Entity)> {
        self.targets.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn target_entity(&self, target: &str) -> Option<Entity> {
        self.targets.get(target).copied()
    }

    pub fn evaluation(&self, name: &str) -> Option<NamedEvaluation> {
        self.evaluations.get(name).copied()
    }

    pub fn distance(&self) -> Option<&DistanceFeature> {
        self.distance.as_ref()
    }

    /// The sensor primitive that refreshes `target`.
    pub fn sensor_for(&self, target: &str) -> Option<&str> {
        self.primitives.iter().find_map(|(name, spec)| match spec {
            PrimitiveSpec::Sensor { target: t } if t == target => Some(name.as_str()),
            _ => None,
        })
    }

    pub fn motor_model(&self, primitive: &str) -> Option<MotorModel> {
        match self.primitives.get(primitive)? {
            PrimitiveSpec::Motor { model } => Some(*model),
            PrimitiveSpec::Sensor { .. } => None,
        }
    }

    /// Every target-primitive association, in registry order: each
    /// targeting primitive crossed with each target, each non-targeting
    /// primitive alone.
    pub fn associations(&self) -> Vec<Association> {
        let mut out = Vec::new();
        for (name, spec) in &self.primitives {
            let PrimitiveSpec::Motor { model } = spec else {
                continue;
            };
            if model.requires_target() {
                for t in self.targets.keys() {
                    out.push(Association::new(name.as_str(), Some(t)));
                }
            } else {
                out.push(Association::new(name.as_str(), None));
            }
        }
        out
    }

    pub fn associations_on(&self, resource: Resource) -> Vec<Association> {
        self.associations()
            .into_iter()
            .filter(|a| self.resource_of(a) == Some(resource))
            .collect()
    }

    pub fn resource_of(&self, assoc: &Association) -> Option<Resource> {
        self.primitive(&assoc.primitive)?.resource()
    }

    /// Resources that have at least one motor primitive, in canonical order.
    pub fn resources(&self) -> Vec<Resource> {
        Resource::ALL
            .into_iter()
            .filter(|r| self.primitives.values().any(|p| p.resource() == Some(*r)))
            .collect()
    }
}

#[derive(Debug, Default)]
pub struct RegistryBuilder {
    primitives: IndexMap<String, PrimitiveSpec>,
    targets: IndexMap<String, Entity>,
    evaluations: IndexMap<String, NamedEvaluation>,
    distance: Option<DistanceFeature>,
    duplicate: Option<String>,
}

impl RegistryBuilder {
    pub fn target(mut self, name: &str, entity: Entity) -> Self {
        self.targets.insert(name.to_owned(), entity);
        self
    }

    pub fn sensor(self, name: &str, target: &str) -> Self {
        self.primitive(
            name,
            PrimitiveSpec::Sensor {
                target: target.to_owned(),
            },
        )
    }

    pub fn motor(self, name: &str, model: MotorModel) -> Self {
        self.primitive(name, PrimitiveSpec::Motor { model })
    }

    fn primitive(mut self, name: &str, spec: PrimitiveSpec) -> Self {
        if self.primitives.insert(name.to_owned(), spec).is_some() {
            self.duplicate.get_or_insert_with(|| name.to_owned());
        }
        self
    }

    pub fn evaluation(mut self, name: &str, e: NamedEvaluation) -> Self {
        self.evaluations.insert(name.to_owned(), e);
        self
    }

    pub fn distance(mut self, from: &str, to: &str) -> Self {
        self.distance = Some(DistanceFeature {
            from: from.to_owned(),
            to: to.to_owned(),
        });
        self
    }

    pub fn build(self) -> Result<PrimitiveRegistry, RegistryError> {
        if let Some(d) = self.duplicate {
            return Err(RegistryError::Duplicate(d));
        }
        for (name, spec) in &self.primitives {
            if let PrimitiveSpec::Sensor { target } = spec {
                if !self.targets.contains_key(target) {
                    return Err(RegistryError::UndeclaredTarget {
                        sensor: name.clone(),
                        target: target.clone(),
                    });
                }
            }
        }
        if let Some(d) = &self.distance {
            for t in [&d.from, &d.to] {
                if !self.targets.contains_key(t) {
                    return Err(RegistryError::DistanceTarget(t.clone()));
                }
            }
        }
        Ok(PrimitiveRegistry {
            primitives: self.primitives,
            targets: self.targets,
            evaluations: self.evaluations,
            distance: self.distance,
        })
    }
}
