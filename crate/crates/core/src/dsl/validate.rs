use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use super::ast::{EvalExpr, ScriptAst, Span, Statement};
use super::registry::{MotorModel, NamedEvaluation, PrimitiveRegistry, PrimitiveSpec, Resource};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationErrorKind {
    #[error("unknown primitive or node `{0}`")]
    UnknownPrimitive(String),
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("unknown evaluation `{0}`")]
    UnknownEvaluation(String),
    #[error("`{0}` requires a target: missing target")]
    MissingTarget(String),
    #[error("`{0}` does not take a target")]
    UnexpectedTarget(String),
    #[error("evaluation `{eval}` needs a target but `{head}` has none")]
    EvaluationNeedsTarget { head: String, eval: String },
    #[error("node `{0}` includes itself")]
    RecursiveNode(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub span: Span,
    pub kind: ValidationErrorKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationErrors(pub Vec<Diagnostic>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// What a statement's head identifier resolved to.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    Sensor {
        target: String,
    },
    Motor {
        model: MotorModel,
        resource: Resource,
    },
    Node {
        name: String,
    },
}

/// A resolved activation rule.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckedEval {
    Seen { target: String },
    Close { target: String, range: f64 },
    Distance(EvalExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedStatement {
    pub statement: Statement,
    pub resolution: Resolution,
    pub evaluation: Option<CheckedEval>,
}

impl CheckedStatement {
    pub fn resource(&self) -> Option<Resource> {
        match self.resolution {
            Resolution::Motor { resource, .. } => Some(resource),
            _ => None,
        }
    }
}

/// A script whose identifiers all resolved against a registry.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedScript {
    pub ast: ScriptAst,
    pub statements: Vec<CheckedStatement>,
    pub nodes: BTreeMap<String, Vec<CheckedStatement>>,
    pub registry: PrimitiveRegistry,
}

impl CheckedScript {
    /// Resources driven anywhere in the script.
    pub fn resources(&self) -> BTreeSet<Resource> {
        self.statements
            .iter()
            .chain(self.nodes.values().flatten())
            .filter_map(CheckedStatement::resource)
            .collect()
    }
}

fn check_statement(
    s: &Statement,
    ast: &ScriptAst,
    reg: &PrimitiveRegistry,
    diags: &mut Vec<Diagnostic>,
) -> Option<CheckedStatement> {
    let mut err = |kind| {
        diags.push(Diagnostic { span: s.span, kind });
    };
    let resolution = match reg.primitive(&s.head) {
        Some(PrimitiveSpec::Sensor { target }) => Resolution::Sensor {
            target: target.clone(),
        },
        Some(PrimitiveSpec::Motor { model }) => Resolution::Motor {
            model: *model,
            resource: model.resource(),
        },
        None if ast.node_defs.contains_key(&s.head) => Resolution::Node {
            name: s.head.clone(),
        },
        None => {
            err(ValidationErrorKind::UnknownPrimitive(s.head.clone()));
            return None;
        }
    };

    let requires_target =
        matches!(resolution, Resolution::Motor { model, .. } if model.requires_target());
    let mut ok = true;
    match (&s.target, requires_target) {
        (None, true) => {
            err(ValidationErrorKind::MissingTarget(s.head.clone()));
            ok = false;
        }
        (Some(_), false) => {
            err(ValidationErrorKind::UnexpectedTarget(s.head.clone()));
            ok = false;
        }
        (Some(t), true) if reg.target_entity(t).is_none() => {
            err(ValidationErrorKind::UnknownTarget(t.clone()));
            ok = false;
        }
        _ => {}
    }

    // Named evaluations refer to the statement's target, or for a sensor to
    // the target it refreshes.
    let subject = s.target.clone().or_else(|| match &resolution {
        Resolution::Sensor { target } => Some(target.clone()),
        _ => None,
    });
    let evaluation = match &s.evaluation {
        None => None,
        Some(e @ (EvalExpr::Distance { .. } | EvalExpr::Interval { .. })) => {
            if reg.distance().is_none() {
                err(ValidationErrorKind::UnknownEvaluation("d".into()));
                ok = false;
            }
            Some(CheckedEval::Distance(e.clone()))
        }
        Some(EvalExpr::Named(name)) => match (reg.evaluation(name), subject) {
            (None, _) => {
                err(ValidationErrorKind::UnknownEvaluation(name.clone()));
                ok = false;
                None
            }
            (Some(_), None) => {
                err(ValidationErrorKind::EvaluationNeedsTarget {
                    head: s.head.clone(),
                    eval: name.clone(),
                });
                ok = false;
                None
            }
            (Some(NamedEvaluation::Seen), Some(target)) => Some(CheckedEval::Seen { target }),
            (Some(NamedEvaluation::Close { range }), Some(target)) => {
                Some(CheckedEval::Close { target, range })
            }
        },
    };

    ok.then(|| CheckedStatement {
        statement: s.clone(),
        resolution,
        evaluation,
    })
}

fn find_cycles(ast: &ScriptAst, diags: &mut Vec<Diagnostic>) {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }
    fn visit<'a>(
        name: &'a str,
        ast: &'a ScriptAst,
        marks: &mut BTreeMap<&'a str, Mark>,
        diags: &mut Vec<Diagnostic>,
    ) {
        marks.insert(name, Mark::Active);
        for s in &ast.node_defs[name].body {
            if !ast.node_defs.contains_key(&s.head) {
                continue;
            }
            match marks.get(s.head.as_str()).copied().unwrap_or(Mark::Fresh) {
                Mark::Active => diags.push(Diagnostic {
                    span: s.span,
                    kind: ValidationErrorKind::RecursiveNode(s.head.clone()),
                }),
                Mark::Fresh => visit(&s.head, ast, marks, diags),
                Mark::Done => {}
            }
        }
        marks.insert(name, Mark::Done);
    }
    let mut marks = BTreeMap::new();
    for name in ast.node_defs.keys() {
        if marks.get(name.as_str()).copied().unwrap_or(Mark::Fresh) == Mark::Fresh {
            visit(name, ast, &mut marks, diags);
        }
    }
}

/// Resolves every identifier in `ast` against `registry`. All problems are
/// reported together, ordered by source position.
pub fn validate(
    ast: &ScriptAst,
    registry: &PrimitiveRegistry,
) -> Result<CheckedScript, ValidationErrors> {
    let mut diags = Vec::new();
    let statements: Vec<_> = ast
        .statements
        .iter()
        .filter_map(|s| check_statement(s, ast, registry, &mut diags))
        .collect();
    let nodes: BTreeMap<_, _> = ast
        .node_defs
        .iter()
        .map(|(name, def)| {
            let body = def
                .body
                .iter()
                .filter_map(|s| check_statement(s, ast, registry, &mut diags))
                .collect::<Vec<_>>();
            (name.clone(), body)
        })
        .collect();
    find_cycles(ast, &mut diags);

    if diags.is_empty() {
        Ok(CheckedScript {
            ast: ast.clone(),
            statements,
            nodes,
            registry: registry.clone(),
        })
    } else {
        diags.sort_by_key(|d| (d.span.line, d.span.column));
        Err(ValidationErrors(diags))
    }
}
