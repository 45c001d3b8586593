use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Source location of a statement (1-based).
///
/// Spans compare equal regardless of position so that two ASTs parsed from
/// differently laid out sources are structurally equal.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl Span {
    pub fn new(line: u32, column: u32) -> Self {
        Self { line, column }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Gt,
}

/// An activation rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EvalExpr {
    /// A registry evaluation such as `seen` or `close`.
    Named(String),
    /// `d < c` or `d > c`.
    Distance { op: CmpOp, threshold: f64 },
    /// `lower < d < upper`, with `lower < upper`.
    Interval { lower: f64, upper: f64 },
}

impl EvalExpr {
    pub fn above(threshold: f64) -> Self {
        EvalExpr::Distance {
            op: CmpOp::Gt,
            threshold,
        }
    }

    pub fn below(threshold: f64) -> Self {
        EvalExpr::Distance {
            op: CmpOp::Lt,
            threshold,
        }
    }

    pub fn uses_distance(&self) -> bool {
        !matches!(self, EvalExpr::Named(_))
    }

    /// Evaluates a distance rule against `d`. Named rules return `None`.
    pub fn test_distance(&self, d: f64) -> Option<bool> {
        match *self {
            EvalExpr::Named(_) => None,
            EvalExpr::Distance {
                op: CmpOp::Lt,
                threshold,
            } => Some(d < threshold),
            EvalExpr::Distance {
                op: CmpOp::Gt,
                threshold,
            } => Some(d > threshold),
            EvalExpr::Interval { lower, upper } => Some(lower < d && d < upper),
        }
    }
}

impl fmt::Display for EvalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalExpr::Named(n) => f.write_str(n),
            EvalExpr::Distance {
                op: CmpOp::Lt,
                threshold,
            } => write!(f, "d < {threshold}"),
            EvalExpr::Distance {
                op: CmpOp::Gt,
                threshold,
            } => write!(f, "d > {threshold}"),
            EvalExpr::Interval { lower, upper } => write!(f, "{lower} < d < {upper}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    /// Primitive or node name.
    pub head: String,
    pub target: Option<String>,
    pub evaluation: Option<EvalExpr>,
    pub priority: u32,
    pub span: Span,
}

impl Statement {
    pub fn new(head: impl Into<String>) -> Self {
        Self {
            head: head.into(),
            target: None,
            evaluation: None,
            priority: 0,
            span: Span::default(),
        }
    }

    pub fn targeting(mut self, target: impl Into<String>) -> Self {
        self.target = Some(target.into());
        self
    }

    pub fn whenever(mut self, eval: EvalExpr) -> Self {
        self.evaluation = Some(eval);
        self
    }

    pub fn priority(mut self, p: u32) -> Self {
        self.priority = p;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDef {
    pub name: String,
    pub span: Span,
    pub body: Vec<Statement>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptAst {
    pub statements: Vec<Statement>,
    pub node_defs: BTreeMap<String, NodeDef>,
}

impl ScriptAst {
    pub fn is_empty(&self) -> bool {
        self.statements.is_empty() && self.node_defs.is_empty()
    }

    pub fn add_node(&mut self, name: impl Into<String>, body: Vec<Statement>) {
        let name = name.into();
        self.node_defs.insert(
            name.clone(),
            NodeDef {
                name,
                span: Span::default(),
                body,
            },
        );
    }
}
