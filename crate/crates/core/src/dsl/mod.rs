//! The `.pf` behavior scripting language.

mod ast;
mod format;
mod parser;
mod registry;
mod validate;

pub use ast::{CmpOp, EvalExpr, NodeDef, ScriptAst, Span, Statement};
pub use format::format_script;
pub use parser::{parse_script, ParseError, ParseErrorKind};
pub use registry::{
    Association, DistanceFeature, Entity, MotorModel, NamedEvaluation, PrimitiveRegistry,
    PrimitiveSpec, RegistryBuilder, RegistryError, Resource,
};
pub use validate::{
    validate, CheckedEval, CheckedScript, CheckedStatement, Diagnostic, Resolution,
    ValidationErrorKind, ValidationErrors,
};
