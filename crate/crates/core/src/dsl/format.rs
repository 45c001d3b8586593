use std::fmt::Write;

use super::ast::{ScriptAst, Statement};

const INDENT: &str = "    ";

fn write_statement(out: &mut String, s: &Statement) {
    out.push_str(&s.head);
    if let Some(t) = &s.target {
        let _ = write!(out, " targeting {t}");
    }
    if let Some(e) = &s.evaluation {
        let _ = write!(out, " whenever {e}");
    }
    if s.priority != 0 {
        let _ = write!(out, ", priority of {}", s.priority);
    }
    out.push('\n');
}

/// Renders the canonical text of a script: top-level statements first, then
/// one block per node definition in name order, blocks separated by a blank
/// line. A priority of zero is left implicit.
pub fn format_script(ast: &ScriptAst) -> String {
    let mut out = String::new();
    for s in &ast.statements {
        write_statement(&mut out, s);
    }
    for node in ast.node_defs.values() {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "node {}:", node.name);
        for s in &node.body {
            out.push_str(INDENT);
            write_statement(&mut out, s);
        }
    }
    out
}
