//! Line-oriented parser for `.pf` scripts.
//!
//! ```text
//! script    := (statement | node_def)*
//! node_def  := "node" IDENT ":" NEWLINE (INDENT statement NEWLINE)*
//! statement := IDENT clause*
//! clause    := [","] ( "targeting" IDENT
//!                    | "whenever" eval
//!                    | "priority" "of" INT )
//! eval      := IDENT | "d" ("<" | ">") NUMBER | NUMBER "<" "d" "<" NUMBER
//! ```
//!
//! `#` starts a comment. Node bodies must use one consistent indentation
//! made of spaces.

use std::collections::btree_map::Entry;

use thiserror::Error;

use super::ast::{CmpOp, EvalExpr, NodeDef, ScriptAst, Span, Statement};

const KEYWORDS: [&str; 5] = ["node", "targeting", "whenever", "priority", "of"];
const DISTANCE: &str = "d";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("expected {expected}, found {found}")]
    Unexpected {
        expected: &'static str,
        found: String,
    },
    #[error("unexpected character `{0}`")]
    BadCharacter(char),
    #[error("node `{0}` is defined more than once")]
    DuplicateNode(String),
    #[error("`{0}` clause given twice")]
    DuplicateClause(&'static str),
    #[error("malformed priority `{0}`: expected a non-negative integer")]
    MalformedPriority(String),
    #[error("`{0}` is a reserved word")]
    Reserved(String),
    #[error("tab characters are not allowed in indentation")]
    TabIndent,
    #[error("indented line outside of a node definition")]
    UnexpectedIndent,
    #[error("inconsistent indentation: expected {expected} spaces, found {found}")]
    InconsistentIndent { expected: usize, found: usize },
    #[error("empty interval: lower bound {lower} is not below upper bound {upper}")]
    EmptyInterval { lower: f64, upper: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}:{}: {kind}", span.line, span.column)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Lt,
    Gt,
    Comma,
    Colon,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
        }
    }
}

fn lex(line: u32, text: &str, col0: usize) -> Result<Vec<(Tok, Span)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, (col0 + i + 1) as u32);
        if c == ' ' || c == '\t' {
            i += 1;
            continue;
        }
        let tok = match c {
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), span));
                continue;
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let start = i;
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                out.push((Tok::Number(chars[start..i].iter().collect()), span));
                continue;
            }
            other => {
                return Err(ParseError {
                    kind: ParseErrorKind::BadCharacter(other),
                    span,
                })
            }
        };
        out.push((tok, span));
        i += 1;
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    end: Span,
}

impl Cursor {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn span(&self) -> Span {
        self.toks.get(self.pos).map(|(_, s)| *s).unwrap_or(self.end)
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Unexpected {
                expected,
                found: self
                    .peek()
                    .map(Tok::describe)
                    .unwrap_or_else(|| "end of line".into()),
            },
            span: self.span(),
        }
    }

    fn next(&mut self) -> Option<(Tok, Span)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn ident(&mut self, expected: &'static str) -> Result<(String, Span), ParseError> {
        match self.peek() {
            Some(Tok::Ident(_)) => {
                let (Tok::Ident(s), span) = self.next().unwrap() else {
                    unreachable!()
                };
                Ok((s, span))
            }
            _ => Err(self.unexpected(expected)),
        }
    }

    /// A user-chosen identifier: not a keyword.
    fn name(&mut self, expected: &'static str) -> Result<(String, Span), ParseError> {
        let (s, span) = self.ident(expected)?;
        if KEYWORDS.contains(&s.as_str()) {
            return Err(ParseError {
                kind: ParseErrorKind::Reserved(s),
                span,
            });
        }
        Ok((s, span))
    }

    fn keyword(&mut self, kw: &'static str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected(kw)),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek() {
            Some(Tok::Number(text)) => {
                let v = text.parse::<f64>().ok().filter(|v| v.is_finite());
                match v {
                    Some(v) => {
                        self.pos += 1;
                        Ok(v)
                    }
                    None => Err(self.unexpected("a number")),
                }
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

fn parse_eval(cur: &mut Cursor) -> Result<EvalExpr, ParseError> {
    match cur.peek() {
        Some(Tok::Number(_)) => {
            let span = cur.span();
            let lower = cur.number()?;
            cur.expect(Tok::Lt, "`<`")?;
            cur.keyword(DISTANCE)?;
            cur.expect(Tok::Lt, "`<`")?;
            let upper = cur.number()?;
            if lower >= upper {
                return Err(ParseError {
                    kind: ParseErrorKind::EmptyInterval { lower, upper },
                    span,
                });
            }
            Ok(EvalExpr::Interval { lower, upper })
        }
        Some(Tok::Ident(_)) => {
            let (name, _) = cur.name("an evaluation")?;
            if name == DISTANCE {
                let op = match cur.next() {
                    Some((Tok::Lt, _)) => CmpOp::Lt,
                    Some((Tok::Gt, _)) => CmpOp::Gt,
                    _ => {
                        cur.pos -= 1;
                        return Err(cur.unexpected("`<` or `>`"));
                    }
                };
                let threshold = cur.number()?;
                Ok(EvalExpr::Distance { op, threshold })
            } else {
                Ok(EvalExpr::Named(name))
            }
        }
        _ => Err(cur.unexpected("an evaluation")),
    }
}

fn parse_statement(cur: &mut Cursor) -> Result<Statement, ParseError> {
    let (head, span) = cur.name("a primitive or node name")?;
    let mut stmt = Statement::new(head);
    stmt.span = span;
    let (mut seen_target, mut seen_eval, mut seen_prio) = (false, false, false);
    while !cur.at_end() {
        if cur.peek() == Some(&Tok::Comma) {
            cur.pos += 1;
        }
        let clause_span = cur.span();
        let dup = |name| ParseError {
            kind: ParseErrorKind::DuplicateClause(name),
            span: clause_span,
        };
        match cur.peek() {
            Some(Tok::Ident(kw)) if kw == "targeting" => {
                cur.pos += 1;
                if std::mem::replace(&mut seen_target, true) {
                    return Err(dup("targeting"));
                }
                stmt.target = Some(cur.name("a target name")?.0);
            }
            Some(Tok::Ident(kw)) if kw == "whenever" => {
                cur.pos += 1;
                if std::mem::replace(&mut seen_eval, true) {
                    return Err(dup("whenever"));
                }
                stmt.evaluation = Some(parse_eval(cur)?);
            }
            Some(Tok::Ident(kw)) if kw == "priority" => {
                cur.pos += 1;
                if std::mem::replace(&mut seen_prio, true) {
                    return Err(dup("priority"));
                }
                cur.keyword("of")?;
                let span = cur.span();
                let text = match cur.next() {
                    Some((Tok::Number(t), _)) => t,
                    Some((Tok::Ident(t), _)) => t,
                    _ => {
                        cur.pos -= 1;
                        return Err(cur.unexpected("a priority"));
                    }
                };
                let valid = text.bytes().all(|b| b.is_ascii_digit());
                stmt.priority =
                    valid
                        .then(|| text.parse::<u32>().ok())
                        .flatten()
                        .ok_or(ParseError {
                            kind: ParseErrorKind::MalformedPriority(text),
                            span,
                        })?;
            }
            _ => return Err(cur.unexpected("`targeting`, `whenever` or `priority`")),
        }
    }
    Ok(stmt)
}

fn cursor_for(line: u32, content: &str, indent: usize) -> Result<Cursor, ParseError> {
    Ok(Cursor {
        toks: lex(line, content, indent)?,
        pos: 0,
        end: Span::new(line, (indent + content.chars().count() + 1) as u32),
    })
}

/// Parses script source into an AST.
pub fn parse_script(text: &str) -> Result<ScriptAst, ParseError> {
    let mut ast = ScriptAst::default();
    // (node name, body indentation once known)
    let mut open: Option<(String, Option<usize>)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = (idx + 1) as u32;
        let code = raw.split('#').next().unwrap_or("").trim_end();
        if code.trim().is_empty() {
            continue;
        }
        let content = code.trim_start_matches([' ', '\t']);
        let leading = &code[..code.len() - content.len()];
        if leading.contains('\t') {
            return Err(ParseError {
                kind: ParseErrorKind::TabIndent,
                span: Span::new(line, 1),
            });
        }
        let indent = leading.len();
        let mut cur = cursor_for(line, content, indent)?;

        if indent == 0 {
            open = None;
            if matches!(cur.peek(), Some(Tok::Ident(s)) if s == "node") {
                let header = cur.span();
                cur.pos += 1;
                let (name, _) = cur.name("a node name")?;
                cur.expect(Tok::Colon, "`:`")?;
                if !cur.at_end() {
                    return Err(cur.unexpected("end of line"));
                }
                match ast.node_defs.entry(name.clone()) {
                    Entry::Occupied(_) => {
                        return Err(ParseError {
                            kind: ParseErrorKind::DuplicateNode(name),
                            span: header,
                        })
                    }
                    Entry::Vacant(v) => {
                        v.insert(NodeDef {
                            name: name.clone(),
                            span: header,
                            body: Vec::new(),
                        });
                    }
                }
                open = Some((name, None));
            } else {
                ast.statements.push(parse_statement(&mut cur)?);
            }
            continue;
        }

        let Some((node, body_indent)) = open.as_mut() else {
            return Err(ParseError {
                kind: ParseErrorKind::UnexpectedIndent,
                span: Span::new(line, 1),
            });
        };
        let expected = *body_indent.get_or_insert(indent);
        if expected != indent {
            return Err(ParseError {
                kind: ParseErrorKind::InconsistentIndent {
                    expected,
                    found: indent,
                },
                span: Span::new(line, 1),
            });
        }
        let stmt = parse_statement(&mut cur)?;
        ast.node_defs
            .get_mut(node.as_str())
            .expect("open node is registered")
            .body
            .push(stmt);
    }
    Ok(ast)
}
