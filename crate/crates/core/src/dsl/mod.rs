//! Textual assemblage notation and its compilation to [`Fsm`]s.
//!
//! ```text
//! HOM_FOR      = OFF,
//! OFF          = (on->WANDER),
//! WANDER       = (red_visible->ACQUIRE_RED
//!                |off->OFF),
//! ACQUIRE_RED  = (red_in_gripper->WANDER).
//! ```
//!
//! Grammar:
//!
//! ```text
//! program := header def* last-def
//! header  := STATE "=" STATE ","
//! def     := STATE "=" "(" alt ("|" alt)* ")" ("," | ".")
//! alt     := releaser "->" STATE
//! ```
//!
//! State identifiers are `[A-Z][A-Z0-9_]*`, releasers `[a-z][a-z0-9_]*`.
//! `//` starts a comment that runs to end of line.

mod lexer;
mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::fsm::{is_state_name, validate_fsm, Finding, Fsm, Releaser, StateId, Transition};

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse_assemblage, parse_assemblage_bytes};

/// 1-based position of a diagnostic in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl SourceSpan {
    pub fn new(line: usize, column: usize, length: usize) -> Self {
        Self { line, column, length: length.max(1) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    UnexpectedChar(char),
    BadIdentifier(String),
    InvalidUtf8,
    Expected { expected: String, found: String },
    TrailingInput,
    DuplicateState(String),
    ProcessNameReused(String),
    UndefinedState(String),
    DuplicateReleaser { state: String, releaser: String },
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            DiagnosticKind::BadIdentifier(w) => write!(
                f,
                "invalid identifier `{w}`: states are UPPER_CASE, releasers lower_case"
            ),
            DiagnosticKind::InvalidUtf8 => write!(f, "invalid UTF-8"),
            DiagnosticKind::Expected { expected, found } => {
                write!(f, "expected {expected}, found {found}")
            }
            DiagnosticKind::TrailingInput => write!(f, "unexpected input after final `.`"),
            DiagnosticKind::DuplicateState(s) => write!(f, "duplicate definition of state {s}"),
            DiagnosticKind::ProcessNameReused(s) => {
                write!(f, "process name {s} cannot also name a state")
            }
            DiagnosticKind::UndefinedState(s) => write!(f, "undefined state reference: {s}"),
            DiagnosticKind::DuplicateReleaser { state, releaser } => {
                write!(f, "duplicate releaser `{releaser}` in state {state}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}:{}: {kind}", span.line, span.column)]
pub struct Diagnostic {
    pub span: SourceSpan,
    pub kind: DiagnosticKind,
}

impl Diagnostic {
    pub fn new(span: SourceSpan, kind: DiagnosticKind) -> Self {
        Self { span, kind }
    }

    /// `file:line:col: message`
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alternative {
    pub releaser: Ident,
    pub target: Ident,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateDef {
    pub name: Ident,
    pub alternatives: Vec<Alternative>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssemblageAst {
    pub process_name: Ident,
    pub start_ref: Ident,
    pub state_defs: Vec<StateDef>,
}

/// Closed-world and uniqueness checks shared by the parser and compiler.
pub(crate) fn check_ast(ast: &AssemblageAst) -> Vec<Diagnostic> {
    let mut errors = Vec::new();
    let mut defined = BTreeSet::new();
    for def in &ast.state_defs {
        if def.name.name == ast.process_name.name {
            errors.push(Diagnostic::new(
                def.name.span,
                DiagnosticKind::ProcessNameReused(def.name.name.clone()),
            ));
        }
        let mut releasers = BTreeSet::new();
        for alt in &def.alternatives {
            if !releasers.insert(alt.releaser.name.as_str()) {
                errors.push(Diagnostic::new(
                    alt.releaser.span,
                    DiagnosticKind::DuplicateReleaser {
                        state: def.name.name.clone(),
                        releaser: alt.releaser.name.clone(),
                    },
                ));
            }
        }
        if !defined.insert(def.name.name.as_str()) {
            errors.push(Diagnostic::new(
                def.name.span,
                DiagnosticKind::DuplicateState(def.name.name.clone()),
            ));
        }
    }
    let refs = std::iter::once(&ast.start_ref)
        .chain(ast.state_defs.iter().flat_map(|d| d.alternatives.iter().map(|a| &a.target)));
    for r in refs {
        if !defined.contains(r.name.as_str()) {
            errors.push(Diagnostic::new(r.span, DiagnosticKind::UndefinedState(r.name.clone())));
        }
    }
    errors.sort_by_key(|d| (d.span.line, d.span.column));
    errors
}

/// State numbering of the three reference assemblages, keyed by process name.
/// A source whose process name and state set match one of these gets this
/// numbering; anything else is numbered start-first, then by definition order.
pub const REFERENCE_NUMBERINGS: &[(&str, &[&str])] = &[
    (
        "HOM_FOR",
        &["OFF", "DELIVER_BLUE", "DELIVER_RED", "ACQUIRE_BLUE", "WANDER", "ACQUIRE_RED"],
    ),
    ("FORWARD", &["OFF", "GO_TO_BALL", "BEHIND_BALL", "WANDER"]),
    ("GOALKEEPER", &["OFF", "GO_TO_BALL", "DEFEND", "WANDER"]),
];

fn reference_numbering(ast: &AssemblageAst) -> Option<&'static [&'static str]> {
    let names: BTreeSet<&str> = ast.state_defs.iter().map(|d| d.name.name.as_str()).collect();
    REFERENCE_NUMBERINGS.iter().find_map(|(process, order)| {
        let table: BTreeSet<&str> = order.iter().copied().collect();
        (*process == ast.process_name.name && table == names && order[0] == ast.start_ref.name)
            .then_some(*order)
    })
}

/// Compiles an AST: one state per definition, one transition per
/// alternative (priority = source order), finals = {start}.
pub fn compile_assemblage(ast: &AssemblageAst) -> Result<Fsm, Vec<Diagnostic>> {
    let errors = check_ast(ast);
    if !errors.is_empty() {
        return Err(errors);
    }

    let order: Vec<&str> = match reference_numbering(ast) {
        Some(order) => order.to_vec(),
        None => std::iter::once(ast.start_ref.name.as_str())
            .chain(
                ast.state_defs
                    .iter()
                    .map(|d| d.name.name.as_str())
                    .filter(|n| *n != ast.start_ref.name),
            )
            .collect(),
    };
    let index: BTreeMap<&str, u32> =
        order.iter().enumerate().map(|(i, name)| (*name, i as u32)).collect();

    let states = order.iter().map(|name| StateId::new(index[name], *name)).collect();
    let mut alphabet = BTreeSet::new();
    let mut transitions = Vec::new();
    for def in &ast.state_defs {
        for alt in &def.alternatives {
            // The lexer only produces well-formed releaser names.
            let releaser = Releaser::new(alt.releaser.name.clone()).map_err(|_| {
                vec![Diagnostic::new(
                    alt.releaser.span,
                    DiagnosticKind::BadIdentifier(alt.releaser.name.clone()),
                )]
            })?;
            alphabet.insert(releaser.clone());
            transitions.push(Transition {
                from: index[def.name.name.as_str()],
                releaser,
                to: index[alt.target.name.as_str()],
            });
        }
    }
    let start = index[ast.start_ref.name.as_str()];
    Ok(Fsm::new(
        ast.process_name.name.clone(),
        states,
        alphabet,
        transitions,
        start,
        BTreeSet::from([start]),
    ))
}

/// Parse and compile in one step.
pub fn compile_source(source: &str) -> Result<Fsm, Vec<Diagnostic>> {
    compile_assemblage(&parse_assemblage(source)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("state {0} has no outgoing transitions and cannot be written as a definition")]
    DeadEnd(String),
    #[error("state label `{0}` is not a valid state identifier")]
    BadLabel(String),
    #[error("final states must be exactly {{start}} to be expressible in assemblage notation")]
    Finals,
    #[error("machine is malformed: {0}")]
    Malformed(String),
}

/// Writes a machine back in assemblage notation, definitions in state-index
/// order and alternatives in priority order.
///
/// Recompiling the output yields the same machine when its numbering is
/// reproducible: start state first with definitions following in index
/// order, or one of the [`REFERENCE_NUMBERINGS`].
pub fn render_assemblage(fsm: &Fsm) -> Result<String, RenderError> {
    let structural: Vec<String> = validate_fsm(fsm)
        .findings
        .iter()
        .filter(|f| !matches!(f, Finding::Unreachable(_)))
        .map(|f| f.to_string())
        .collect();
    if !structural.is_empty() {
        return Err(RenderError::Malformed(structural.join("; ")));
    }
    if fsm.finals != BTreeSet::from([fsm.start]) {
        return Err(RenderError::Finals);
    }
    for s in &fsm.states {
        if !is_state_name(&s.label) {
            return Err(RenderError::BadLabel(s.label.clone()));
        }
        if fsm.outgoing(s.index).next().is_none() {
            return Err(RenderError::DeadEnd(s.label.clone()));
        }
    }

    let labels: BTreeSet<&str> = fsm.states.iter().map(|s| s.label.as_str()).collect();
    let name = if is_state_name(&fsm.name) && !labels.contains(fsm.name.as_str()) {
        fsm.name.clone()
    } else {
        (0..).map(|i| format!("P{i}")).find(|n| !labels.contains(n.as_str())).unwrap_or_default()
    };
    let label = |i: u32| fsm.label(i).unwrap_or_default();

    let width = labels.iter().map(|l| l.len()).chain([name.len()]).max().unwrap_or(0);
    let mut out = format!("{name:<width$} = {},\n", label(fsm.start));
    let last = fsm.states.len() - 1;
    for (i, s) in fsm.states.iter().enumerate() {
        let pad = " ".repeat(width + 3);
        let alts: Vec<String> =
            fsm.outgoing(s.index).map(|t| format!("{}->{}", t.releaser, label(t.to))).collect();
        let body = alts.join(&format!("\n{pad}|"));
        let term = if i == last { '.' } else { ',' };
        out.push_str(&format!("{:<width$} = ({body}){term}\n", s.label));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_state_machine() {
        let fsm = compile_source("P = A,\nA = (on->A).").unwrap();
        assert_eq!(fsm.states, vec![StateId::new(0, "A")]);
        assert_eq!(fsm.transitions.len(), 1);
        assert_eq!(fsm.finals, BTreeSet::from([fsm.start]));
        assert_eq!(render_assemblage(&fsm).unwrap(), "P = A,\nA = (on->A).\n");
    }

    #[test]
    fn canonical_numbering_is_start_then_definition_order() {
        let fsm = compile_source("Q = B,\nA = (x->B),\nB = (y->A|z->C),\nC = (w->B).").unwrap();
        let labels: Vec<_> = fsm.states.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["B", "A", "C"]);
        assert_eq!(fsm.start, 0);
        assert_eq!(fsm.to_table(), "0 y 1\n0 z 2\n1 x 0\n2 w 0\n");
    }

    #[test]
    fn reference_numbering_needs_matching_state_set() {
        // Right process name, wrong states: falls back to canonical order.
        let fsm = compile_source("FORWARD = OFF,\nOFF = (on->RUN),\nRUN = (off->OFF).").unwrap();
        assert_eq!(fsm.index_of("RUN"), Some(1));
    }

    #[test]
    fn process_name_may_not_be_a_state() {
        let errs = compile_source("P = P,\nP = (on->P).").unwrap_err();
        assert!(errs[0].to_string().contains("cannot also name a state"));
    }

    #[test]
    fn render_rejects_dead_end() {
        let mut fsm = compile_source("P = A,\nA = (on->B),\nB = (off->A).").unwrap();
        fsm.transitions.retain(|t| t.from == 0);
        assert_eq!(render_assemblage(&fsm), Err(RenderError::DeadEnd("B".into())));
    }

    #[test]
    fn render_avoids_name_clash() {
        let mut fsm = compile_source("P = A,\nA = (on->A).").unwrap();
        fsm.name = "A".into();
        assert!(render_assemblage(&fsm).unwrap().starts_with("P0 = A,"));
    }

    #[test]
    fn diagnostic_with_file_prefix() {
        let errs = compile_source("P = A,\nA = (on->B).").unwrap_err();
        assert_eq!(errs[0].render("x.asm.txt"), "x.asm.txt:2:10: undefined state reference: B");
    }
}
