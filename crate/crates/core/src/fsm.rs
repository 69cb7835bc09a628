//! Releaser-driven finite state machines `(K, Σ, δ, s, F)`.
//!
//! A machine sequences behavioral assemblages: each state names a behavior,
//! each releaser is a boolean perceptual trigger, and the transition map says
//! which behavior follows when a releaser fires. Missing `(state, releaser)`
//! entries are implicit self-loops, so a robot keeps its behavior until one
//! of the releasers defined for that behavior fires.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FsmError {
    #[error("invalid releaser name `{0}`: expected [a-z][a-z0-9_]*")]
    InvalidReleaser(String),
    #[error("unknown state index {0}")]
    UnknownState(u32),
    #[error("unknown state label `{0}`")]
    UnknownLabel(String),
    #[error("releaser `{0}` is not in the machine's alphabet")]
    UnknownReleaser(String),
    #[error("malformed transition table line {line}: {message}")]
    Table { line: usize, message: String },
}

/// A perceptual trigger name such as `red_visible` or `close_to_ball`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Releaser(String);

impl Releaser {
    pub fn new(name: impl Into<String>) -> Result<Self, FsmError> {
        let name = name.into();
        if is_releaser_name(&name) {
            Ok(Self(name))
        } else {
            Err(FsmError::InvalidReleaser(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// `[a-z][a-z0-9_]*`
pub fn is_releaser_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

/// `[A-Z][A-Z0-9_]*`
pub fn is_state_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('A'..='Z'))
        && chars.all(|c| matches!(c, 'A'..='Z' | '0'..='9' | '_'))
}

impl TryFrom<String> for Releaser {
    type Error = FsmError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Releaser::new(value)
    }
}

impl From<Releaser> for String {
    fn from(r: Releaser) -> String {
        r.0
    }
}

impl fmt::Display for Releaser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateId {
    pub index: u32,
    pub label: String,
}

impl StateId {
    pub fn new(index: u32, label: impl Into<String>) -> Self {
        Self { index, label: label.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: u32,
    pub releaser: Releaser,
    pub to: u32,
}

/// A flat sequential machine.
///
/// `transitions` is kept grouped by source state (ascending index); within one
/// source the order is the firing priority of the alternatives. Duplicate
/// `(from, releaser)` pairs are representable so that [`validate_fsm`] can
/// report them; [`step_fsm`] uses the first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fsm {
    /// Process name, e.g. `HOM_FOR`. Not part of the 5-tuple; used when
    /// rendering back to assemblage notation.
    pub name: String,
    pub states: Vec<StateId>,
    pub alphabet: BTreeSet<Releaser>,
    pub transitions: Vec<Transition>,
    pub start: u32,
    pub finals: BTreeSet<u32>,
}

impl Fsm {
    /// Builds a machine, sorting states by index and grouping transitions by
    /// source while preserving the relative order of each source's entries.
    pub fn new(
        name: impl Into<String>,
        mut states: Vec<StateId>,
        alphabet: BTreeSet<Releaser>,
        mut transitions: Vec<Transition>,
        start: u32,
        finals: BTreeSet<u32>,
    ) -> Self {
        states.sort_by_key(|s| s.index);
        transitions.sort_by_key(|t| t.from);
        Self { name: name.into(), states, alphabet, transitions, start, finals }
    }

    pub fn state(&self, index: u32) -> Option<&StateId> {
        self.states.iter().find(|s| s.index == index)
    }

    pub fn label(&self, index: u32) -> Option<&str> {
        self.state(index).map(|s| s.label.as_str())
    }

    pub fn index_of(&self, label: &str) -> Option<u32> {
        self.states.iter().find(|s| s.label == label).map(|s| s.index)
    }

    pub fn contains_state(&self, index: u32) -> bool {
        self.state(index).is_some()
    }

    /// Outgoing transitions of `from`, in priority order.
    pub fn outgoing(&self, from: u32) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.from == from)
    }

    pub fn target(&self, from: u32, releaser: &Releaser) -> Option<u32> {
        self.outgoing(from).find(|t| &t.releaser == releaser).map(|t| t.to)
    }

    pub fn releaser(&self, name: &str) -> Option<&Releaser> {
        self.alphabet.iter().find(|r| r.as_str() == name)
    }

    /// Canonical transition table: one `<from> <releaser> <to>` line per
    /// transition, ordered by source index and then by firing priority.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for t in &self.transitions {
            out.push_str(&format!("{} {} {}\n", t.from, t.releaser, t.to));
        }
        out
    }

    /// Graphviz rendering of the state graph.
    pub fn to_dot(&self) -> String {
        let name = if self.name.is_empty() { "P" } else { self.name.as_str() };
        let mut out = format!("digraph {name} {{\n  rankdir=LR;\n");
        for s in &self.states {
            let shape = if self.finals.contains(&s.index) { "doublecircle" } else { "circle" };
            out.push_str(&format!(
                "  s{} [label=\"{}\\n{}\", shape={}];\n",
                s.index, s.index, s.label, shape
            ));
        }
        out.push_str(&format!("  start [shape=point];\n  start -> s{};\n", self.start));
        for t in &self.transitions {
            out.push_str(&format!("  s{} -> s{} [label=\"{}\"];\n", t.from, t.to, t.releaser));
        }
        out.push_str("}\n");
        out
    }
}

/// Parses the lines of a canonical transition table back into transitions.
pub fn parse_table(text: &str) -> Result<Vec<Transition>, FsmError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: &str| FsmError::Table { line: i + 1, message: message.to_string() };
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(bad("expected `<from> <releaser> <to>`"));
        }
        let from = parts[0].parse().map_err(|_| bad("bad source index"))?;
        let releaser = Releaser::new(parts[1]).map_err(|e| bad(&e.to_string()))?;
        let to = parts[2].parse().map_err(|_| bad("bad target index"))?;
        out.push(Transition { from, releaser, to });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub from: u32,
    pub fired: Option<Releaser>,
    pub to: u32,
    pub tick: u64,
}

/// One problem found by [`validate_fsm`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    DuplicateIndex(u32),
    DuplicateLabel(String),
    MissingStart(u32),
    MissingFinal(u32),
    DanglingSource { from: u32, releaser: Releaser },
    DanglingTarget { from: u32, releaser: Releaser, to: u32 },
    UndeclaredReleaser { from: u32, releaser: Releaser },
    Nondeterministic { state: String, releaser: Releaser },
    Unreachable(String),
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DuplicateIndex(i) => write!(f, "duplicate state index: {i}"),
            Finding::DuplicateLabel(l) => write!(f, "duplicate state label: {l}"),
            Finding::MissingStart(i) => write!(f, "start state {i} not in states"),
            Finding::MissingFinal(i) => write!(f, "final state {i} not in states"),
            Finding::DanglingSource { from, releaser } => {
                write!(f, "dangling source: {from} --{releaser}->")
            }
            Finding::DanglingTarget { from, releaser, to } => {
                write!(f, "dangling target: {from} --{releaser}-> {to}")
            }
            Finding::UndeclaredReleaser { from, releaser } => {
                write!(f, "dangling releaser: {releaser} (from {from})")
            }
            Finding::Nondeterministic { state, releaser } => {
                write!(f, "nondeterministic: ({state}, {releaser})")
            }
            Finding::Unreachable(l) => write!(f, "unreachable: {l}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        Ok(())
    }
}

/// Checks the structural invariants and reachability from the start state.
/// The report is empty exactly when the machine is well formed.
pub fn validate_fsm(fsm: &Fsm) -> ValidationReport {
    let mut findings = Vec::new();

    let mut by_index: BTreeMap<u32, &str> = BTreeMap::new();
    let mut labels = BTreeSet::new();
    for s in &fsm.states {
        if by_index.insert(s.index, &s.label).is_some() {
            findings.push(Finding::DuplicateIndex(s.index));
        }
        if !labels.insert(s.label.as_str()) {
            findings.push(Finding::DuplicateLabel(s.label.clone()));
        }
    }
    let start_ok = by_index.contains_key(&fsm.start);
    if !start_ok {
        findings.push(Finding::MissingStart(fsm.start));
    }
    for f in &fsm.finals {
        if !by_index.contains_key(f) {
            findings.push(Finding::MissingFinal(*f));
        }
    }

    let mut seen: BTreeSet<(u32, &Releaser)> = BTreeSet::new();
    let mut reported: BTreeSet<(u32, &Releaser)> = BTreeSet::new();
    for t in &fsm.transitions {
        if !by_index.contains_key(&t.from) {
            findings.push(Finding::DanglingSource { from: t.from, releaser: t.releaser.clone() });
        }
        if !by_index.contains_key(&t.to) {
            findings.push(Finding::DanglingTarget {
                from: t.from,
                releaser: t.releaser.clone(),
                to: t.to,
            });
        }
        if !fsm.alphabet.contains(&t.releaser) {
            findings.push(Finding::UndeclaredReleaser { from: t.from, releaser: t.releaser.clone() });
        }
        let key = (t.from, &t.releaser);
        if !seen.insert(key) && reported.insert(key) {
            let state = by_index.get(&t.from).map_or_else(|| t.from.to_string(), |l| l.to_string());
            findings.push(Finding::Nondeterministic { state, releaser: t.releaser.clone() });
        }
    }

    if start_ok {
        let mut reached = BTreeSet::from([fsm.start]);
        let mut queue = VecDeque::from([fsm.start]);
        while let Some(s) = queue.pop_front() {
            for t in fsm.outgoing(s) {
                if by_index.contains_key(&t.to) && reached.insert(t.to) {
                    queue.push_back(t.to);
                }
            }
        }
        for s in &fsm.states {
            if !reached.contains(&s.index) {
                findings.push(Finding::Unreachable(s.label.clone()));
            }
        }
    }

    ValidationReport { findings }
}

/// Fires the first releaser of `active` (caller priority) that has a
/// transition out of `current`; with none, the machine stays put.
pub fn step_fsm(fsm: &Fsm, current: u32, active: &[Releaser]) -> Result<StepRecord, FsmError> {
    step_fsm_at(fsm, current, active, 0)
}

pub(crate) fn step_fsm_at(
    fsm: &Fsm,
    current: u32,
    active: &[Releaser],
    tick: u64,
) -> Result<StepRecord, FsmError> {
    if !fsm.contains_state(current) {
        return Err(FsmError::UnknownState(current));
    }
    if let Some(r) = active.iter().find(|r| !fsm.alphabet.contains(*r)) {
        return Err(FsmError::UnknownReleaser(r.to_string()));
    }
    for r in active {
        if let Some(to) = fsm.target(current, r) {
            return Ok(StepRecord { from: current, fired: Some(r.clone()), to, tick });
        }
    }
    Ok(StepRecord { from: current, fired: None, to: current, tick })
}

/// Folds [`step_fsm`] over a stimulus sequence starting from `fsm.start`.
pub fn run_sequence(fsm: &Fsm, stimuli: &[Vec<Releaser>]) -> Result<Vec<StepRecord>, FsmError> {
    let mut current = fsm.start;
    let mut records = Vec::with_capacity(stimuli.len());
    for (tick, active) in stimuli.iter().enumerate() {
        let rec = step_fsm_at(fsm, current, active, tick as u64)?;
        current = rec.to;
        records.push(rec);
    }
    Ok(records)
}
