//! The model file format.
//!
//! ```text
//! model process|test <name>
//! alphabet a, b, ...
//! success w1, w2, ...           # tests only
//! state <id> { <label> -> { <frac> <id>, ... }; ... }
//! init <name> = { <frac> <id>, ... }
//! ```
//!
//! Files are UTF-8, `#` starts a comment running to end of line, and weights are
//! written as plain fractions (`1/2`, `1`) — no decimals, so what you read is what
//! the engine computes with. Transition targets and init distributions must sum to
//! exactly 1. Success actions are identifiers starting with `w`, declared in the
//! `success` header of a test; they are illegal in process files. The same visible
//! label may head several transitions of one state — that is how nondeterminism is
//! written down.

use crate::plts::{Label, Plts, StateId};
use crate::subdist::Subdistribution;
use crate::Rational;
use num_traits::One;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Process,
    Test,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Process => write!(f, "process"),
            ModelKind::Test => write!(f, "test"),
        }
    }
}

/// A parsed model: the transition system plus its named initial distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    pub name: String,
    pub kind: ModelKind,
    pub plts: Plts,
    pub inits: BTreeMap<String, Subdistribution>,
    /// Declaration order of the init names; the first one is the default.
    pub init_order: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("undeclared state `{name}` at {line}:{col}")]
    UndeclaredState { name: String, line: usize, col: usize },
    #[error("distribution for {context} has weight sum {mass}, expected exactly 1")]
    WeightSumNotOne { context: String, mass: Rational },
    #[error("illegal label `{label}` at {line}:{col}: {reason}")]
    IllegalLabel { label: String, reason: String, line: usize, col: usize },
    #[error("expected a {expected} model, file declares a {found} model")]
    KindMismatch { expected: ModelKind, found: ModelKind },
}

/// A way in which a test file fails the two well-formedness conditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestViolation {
    /// Condition (A): a state enables two distinct success actions.
    MultipleSuccesses { state: String, labels: Vec<String> },
    /// Condition (B): a state enables a success action and a visible/tau move whose
    /// target contains a state not enabling that same success action.
    SuccessNotInherited { state: String, success: String, label: String, offender: String },
}

impl fmt::Display for TestViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestViolation::MultipleSuccesses { state, labels } => {
                write!(f, "state {} enables several success actions: {}", state, labels.join(", "))
            }
            TestViolation::SuccessNotInherited { state, success, label, offender } => write!(
                f,
                "state {} enables {} but its {} move reaches {}, which does not",
                state, success, label, offender
            ),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Frac(Rational),
    LBrace,
    RBrace,
    Semi,
    Comma,
    Equals,
    Arrow,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: &[&str] = &["model", "process", "test", "alphabet", "success", "state", "init"];

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    loop {
        let (l, c) = (line, col);
        let Some(&ch) = chars.peek() else {
            out.push(Spanned { tok: Tok::Eof, line, col });
            return Ok(out);
        };
        match ch {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '#' => {
                while let Some(&c2) = chars.peek() {
                    if c2 == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '{' => {
                bump!();
                out.push(Spanned { tok: Tok::LBrace, line: l, col: c });
            }
            '}' => {
                bump!();
                out.push(Spanned { tok: Tok::RBrace, line: l, col: c });
            }
            ';' => {
                bump!();
                out.push(Spanned { tok: Tok::Semi, line: l, col: c });
            }
            ',' => {
                bump!();
                out.push(Spanned { tok: Tok::Comma, line: l, col: c });
            }
            '=' => {
                bump!();
                out.push(Spanned { tok: Tok::Equals, line: l, col: c });
            }
            '-' => {
                bump!();
                if chars.peek() == Some(&'>') {
                    bump!();
                    out.push(Spanned { tok: Tok::Arrow, line: l, col: c });
                } else {
                    return Err(ParseError::Syntax {
                        line: l,
                        col: c,
                        message: "expected `->`".into(),
                    });
                }
            }
            '0'..='9' => {
                let mut num = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        num.push(d);
                        bump!();
                    } else {
                        break;
                    }
                }
                let text = if chars.peek() == Some(&'/') {
                    bump!();
                    let mut den = String::new();
                    while let Some(&d) = chars.peek() {
                        if d.is_ascii_digit() {
                            den.push(d);
                            bump!();
                        } else {
                            break;
                        }
                    }
                    if den.is_empty() {
                        return Err(ParseError::Syntax {
                            line: l,
                            col: c,
                            message: "fraction is missing its denominator".into(),
                        });
                    }
                    format!("{}/{}", num, den)
                } else {
                    num
                };
                let frac = Rational::from_str(&text).map_err(|e| ParseError::Syntax {
                    line: l,
                    col: c,
                    message: format!("bad fraction `{}`: {}", text, e),
                })?;
                out.push(Spanned { tok: Tok::Frac(frac), line: l, col: c });
            }
            _ if ch.is_alphabetic() || ch == '_' => {
                let mut name = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' || d == '\'' {
                        name.push(d);
                        bump!();
                    } else {
                        break;
                    }
                }
                out.push(Spanned { tok: Tok::Ident(name), line: l, col: c });
            }
            other => {
                return Err(ParseError::Syntax {
                    line: l,
                    col: c,
                    message: format!("unexpected character `{}`", other),
                });
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError::Syntax { line: t.line, col: t.col, message: message.into() }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Spanned, ParseError> {
        if self.peek().tok == tok {
            Ok(self.next())
        } else {
            Err(self.err(format!("expected {}", what)))
        }
    }

    /// Read one identifier; keywords are reserved and refused here.
    fn ident(&mut self, what: &str) -> Result<(String, usize, usize), ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.next();
                Ok((name.clone(), t.line, t.col))
            }
            Tok::Ident(kw) => Err(ParseError::Syntax {
                line: t.line,
                col: t.col,
                message: format!("`{}` is a keyword and cannot be used as {}", kw, what),
            }),
            _ => Err(self.err(format!("expected {}", what))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match &self.peek().tok {
            Tok::Ident(name) if name == kw => {
                self.next();
                Ok(())
            }
            _ => Err(self.err(format!("expected `{}`", kw))),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(name) if name == kw)
    }

    /// Comma-separated identifier list, possibly empty; ends at the first token
    /// that cannot start an entry.
    fn ident_list(&mut self, what: &str) -> Result<Vec<(String, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            match &self.peek().tok {
                Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                    out.push(self.ident(what)?);
                    if self.peek().tok == Tok::Comma {
                        self.next();
                    } else {
                        break;
                    }
                }
                _ => break,
            }
        }
        Ok(out)
    }

    /// `{ <frac> <id>, ... }`
    fn distribution(&mut self) -> Result<Vec<(Rational, String, usize, usize)>, ParseError> {
        self.expect(Tok::LBrace, "`{` opening a distribution")?;
        let mut entries = Vec::new();
        loop {
            let t = self.peek().clone();
            let frac = match t.tok {
                Tok::Frac(f) => {
                    self.next();
                    f
                }
                _ => return Err(self.err("expected a weight fraction")),
            };
            let (name, l, c) = self.ident("a state name")?;
            entries.push((frac, name, l, c));
            match self.peek().tok {
                Tok::Comma => {
                    self.next();
                }
                Tok::RBrace => break,
                _ => return Err(self.err("expected `,` or `}` in distribution")),
            }
        }
        self.expect(Tok::RBrace, "`}` closing a distribution")?;
        Ok(entries)
    }
}

struct RawTransition {
    label: String,
    line: usize,
    col: usize,
    entries: Vec<(Rational, String, usize, usize)>,
}

struct RawState {
    name: String,
    line: usize,
    col: usize,
    transitions: Vec<RawTransition>,
}

struct RawInit {
    name: String,
    entries: Vec<(Rational, String, usize, usize)>,
}

/// Parse a model file, checking it against the expected kind.
pub fn parse_model(text: &str, kind: ModelKind) -> Result<SourceModel, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };

    p.keyword("model")?;
    let found_kind = if p.at_keyword("process") {
        p.next();
        ModelKind::Process
    } else if p.at_keyword("test") {
        p.next();
        ModelKind::Test
    } else {
        return Err(p.err("expected `process` or `test`"));
    };
    if found_kind != kind {
        return Err(ParseError::KindMismatch { expected: kind, found: found_kind });
    }
    let (model_name, _, _) = p.ident("a model name")?;

    p.keyword("alphabet")?;
    let alphabet_items = p.ident_list("an action name")?;

    let success_items = if p.at_keyword("success") {
        p.next();
        let items = p.ident_list("a success action name")?;
        if found_kind == ModelKind::Process {
            if let Some((label, l, c)) = items.first() {
                return Err(ParseError::IllegalLabel {
                    label: label.clone(),
                    reason: "success actions cannot appear in a process model".into(),
                    line: *l,
                    col: *c,
                });
            }
            return Err(p.err("success actions cannot appear in a process model"));
        }
        items
    } else {
        Vec::new()
    };

    // Header legality: success actions start with `w`, nothing may be called `tau`,
    // and the visible and success alphabets are disjoint.
    let mut visible: BTreeSet<String> = BTreeSet::new();
    for (a, l, c) in &alphabet_items {
        if a == "tau" {
            return Err(ParseError::IllegalLabel {
                label: a.clone(),
                reason: "`tau` is the internal action and cannot be declared".into(),
                line: *l,
                col: *c,
            });
        }
        if !visible.insert(a.clone()) {
            return Err(ParseError::IllegalLabel {
                label: a.clone(),
                reason: "declared twice in the alphabet".into(),
                line: *l,
                col: *c,
            });
        }
    }
    let mut successes: BTreeSet<String> = BTreeSet::new();
    for (w, l, c) in &success_items {
        if !w.starts_with('w') {
            return Err(ParseError::IllegalLabel {
                label: w.clone(),
                reason: "success actions must start with `w`".into(),
                line: *l,
                col: *c,
            });
        }
        if w == "tau" || visible.contains(w) || !successes.insert(w.clone()) {
            return Err(ParseError::IllegalLabel {
                label: w.clone(),
                reason: "success actions must be distinct from every other label".into(),
                line: *l,
                col: *c,
            });
        }
    }

    // Syntactic pass over the state and init blocks (they may interleave).
    let mut raw_states: Vec<RawState> = Vec::new();
    let mut raw_inits: Vec<RawInit> = Vec::new();
    loop {
        if p.at_keyword("state") {
            p.next();
            let (name, line, col) = p.ident("a state name")?;
            p.expect(Tok::LBrace, "`{` opening a state block")?;
            let mut transitions = Vec::new();
            loop {
                if p.peek().tok == Tok::RBrace {
                    break;
                }
                let (label, ll, lc) = match &p.peek().tok {
                    Tok::Ident(name) if name == "tau" => {
                        let t = p.next();
                        ("tau".to_owned(), t.line, t.col)
                    }
                    _ => p.ident("a transition label")?,
                };
                p.expect(Tok::Arrow, "`->` after the transition label")?;
                let entries = p.distribution()?;
                transitions.push(RawTransition { label, line: ll, col: lc, entries });
                if p.peek().tok == Tok::Semi {
                    p.next();
                } else {
                    break;
                }
            }
            p.expect(Tok::RBrace, "`}` closing the state block")?;
            raw_states.push(RawState { name, line, col, transitions });
        } else if p.at_keyword("init") {
            p.next();
            let (name, _, _) = p.ident("an init name")?;
            p.expect(Tok::Equals, "`=` after the init name")?;
            let entries = p.distribution()?;
            raw_inits.push(RawInit { name, entries });
        } else if p.peek().tok == Tok::Eof {
            break;
        } else {
            return Err(p.err("expected `state`, `init`, or end of file"));
        }
    }

    if raw_inits.is_empty() {
        return Err(p.err("model declares no init distribution"));
    }

    // Semantic pass: intern states, resolve labels, check masses.
    let mut plts = Plts::new(visible.clone(), successes.clone());
    for rs in &raw_states {
        if plts.state(&rs.name).is_some() {
            return Err(ParseError::Syntax {
                line: rs.line,
                col: rs.col,
                message: format!("state `{}` declared twice", rs.name),
            });
        }
        plts.add_state(&rs.name);
    }

    let resolve = |plts: &Plts,
                   entries: &[(Rational, String, usize, usize)],
                   context: &str|
     -> Result<Subdistribution, ParseError> {
        let mut pairs: Vec<(StateId, Rational)> = Vec::new();
        for (w, name, l, c) in entries {
            let Some(id) = plts.state(name) else {
                return Err(ParseError::UndeclaredState { name: name.clone(), line: *l, col: *c });
            };
            pairs.push((id, w.clone()));
        }
        let mass: Rational = pairs.iter().map(|(_, w)| w.clone()).sum();
        if !mass.is_one() {
            return Err(ParseError::WeightSumNotOne { context: context.to_owned(), mass });
        }
        Subdistribution::from_pairs(pairs).map_err(|e| ParseError::WeightSumNotOne {
            context: context.to_owned(),
            mass: match e {
                crate::subdist::MassError::Overflow { mass } => mass,
                crate::subdist::MassError::NegativeWeight => Rational::from_integer((-1).into()),
            },
        })
    };

    for rs in &raw_states {
        let source = plts.state(&rs.name).unwrap();
        for rt in &rs.transitions {
            let label = if rt.label == "tau" {
                Label::Tau
            } else if successes.contains(&rt.label) {
                Label::Success(rt.label.clone())
            } else if visible.contains(&rt.label) {
                Label::Visible(rt.label.clone())
            } else {
                return Err(ParseError::IllegalLabel {
                    label: rt.label.clone(),
                    reason: "not `tau` and not declared in the alphabet or success header".into(),
                    line: rt.line,
                    col: rt.col,
                });
            };
            let context = format!("transition `{}` of state `{}`", rt.label, rs.name);
            let target = resolve(&plts, &rt.entries, &context)?;
            plts.add_transition(source, label, target).expect("validated above");
        }
    }

    let mut inits: BTreeMap<String, Subdistribution> = BTreeMap::new();
    let mut init_order = Vec::new();
    for ri in &raw_inits {
        let context = format!("init `{}`", ri.name);
        let d = resolve(&plts, &ri.entries, &context)?;
        if inits.insert(ri.name.clone(), d).is_some() {
            return Err(p.err(format!("init `{}` declared twice", ri.name)));
        }
        init_order.push(ri.name.clone());
    }

    Ok(SourceModel { name: model_name, kind: found_kind, plts, inits, init_order })
}

impl SourceModel {
    /// The default initial distribution: the first one declared.
    pub fn default_init(&self) -> (&str, &Subdistribution) {
        let name = &self.init_order[0];
        (name, &self.inits[name])
    }

    pub fn init(&self, name: &str) -> Option<&Subdistribution> {
        self.inits.get(name)
    }

    /// Canonical pretty-printer; `parse . serialize . parse` is the identity.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("model {} {}\n", self.kind, self.name));
        let alphabet: Vec<&str> = self.plts.visible.iter().map(String::as_str).collect();
        out.push_str(&format!("alphabet {}\n", alphabet.join(", ")));
        if !self.plts.successes.is_empty() {
            let ws: Vec<&str> = self.plts.successes.iter().map(String::as_str).collect();
            out.push_str(&format!("success {}\n", ws.join(", ")));
        }
        let dist = |d: &Subdistribution| -> String {
            let entries: Vec<String> =
                d.iter().map(|(s, w)| format!("{} {}", w, self.plts.name(s))).collect();
            format!("{{ {} }}", entries.join(", "))
        };
        for s in self.plts.states() {
            let outgoing = self.plts.outgoing(s);
            if outgoing.is_empty() {
                out.push_str(&format!("state {} {{ }}\n", self.plts.name(s)));
                continue;
            }
            out.push_str(&format!("state {} {{\n", self.plts.name(s)));
            for (k, &idx) in outgoing.iter().enumerate() {
                let tr = self.plts.transition(idx);
                let sep = if k + 1 < outgoing.len() { ";" } else { "" };
                out.push_str(&format!("  {} -> {}{}\n", tr.label, dist(&tr.target), sep));
            }
            out.push_str("}\n");
        }
        for name in &self.init_order {
            out.push_str(&format!("init {} = {}\n", name, dist(&self.inits[name])));
        }
        out
    }
}

/// Check the two test-shape conditions, returning every violation found.
///
/// Condition (A): a state enables at most one success action. Condition (B): if a
/// state enables success `w` and also moves by a visible action or tau, every state
/// in that move's target must enable `w` too (success, once possible, must not be
/// lost by further movement).
pub fn validate_test(m: &SourceModel) -> Vec<TestViolation> {
    assert_eq!(m.kind, ModelKind::Test, "validate_test expects a test model");
    let mut out = Vec::new();
    for s in m.plts.states() {
        let successes: Vec<&str> = m.plts.enabled_successes(s).into_iter().collect();
        if successes.len() > 1 {
            out.push(TestViolation::MultipleSuccesses {
                state: m.plts.name(s).to_owned(),
                labels: successes.iter().map(|w| (*w).to_owned()).collect(),
            });
        }
        if let Some(&w) = successes.first() {
            for &idx in m.plts.outgoing(s) {
                let tr = m.plts.transition(idx);
                let is_act_tau = matches!(tr.label, Label::Tau | Label::Visible(_));
                if !is_act_tau {
                    continue;
                }
                for u in tr.target.support() {
                    if !m.plts.enables(u, &Label::Success(w.to_owned())) {
                        out.push(TestViolation::SuccessNotInherited {
                            state: m.plts.name(s).to_owned(),
                            success: w.to_owned(),
                            label: tr.label.to_string(),
                            offender: m.plts.name(u).to_owned(),
                        });
                    }
                }
            }
        }
    }
    out
}
