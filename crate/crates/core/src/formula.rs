//! Formula syntax: parsing, rendering, desugaring, the complexity measure,
//! announcement elimination and sequence composition.
//!
//! Concrete syntax, tightest binding first:
//!
//! ```text
//! atom | bot | ( φ )
//! ~φ      K[a] φ      [φ] ψ          prefix
//! φ & ψ                              left associative
//! φ | ψ                              left associative
//! φ -> ψ                             right associative
//! φ <-> ψ                            non associative
//! ```

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A formula. `Not`, `And`, `Or` and `Iff` are surface sugar; evaluators
/// work on the output of [`Formula::desugar`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atom(String),
    Bot,
    Implies(Arc<Formula>, Arc<Formula>),
    Knows(String, Arc<Formula>),
    Announce(Arc<Formula>, Arc<Formula>),
    Not(Arc<Formula>),
    And(Arc<Formula>, Arc<Formula>),
    Or(Arc<Formula>, Arc<Formula>),
    Iff(Arc<Formula>, Arc<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

/// A sequence of announcements, oldest first.
pub type AnnouncementSequence = Vec<Formula>;

pub fn atom(name: &str) -> Formula {
    Formula::Atom(name.to_string())
}

pub fn bot() -> Formula {
    Formula::Bot
}

pub fn top() -> Formula {
    implies(bot(), bot())
}

pub fn implies(a: Formula, b: Formula) -> Formula {
    Formula::Implies(Arc::new(a), Arc::new(b))
}

pub fn knows(agent: &str, f: Formula) -> Formula {
    Formula::Knows(agent.to_string(), Arc::new(f))
}

pub fn announce(a: Formula, b: Formula) -> Formula {
    Formula::Announce(Arc::new(a), Arc::new(b))
}

pub fn not(f: Formula) -> Formula {
    Formula::Not(Arc::new(f))
}

pub fn and(a: Formula, b: Formula) -> Formula {
    Formula::And(Arc::new(a), Arc::new(b))
}

pub fn or(a: Formula, b: Formula) -> Formula {
    Formula::Or(Arc::new(a), Arc::new(b))
}

pub fn iff(a: Formula, b: Formula) -> Formula {
    Formula::Iff(Arc::new(a), Arc::new(b))
}

/// Left-nested conjunction; `None` for an empty list.
pub fn and_all<I: IntoIterator<Item = Formula>>(items: I) -> Option<Formula> {
    items.into_iter().reduce(and)
}

/// Left-nested disjunction; `None` for an empty list.
pub fn or_all<I: IntoIterator<Item = Formula>>(items: I) -> Option<Formula> {
    items.into_iter().reduce(or)
}

impl Formula {
    /// Rewrites all sugar into the core connectives.
    ///
    /// `¬φ = φ→⊥`, `φ∧ψ = ¬(¬¬φ→¬ψ)`, `φ∨ψ = ¬φ→ψ`, `φ↔ψ = (φ→ψ)∧(ψ→φ)`.
    pub fn desugar(&self) -> Formula {
        match self {
            Formula::Atom(_) | Formula::Bot => self.clone(),
            Formula::Implies(a, b) => implies(a.desugar(), b.desugar()),
            Formula::Knows(ag, f) => knows(ag, f.desugar()),
            Formula::Announce(a, b) => announce(a.desugar(), b.desugar()),
            Formula::Not(f) => neg(f.desugar()),
            Formula::And(a, b) => conj(a.desugar(), b.desugar()),
            Formula::Or(a, b) => implies(neg(a.desugar()), b.desugar()),
            Formula::Iff(a, b) => {
                let (a, b) = (a.desugar(), b.desugar());
                conj(implies(a.clone(), b.clone()), implies(b, a))
            }
        }
    }

    pub fn is_core(&self) -> bool {
        match self {
            Formula::Atom(_) | Formula::Bot => true,
            Formula::Implies(a, b) | Formula::Announce(a, b) => a.is_core() && b.is_core(),
            Formula::Knows(_, f) => f.is_core(),
            _ => false,
        }
    }

    pub fn is_announcement_free(&self) -> bool {
        match self {
            Formula::Atom(_) | Formula::Bot => true,
            Formula::Announce(..) => false,
            Formula::Knows(_, f) | Formula::Not(f) => f.is_announcement_free(),
            Formula::Implies(a, b) | Formula::And(a, b) | Formula::Or(a, b) | Formula::Iff(a, b) => {
                a.is_announcement_free() && b.is_announcement_free()
            }
        }
    }

    /// Nesting depth of connectives; atoms and `bot` have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::Bot => 0,
            Formula::Knows(_, f) | Formula::Not(f) => 1 + f.depth(),
            Formula::Implies(a, b) | Formula::Announce(a, b) | Formula::And(a, b) | Formula::Or(a, b) | Formula::Iff(a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    /// Complexity measure on the desugared formula. Strictly decreases
    /// along every rewrite of [`translate`].
    ///
    /// Panics on `u64` overflow, which needs announcement nesting far
    /// beyond anything evaluable.
    pub fn complexity(&self) -> u64 {
        core_complexity(&self.desugar())
    }

    pub fn atoms(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Atom(p) = f {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
        });
        out
    }

    pub fn agents(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Knows(a, _) = f {
                if !out.contains(a) {
                    out.push(a.clone());
                }
            }
        });
        out
    }

    fn visit<F: FnMut(&Formula)>(&self, cb: &mut F) {
        cb(self);
        match self {
            Formula::Atom(_) | Formula::Bot => {}
            Formula::Knows(_, f) | Formula::Not(f) => f.visit(cb),
            Formula::Implies(a, b) | Formula::Announce(a, b) | Formula::And(a, b) | Formula::Or(a, b) | Formula::Iff(a, b) => {
                a.visit(cb);
                b.visit(cb);
            }
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        render_into(self, 0, &mut s);
        s
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::str::FromStr for Formula {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

fn neg(f: Formula) -> Formula {
    implies(f, bot())
}

fn conj(a: Formula, b: Formula) -> Formula {
    neg(implies(neg(neg(a)), neg(b)))
}

fn core_complexity(f: &Formula) -> u64 {
    match f {
        Formula::Atom(_) | Formula::Bot => 1,
        Formula::Implies(a, b) => 1 + core_complexity(a).max(core_complexity(b)),
        Formula::Knows(_, g) => 1 + core_complexity(g),
        Formula::Announce(a, b) => (2 + core_complexity(a)).checked_mul(core_complexity(b)).expect("complexity overflow"),
        other => core_complexity(&other.desugar()),
    }
}

/// Announcement elimination. The input may contain sugar; the output is
/// core syntax without announcements.
///
/// Panics if a rewrite fails to lower the complexity measure, which would
/// mean the rewrite table is wrong.
pub fn translate(f: &Formula) -> Formula {
    tr(&f.desugar(), &mut |_, _| {})
}

/// [`translate`], also returning every rewrite step as (redex, result).
pub fn translate_traced(f: &Formula) -> (Formula, Vec<(Formula, Formula)>) {
    let mut steps = Vec::new();
    let out = tr(&f.desugar(), &mut |a, b| steps.push((a.clone(), b.clone())));
    (out, steps)
}

fn tr(f: &Formula, step: &mut dyn FnMut(&Formula, &Formula)) -> Formula {
    match f {
        Formula::Atom(_) | Formula::Bot => f.clone(),
        Formula::Implies(a, b) => implies(tr(a, step), tr(b, step)),
        Formula::Knows(ag, g) => knows(ag, tr(g, step)),
        Formula::Announce(phi, body) => {
            let next = match body.as_ref() {
                Formula::Atom(_) | Formula::Bot => implies((**phi).clone(), (**body).clone()),
                Formula::Implies(psi, chi) => {
                    implies(announce((**phi).clone(), (**psi).clone()), announce((**phi).clone(), (**chi).clone()))
                }
                Formula::Knows(ag, psi) => implies((**phi).clone(), knows(ag, announce((**phi).clone(), (**psi).clone()))),
                Formula::Announce(psi, chi) => announce(conj((**phi).clone(), announce((**phi).clone(), (**psi).clone())), (**chi).clone()),
                _ => unreachable!("translate runs on desugared input"),
            };
            let (before, after) = (core_complexity(f), core_complexity(&next));
            assert!(after < before, "rewrite did not decrease complexity: {before} -> {after} for {f}");
            step(f, &next);
            tr(&next, step)
        }
        _ => unreachable!("translate runs on desugared input"),
    }
}

/// Folds an announcement sequence into one formula:
/// `[] ↦ ⊥→⊥`, `[φ] ↦ φ`, `[φ1,…,φn] ↦ φ1 ∧ [φ1](φ2 ∧ [φ2](… φn))`.
pub fn compose_delta(seq: &[Formula]) -> Formula {
    match seq {
        [] => top(),
        [only] => only.clone(),
        [first, rest @ ..] => and(first.clone(), announce(first.clone(), compose_delta(rest))),
    }
}

// Precedence levels used by the renderer.
const P_IFF: u8 = 0;
const P_IMP: u8 = 1;
const P_OR: u8 = 2;
const P_AND: u8 = 3;
const P_PREFIX: u8 = 4;

fn level(f: &Formula) -> u8 {
    match f {
        Formula::Iff(..) => P_IFF,
        Formula::Implies(..) => P_IMP,
        Formula::Or(..) => P_OR,
        Formula::And(..) => P_AND,
        _ => P_PREFIX,
    }
}

fn render_into(f: &Formula, min: u8, out: &mut String) {
    let paren = level(f) < min;
    if paren {
        out.push('(');
    }
    match f {
        Formula::Atom(p) => out.push_str(p),
        Formula::Bot => out.push_str("bot"),
        Formula::Implies(a, b) => binary(a, " -> ", b, P_IMP + 1, P_IMP, out),
        Formula::Or(a, b) => binary(a, " | ", b, P_OR, P_OR + 1, out),
        Formula::And(a, b) => binary(a, " & ", b, P_AND, P_AND + 1, out),
        Formula::Iff(a, b) => binary(a, " <-> ", b, P_IFF + 1, P_IFF + 1, out),
        Formula::Not(g) => {
            out.push('~');
            render_into(g, P_PREFIX, out);
        }
        Formula::Knows(ag, g) => {
            out.push_str("K[");
            out.push_str(ag);
            out.push_str("] ");
            render_into(g, P_PREFIX, out);
        }
        Formula::Announce(a, b) => {
            out.push('[');
            render_into(a, P_IFF, out);
            out.push_str("] ");
            render_into(b, P_PREFIX, out);
        }
    }
    if paren {
        out.push(')');
    }
}

fn binary(a: &Formula, op: &str, b: &Formula, la: u8, lb: u8, out: &mut String) {
    render_into(a, la, out);
    out.push_str(op);
    render_into(b, lb, out);
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Tilde,
    Amp,
    Pipe,
    Arrow,
    DArrow,
    LParen,
    RParen,
    LBrack,
    RBrack,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Tilde => "`~`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::DArrow => "`<->`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrack => "`[`".into(),
            Tok::RBrack => "`]`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'~' => Tok::Tilde,
            b'&' => Tok::Amp,
            b'|' => Tok::Pipe,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'[' => Tok::LBrack,
            b']' => Tok::RBrack,
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Arrow
            }
            b'<' if bytes.get(i + 1) == Some(&b'-') && bytes.get(i + 2) == Some(&b'>') => {
                i += 2;
                Tok::DArrow
            }
            c if c.is_ascii_alphanumeric() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => {
                let found = src[i..].chars().next().map(|c| format!("`{c}`")).unwrap_or_default();
                return Err(ParseError { offset: i, expected: vec!["a token".into()], found });
            }
        };
        i += 1;
        out.push((start, tok));
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

const EXPECT_OPERAND: [&str; 6] = ["atom", "`bot`", "`~`", "`K[`", "`[`", "`(`"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail(&self, expected: &[&str]) -> ParseError {
        ParseError { offset: self.offset(), expected: expected.iter().map(|s| s.to_string()).collect(), found: self.peek().describe() }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.fail(&[name]))
        }
    }

    fn iff(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.imp()?;
        if *self.peek() == Tok::DArrow {
            self.bump();
            let rhs = self.imp()?;
            return Ok(iff(lhs, rhs));
        }
        Ok(lhs)
    }

    fn imp(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.imp()?;
            return Ok(implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            lhs = or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            lhs = and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Tilde => {
                self.bump();
                Ok(not(self.unary()?))
            }
            Tok::LBrack => {
                self.bump();
                let a = self.iff()?;
                self.expect(Tok::RBrack, "`]`")?;
                Ok(announce(a, self.unary()?))
            }
            Tok::LParen => {
                self.bump();
                let f = self.iff()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(name) => {
                self.bump();
                if name == "K" && *self.peek() == Tok::LBrack {
                    self.bump();
                    let agent = match self.peek().clone() {
                        Tok::Ident(a) => {
                            self.bump();
                            a
                        }
                        _ => return Err(self.fail(&["agent name"])),
                    };
                    self.expect(Tok::RBrack, "`]`")?;
                    return Ok(Formula::Knows(agent, Arc::new(self.unary()?)));
                }
                if name == "bot" {
                    Ok(Formula::Bot)
                } else {
                    Ok(Formula::Atom(name))
                }
            }
            _ => Err(self.fail(&EXPECT_OPERAND)),
        }
    }
}

pub fn parse(src: &str) -> Result<Formula, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let f = p.iff()?;
    if *p.peek() != Tok::End {
        return Err(p.fail(&["`&`", "`|`", "`->`", "`<->`", "end of input"]));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        parse(s).unwrap()
    }

    #[test]
    fn arrow_is_right_associative() {
        let f = p("p -> q -> r");
        assert_eq!(f, implies(atom("p"), implies(atom("q"), atom("r"))));
        assert_eq!(f.render(), "p -> q -> r");
        assert_eq!(p("(p -> q) -> r").render(), "(p -> q) -> r");
    }

    #[test]
    fn prefix_operators_bind_tightest() {
        let f = p("[~1_a] K[c] p");
        assert_eq!(f, announce(not(atom("1_a")), knows("c", atom("p"))));
        assert_eq!(f.render(), "[~1_a] K[c] p");
        assert_eq!(p("K[a] p -> q"), implies(knows("a", atom("p")), atom("q")));
        assert_eq!(p("~p & q | r"), or(and(not(atom("p")), atom("q")), atom("r")));
    }

    #[test]
    fn render_uses_minimal_parentheses() {
        let f = implies(atom("q"), knows("a", implies(atom("q"), atom("p"))));
        assert_eq!(f.render(), "q -> K[a] (q -> p)");
        assert_eq!(p("a & (b & c)").render(), "a & (b & c)");
        assert_eq!(p("(a & b) & c").render(), "a & b & c");
        assert_eq!(p("~(p -> bot)").render(), "~(p -> bot)");
        assert_eq!(p("[p & q] r").render(), "[p & q] r");
    }

    #[test]
    fn parse_errors_report_offset_and_expectations() {
        let e = parse("p & ").unwrap_err();
        assert_eq!(e.offset, 4);
        assert!(e.expected.iter().any(|x| x == "atom"));
        let e = parse("p q").unwrap_err();
        assert_eq!(e.offset, 2);
        let e = parse("K[a p").unwrap_err();
        assert_eq!(e.offset, 4);
        assert_eq!(e.expected, vec!["`]`".to_string()]);
        assert_eq!(parse("p $").unwrap_err().offset, 2);
    }

    #[test]
    fn desugar_matches_encodings() {
        assert_eq!(p("~p").desugar(), p("p -> bot"));
        assert_eq!(p("p & q").desugar(), p("(((p -> bot) -> bot) -> q -> bot) -> bot"));
        assert_eq!(p("p | q").desugar(), p("(p -> bot) -> q"));
    }

    #[test]
    fn complexity_values() {
        assert_eq!(p("p").complexity(), 1);
        assert_eq!(p("bot").complexity(), 1);
        assert_eq!(p("p -> q").complexity(), 2);
        assert_eq!(p("K[a] p").complexity(), 2);
        assert_eq!(p("[p] q").complexity(), 3);
        assert_eq!(p("~p").complexity(), 2);
        // 3 + max(1 + c(p), c(q))
        assert_eq!(p("p & q").complexity(), 5);
        assert_eq!(p("[p] [q] r").complexity(), 9);
        assert_eq!(p("[p & [p] q] r").complexity(), 8);
    }

    #[test]
    fn translate_examples() {
        assert_eq!(translate(&p("[q] K[a] p")).render(), "q -> K[a] (q -> p)");
        assert_eq!(translate(&p("[q] p")), p("q -> p"));
        assert_eq!(translate(&p("[q] bot")), p("q -> bot"));
        assert_eq!(translate(&p("K[a] p -> q")), p("K[a] p -> q"));
        assert!(translate(&p("[p] [q] K[a] r")).is_announcement_free());
    }

    #[test]
    fn compose_delta_shapes() {
        assert_eq!(compose_delta(&[]), p("bot -> bot"));
        assert_eq!(compose_delta(&[p("p")]), p("p"));
        assert_eq!(compose_delta(&[p("p"), p("q")]), p("p & [p] q"));
        assert_eq!(compose_delta(&[p("p"), p("q"), p("r")]), p("p & [p] (q & [q] r)"));
    }
}
