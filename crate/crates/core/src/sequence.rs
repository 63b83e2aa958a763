//! Choice sequences, their walk, and the compact `+`/`-` text grammar.
//!
//! A choice sequence drives the growth process one step at a time: an
//! [`Step::Attach`] step hangs a new active vertex below a uniformly chosen
//! active vertex, a [`Step::Freeze`] step freezes one. The walk
//! `S_j = 1 + #attach − #freeze` over the first `j` steps counts the active
//! vertices after step `j`.
//!
//! Text grammar (whitespace ignored):
//!
//! ```text
//! seq  := term+
//! term := atom ['^' positive-int]
//! atom := '+' | '-' | '(' seq ')'
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Step {
    Attach,
    Freeze,
}

impl Step {
    /// `+1` for attach, `-1` for freeze.
    pub fn sign(self) -> i64 {
        match self {
            Step::Attach => 1,
            Step::Freeze => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Step> {
        match sign {
            1 => Some(Step::Attach),
            -1 => Some(Step::Freeze),
            _ => None,
        }
    }

    fn symbol(self) -> char {
        match self {
            Step::Attach => '+',
            Step::Freeze => '-',
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChoiceSequence {
    steps: Vec<Step>,
}

impl ChoiceSequence {
    pub fn new(steps: Vec<Step>) -> Self {
        ChoiceSequence { steps }
    }

    pub fn from_signs(signs: &[i64]) -> Result<Self> {
        signs
            .iter()
            .map(|&s| {
                Step::from_sign(s)
                    .ok_or_else(|| Error::InvalidSequence(format!("step value {s} is not ±1")))
            })
            .collect::<Result<Vec<_>>>()
            .map(ChoiceSequence::new)
    }

    /// `step` repeated `count` times.
    pub fn repeat(step: Step, count: usize) -> Self {
        ChoiceSequence::new(vec![step; count])
    }

    /// The all-attach sequence whose tree is the random recursive tree with `n` edges.
    pub fn rrt(n: usize) -> Self {
        Self::repeat(Step::Attach, n)
    }

    /// `(+,-)^n`.
    pub fn alternating(n: usize) -> Self {
        let mut steps = Vec::with_capacity(2 * n);
        for _ in 0..n {
            steps.push(Step::Attach);
            steps.push(Step::Freeze);
        }
        ChoiceSequence::new(steps)
    }

    pub fn concat(&self, other: &ChoiceSequence) -> Self {
        let mut steps = self.steps.clone();
        steps.extend_from_slice(&other.steps);
        ChoiceSequence::new(steps)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn attach_count(&self) -> usize {
        self.steps.iter().filter(|&&s| s == Step::Attach).count()
    }

    pub fn freeze_count(&self) -> usize {
        self.len() - self.attach_count()
    }

    /// Number of leading attach steps.
    pub fn leading_attach_run(&self) -> usize {
        self.steps.iter().take_while(|&&s| s == Step::Attach).count()
    }

    /// Walk values `S_0..=S_m`; `S_0 = 1`.
    pub fn walk(&self) -> Vec<i64> {
        let mut values = Vec::with_capacity(self.len() + 1);
        let mut s = 1i64;
        values.push(s);
        for step in &self.steps {
            s += step.sign();
            values.push(s);
        }
        values
    }

    pub fn profile(&self) -> WalkProfile {
        walk_profile(self)
    }

    /// `S_j > 0` for every `j` in `1..m`; the final value may be zero.
    pub fn is_valid(&self) -> bool {
        let walk = self.walk();
        let m = self.len();
        (1..m).all(|j| walk[j] > 0)
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidSequence(format!(
                "`{self}` exhausts its active vertices before the last step"
            )))
        }
    }

    /// Largest walk value over `S_1..S_m` (or `S_0` for the empty sequence).
    pub fn max_walk(&self) -> i64 {
        let walk = self.walk();
        if walk.len() == 1 {
            walk[0]
        } else {
            walk[1..].iter().copied().max().unwrap_or(1)
        }
    }

    /// Final active count `S_m`.
    pub fn final_active(&self) -> i64 {
        1 + self.steps.iter().map(|s| s.sign()).sum::<i64>()
    }
}

impl From<Vec<Step>> for ChoiceSequence {
    fn from(steps: Vec<Step>) -> Self {
        ChoiceSequence::new(steps)
    }
}

/// Canonical form: maximal runs compressed as `+^k`, singletons bare.
impl fmt::Display for ChoiceSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut i = 0;
        while i < self.steps.len() {
            let step = self.steps[i];
            let run = self.steps[i..].iter().take_while(|&&s| s == step).count();
            if run == 1 {
                write!(f, "{}", step.symbol())?;
            } else {
                write!(f, "{}^{}", step.symbol(), run)?;
            }
            i += run;
        }
        Ok(())
    }
}

impl FromStr for ChoiceSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_sequence(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tau {
    Finite(usize),
    Infinite,
}

impl Tau {
    /// `tau >= m`, with `Infinite` above every integer.
    pub fn at_least(self, m: usize) -> bool {
        match self {
            Tau::Finite(t) => t >= m,
            Tau::Infinite => true,
        }
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tau::Finite(t) => write!(f, "{t}"),
            Tau::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkProfile {
    pub s_values: Vec<i64>,
    pub tau: Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceClass {
    pub n: usize,
    pub attach_count: usize,
    pub valid: bool,
    pub in_x_n: bool,
}

pub fn walk_profile(seq: &ChoiceSequence) -> WalkProfile {
    let s_values = seq.walk();
    let tau = s_values
        .iter()
        .enumerate()
        .skip(1)
        .find(|&(_, &s)| s == 0)
        .map_or(Tau::Infinite, |(j, _)| Tau::Finite(j));
    WalkProfile { s_values, tau }
}

/// Validity and membership of the set of sequences with exactly `n` attach
/// steps whose walk does not hit zero before the last step.
pub fn classify(seq: &ChoiceSequence, n: usize) -> SequenceClass {
    let profile = walk_profile(seq);
    let attach_count = seq.attach_count();
    SequenceClass {
        n,
        attach_count,
        valid: seq.is_valid(),
        in_x_n: attach_count == n && profile.tau.at_least(seq.len()),
    }
}

pub fn parse_sequence(text: &str) -> Result<ChoiceSequence> {
    let mut parser = Parser { bytes: text.as_bytes(), pos: 0 };
    parser.skip_ws();
    if parser.at_end() {
        return Ok(ChoiceSequence::default());
    }
    let steps = parser.seq()?;
    parser.skip_ws();
    if !parser.at_end() {
        return Err(parser.error(format!("unexpected `{}`", parser.bytes[parser.pos] as char)));
    }
    Ok(ChoiceSequence::new(steps))
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax { offset: self.pos, message: message.into() }
    }

    fn seq(&mut self) -> Result<Vec<Step>> {
        let mut steps = Vec::new();
        loop {
            match self.peek() {
                Some(b'+' | b'-' | b'(') => steps.extend(self.term()?),
                _ if steps.is_empty() => {
                    return Err(self.error("expected `+`, `-` or `(`"));
                }
                _ => return Ok(steps),
            }
        }
    }

    fn term(&mut self) -> Result<Vec<Step>> {
        let atom = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(atom);
        }
        self.pos += 1;
        let count = self.count()?;
        let mut out = Vec::with_capacity(atom.len().saturating_mul(count));
        for _ in 0..count {
            out.extend_from_slice(&atom);
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<Vec<Step>> {
        match self.peek() {
            Some(b'+') => {
                self.pos += 1;
                Ok(vec![Step::Attach])
            }
            Some(b'-') => {
                self.pos += 1;
                Ok(vec![Step::Freeze])
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.seq()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => Err(self.error("expected `+`, `-` or `(`")),
        }
    }

    fn count(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a repetition count after `^`"));
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        let count: usize = digits.parse().map_err(|_| Error::Syntax {
            offset: start,
            message: format!("repetition count `{digits}` is too large"),
        })?;
        if count == 0 {
            return Err(Error::Syntax { offset: start, message: "repetition count must be positive".into() });
        }
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Step::{Attach as P, Freeze as M};

    fn seq(steps: &[Step]) -> ChoiceSequence {
        ChoiceSequence::new(steps.to_vec())
    }

    #[test]
    fn parses_repetitions_and_groups() {
        assert_eq!(parse_sequence("+^3").unwrap(), seq(&[P, P, P]));
        assert_eq!(parse_sequence("(+-)^2").unwrap(), seq(&[P, M, P, M]));
        assert_eq!(parse_sequence(" ( + - ) ^ 2 ").unwrap(), seq(&[P, M, P, M]));
        assert_eq!(parse_sequence("((+)^2-)^2").unwrap(), seq(&[P, P, M, P, P, M]));
    }

    #[test]
    fn parses_removal_example_sequence() {
        // (+1)^2 (-1)^1 (-1,+1) (+1)^1
        let parsed = parse_sequence("+^2-^1(-+)+^1").unwrap();
        assert_eq!(parsed, seq(&[P, P, M, M, P, P]));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(parse_sequence("+^0"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse_sequence("+x"), Err(Error::Syntax { offset: 1, .. })));
        assert!(matches!(parse_sequence("(+-"), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse_sequence("()"), Err(Error::Syntax { offset: 1, .. })));
        assert!(matches!(parse_sequence("+^"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse_sequence("^2"), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse_sequence("+^99999999999999999999999"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn blank_text_is_the_empty_sequence() {
        assert!(parse_sequence("").unwrap().is_empty());
        assert!(parse_sequence("  \n").unwrap().is_empty());
    }

    #[test]
    fn canonical_rendering_compresses_runs() {
        assert_eq!(seq(&[P, P, M, M, P, P]).to_string(), "+^2-^2+^2");
        assert_eq!(ChoiceSequence::alternating(2).to_string(), "+-+-");
        assert_eq!(ChoiceSequence::default().to_string(), "");
    }

    #[test]
    fn walk_examples() {
        let p = walk_profile(&seq(&[P, P, M]));
        assert_eq!(p.s_values, vec![1, 2, 3, 2]);
        assert_eq!(p.tau, Tau::Infinite);

        let p = walk_profile(&seq(&[P, M, M]));
        assert_eq!(p.s_values, vec![1, 2, 1, 0]);
        assert_eq!(p.tau, Tau::Finite(3));

        let p = walk_profile(&seq(&[M]));
        assert_eq!(p.s_values, vec![1, 0]);
        assert_eq!(p.tau, Tau::Finite(1));
    }

    #[test]
    fn classify_examples() {
        assert!(classify(&seq(&[P, M, P, M]), 2).in_x_n);
        // tau = 3 = m and one attach step: a member.
        let c = classify(&seq(&[P, M, M]), 1);
        assert!(c.in_x_n);
        assert!(c.valid);
        assert!(!classify(&seq(&[P, M, M]), 2).in_x_n);

        let c = classify(&seq(&[M, P]), 1);
        assert!(!c.valid);
        assert!(!c.in_x_n);
    }

    fn arb_sequence() -> impl Strategy<Value = ChoiceSequence> {
        prop::collection::vec(prop::bool::ANY, 0..40)
            .prop_map(|bits| bits.into_iter().map(|b| if b { P } else { M }).collect::<Vec<_>>().into())
    }

    proptest! {
        #[test]
        fn render_then_parse_is_identity(s in arb_sequence()) {
            prop_assert_eq!(parse_sequence(&s.to_string()).unwrap(), s);
        }

        #[test]
        fn walk_moves_by_unit_steps(s in arb_sequence()) {
            let walk = s.walk();
            prop_assert_eq!(walk.len(), s.len() + 1);
            prop_assert_eq!(walk[0], 1);
            for (j, step) in s.steps().iter().enumerate() {
                prop_assert_eq!(walk[j + 1] - walk[j], step.sign());
            }
        }

        #[test]
        fn membership_implies_validity(s in arb_sequence()) {
            let n = s.attach_count();
            let class = classify(&s, n);
            if class.in_x_n && s.len() >= 2 {
                prop_assert!(class.valid);
            }
        }
    }
}
