//! Exact height laws.
//!
//! The forward law is computed by dynamic programming over depth profiles:
//! under the forward construction both step types pick a uniform active
//! vertex, so the future of the height only depends on how many active
//! vertices sit at each depth and on the current height. The reverse law is
//! computed by expanding every ordered pair draw of the reverse
//! construction, merging forests that carry identical ordered height lists.
//!
//! All probabilities at step `j` share the denominator
//! `S_0 · S_1 · … · S_{j-1}` (forward) or `∏ S_i (S_i − 1)` over attach steps
//! (reverse), so both passes carry integer numerators and divide once at
//! the end.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::ops::Add;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{classify, ChoiceSequence, Step};

pub const DEFAULT_STATE_CAP: usize = 10_000_000;
pub const DEFAULT_REVERSE_MAX_LEN: usize = 8;

/// Probability mass types a [`HeightDistribution`] can carry.
pub trait Mass: Clone + PartialOrd + Zero + Add<Output = Self> {}

impl Mass for BigRational {}
impl Mass for f64 {}

/// Law of a height: map from height to probability mass. Zero masses are
/// not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightDistribution<P> {
    masses: BTreeMap<u32, P>,
}

pub type ExactLaw = HeightDistribution<BigRational>;
pub type EmpiricalLaw = HeightDistribution<f64>;

impl<P: Mass> HeightDistribution<P> {
    pub fn from_masses(masses: impl IntoIterator<Item = (u32, P)>) -> Self {
        let mut out: BTreeMap<u32, P> = BTreeMap::new();
        for (h, p) in masses {
            let slot = out.entry(h).or_insert_with(P::zero);
            *slot = slot.clone() + p;
        }
        out.retain(|_, p| !p.is_zero());
        HeightDistribution { masses: out }
    }

    /// Point mass at `height`.
    pub fn point(height: u32, one: P) -> Self {
        HeightDistribution { masses: BTreeMap::from([(height, one)]) }
    }

    pub fn masses(&self) -> &BTreeMap<u32, P> {
        &self.masses
    }

    pub fn mass(&self, height: u32) -> P {
        self.masses.get(&height).cloned().unwrap_or_else(P::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.masses.keys().copied()
    }

    pub fn support_max(&self) -> u32 {
        self.masses.keys().next_back().copied().unwrap_or(0)
    }

    pub fn total(&self) -> P {
        self.masses.values().cloned().fold(P::zero(), |a, b| a + b)
    }

    /// `P(H <= height)`.
    pub fn cdf(&self, height: u32) -> P {
        self.masses.range(..=height).map(|(_, p)| p.clone()).fold(P::zero(), |a, b| a + b)
    }

    /// Law of `max(floor, H)`.
    pub fn floored(&self, floor: u32) -> Self {
        HeightDistribution::from_masses(self.masses.iter().map(|(&h, p)| (h.max(floor), p.clone())))
    }
}

impl ExactLaw {
    pub fn mean(&self) -> BigRational {
        self.masses.iter().map(|(&h, p)| p * BigRational::from_integer(h.into())).sum()
    }

    pub fn to_f64(&self) -> EmpiricalLaw {
        HeightDistribution::from_masses(self.masses.iter().map(|(&h, p)| (h, p.to_f64().unwrap_or(f64::NAN))))
    }

    pub fn is_normalized(&self) -> bool {
        self.total().is_one() && self.masses.values().all(|p| *p > BigRational::zero())
    }

    pub fn to_json(&self) -> RationalLawJson {
        RationalLawJson {
            support: self.masses.keys().copied().collect(),
            mass_num: self.masses.values().map(|p| p.numer().to_string()).collect(),
            mass_den: self.masses.values().map(|p| p.denom().to_string()).collect(),
        }
    }

    pub fn from_json(json: &RationalLawJson) -> Result<Self> {
        if json.support.len() != json.mass_num.len() || json.support.len() != json.mass_den.len() {
            return Err(Error::Domain("support and mass arrays differ in length".into()));
        }
        let parse = |s: &str| s.parse::<BigInt>().map_err(|_| Error::Domain(format!("bad integer `{s}`")));
        let mut masses = Vec::with_capacity(json.support.len());
        for ((h, num), den) in json.support.iter().zip(&json.mass_num).zip(&json.mass_den) {
            let den = parse(den)?;
            if den.is_zero() {
                return Err(Error::Domain("zero denominator".into()));
            }
            masses.push((*h, BigRational::new(parse(num)?, den)));
        }
        Ok(HeightDistribution::from_masses(masses))
    }
}

impl EmpiricalLaw {
    pub fn from_histogram(histogram: &BTreeMap<u32, u64>) -> Self {
        let total: u64 = histogram.values().sum();
        HeightDistribution::from_masses(histogram.iter().map(|(&h, &c)| (h, c as f64 / total as f64)))
    }

    pub fn mean(&self) -> f64 {
        self.masses.iter().map(|(&h, p)| h as f64 * p).sum()
    }

    /// `height,probability` lines under a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("height,probability\n");
        for (h, p) in &self.masses {
            writeln!(out, "{h},{p}").unwrap();
        }
        out
    }

    /// Total variation distance to another float law.
    pub fn total_variation(&self, other: &EmpiricalLaw) -> f64 {
        let top = self.support_max().max(other.support_max());
        0.5 * (0..=top).map(|h| (self.mass(h) - other.mass(h)).abs()).sum::<f64>()
    }
}

/// JSON encoding of an exact law. Numerators and denominators are decimal
/// strings since they outgrow 64 bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalLawJson {
    pub support: Vec<u32>,
    pub mass_num: Vec<String>,
    pub mass_den: Vec<String>,
}

/// Active vertices per depth plus the current height.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DepthProfile {
    /// `active_counts[d]` = active vertices at depth `d`; no trailing zeros.
    pub active_counts: Vec<u32>,
    pub current_height: u32,
}

impl DepthProfile {
    fn root() -> Self {
        DepthProfile { active_counts: vec![1], current_height: 0 }
    }

    pub fn total_active(&self) -> u64 {
        self.active_counts.iter().map(|&c| c as u64).sum()
    }

    fn trim(&mut self) {
        while self.active_counts.last() == Some(&0) {
            self.active_counts.pop();
        }
    }
}

pub fn exact_height_distribution_forward(seq: &ChoiceSequence) -> Result<ExactLaw> {
    exact_height_distribution_forward_capped(seq, DEFAULT_STATE_CAP)
}

pub fn exact_height_distribution_forward_capped(seq: &ChoiceSequence, state_cap: usize) -> Result<ExactLaw> {
    seq.ensure_valid()?;
    let walk = seq.walk();
    let mut states: HashMap<DepthProfile, BigUint> = HashMap::from([(DepthProfile::root(), BigUint::one())]);
    let mut denominator = BigUint::one();
    for (i, &step) in seq.steps().iter().enumerate() {
        let actives = walk[i] as u32;
        denominator *= actives;
        let mut next: HashMap<DepthProfile, BigUint> = HashMap::with_capacity(states.len() * 2);
        for (profile, weight) in states {
            debug_assert_eq!(profile.total_active(), actives as u64);
            for (depth, &count) in profile.active_counts.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let mut child = profile.clone();
                match step {
                    Step::Attach => {
                        if depth + 1 == child.active_counts.len() {
                            child.active_counts.push(0);
                        }
                        child.active_counts[depth + 1] += 1;
                        child.current_height = child.current_height.max(depth as u32 + 1);
                    }
                    Step::Freeze => {
                        child.active_counts[depth] -= 1;
                        child.trim();
                    }
                }
                *next.entry(child).or_insert_with(BigUint::zero) += &weight * count;
            }
        }
        if next.len() > state_cap {
            return Err(Error::StateSpaceExceeded { states: next.len(), cap: state_cap });
        }
        states = next;
    }
    let mut masses: BTreeMap<u32, BigUint> = BTreeMap::new();
    for (profile, weight) in states {
        *masses.entry(profile.current_height).or_insert_with(BigUint::zero) += weight;
    }
    let den = BigInt::from(denominator);
    Ok(HeightDistribution::from_masses(
        masses.into_iter().map(|(h, w)| (h, BigRational::new(BigInt::from(w), den.clone()))),
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct ReverseOptions {
    /// Longest sequence accepted.
    pub max_len: usize,
    /// Largest number of distinct forests kept at any step.
    pub state_cap: usize,
}

impl Default for ReverseOptions {
    fn default() -> Self {
        ReverseOptions { max_len: DEFAULT_REVERSE_MAX_LEN, state_cap: DEFAULT_STATE_CAP }
    }
}

pub fn exact_height_distribution_reverse(seq: &ChoiceSequence) -> Result<ExactLaw> {
    exact_height_distribution_reverse_with(seq, ReverseOptions::default())
}

/// Exact law of the reverse construction's final height.
///
/// Every ordered pair of distinct positions is expanded at each attach
/// step, with weight `1/(S_i (S_i − 1))`. Forests are kept as ordered lists
/// of tree heights; identical lists are merged, positions are never
/// permuted.
pub fn exact_height_distribution_reverse_with(seq: &ChoiceSequence, options: ReverseOptions) -> Result<ExactLaw> {
    seq.ensure_valid()?;
    if seq.len() > options.max_len {
        return Err(Error::StateSpaceExceeded { states: seq.len(), cap: options.max_len });
    }
    let walk = seq.walk();
    let start = vec![0u32; walk[seq.len()] as usize];
    let mut states: HashMap<Vec<u32>, BigUint> = HashMap::from([(start, BigUint::one())]);
    let mut denominator = BigUint::one();
    for i in (1..=seq.len()).rev() {
        let mut next: HashMap<Vec<u32>, BigUint> = HashMap::with_capacity(states.len() * 4);
        match seq.steps()[i - 1] {
            Step::Freeze => {
                for (mut heights, weight) in states {
                    heights.push(0);
                    *next.entry(heights).or_insert_with(BigUint::zero) += weight;
                }
            }
            Step::Attach => {
                let count = walk[i] as usize;
                denominator *= (count * (count - 1)) as u64;
                for (heights, weight) in states {
                    for a in 0..count {
                        for b in (0..count).filter(|&b| b != a) {
                            let mut child = heights.clone();
                            child[a] = child[a].max(child[b] + 1);
                            child.remove(b);
                            *next.entry(child).or_insert_with(BigUint::zero) += &weight;
                        }
                    }
                }
            }
        }
        if next.len() > options.state_cap {
            return Err(Error::StateSpaceExceeded { states: next.len(), cap: options.state_cap });
        }
        states = next;
    }
    let den = BigInt::from(denominator);
    Ok(HeightDistribution::from_masses(
        states.into_iter().map(|(h, w)| (h[0], BigRational::new(BigInt::from(w), den.clone()))),
    ))
}

/// `d1` is stochastically at least `d2`: `F1(t) <= F2(t)` at every `t`.
pub fn stochastic_dominates<P: Mass>(d1: &HeightDistribution<P>, d2: &HeightDistribution<P>) -> bool {
    let mut support: Vec<u32> = d1.support().chain(d2.support()).collect();
    support.sort_unstable();
    support.dedup();
    let (mut f1, mut f2) = (P::zero(), P::zero());
    for t in support {
        f1 = f1 + d1.mass(t);
        f2 = f2 + d2.mass(t);
        if f1 > f2 {
            return false;
        }
    }
    true
}

/// Whether `max(floor, H2)` with `H2 ~ d2` stochastically dominates `d1`.
pub fn dominance_with_floor<P: Mass>(d1: &HeightDistribution<P>, d2: &HeightDistribution<P>, floor: u32) -> bool {
    stochastic_dominates(&d2.floored(floor), d1)
}

/// Smallest floor for which `law` dominates `reference` once floored.
pub fn min_floor<P: Mass>(reference: &HeightDistribution<P>, law: &HeightDistribution<P>) -> u32 {
    (0..=reference.support_max())
        .find(|&h| dominance_with_floor(reference, law, h))
        .unwrap_or_else(|| reference.support_max())
}

/// Smallest `h` such that the random recursive tree's height with `n` edges
/// is dominated by `max(h, Height)` for every sequence of the family.
pub fn min_floor_search(n: usize, family: &[ChoiceSequence]) -> Result<u32> {
    let reference = exact_height_distribution_forward(&ChoiceSequence::rrt(n))?;
    let mut floor = 0;
    for seq in family {
        if !classify(seq, n).in_x_n {
            return Err(Error::InvalidSequence(format!("`{seq}` does not have {n} attach steps with a live walk")));
        }
        let law = exact_height_distribution_forward(seq)?;
        floor = floor.max(min_floor(&reference, &law));
    }
    Ok(floor)
}

/// Every sequence with exactly `n` attach steps, a walk that stays positive
/// before its last step, and length at most `max_len`.
///
/// The walk ends at `1 + 2n − m >= 0`, so lengths never exceed `2n + 1` and
/// `max_len = 2n + 1` lists the whole set.
pub fn x_n_family(n: usize, max_len: usize) -> Vec<ChoiceSequence> {
    fn grow(
        n: usize,
        max_len: usize,
        prefix: &mut Vec<Step>,
        attaches: usize,
        walk: i64,
        out: &mut Vec<ChoiceSequence>,
    ) {
        if attaches == n {
            out.push(ChoiceSequence::new(prefix.clone()));
        }
        if walk == 0 || prefix.len() == max_len {
            return;
        }
        if attaches < n {
            prefix.push(Step::Attach);
            grow(n, max_len, prefix, attaches + 1, walk + 1, out);
            prefix.pop();
        }
        prefix.push(Step::Freeze);
        grow(n, max_len, prefix, attaches, walk - 1, out);
        prefix.pop();
    }
    let mut out = Vec::new();
    grow(n, max_len, &mut Vec::new(), 0, 1, &mut out);
    out
}

/// Every valid sequence (walk positive before the last step) of length `m`.
pub fn valid_sequences(m: usize) -> Vec<ChoiceSequence> {
    (0u64..1 << m)
        .map(|bits| {
            ChoiceSequence::new(
                (0..m).map(|i| if bits >> (m - 1 - i) & 1 == 1 { Step::Attach } else { Step::Freeze }).collect(),
            )
        })
        .filter(ChoiceSequence::is_valid)
        .collect()
}
