//! Seeded Monte Carlo over the builders and couplings.
//!
//! Replica `i` always draws from `RngStream::new(master_seed, i)`. Workers
//! fill per-chunk histograms that are merged by addition, so a report
//! depends only on its inputs and never on the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::EmpiricalLaw;
use crate::forward::{rrt_depths, sample_height, uniform_active_depth_law};
use crate::rng::{Chooser, RngStream};
use crate::sequence::{classify, ChoiceSequence};

const CHUNK: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStats {
    pub threshold: f64,
    pub fraction_at_or_above: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub sequence: String,
    pub replicas: u64,
    pub seed: u64,
    pub histogram: BTreeMap<u32, u64>,
    pub mean: f64,
    pub var: f64,
    pub ci95: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdStats>,
}

impl SimulationReport {
    pub fn from_histogram(sequence: impl Into<String>, seed: u64, histogram: BTreeMap<u32, u64>) -> Self {
        let replicas: u64 = histogram.values().sum();
        let (mean, var) = moments(&histogram);
        let ci95 = if replicas > 0 { 1.96 * (var / replicas as f64).sqrt() } else { 0.0 };
        SimulationReport { sequence: sequence.into(), replicas, seed, histogram, mean, var, ci95, threshold: None }
    }

    /// Fraction of replicas with height `>= threshold` (real-valued, not rounded).
    pub fn fraction_at_or_above(&self, threshold: f64) -> f64 {
        let hits: u64 = self.histogram.iter().filter(|(&h, _)| h as f64 >= threshold).map(|(_, &c)| c).sum();
        hits as f64 / self.replicas as f64
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        let fraction_at_or_above = self.fraction_at_or_above(threshold);
        self.threshold = Some(ThresholdStats { threshold, fraction_at_or_above });
        self
    }

    /// Checks that the counts add up and that the moments agree with the histogram.
    pub fn audit(&self) -> Result<()> {
        let total: u64 = self.histogram.values().sum();
        if total != self.replicas {
            return Err(Error::Domain(format!("histogram holds {total} replicas, report says {}", self.replicas)));
        }
        let (mean, var) = moments(&self.histogram);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        if !close(mean, self.mean) || !close(var, self.var) {
            return Err(Error::Domain("moments disagree with the histogram".into()));
        }
        Ok(())
    }

    pub fn empirical_law(&self) -> EmpiricalLaw {
        EmpiricalLaw::from_histogram(&self.histogram)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Domain(format!("bad report JSON: {e}")))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("height,count\n");
        for (h, c) in &self.histogram {
            writeln!(out, "{h},{c}").unwrap();
        }
        out
    }
}

/// Mean and Bessel-corrected variance of a histogram.
fn moments(histogram: &BTreeMap<u32, u64>) -> (f64, f64) {
    let n: u64 = histogram.values().sum();
    if n == 0 {
        return (0.0, 0.0);
    }
    let sum: u128 = histogram.iter().map(|(&h, &c)| h as u128 * c as u128).sum();
    let mean = sum as f64 / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = histogram.iter().map(|(&h, &c)| c as f64 * (h as f64 - mean).powi(2)).sum();
    (mean, ss / (n - 1) as f64)
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    if parallelism == 0 {
        return Err(Error::Domain("parallelism must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))
}

fn merge(mut a: BTreeMap<u32, u64>, b: BTreeMap<u32, u64>) -> BTreeMap<u32, u64> {
    for (h, c) in b {
        *a.entry(h).or_insert(0) += c;
    }
    a
}

/// Histogram of `sampler` over replicas `0..replicas`. The sampler gets the
/// replica's stream and a scratch buffer reused within a worker chunk.
pub fn run_histogram<F>(replicas: u64, master_seed: u64, parallelism: usize, sampler: F) -> Result<BTreeMap<u32, u64>>
where
    F: Fn(&mut RngStream, &mut Vec<u32>) -> Result<u32> + Sync,
{
    let chunks = replicas.div_ceil(CHUNK);
    pool(parallelism)?.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut scratch = Vec::new();
                let mut hist = BTreeMap::new();
                for i in chunk * CHUNK..((chunk + 1) * CHUNK).min(replicas) {
                    let h = sampler(&mut RngStream::new(master_seed, i), &mut scratch)?;
                    *hist.entry(h).or_insert(0) += 1;
                }
                Ok(hist)
            })
            .try_reduce(BTreeMap::new, |a, b| Ok(merge(a, b)))
    })
}

/// Per-replica outputs of `sampler`, in replica order.
pub fn run_replicas<T, F>(replicas: u64, master_seed: u64, parallelism: usize, sampler: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngStream) -> Result<T> + Sync,
{
    pool(parallelism)?
        .install(|| (0..replicas).into_par_iter().map(|i| sampler(&mut RngStream::new(master_seed, i))).collect())
}

/// Height histogram of the forward tree of `seq`.
pub fn run_mc(seq: &ChoiceSequence, replicas: u64, master_seed: u64, parallelism: usize) -> Result<SimulationReport> {
    seq.ensure_valid()?;
    if replicas == 0 {
        return Err(Error::Domain("replicas must be at least 1".into()));
    }
    let histogram = run_histogram(replicas, master_seed, parallelism, |rng, scratch| sample_height(seq, rng, scratch))?;
    let report = SimulationReport::from_histogram(seq.to_string(), master_seed, histogram);
    debug_assert!(report.audit().is_ok());
    Ok(report)
}

/// Height histogram of the random recursive tree with `n` edges, using the
/// depth-only sampler.
pub fn run_rrt(n: usize, replicas: u64, master_seed: u64, parallelism: usize) -> Result<SimulationReport> {
    let histogram = run_histogram(replicas, master_seed, parallelism, |rng, depths| {
        rrt_depths(n, rng, depths);
        Ok(depths.iter().copied().max().unwrap_or(0))
    })?;
    Ok(SimulationReport::from_histogram(ChoiceSequence::rrt(n).to_string(), master_seed, histogram))
}

pub fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BennettQuery {
    /// Sum of the Bernoulli parameters.
    pub m_n: f64,
    pub t: f64,
}

/// `g(u) = (1 + u) ln(1 + u) − u`.
pub fn bennett_g(u: f64) -> f64 {
    (1.0 + u) * (1.0 + u).ln() - u
}

/// `exp(−m g(t/m))`, which bounds both `P(Σ ≥ m + t)` and `P(Σ ≤ m − t)`.
pub fn bennett_bound(q: BennettQuery) -> Result<f64> {
    if q.m_n.is_nan() || q.m_n <= 0.0 || !q.m_n.is_finite() {
        return Err(Error::Domain(format!("the Bernoulli mean sum must be positive, got {}", q.m_n)));
    }
    if q.t.is_nan() || q.t <= 0.0 || !q.t.is_finite() {
        return Err(Error::Domain(format!("the deviation must be positive, got {}", q.t)));
    }
    Ok((-q.m_n * bennett_g(q.t / q.m_n)).exp())
}

/// Sum of the Bernoulli parameters of the uniform-active-depth law of `seq`.
pub fn depth_law_mean(seq: &ChoiceSequence) -> Result<f64> {
    Ok(uniform_active_depth_law(seq)?.iter().map(|p| p.to_f64().unwrap_or(0.0)).sum())
}

/// Empirical `P(Σ > threshold)` for `Σ ~ Binomial(trials, p)`, each draw a
/// sum of `trials` uniform comparisons on its own stream.
pub fn binomial_upper_tail(
    trials: usize,
    p: f64,
    threshold: f64,
    draws: u64,
    master_seed: u64,
    parallelism: usize,
) -> Result<f64> {
    let histogram = run_histogram(draws, master_seed, parallelism, |rng, _| {
        Ok((0..trials).filter(|_| rng.unit() < p).count() as u32)
    })?;
    let above: u64 = histogram.iter().filter(|(&k, _)| k as f64 > threshold).map(|(_, &c)| c).sum();
    Ok(above as f64 / draws as f64)
}

/// `e ln n − 5 ln ln n`; defined for `n >= 16`.
pub fn theorem_threshold(n: usize) -> Result<f64> {
    if n < 16 {
        return Err(Error::Domain(format!("the height threshold needs n >= 16, got {n}")));
    }
    let ln = (n as f64).ln();
    Ok(std::f64::consts::E * ln - 5.0 * ln.ln())
}

/// Simulation report of `seq` annotated with the height threshold for `n`.
pub fn theorem_report(
    seq: &ChoiceSequence,
    n: usize,
    replicas: u64,
    master_seed: u64,
    parallelism: usize,
) -> Result<SimulationReport> {
    let threshold = theorem_threshold(n)?;
    if !classify(seq, n).in_x_n {
        return Err(Error::InvalidSequence(format!(
            "the sequence must have {n} attach steps and keep an active vertex until its last step"
        )));
    }
    Ok(run_mc(seq, replicas, master_seed, parallelism)?.with_threshold(threshold))
}

/// Fraction of replicas whose height reaches `e ln n − 5 ln ln n`.
pub fn check_theorem_main(seq: &ChoiceSequence, n: usize, replicas: u64, master_seed: u64) -> Result<f64> {
    let report = theorem_report(seq, n, replicas, master_seed, default_parallelism())?;
    Ok(report.threshold.expect("set by theorem_report").fraction_at_or_above)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DominanceKind {
    Dominates,
    Dominated,
    Incomparable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub kind: DominanceKind,
    /// The two empirical laws coincide.
    pub identical: bool,
    /// Largest `|F1 − F2|` over the joint support.
    pub max_gap: f64,
}

/// Compares the empirical CDFs of two reports. `Dominates` means the first
/// is stochastically larger: `F1 <= F2 + slack` everywhere while `F2` exceeds
/// `F1` somewhere by more than `slack`. When neither side clears the band the
/// verdict is `Inconclusive`.
pub fn empirical_dominance(r1: &SimulationReport, r2: &SimulationReport, slack: f64) -> DominanceVerdict {
    let (l1, l2) = (r1.empirical_law(), r2.empirical_law());
    let mut heights: Vec<u32> = l1.support().chain(l2.support()).collect();
    heights.sort_unstable();
    heights.dedup();
    let (mut up, mut down) = (0.0f64, 0.0f64);
    for &h in &heights {
        let d = l1.cdf(h) - l2.cdf(h);
        up = up.max(d);
        down = down.max(-d);
    }
    let identical = r1.histogram.len() == r2.histogram.len()
        && heights.iter().all(|&h| l1.mass(h) == l2.mass(h));
    let kind = if identical {
        DominanceKind::Dominates
    } else {
        match (up <= slack, down <= slack) {
            (true, true) => DominanceKind::Inconclusive,
            (true, false) => DominanceKind::Dominates,
            (false, true) => DominanceKind::Dominated,
            (false, false) => DominanceKind::Incomparable,
        }
    };
    DominanceVerdict { kind, identical, max_gap: up.max(down) }
}

/// `E|h(U) − h(V)|` for two uniform distinct vertices of the random
/// recursive tree with `m` edges, estimated for each `m`.
pub fn walk_gap_growth(m_values: &[usize], replicas: u64, master_seed: u64, parallelism: usize) -> Result<Vec<(usize, f64)>> {
    if replicas == 0 {
        return Err(Error::Domain("replicas must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(m_values.len());
    for &m in m_values {
        if m == 0 {
            return Err(Error::Domain("the tree needs at least one edge".into()));
        }
        let hist = run_histogram(replicas, master_seed, parallelism, |rng, depths| {
            rrt_depths(m, rng, depths);
            let (u, v) = rng.choose_distinct_pair(m + 1);
            Ok(depths[u].abs_diff(depths[v]))
        })?;
        let total: u64 = hist.iter().map(|(&g, &c)| g as u64 * c).sum();
        out.push((m, total as f64 / replicas as f64));
    }
    Ok(out)
}
