//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use num_rational::BigRational;

use frostree_core::coupling::{couple_prop_i, couple_prop_ii, couple_prop_iii, couple_reduce, reduce_once, CaseTag};
use frostree_core::exact::{
    exact_height_distribution_forward, exact_height_distribution_reverse, stochastic_dominates, valid_sequences,
    HeightDistribution,
};
use frostree_core::forward::build_forward;
use frostree_core::montecarlo::{
    bennett_bound, binomial_upper_tail, default_parallelism, run_mc, run_replicas, run_rrt, theorem_threshold,
    BennettQuery,
};
use frostree_core::rng::{enumerate_capped, enumerate_law, Chooser};
use frostree_core::{ChoiceSequence, ExactLaw, RngStream, Step};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const LEAF_CAP: usize = 50_000_000;

fn r(n: u64, d: u64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn law_of<K: Ord + Copy>(law: &BTreeMap<K, BigRational>, f: impl Fn(K) -> u32) -> ExactLaw {
    HeightDistribution::from_masses(law.iter().map(|(k, w)| (f(*k), w.clone())))
}

fn base(m: usize) -> ChoiceSequence {
    ChoiceSequence::rrt(m).concat(&ChoiceSequence::repeat(Step::Freeze, m - 1))
}

fn law_equivalence() -> Outcome {
    let mut count = 0;
    for m in 0..=8 {
        for seq in valid_sequences(m) {
            let forward = exact_height_distribution_forward(&seq).map_err(|e| e.to_string())?;
            let reverse = exact_height_distribution_reverse(&seq).map_err(|e| e.to_string())?;
            check(forward == reverse, || format!("laws differ on `{seq}`"))?;
            check(forward.is_normalized(), || format!("law of `{seq}` does not sum to 1"))?;
            count += 1;
        }
    }
    Ok(format!("{count} valid sequences with m <= 8, forward law = reverse law exactly"))
}

fn dp_correctness() -> Outcome {
    let mut count = 0;
    for m in 0..=6 {
        for seq in valid_sequences(m) {
            let dp = exact_height_distribution_forward(&seq).map_err(|e| e.to_string())?;
            let naive = enumerate_law(LEAF_CAP, |c| build_forward(&seq, c).unwrap().height()).map_err(|e| e.to_string())?;
            check(dp == HeightDistribution::from_masses(naive), || format!("DP differs on `{seq}`"))?;
            count += 1;
        }
    }
    Ok(format!("{count} valid sequences with m <= 6, DP = vertex-level enumeration"))
}

fn small_height_formulas() -> Outcome {
    for n in 1..=5u64 {
        let rrt = exact_height_distribution_forward(&ChoiceSequence::rrt(n as usize)).map_err(|e| e.to_string())?;
        check(rrt.mass(1) == r(1, factorial(n)), || format!("P(Height(R_{n}) = 1) = {}", rrt.mass(1)))?;
        let alt = exact_height_distribution_forward(&ChoiceSequence::alternating(n as usize)).map_err(|e| e.to_string())?;
        check(alt.mass(1) == r(1, 1 << (n - 1)), || format!("P(Height(A_{n}) = 1) = {}", alt.mass(1)))?;
        let law = enumerate_law(LEAF_CAP, |c| couple_prop_iii(n as usize, c).unwrap()).map_err(|e| e.to_string())?;
        let hx = law_of(&law, |s| s.height_x);
        let hxh = law_of(&law, |s| s.height_xhat);
        check(hx.mass(1) == r(1, 3 * factorial(n + 1)), || format!("n={n}: P(height_x = 1) = {}", hx.mass(1)))?;
        check(hxh.mass(1) == r(1, 2 * factorial(n)), || format!("n={n}: P(height_xhat = 1) = {}", hxh.mass(1)))?;
    }
    Ok("n = 1..5: 1/n!, 1/2^(n-1), (1/3)/(n+1)!, (1/2)/n! all exact".into())
}

fn non_dominance() -> Outcome {
    let mut details = Vec::new();
    for n in 3..=5 {
        let a = exact_height_distribution_forward(&ChoiceSequence::alternating(n)).unwrap();
        let rr = exact_height_distribution_forward(&ChoiceSequence::rrt(n)).unwrap();
        check(!stochastic_dominates(&a, &rr) && !stochastic_dominates(&rr, &a), || {
            format!("A_{n} and R_{n} are comparable")
        })?;
        details.push(format!("n={n}"));
    }
    Ok(format!("CDFs of A_n and R_n cross for {}", details.join(", ")))
}

/// A valid sequence of length `2..=40` that starts with an attach run followed by a freeze.
fn random_reducible(rng: &mut RngStream) -> ChoiceSequence {
    loop {
        let m = 2 + rng.choose(39);
        let mut steps = Vec::with_capacity(m);
        let mut s = 1i64;
        for i in 0..m {
            let step = if i == 0 || (s == 1 && i + 1 < m) || rng.choose(2) == 0 { Step::Attach } else { Step::Freeze };
            s += step.sign();
            steps.push(step);
        }
        let seq = ChoiceSequence::new(steps);
        if seq.is_valid() && reduce_once(&seq).is_ok() {
            return seq;
        }
    }
}

fn pathwise_coupling() -> Outcome {
    let mut gen = RngStream::new(2024, u64::MAX);
    let sequences: Vec<ChoiceSequence> = (0..20).map(|_| random_reducible(&mut gen)).collect();
    let mut runs = 0u64;
    for (idx, seq) in sequences.iter().enumerate() {
        let samples = run_replicas(100_000, 500 + idx as u64, default_parallelism(), |rng| couple_reduce(seq, rng))
            .map_err(|e| e.to_string())?;
        let bad = samples.iter().filter(|s| s.height_xhat > s.height_x).count();
        check(bad == 0, || format!("{bad} violations on `{seq}`"))?;
        runs += samples.len() as u64;
    }
    let mut exhaustive = 0;
    for m in 2..=6 {
        for seq in valid_sequences(m) {
            if reduce_once(&seq).is_err() {
                continue;
            }
            let leaves = enumerate_capped(LEAF_CAP, |c| {
                let s = couple_reduce(&seq, c).unwrap();
                s.height_xhat <= s.height_x
            })
            .map_err(|e| e.to_string())?;
            check(leaves.iter().all(|(ok, _)| *ok), || format!("exhaustive violation on `{seq}`"))?;
            exhaustive += 1;
        }
    }
    let longest = sequences.iter().map(|s| s.len()).max().unwrap_or(0);
    Ok(format!(
        "{runs} seeded runs over 20 sequences (longest m = {longest}), {exhaustive} sequences exhaustive, 0 violations"
    ))
}

fn coupling_marginals() -> Outcome {
    for (m, n) in [(2usize, 1usize), (3, 2)] {
        let law = enumerate_law(LEAF_CAP, |c| {
            let s = couple_prop_i(m, n, c).unwrap();
            (s.height_x, s.height_xhat)
        })
        .map_err(|e| e.to_string())?;
        let x = base(m).concat(&ChoiceSequence::new(vec![Step::Freeze, Step::Attach])).concat(&ChoiceSequence::rrt(n));
        let xhat = base(m).concat(&ChoiceSequence::rrt(n));
        check(law_of(&law, |k| k.0) == exact_height_distribution_forward(&x).unwrap(), || {
            format!("height_x law differs from `{x}` at (m, n) = ({m}, {n})")
        })?;
        check(law_of(&law, |k| k.1) == exact_height_distribution_forward(&xhat).unwrap(), || {
            format!("height_xhat law differs from `{xhat}` at (m, n) = ({m}, {n})")
        })?;
    }
    Ok("(m, n) in {(2,1), (3,2)}: both marginals equal the exact laws".into())
}

fn prop_ii_structure() -> Outcome {
    let replicas = 30_000u64;
    let mut details = Vec::new();
    for (m, n) in [(5usize, 10usize), (20, 40)] {
        let samples = run_replicas(replicas, 77 + m as u64, default_parallelism(), |rng| couple_prop_ii(m, n, rng))
            .map_err(|e| e.to_string())?;
        let mut counts = BTreeMap::new();
        for s in &samples {
            let case = s.case_tag.unwrap();
            *counts.entry(case).or_insert(0u64) += 1;
            match case {
                CaseTag::AFrozenChild if s.split != Some(0) => check(s.height_x == s.height_xhat, || {
                    format!("case a with I = {:?}: {} vs {}", s.split, s.height_x, s.height_xhat)
                })?,
                CaseTag::BFrozenParent => check(s.height_x.abs_diff(s.height_xhat) <= 1, || {
                    format!("case b: {} vs {}", s.height_x, s.height_xhat)
                })?,
                _ => {}
            }
        }
        for (case, c) in &counts {
            let f = *c as f64 / replicas as f64;
            check((f - 1.0 / 3.0).abs() <= 0.01, || format!("case {case} frequency {f:.4}"))?;
        }
        let freq: Vec<String> = counts.values().map(|c| format!("{:.4}", *c as f64 / replicas as f64)).collect();
        details.push(format!("(m,n)=({m},{n}) freqs {}", freq.join("/")));
    }
    Ok(format!("{}; pathwise claims hold", details.join("; ")))
}

fn prop_iii_identity() -> Outcome {
    for n in 1..=4 {
        let law = enumerate_law(LEAF_CAP, |c| couple_prop_iii(n, c).unwrap()).map_err(|e| e.to_string())?;
        let hxh = law_of(&law, |s| s.height_xhat);
        let rrt = exact_height_distribution_forward(&ChoiceSequence::rrt(n)).unwrap();
        check(law_of(&law, |s| s.height_rrt) == rrt, || format!("n={n}: coupled R_n law is off"))?;
        check(hxh.mean() == rrt.mean() + r(1, 2), || format!("n={n}: {} vs {} + 1/2", hxh.mean(), rrt.mean()))?;
        let direct = exact_height_distribution_forward(
            &ChoiceSequence::new(vec![Step::Attach, Step::Freeze]).concat(&ChoiceSequence::rrt(n)),
        )
        .unwrap();
        check(direct.mean() == rrt.mean() + r(1, 2), || format!("n={n}: direct law breaks the identity"))?;
    }
    Ok("n = 1..4: E[Height(x̂)] = E[Height(R_n)] + 1/2 exactly".into())
}

fn theorem_proxy() -> Outcome {
    let n = 10_000usize;
    let threshold = theorem_threshold(n).unwrap();
    let family = [
        ChoiceSequence::rrt(n),
        ChoiceSequence::alternating(n),
        ChoiceSequence::rrt(n / 2)
            .concat(&ChoiceSequence::repeat(Step::Freeze, n / 2 - 1))
            .concat(&ChoiceSequence::rrt(n / 2)),
    ];
    let mut fractions = Vec::new();
    for (i, seq) in family.iter().enumerate() {
        let report = run_mc(seq, 1000, 900 + i as u64, default_parallelism()).map_err(|e| e.to_string())?;
        let f = report.fraction_at_or_above(threshold);
        check(f >= 0.95, || format!("member {i} reaches the threshold in only {f:.3} of replicas"))?;
        fractions.push(format!("{f:.3}"));
    }
    Ok(format!("threshold {threshold:.3}, fractions {}", fractions.join(", ")))
}

fn growth_laws() -> Outcome {
    let n = 10_000usize;
    let alt = run_mc(&ChoiceSequence::alternating(n), 1000, 31, default_parallelism()).map_err(|e| e.to_string())?;
    let ratio = alt.mean / n as f64;
    check((0.45..=0.55).contains(&ratio), || format!("mean Height(A_n)/n = {ratio:.4}"))?;
    let mut details = vec![format!("Height(A_n)/n = {ratio:.4}")];
    for n in [1_000usize, 10_000, 100_000] {
        let report = run_rrt(n, 10_000, 41, default_parallelism()).map_err(|e| e.to_string())?;
        let ln = (n as f64).ln();
        let centre = std::f64::consts::E * ln - 1.5 * ln.ln();
        let offset = report.mean - centre;
        check((-8.0..=8.0).contains(&offset), || format!("n={n}: offset {offset:.3}"))?;
        details.push(format!("R_{n} offset {offset:+.3}"));
    }
    Ok(details.join(", "))
}

fn bennett() -> Outcome {
    let (trials, p, draws) = (200usize, 0.05, 1_000_000u64);
    let m = trials as f64 * p;
    let mut details = Vec::new();
    for (i, t) in [5.0, 10.0].into_iter().enumerate() {
        let tail = binomial_upper_tail(trials, p, m + t, draws, 60 + i as u64, default_parallelism())
            .map_err(|e| e.to_string())?;
        let se = (tail * (1.0 - tail) / draws as f64).sqrt();
        let bound = bennett_bound(BennettQuery { m_n: m, t }).unwrap();
        check(tail <= bound + 3.0 * se, || format!("t={t}: tail {tail:.5} above bound {bound:.5}"))?;
        details.push(format!("t={t}: tail {tail:.5} <= bound {bound:.5}"));
    }
    Ok(details.join(", "))
}

fn determinism() -> Outcome {
    for text in ["+^100", "(+-)^50", "+^20-^19+^20", "(++-)^30"] {
        let seq: ChoiceSequence = text.parse().unwrap();
        let one = run_mc(&seq, 20_000, 7, 1).map_err(|e| e.to_string())?.to_json();
        let eight = run_mc(&seq, 20_000, 7, 8).map_err(|e| e.to_string())?.to_json();
        check(one == eight, || format!("reports differ for `{text}`"))?;
    }
    Ok("4 sequences, parallelism 1 vs 8: byte-identical JSON".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("law equivalence", law_equivalence),
        ("DP correctness", dp_correctness),
        ("exact small-height formulas", small_height_formulas),
        ("non-dominance", non_dominance),
        ("pathwise coupling", pathwise_coupling),
        ("coupling marginals", coupling_marginals),
        ("freeze-after-attach structure", prop_ii_structure),
        ("mean identity", prop_iii_identity),
        ("height threshold proxy", theorem_proxy),
        ("growth laws", growth_laws),
        ("Bennett bound", bennett),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
