use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use serde_json::json;

use frostree_core::coupling::{
    couple_prop_i, couple_prop_ii, couple_prop_iii, couple_reduce, reduce_once, reduce_to_prefix, samples_to_csv,
    CaseTag, CoupledSample,
};
use frostree_core::exact::{
    exact_height_distribution_forward, exact_height_distribution_reverse, min_floor, min_floor_search,
    stochastic_dominates,
};
use frostree_core::forward::build_forward;
use frostree_core::montecarlo::{
    bennett_bound, bennett_g, depth_law_mean, empirical_dominance, run_mc, run_replicas, theorem_report, BennettQuery,
    SimulationReport,
};
use frostree_core::rng::{enumerate_law, Chooser};
use frostree_core::{parse_sequence, ChoiceSequence, ExactLaw, RngStream};

use crate::{CliError, Command, Common, Construction, Format, Mode, Which};

const ENUMERATION_LEAF_CAP: usize = 10_000_000;

type Outcome<'a> = Result<(&'a Common, String), CliError>;

pub fn run(command: &Command) -> Outcome<'_> {
    match command {
        Command::Simulate { common, dump_tree } => simulate(common, dump_tree.as_deref()),
        Command::Exact { common, construction } => exact(common, *construction),
        Command::Couple { common, which, m } => couple(common, *which, *m),
        Command::Compare { common, family, slack } => compare(common, family.as_deref(), *slack),
        Command::Reduce { common, target } => reduce(common, *target),
        Command::Bound { common, mean, t } => bound(common, *mean, *t),
        Command::Theorem { common } => theorem(common),
    }
}

fn parse(text: &str) -> Result<ChoiceSequence, CliError> {
    Ok(parse_sequence(text)?)
}

fn need<T: Copy>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("this subcommand needs `{flag}`")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    text
}

fn report_text(report: &SimulationReport, format: Format) -> String {
    match format {
        Format::Json => {
            let mut text = report.to_json();
            text.push('\n');
            text
        }
        Format::Csv => report.to_csv(),
    }
}

fn simulate<'a>(common: &'a Common, dump_tree: Option<&std::path::Path>) -> Outcome<'a> {
    let seq = parse(&common.seq)?;
    let report = run_mc(&seq, common.replicas, common.seed, common.threads as usize)?;
    if let Some(path) = dump_tree {
        let tree = build_forward(&seq, &mut RngStream::new(common.seed, 0))?;
        std::fs::write(path, tree.dump())
            .map_err(|e| CliError::Domain(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok((common, report_text(&report, common.format)))
}

fn law_text(seq: &ChoiceSequence, construction: &str, law: &ExactLaw, format: Format) -> String {
    match format {
        Format::Json => to_json(&json!({
            "sequence": seq.to_string(),
            "construction": construction,
            "law": law.to_json(),
            "mean": law.mean().to_string(),
            "mean_f64": law.to_f64().mean(),
        })),
        Format::Csv => {
            let mut out = String::from("height,probability\n");
            for (h, p) in law.masses() {
                writeln!(out, "{h},{p}").unwrap();
            }
            out
        }
    }
}

fn exact(common: &Common, construction: Construction) -> Outcome<'_> {
    let seq = parse(&common.seq)?;
    let text = match construction {
        Construction::Forward => law_text(&seq, "forward", &exact_height_distribution_forward(&seq)?, common.format),
        Construction::Reverse => law_text(&seq, "reverse", &exact_height_distribution_reverse(&seq)?, common.format),
        Construction::Both => {
            let forward = exact_height_distribution_forward(&seq)?;
            let reverse = exact_height_distribution_reverse(&seq)?;
            if forward != reverse {
                return Err(CliError::Domain(format!("laws equal: false for `{seq}`")));
            }
            let mut text = law_text(&seq, "both", &forward, common.format);
            text.push_str("laws equal: true\n");
            text
        }
    };
    Ok((common, text))
}

fn case_label(case: Option<CaseTag>) -> String {
    case.map(|c| c.to_string()).unwrap_or_default()
}

fn sample_once<C: Chooser>(
    which: Which,
    seq: &ChoiceSequence,
    m: usize,
    n: usize,
    chooser: &mut C,
) -> frostree_core::Result<(CoupledSample, Option<u32>)> {
    Ok(match which {
        Which::Reduce => (couple_reduce(seq, chooser)?, None),
        Which::I => (couple_prop_i(m, n, chooser)?, None),
        Which::Ii => (couple_prop_ii(m, n, chooser)?, None),
        Which::Iii => {
            let s = couple_prop_iii(n, chooser)?;
            let sample = CoupledSample {
                height_x: s.height_x,
                height_xhat: s.height_xhat,
                case_tag: Some(CaseTag::Configuration(s.config_x)),
                split: None,
                trace: None,
            };
            (sample, Some(s.height_rrt))
        }
    })
}

fn couple(common: &Common, which: Which, m: usize) -> Outcome<'_> {
    let seq = parse(&common.seq)?;
    let n = match which {
        Which::Reduce => 0,
        _ => need(common.n, "--n")?,
    };
    let label = match which {
        Which::Reduce => format!("reduce {seq}"),
        Which::I => format!("i m={m} n={n}"),
        Which::Ii => format!("ii m={m} n={n}"),
        Which::Iii => format!("iii n={n}"),
    };
    if common.mode == Mode::Enumerate {
        // Input errors do not depend on the draws, so one trial run surfaces them.
        sample_once(which, &seq, m, n, &mut RngStream::new(0, 0))?;
        let law = enumerate_law(ENUMERATION_LEAF_CAP, |c| {
            let (s, rrt) = sample_once(which, &seq, m, n, c).expect("checked on a trial run");
            (s.height_x, s.height_xhat, case_label(s.case_tag), rrt)
        })?;
        let rows: Vec<_> = law.into_iter().map(|((hx, hxh, case, rrt), p)| (hx, hxh, case, rrt, p)).collect();
        let text = match common.format {
            Format::Json => {
                let rows: Vec<_> = rows
                    .iter()
                    .map(|(hx, hxh, case, rrt, p)| {
                        json!({"height_x": hx, "height_xhat": hxh, "case": case, "height_rrt": rrt, "probability": p.to_string()})
                    })
                    .collect();
                to_json(&json!({"coupling": label, "law": rows}))
            }
            Format::Csv => {
                let mut merged = BTreeMap::new();
                for (hx, hxh, case, _, p) in rows {
                    *merged.entry((hx, hxh, case)).or_insert_with(BigRational::zero) += p;
                }
                let mut out = String::from("height_x,height_xhat,case,probability\n");
                for ((hx, hxh, case), p) in &merged {
                    writeln!(out, "{hx},{hxh},{case},{p}").unwrap();
                }
                out
            }
        };
        return Ok((common, text));
    }

    let samples = run_replicas(common.replicas, common.seed, common.threads as usize, |rng| {
        sample_once(which, &seq, m, n, rng)
    })?;
    let text = match common.format {
        Format::Csv => samples_to_csv(&samples.iter().map(|(s, _)| s.clone()).collect::<Vec<_>>()),
        Format::Json => {
            let mut hist_x = BTreeMap::new();
            let mut hist_xhat = BTreeMap::new();
            let mut cases: BTreeMap<String, u64> = BTreeMap::new();
            let mut violations = 0u64;
            for (s, _) in &samples {
                *hist_x.entry(s.height_x).or_insert(0u64) += 1;
                *hist_xhat.entry(s.height_xhat).or_insert(0u64) += 1;
                if let Some(tag) = s.case_tag {
                    *cases.entry(tag.to_string()).or_insert(0) += 1;
                }
                violations += u64::from(s.height_xhat > s.height_x);
            }
            let x = SimulationReport::from_histogram(label.clone(), common.seed, hist_x);
            let xhat = SimulationReport::from_histogram(label.clone(), common.seed, hist_xhat);
            let mut value = json!({
                "coupling": label,
                "replicas": common.replicas,
                "seed": common.seed,
                "mean_x": x.mean,
                "mean_xhat": xhat.mean,
                "histogram_x": x.histogram,
                "histogram_xhat": xhat.histogram,
                "xhat_above_x": violations,
                "cases": cases,
            });
            if which == Which::Iii {
                let total: u64 = samples.iter().map(|(_, r)| r.unwrap_or(0) as u64).sum();
                value["mean_rrt"] = json!(total as f64 / common.replicas as f64);
            }
            to_json(&value)
        }
    };
    Ok((common, text))
}

fn compare<'a>(common: &'a Common, family: Option<&std::path::Path>, slack: f64) -> Outcome<'a> {
    if let Some(path) = family {
        let n = need(common.n, "--n")?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let members = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(parse)
            .collect::<Result<Vec<_>, _>>()?;
        let floor = min_floor_search(n, &members)?;
        let text = match common.format {
            Format::Json => to_json(&json!({"n": n, "members": members.len(), "min_floor": floor})),
            Format::Csv => format!("n,members,min_floor\n{n},{},{floor}\n", members.len()),
        };
        return Ok((common, text));
    }

    let first = parse(&common.seq)?;
    let second = parse(common.seq2.as_deref().ok_or_else(|| CliError::Usage("compare needs `--seq2`".into()))?)?;
    let text = match common.mode {
        Mode::Enumerate => {
            let l1 = exact_height_distribution_forward(&first)?;
            let l2 = exact_height_distribution_forward(&second)?;
            let (d12, d21) = (stochastic_dominates(&l1, &l2), stochastic_dominates(&l2, &l1));
            let verdict = match (d12, d21) {
                (true, true) => "equal",
                (true, false) => "dominates",
                (false, true) => "dominated",
                (false, false) => "incomparable",
            };
            match common.format {
                Format::Json => to_json(&json!({
                    "first": first.to_string(),
                    "second": second.to_string(),
                    "first_dominates_second": d12,
                    "second_dominates_first": d21,
                    "verdict": verdict,
                    "floor_for_second": min_floor(&l1, &l2),
                })),
                Format::Csv => cdf_csv(&l1.to_f64(), &l2.to_f64()),
            }
        }
        Mode::Mc => {
            let threads = common.threads as usize;
            let r1 = run_mc(&first, common.replicas, common.seed, threads)?;
            let r2 = run_mc(&second, common.replicas, common.seed, threads)?;
            match common.format {
                Format::Json => to_json(&json!({
                    "first": first.to_string(),
                    "second": second.to_string(),
                    "slack": slack,
                    "verdict": empirical_dominance(&r1, &r2, slack),
                })),
                Format::Csv => cdf_csv(&r1.empirical_law(), &r2.empirical_law()),
            }
        }
    };
    Ok((common, text))
}

fn cdf_csv(a: &frostree_core::EmpiricalLaw, b: &frostree_core::EmpiricalLaw) -> String {
    let top = a.support_max().max(b.support_max());
    let mut out = String::from("height,cdf_first,cdf_second\n");
    for h in 0..=top {
        writeln!(out, "{h},{},{}", a.cdf(h), b.cdf(h)).unwrap();
    }
    out
}

fn reduce(common: &Common, target: Option<usize>) -> Outcome<'_> {
    let seq = parse(&common.seq)?;
    let text = match target {
        Some(r) => {
            let reduced = reduce_to_prefix(&seq, r)?;
            match common.format {
                Format::Json => to_json(&json!({
                    "original": seq.to_string(),
                    "target": r,
                    "reduced": reduced.to_string(),
                    "leading_run": reduced.leading_attach_run(),
                })),
                Format::Csv => format!(
                    "original,target,reduced,leading_run\n{seq},{r},{reduced},{}\n",
                    reduced.leading_attach_run()
                ),
            }
        }
        None => {
            let red = reduce_once(&seq)?;
            match common.format {
                Format::Json => to_json(&json!({
                    "original": seq.to_string(),
                    "reduced": red.reduced.to_string(),
                    "removed_at": red.removed_at,
                })),
                Format::Csv => format!("original,reduced,removed_at\n{seq},{},{}\n", red.reduced, red.removed_at),
            }
        }
    };
    Ok((common, text))
}

fn bound(common: &Common, mean: Option<f64>, t: f64) -> Outcome<'_> {
    let m_n = match mean {
        Some(m) => m,
        None => {
            let seq = parse(&common.seq)?;
            depth_law_mean(&seq)?
        }
    };
    let b = bennett_bound(BennettQuery { m_n, t })?;
    let g = bennett_g(t / m_n);
    let text = match common.format {
        Format::Json => to_json(&json!({"m_n": m_n, "t": t, "g": g, "bound": b})),
        Format::Csv => format!("m_n,t,g,bound\n{m_n},{t},{g},{b}\n"),
    };
    Ok((common, text))
}

fn theorem(common: &Common) -> Outcome<'_> {
    let seq = parse(&common.seq)?;
    let n = need(common.n, "--n")?;
    let report = theorem_report(&seq, n, common.replicas, common.seed, common.threads as usize)?;
    let stats = report.threshold.expect("theorem reports carry a threshold");
    let text = match common.format {
        Format::Json => {
            let mut value = serde_json::to_value(&report).expect("reports serialize");
            value["n"] = json!(n);
            value["fraction"] = json!(stats.fraction_at_or_above);
            to_json(&value)
        }
        Format::Csv => format!(
            "n,replicas,threshold,fraction\n{n},{},{},{}\n",
            report.replicas, stats.threshold, stats.fraction_at_or_above
        ),
    };
    Ok((common, text))
}
