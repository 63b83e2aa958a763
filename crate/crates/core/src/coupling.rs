//! Couplings between the trees of two related choice sequences.
//!
//! * [`couple_reduce`] runs the reverse construction for a sequence `x`
//!   and for `x̂`, obtained by deleting the last attach step of the leading
//!   run together with the freeze step that follows it. The distinguished
//!   frozen singleton is kept in position 0 and the reduced forest replays
//!   the grafts of the full forest one step late, which makes
//!   `Height(x̂) <= Height(x)` hold on every sample.
//! * [`couple_prop_i`], [`couple_prop_ii`] and [`couple_prop_iii`] build
//!   the shared-randomness samples behind the three counterexamples where
//!   deleting a step raises the expected height.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::arena::{Status, TreeArena};
use crate::error::{Error, Result};
use crate::forward::{build_forward, sample_rrt, split_first_edge};
use crate::reverse::{reverse_suffix, Forest};
use crate::rng::Chooser;
use crate::sequence::{ChoiceSequence, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseTag {
    /// The new child `U'` is frozen.
    AFrozenChild,
    /// Its parent `U` is frozen.
    BFrozenParent,
    /// The other survivor `V` is frozen.
    CFrozenOther,
    /// Index of the starting configuration, in the order the mixture weights are listed.
    Configuration(u8),
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseTag::AFrozenChild => f.write_str("a"),
            CaseTag::BFrozenParent => f.write_str("b"),
            CaseTag::CFrozenOther => f.write_str("c"),
            CaseTag::Configuration(i) => write!(f, "config{i}"),
        }
    }
}

/// One bookkeeping record of the reduction coupling, taken after the graft
/// that produces forest `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingRecord {
    pub j: usize,
    /// 0 while the distinguished frozen singleton is still in position 0.
    pub marker: u8,
    /// Pair drawn for the full forest, positions counted from 0 = the
    /// distinguished singleton.
    pub pair: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReduceTrace {
    /// Records for `j = k−1, k−2, …, 0`.
    pub records: Vec<CouplingRecord>,
    /// Largest `j` whose marker is 1.
    pub j1: usize,
    /// At `j1` the two forests agree except at one position, where the full
    /// tree is the reduced one with the frozen singleton grafted on or under it.
    pub structure_holds: bool,
    /// From `j1` down to 0, every position of the full forest is at least as
    /// tall as the same position of the reduced forest.
    pub positionwise_dominance: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledSample {
    pub height_x: u32,
    pub height_xhat: u32,
    pub case_tag: Option<CaseTag>,
    /// Size `I` of the first grafted tree, for the couplings that draw one.
    pub split: Option<usize>,
    pub trace: Option<ReduceTrace>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedSequence {
    pub original: ChoiceSequence,
    pub reduced: ChoiceSequence,
    /// 1-based index `k` of the removed attach step; step `k + 1` is the removed freeze.
    pub removed_at: usize,
}

/// Removes the last attach step of the leading run and the freeze step after it.
pub fn reduce_once(seq: &ChoiceSequence) -> Result<ReducedSequence> {
    seq.ensure_valid()?;
    let k = seq.leading_attach_run();
    if k == 0 {
        return Err(Error::NotReducible(format!("`{seq}` does not start with an attach step")));
    }
    if k == seq.len() {
        return Err(Error::NotReducible(format!("`{seq}` has no freeze step")));
    }
    let mut steps = seq.steps().to_vec();
    steps.drain(k - 1..=k);
    Ok(ReducedSequence { original: seq.clone(), reduced: ChoiceSequence::new(steps), removed_at: k })
}

/// Applies [`reduce_once`] until the sequence starts with at least `target`
/// attach steps.
///
/// The leading run is not monotone along the iteration (`++--+` has run 2,
/// its reduction `+-+` has run 1), but the walk after the removed pair is
/// untouched, so the run ends up reaching `max_j S_j − 1`. Targets beyond
/// that fail with [`Error::TargetUnreachable`].
pub fn reduce_to_prefix(seq: &ChoiceSequence, target: usize) -> Result<ChoiceSequence> {
    seq.ensure_valid()?;
    let mut current = seq.clone();
    while current.leading_attach_run() < target {
        match reduce_once(&current) {
            Ok(next) => current = next.reduced,
            Err(Error::NotReducible(reason)) => {
                return Err(Error::TargetUnreachable {
                    target,
                    reason: format!(
                        "{reason} (reached from `{seq}` whose walk peaks at {})",
                        seq.max_walk()
                    ),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(current)
}

/// Pathwise coupling of the reverse construction for `seq` and its reduction.
pub fn couple_reduce<C: Chooser>(seq: &ChoiceSequence, chooser: &mut C) -> Result<CoupledSample> {
    run_reduce(seq, chooser, false)
}

/// As [`couple_reduce`], with the bookkeeping records and the structural
/// checks at the switching time.
pub fn couple_reduce_traced<C: Chooser>(seq: &ChoiceSequence, chooser: &mut C) -> Result<CoupledSample> {
    run_reduce(seq, chooser, true)
}

/// Grafts in the full forest, whose position 0 holds the distinguished
/// frozen singleton. Returns the new marker.
fn full_forest_graft(forest: &mut Forest, a: usize, b: usize, step: usize) -> Result<u8> {
    if a > 0 && b > 0 {
        forest.graft_positions(a, b, step)?;
        Ok(0)
    } else {
        let grafted = forest.graft(forest.tree(a), forest.tree(b), step)?;
        forest.set(a.max(b), grafted);
        forest.remove(0);
        Ok(1)
    }
}

fn structure_matches(full: &Forest, reduced: &Forest, pair: (usize, usize)) -> bool {
    if full.len() != reduced.len() {
        return false;
    }
    let special = pair.0.max(pair.1) - 1;
    for i in 0..full.len() {
        if i == special {
            continue;
        }
        if full.canonical(i) != reduced.canonical(i) {
            return false;
        }
    }
    let target = full.canonical(special);
    let mut under = reduced.clone();
    let f = under.new_singleton(Status::Frozen);
    let grafted = under.graft(under.tree(special), f, 0).expect("distinct roots");
    under.set(special, grafted);
    let mut over = reduced.clone();
    let f = over.new_singleton(Status::Frozen);
    let grafted = over.graft(f, over.tree(special), 0).expect("distinct roots");
    over.set(special, grafted);
    target == under.canonical(special) || target == over.canonical(special)
}

fn dominates_positionwise(full: &Forest, reduced: &Forest) -> bool {
    full.len() == reduced.len() && full.trees().iter().zip(reduced.trees()).all(|(a, b)| a.height >= b.height)
}

fn run_reduce<C: Chooser>(seq: &ChoiceSequence, chooser: &mut C, traced: bool) -> Result<CoupledSample> {
    let k = reduce_once(seq)?.removed_at;
    let walk = seq.walk();
    let mut full = Forest::new();
    for _ in 0..walk[seq.len()] {
        full.push_singleton(Status::Active);
    }
    // Shared suffix: steps m down to k + 2 use the same draws for both.
    reverse_suffix(seq, &walk, k + 1, &mut full, chooser, None)?;
    let mut reduced = full.clone();

    // Initialization: the distinguished singleton goes to position 0, then
    // the attach step k draws over positions 0..=S_{k-1}.
    full.insert_singleton(0, Status::Frozen);
    let pair = chooser.choose_distinct_pair(walk[k - 1] as usize + 1);
    let mut marker = full_forest_graft(&mut full, pair.0, pair.1, k)?;
    let mut stored = pair;

    let mut records = Vec::new();
    let mut j1 = None;
    let mut structure_holds = true;
    let mut positionwise = true;
    if traced {
        records.push(CouplingRecord { j: k - 1, marker, pair });
        if marker == 1 {
            j1 = Some(k - 1);
            structure_holds = structure_matches(&full, &reduced, pair);
            positionwise = dominates_positionwise(&full, &reduced);
        }
    }

    for j in (1..k).rev() {
        let count = walk[j] as usize;
        if marker == 1 {
            let (a, b) = chooser.choose_distinct_pair(count);
            full.graft_positions(a, b, j)?;
            reduced.graft_positions(a, b, j)?;
        } else {
            // The reduced forest replays the pair the full forest used one step earlier.
            reduced.graft_positions(stored.0 - 1, stored.1 - 1, j)?;
            let pair = chooser.choose_distinct_pair(count);
            marker = full_forest_graft(&mut full, pair.0, pair.1, j)?;
            stored = pair;
        }
        if traced {
            records.push(CouplingRecord { j: j - 1, marker, pair: stored });
            if marker == 1 && j1.is_none() {
                j1 = Some(j - 1);
                structure_holds = structure_matches(&full, &reduced, stored);
            }
            if j1.is_some() {
                positionwise &= dominates_positionwise(&full, &reduced);
            }
        }
    }
    debug_assert_eq!(marker, 1);
    debug_assert_eq!((full.len(), reduced.len()), (1, 1));

    let trace = traced.then(|| ReduceTrace {
        records,
        j1: j1.expect("marker reaches 1 by j = 0"),
        structure_holds,
        positionwise_dominance: positionwise,
    });
    Ok(CoupledSample {
        height_x: full.tree(0).height,
        height_xhat: reduced.tree(0).height,
        case_tag: None,
        split: None,
        trace,
    })
}

/// Random recursive tree with `m` edges after `m − 1` uniform freezes:
/// returns the tree and its two survivors `(u, v)`, where `v` is the one a
/// further uniform freeze would hit.
fn two_survivors<C: Chooser>(m: usize, chooser: &mut C) -> (TreeArena, usize, usize) {
    let mut steps = vec![Step::Attach; m];
    steps.extend(std::iter::repeat_n(Step::Freeze, m.saturating_sub(1)));
    let tree = build_forward(&ChoiceSequence::new(steps), chooser).expect("valid prefix");
    debug_assert_eq!(tree.active_count(), 2);
    let pick = chooser.choose(2);
    let v = tree.active_list()[pick];
    let u = tree.active_list()[1 - pick];
    (tree, u, v)
}

/// Independent random recursive trees with `I` and `n − I` edges, `I`
/// uniform on `0..=n`. Returns `(I, Height(R¹_I), Height(R²_{n−I}))`.
fn split_heights<C: Chooser>(n: usize, chooser: &mut C) -> (usize, u32, u32) {
    let i = chooser.choose(n + 1);
    let h1 = sample_rrt(i, chooser).height();
    let h2 = sample_rrt(n - i, chooser).height();
    (i, h1, h2)
}

/// Coupling for removing a freeze step followed by an attach step.
///
/// `height_x` has the law of the tree of `(+1)^m (−1)^{m−1} (−1,+1) (+1)^n`,
/// `height_xhat` that of `(+1)^m (−1)^{m−1} (+1)^n`.
pub fn couple_prop_i<C: Chooser>(m: usize, n: usize, chooser: &mut C) -> Result<CoupledSample> {
    if m == 0 {
        return Err(Error::Domain("the base tree needs at least one edge".into()));
    }
    let (base, u, v) = two_survivors(m, chooser);
    let (i, h1, h2) = split_heights(n, chooser);
    let (hu, hv, hb) = (base.depth(u), base.depth(v), base.height());
    Ok(CoupledSample {
        height_x: hb.max(hu + 1 + h1).max(hu + h2),
        height_xhat: hb.max(hu + h1).max(hv + h2),
        case_tag: None,
        split: Some(i),
        trace: None,
    })
}

/// Coupling for removing an attach step followed by a freeze step.
///
/// `height_x` has the law of the tree of `(+1)^m (−1)^{m−1} (+1,−1) (+1)^n`,
/// `height_xhat` that of `(+1)^m (−1)^{m−1} (+1)^n`. The case tag records
/// which of `U'`, `U`, `V` the freeze step hit.
pub fn couple_prop_ii<C: Chooser>(m: usize, n: usize, chooser: &mut C) -> Result<CoupledSample> {
    if m == 0 {
        return Err(Error::Domain("the base tree needs at least one edge".into()));
    }
    // The attach step picks the parent `u` of the new child among the two survivors.
    let (base, u, v) = two_survivors(m, chooser);
    let case = match chooser.choose(3) {
        0 => CaseTag::AFrozenChild,
        1 => CaseTag::BFrozenParent,
        _ => CaseTag::CFrozenOther,
    };
    let (i, h1, h2) = split_heights(n, chooser);
    let (hu, hv, hb) = (base.depth(u), base.depth(v), base.height());
    // The child sits at depth hu + 1 whatever is grafted on it.
    let height_x = match case {
        CaseTag::AFrozenChild => hb.max(hu + 1).max(hu + h1).max(hv + h2),
        CaseTag::BFrozenParent => hb.max(hu + 1 + h1).max(hv + h2),
        _ => hb.max(hu + 1 + h1).max(hu + h2),
    };
    Ok(CoupledSample {
        height_x,
        height_xhat: hb.max(hu + h1).max(hv + h2),
        case_tag: Some(case),
        split: Some(i),
        trace: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PropIiiSample {
    /// Height for `(+1,+1,−1)(+1)^n`.
    pub height_x: u32,
    /// Height for `(+1,−1)(+1)^n`.
    pub height_xhat: u32,
    /// Height of the random recursive tree with `n` edges.
    pub height_rrt: u32,
    /// Configuration of the three-vertex start of `x`, 0..5.
    pub config_x: u8,
    /// Configuration of the three-vertex start of `x̂`, 0..2.
    pub config_xhat: u8,
}

/// Height after grafting `first` on the earlier active vertex of `base` and
/// `second` on the later one.
fn graft_on_actives(base: &TreeArena, first: &TreeArena, second: &TreeArena) -> (u32, u32, u32) {
    let mut actives = base.active_list().to_vec();
    actives.sort_unstable();
    let (d1, d2) = (base.depth(actives[0]), base.depth(actives[1]));
    let height = base.height().max(d1 + first.height()).max(d2 + second.height());
    (height, d1, d2)
}

/// Coupling for removing an attach step.
///
/// A random recursive tree with `n + 1` edges is built; its first `n` edges
/// form the tree with `n` edges. Deleting the first edge of each splits it
/// in two, and the pieces are grafted on the two active vertices of the
/// three-vertex starts `(+1,+1,−1)` and `(+1,−1,+1)`.
pub fn couple_prop_iii<C: Chooser>(n: usize, chooser: &mut C) -> Result<PropIiiSample> {
    if n == 0 {
        return Err(Error::Domain("needs at least one trailing attach step".into()));
    }
    let big = sample_rrt(n + 1, chooser);
    let small = big.prefix(n + 1);
    let (t1_big, t2_big) = split_first_edge(&big);
    let (t1_small, t2_small) = split_first_edge(&small);

    let start_x = build_forward(&ChoiceSequence::new(vec![Step::Attach, Step::Attach, Step::Freeze]), chooser)?;
    let start_xhat = build_forward(&ChoiceSequence::new(vec![Step::Attach, Step::Freeze, Step::Attach]), chooser)?;

    let (height_x, d1, d2) = graft_on_actives(&start_x, &t1_big, &t2_big);
    let config_x = match (d1, d2, start_x.height()) {
        (1, 2, 2) => 0,
        (0, 2, 2) => 1,
        (0, 1, 2) => 2,
        (0, 1, 1) => 3,
        (1, 1, 1) => 4,
        other => unreachable!("three-vertex start {other:?}"),
    };
    let (height_xhat, d1, _) = graft_on_actives(&start_xhat, &t1_small, &t2_small);
    let config_xhat = if d1 == 1 { 0 } else { 1 };

    let height_rrt = t1_small.height().max(1 + t2_small.height());
    debug_assert_eq!(height_rrt, small.height());
    Ok(PropIiiSample { height_x, height_xhat, height_rrt, config_x, config_xhat })
}

/// `replica,height_x,height_xhat,case` lines under a header.
pub fn samples_to_csv(samples: &[CoupledSample]) -> String {
    let mut out = String::from("replica,height_x,height_xhat,case\n");
    for (i, s) in samples.iter().enumerate() {
        let case = s.case_tag.map(|c| c.to_string()).unwrap_or_default();
        writeln!(out, "{i},{},{},{case}", s.height_x, s.height_xhat).unwrap();
    }
    out
}
