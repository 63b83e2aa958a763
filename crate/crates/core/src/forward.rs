//! Forward recursive construction: read the sequence left to right, pick a
//! uniform active vertex at every step, and either freeze it or hang a new
//! active child below it.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::arena::TreeArena;
use crate::error::{Error, Result};
use crate::rng::Chooser;
use crate::sequence::{ChoiceSequence, Step};

/// State after one step of the forward construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepTrace {
    pub step: usize,
    pub active_count: usize,
    pub height: u32,
}

pub fn build_forward<C: Chooser>(seq: &ChoiceSequence, chooser: &mut C) -> Result<TreeArena> {
    run_forward(seq, chooser, None)
}

/// Same as [`build_forward`], also returning the state after every step.
pub fn build_forward_traced<C: Chooser>(
    seq: &ChoiceSequence,
    chooser: &mut C,
) -> Result<(TreeArena, Vec<StepTrace>)> {
    let mut trace = Vec::with_capacity(seq.len());
    let tree = run_forward(seq, chooser, Some(&mut trace))?;
    Ok((tree, trace))
}

fn run_forward<C: Chooser>(
    seq: &ChoiceSequence,
    chooser: &mut C,
    mut trace: Option<&mut Vec<StepTrace>>,
) -> Result<TreeArena> {
    let mut tree = TreeArena::with_capacity(seq.attach_count());
    for (i, &step) in seq.steps().iter().enumerate() {
        let actives = tree.active_count();
        if actives == 0 {
            return Err(Error::InvalidSequence(format!(
                "`{seq}` has no active vertex left at step {}",
                i + 1
            )));
        }
        let slot = chooser.choose(actives);
        match step {
            Step::Attach => {
                let parent = tree.active_list()[slot];
                tree.attach_child(parent, i + 1);
            }
            Step::Freeze => {
                tree.freeze_slot(slot);
            }
        }
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(StepTrace { step: i + 1, active_count: tree.active_count(), height: tree.height() });
        }
    }
    Ok(tree)
}

/// Height of the forward tree without materialising it.
///
/// Consumes exactly the draws [`build_forward`] would, so both agree on the
/// same stream. `scratch` holds the active depths and is reused across calls.
pub fn sample_height<C: Chooser>(seq: &ChoiceSequence, chooser: &mut C, scratch: &mut Vec<u32>) -> Result<u32> {
    scratch.clear();
    scratch.push(0);
    let mut height = 0;
    for (i, &step) in seq.steps().iter().enumerate() {
        if scratch.is_empty() {
            return Err(Error::InvalidSequence(format!(
                "`{seq}` has no active vertex left at step {}",
                i + 1
            )));
        }
        let slot = chooser.choose(scratch.len());
        match step {
            Step::Attach => {
                let depth = scratch[slot] + 1;
                height = height.max(depth);
                scratch.push(depth);
            }
            Step::Freeze => {
                scratch.swap_remove(slot);
            }
        }
    }
    Ok(height)
}

/// Depths of all vertices of a random recursive tree with `n` edges, in
/// creation order. Same draws as [`sample_rrt`].
pub fn rrt_depths<C: Chooser>(n: usize, chooser: &mut C, depths: &mut Vec<u32>) {
    depths.clear();
    depths.reserve(n + 1);
    depths.push(0);
    for _ in 0..n {
        let parent = chooser.choose(depths.len());
        depths.push(depths[parent] + 1);
    }
}

/// Random recursive tree with `n` edges.
pub fn sample_rrt<C: Chooser>(n: usize, chooser: &mut C) -> TreeArena {
    build_forward(&ChoiceSequence::rrt(n), chooser).expect("all-attach sequences are valid")
}

/// Builds a random recursive tree with `n` edges and deletes its first edge.
///
/// Returns `(component of the root, component of the second vertex)`, each
/// rooted at the endpoint of the deleted edge.
pub fn rrt_split<C: Chooser>(n: usize, chooser: &mut C) -> Result<(TreeArena, TreeArena)> {
    if n == 0 {
        return Err(Error::Domain("splitting needs at least one edge".into()));
    }
    Ok(split_first_edge(&sample_rrt(n, chooser)))
}

/// Deletes the edge between vertex 0 and vertex 1.
pub fn split_first_edge(tree: &TreeArena) -> (TreeArena, TreeArena) {
    assert!(tree.len() >= 2, "tree has no edge");
    let second = tree.subtree(1);
    let mut in_second = vec![false; tree.len()];
    in_second[1] = true;
    let mut relabel = vec![usize::MAX; tree.len()];
    let mut records = Vec::new();
    for (i, v) in tree.vertices().iter().enumerate() {
        match v.parent {
            Some(p) if in_second[p] => in_second[i] = true,
            _ if in_second[i] => {}
            parent => {
                relabel[i] = records.len();
                records.push((parent.map(|p| relabel[p]), v.status, v.birth_step));
            }
        }
    }
    let first = TreeArena::from_records(records).expect("root component preserves creation order");
    (first, second)
}

/// Bernoulli parameters whose independent sum has the law of the depth of
/// a uniformly chosen active vertex of the final tree: one parameter
/// `1/S_i` for each attach step `i`, where `S_i` is the active count right
/// after that step.
///
/// For the all-attach sequence of length `n` this gives `1/2, …, 1/(n+1)`:
/// the depth of a uniform vertex among the `n + 1` vertices. The
/// parameters `1, 1/2, …, 1/n` describe instead the depth of the most
/// recently created vertex.
pub fn uniform_active_depth_law(seq: &ChoiceSequence) -> Result<Vec<BigRational>> {
    seq.ensure_valid()?;
    let walk = seq.walk();
    if walk[seq.len()] < 1 {
        return Err(Error::InvalidSequence(format!("`{seq}` ends with no active vertex")));
    }
    Ok(seq
        .steps()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == Step::Attach)
        .map(|(i, _)| BigRational::new(BigInt::from(1), BigInt::from(walk[i + 1])))
        .collect())
}

/// Depth of a uniformly chosen active vertex of a forward-built tree.
pub fn sample_uniform_active_depth<C: Chooser>(seq: &ChoiceSequence, chooser: &mut C) -> Result<u32> {
    let tree = build_forward(seq, chooser)?;
    if tree.active_count() == 0 {
        return Err(Error::InvalidSequence(format!("`{seq}` ends with no active vertex")));
    }
    let pick = tree.active_list()[chooser.choose(tree.active_count())];
    Ok(tree.depth(pick))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{enumerate_law, RngStream};
    use crate::sequence::parse_sequence;
    use num_traits::{One, Zero};
    use std::collections::BTreeMap;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn seq(text: &str) -> ChoiceSequence {
        parse_sequence(text).unwrap()
    }

    fn height_law(s: &ChoiceSequence) -> BTreeMap<u32, BigRational> {
        enumerate_law(1_000_000, |c| build_forward(s, c).unwrap().height()).unwrap()
    }

    #[test]
    fn single_attach_has_one_outcome() {
        let t = build_forward(&seq("+"), &mut RngStream::new(1, 0)).unwrap();
        assert_eq!((t.len(), t.height(), t.active_count()), (2, 1, 2));
    }

    #[test]
    fn fully_frozen_end() {
        let t = build_forward(&seq("+--"), &mut RngStream::new(3, 9)).unwrap();
        assert_eq!((t.len(), t.height(), t.active_count()), (2, 1, 0));
        t.check().unwrap();
    }

    #[test]
    fn invalid_sequence_is_rejected() {
        let err = build_forward(&seq("-+"), &mut RngStream::new(0, 0)).unwrap_err();
        assert!(matches!(err, Error::InvalidSequence(_)));
    }

    #[test]
    fn two_attach_law_by_enumeration() {
        let law = height_law(&seq("+^2"));
        assert_eq!(law, BTreeMap::from([(1, r(1, 2)), (2, r(1, 2))]));
    }

    #[test]
    fn rrt_three_edges_law() {
        let law = enumerate_law(100, |c| sample_rrt(3, c).height()).unwrap();
        assert_eq!(law, BTreeMap::from([(1, r(1, 6)), (2, r(2, 3)), (3, r(1, 6))]));
        let empty = sample_rrt(0, &mut RngStream::new(0, 0));
        assert_eq!((empty.len(), empty.height()), (1, 0));
    }

    #[test]
    fn split_sizes_are_uniform() {
        let law = enumerate_law(100, |c| rrt_split(2, c).unwrap().0.edge_count()).unwrap();
        assert_eq!(law, BTreeMap::from([(0, r(1, 2)), (1, r(1, 2))]));
        let law = enumerate_law(100, |c| rrt_split(3, c).unwrap().0.edge_count()).unwrap();
        assert_eq!(law, BTreeMap::from([(0, r(1, 3)), (1, r(1, 3)), (2, r(1, 3))]));
        let (a, b) = rrt_split(1, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
    }

    #[test]
    fn split_components_partition_the_tree() {
        let mut rng = RngStream::new(11, 2);
        let tree = sample_rrt(40, &mut rng);
        let (first, second) = split_first_edge(&tree);
        first.check().unwrap();
        second.check().unwrap();
        assert_eq!(first.len() + second.len(), tree.len());
        assert_eq!(tree.height(), first.height().max(1 + second.height()));
    }

    #[test]
    fn height_only_sampler_matches_builder() {
        for text in ["+^30", "(+-)^20", "+^5-^4+^10", "(++-)^8"] {
            let s = seq(text);
            let mut scratch = Vec::new();
            for stream in 0..20 {
                let tree = build_forward(&s, &mut RngStream::new(5, stream)).unwrap();
                let h = sample_height(&s, &mut RngStream::new(5, stream), &mut scratch).unwrap();
                assert_eq!(tree.height(), h);
            }
        }
    }

    #[test]
    fn trace_follows_the_walk() {
        let s = seq("+^3-+-^2+^2-");
        let (tree, trace) = build_forward_traced(&s, &mut RngStream::new(8, 1)).unwrap();
        let walk = s.walk();
        let mut last_height = 0;
        for (t, step) in trace.iter().zip(s.steps()) {
            assert_eq!(t.active_count as i64, walk[t.step]);
            assert!(t.height >= last_height && t.height <= last_height + 1);
            if *step == Step::Freeze {
                assert_eq!(t.height, last_height);
            }
            last_height = t.height;
        }
        assert_eq!(tree.active_count() as i64, s.final_active());
        tree.check().unwrap();
    }

    #[test]
    fn depth_law_parameters() {
        let params = uniform_active_depth_law(&seq("+^3")).unwrap();
        assert_eq!(params, vec![r(1, 2), r(1, 3), r(1, 4)]);
        assert_eq!(uniform_active_depth_law(&seq("+")).unwrap(), vec![r(1, 2)]);
        assert_eq!(uniform_active_depth_law(&seq("+-")).unwrap(), vec![r(1, 2)]);
        assert!(uniform_active_depth_law(&seq("+--")).is_err());
    }

    /// Enumerated mean depth of a uniform vertex of the three-edge recursive
    /// tree is 13/12 = 1/2 + 1/3 + 1/4; the newest vertex has mean depth
    /// 11/6 = 1 + 1/2 + 1/3.
    #[test]
    fn uniform_vertex_versus_newest_vertex_depth() {
        let law = enumerate_law(1000, |c| sample_uniform_active_depth(&seq("+^3"), c).unwrap()).unwrap();
        let mean: BigRational = law.iter().map(|(d, w)| w * BigRational::from_integer((*d).into())).sum();
        assert_eq!(mean, r(13, 12));

        let newest = enumerate_law(1000, |c| {
            let t = sample_rrt(3, c);
            t.depth(3)
        })
        .unwrap();
        let mean: BigRational = newest.iter().map(|(d, w)| w * BigRational::from_integer((*d).into())).sum();
        assert_eq!(mean, r(11, 6));
    }

    /// Full law of the uniform-active depth equals the Bernoulli-sum law.
    #[test]
    fn uniform_active_depth_is_a_bernoulli_sum() {
        for text in ["+^3", "+-", "+^2-+", "+-+-+", "+^3-^2+", "++-+-+"] {
            let s = seq(text);
            let law = enumerate_law(1_000_000, |c| sample_uniform_active_depth(&s, c).unwrap()).unwrap();
            let mut sum_law: BTreeMap<u32, BigRational> = BTreeMap::from([(0, BigRational::one())]);
            for p in uniform_active_depth_law(&s).unwrap() {
                let mut next: BTreeMap<u32, BigRational> = BTreeMap::new();
                for (k, w) in &sum_law {
                    *next.entry(*k).or_insert_with(BigRational::zero) += w * (BigRational::one() - &p);
                    *next.entry(k + 1).or_insert_with(BigRational::zero) += w * &p;
                }
                sum_law = next;
            }
            sum_law.retain(|_, w| !w.is_zero());
            assert_eq!(law, sum_law, "{text}");
        }
    }
}
