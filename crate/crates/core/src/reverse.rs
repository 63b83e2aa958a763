//! Time-reversed growth-coalescent construction.
//!
//! The sequence is read from its last step back to its first. The forest
//! starts as `S_m` active singletons; a freeze step appends a frozen
//! singleton in the last position, and an attach step picks a uniform
//! ordered pair of distinct positions `(A, B)` and grafts tree `B` onto the
//! root of tree `A`, which keeps its position while `B`'s slot is removed.
//! After step `i` has been read the forest holds `S_{i-1}` trees, and the
//! last remaining tree has the law of the forward tree.
//!
//! Positions are stored 0-based: position `p` here is position `p + 1` in
//! the usual 1-based description.

use serde::{Deserialize, Serialize};

use crate::arena::{Status, TreeArena};
use crate::error::{Error, Result};
use crate::rng::Chooser;
use crate::sequence::{ChoiceSequence, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RootedTreeHandle {
    pub root: usize,
    pub height: u32,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    parent: Option<usize>,
    status: Status,
    /// Attach step at which this vertex was grafted below another root.
    birth_step: usize,
}

/// Ordered list of rooted trees sharing one vertex store.
#[derive(Debug, Clone, Default)]
pub struct Forest {
    nodes: Vec<Node>,
    trees: Vec<RootedTreeHandle>,
}

impl Forest {
    pub fn new() -> Self {
        Forest::default()
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn trees(&self) -> &[RootedTreeHandle] {
        &self.trees
    }

    pub fn heights(&self) -> Vec<u32> {
        self.trees.iter().map(|t| t.height).collect()
    }

    /// Allocates a one-vertex tree without placing it in the forest.
    pub fn new_singleton(&mut self, status: Status) -> RootedTreeHandle {
        let root = self.nodes.len();
        self.nodes.push(Node { parent: None, status, birth_step: 0 });
        RootedTreeHandle { root, height: 0 }
    }

    pub fn push_singleton(&mut self, status: Status) {
        let handle = self.new_singleton(status);
        self.trees.push(handle);
    }

    pub fn insert_singleton(&mut self, position: usize, status: Status) {
        let handle = self.new_singleton(status);
        self.trees.insert(position, handle);
    }

    pub fn remove(&mut self, position: usize) -> RootedTreeHandle {
        self.trees.remove(position)
    }

    pub fn set(&mut self, position: usize, handle: RootedTreeHandle) {
        self.trees[position] = handle;
    }

    pub fn tree(&self, position: usize) -> RootedTreeHandle {
        self.trees[position]
    }

    /// `donor → target`: an edge between the two roots, rooted at the target's root.
    pub fn graft(
        &mut self,
        target: RootedTreeHandle,
        donor: RootedTreeHandle,
        step: usize,
    ) -> Result<RootedTreeHandle> {
        if target.root == donor.root {
            return Err(Error::SelfGraft);
        }
        let node = &mut self.nodes[donor.root];
        debug_assert!(node.parent.is_none(), "donor must be a root");
        node.parent = Some(target.root);
        node.birth_step = step;
        Ok(RootedTreeHandle { root: target.root, height: target.height.max(donor.height + 1) })
    }

    /// Grafts the tree at position `b` onto the tree at position `a`; the
    /// result takes `a`'s place and `b`'s slot is removed.
    pub fn graft_positions(&mut self, a: usize, b: usize, step: usize) -> Result<()> {
        if a == b {
            return Err(Error::SelfGraft);
        }
        let grafted = self.graft(self.trees[a], self.trees[b], step)?;
        self.trees[a] = grafted;
        self.trees.remove(b);
        Ok(())
    }

    fn top(&self, mut v: usize) -> usize {
        while let Some(p) = self.nodes[v].parent {
            v = p;
        }
        v
    }

    /// Materialises the tree at `position`, vertices ordered by graft step so
    /// that labels follow forward creation order.
    pub fn to_arena(&self, position: usize) -> TreeArena {
        let root = self.trees[position].root;
        let mut members: Vec<usize> = (0..self.nodes.len()).filter(|&v| self.top(v) == root).collect();
        members.sort_by_key(|&v| if v == root { (0, 0) } else { (1, self.nodes[v].birth_step) });
        let mut relabel = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in members.iter().enumerate() {
            relabel[old] = new;
        }
        let records = members
            .iter()
            .map(|&v| {
                let node = &self.nodes[v];
                let birth = if v == root { 0 } else { node.birth_step };
                (node.parent.map(|p| relabel[p]), node.status, birth)
            })
            .collect();
        TreeArena::from_records(records).expect("graft steps order parents before children")
    }

    pub fn canonical(&self, position: usize) -> String {
        self.to_arena(position).canonical()
    }
}

/// Forest state after each reverse step: `(step index i, tree count)`.
pub type ReverseTrace = Vec<(usize, usize)>;

pub fn build_reverse<C: Chooser>(seq: &ChoiceSequence, chooser: &mut C) -> Result<TreeArena> {
    let forest = run_reverse(seq, chooser, None)?;
    Ok(forest.to_arena(0))
}

/// As [`build_reverse`], also recording the forest size once step `i` has
/// been read (which should be `S_{i-1}`).
pub fn build_reverse_traced<C: Chooser>(
    seq: &ChoiceSequence,
    chooser: &mut C,
) -> Result<(TreeArena, ReverseTrace)> {
    let mut trace = Vec::with_capacity(seq.len());
    let forest = run_reverse(seq, chooser, Some(&mut trace))?;
    Ok((forest.to_arena(0), trace))
}

/// Runs the reverse construction over `steps[from..]`, starting from an
/// existing forest. The forest must hold `S_m` trees; on return it holds `S_from`.
pub(crate) fn reverse_suffix<C: Chooser>(
    seq: &ChoiceSequence,
    walk: &[i64],
    from: usize,
    forest: &mut Forest,
    chooser: &mut C,
    mut trace: Option<&mut ReverseTrace>,
) -> Result<()> {
    for i in (from + 1..=seq.len()).rev() {
        match seq.steps()[i - 1] {
            Step::Freeze => forest.push_singleton(Status::Frozen),
            Step::Attach => {
                let count = walk[i] as usize;
                debug_assert_eq!(count, forest.len());
                let (a, b) = chooser.choose_distinct_pair(count);
                forest.graft_positions(a, b, i)?;
            }
        }
        if let Some(trace) = trace.as_deref_mut() {
            trace.push((i, forest.len()));
        }
    }
    Ok(())
}

fn run_reverse<C: Chooser>(
    seq: &ChoiceSequence,
    chooser: &mut C,
    trace: Option<&mut ReverseTrace>,
) -> Result<Forest> {
    seq.ensure_valid()?;
    let walk = seq.walk();
    let mut forest = Forest::new();
    for _ in 0..walk[seq.len()] {
        forest.push_singleton(Status::Active);
    }
    reverse_suffix(seq, &walk, 0, &mut forest, chooser, trace)?;
    debug_assert_eq!(forest.len(), 1);
    Ok(forest)
}

/// Height of the reverse tree, tracking only tree heights. Same draws as
/// [`build_reverse`].
pub fn sample_height_reverse<C: Chooser>(seq: &ChoiceSequence, chooser: &mut C) -> Result<u32> {
    seq.ensure_valid()?;
    let walk = seq.walk();
    let mut heights = vec![0u32; walk[seq.len()] as usize];
    for i in (1..=seq.len()).rev() {
        match seq.steps()[i - 1] {
            Step::Freeze => heights.push(0),
            Step::Attach => {
                let (a, b) = chooser.choose_distinct_pair(heights.len());
                heights[a] = heights[a].max(heights[b] + 1);
                heights.remove(b);
            }
        }
    }
    Ok(heights[0])
}
