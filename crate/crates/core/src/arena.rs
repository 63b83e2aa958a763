//! Rooted, vertex-labelled trees stored as a parent array.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    Active,
    Frozen,
}

impl Status {
    fn label(self) -> char {
        match self {
            Status::Active => 'a',
            Status::Frozen => 'f',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub parent: Option<usize>,
    pub depth: u32,
    pub status: Status,
    /// Step at which the vertex was created; 0 for the root.
    pub birth_step: usize,
}

/// A rooted tree. Vertex 0 is the root and every parent index is smaller
/// than its child's.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeArena {
    vertices: Vec<VertexRecord>,
    height: u32,
    active: Vec<usize>,
}

impl TreeArena {
    pub fn singleton(status: Status) -> Self {
        let mut arena = TreeArena {
            vertices: vec![VertexRecord { parent: None, depth: 0, status, birth_step: 0 }],
            height: 0,
            active: Vec::new(),
        };
        if status == Status::Active {
            arena.active.push(0);
        }
        arena
    }

    pub(crate) fn with_capacity(capacity: usize) -> Self {
        let mut arena = Self::singleton(Status::Active);
        arena.vertices.reserve(capacity);
        arena.active.reserve(capacity);
        arena
    }

    /// Builds an arena from parent links listed in creation order.
    pub fn from_records(records: Vec<(Option<usize>, Status, usize)>) -> Result<Self> {
        let mut vertices: Vec<VertexRecord> = Vec::with_capacity(records.len());
        for (index, (parent, status, birth_step)) in records.into_iter().enumerate() {
            let depth = match (index, parent) {
                (0, None) => 0,
                (0, Some(_)) => return Err(Error::Domain("the root cannot have a parent".into())),
                (_, None) => return Err(Error::Domain(format!("vertex {index} has no parent"))),
                (_, Some(p)) if p >= index => {
                    return Err(Error::Domain(format!("vertex {index} has parent {p} created after it")))
                }
                (_, Some(p)) => vertices[p].depth + 1,
            };
            vertices.push(VertexRecord { parent, depth, status, birth_step });
        }
        if vertices.is_empty() {
            return Err(Error::Domain("a tree needs at least a root".into()));
        }
        let height = vertices.iter().map(|v| v.depth).max().unwrap_or(0);
        let active = (0..vertices.len()).filter(|&i| vertices[i].status == Status::Active).collect();
        Ok(TreeArena { vertices, height, active })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn vertices(&self) -> &[VertexRecord] {
        &self.vertices
    }

    pub fn vertex(&self, index: usize) -> &VertexRecord {
        &self.vertices[index]
    }

    pub fn depth(&self, index: usize) -> u32 {
        self.vertices[index].depth
    }

    /// Indices of the active vertices, in the builder's internal order.
    pub fn active_list(&self) -> &[usize] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn frozen_count(&self) -> usize {
        self.vertices.len() - self.active.len()
    }

    pub(crate) fn attach_child(&mut self, parent: usize, birth_step: usize) -> usize {
        let depth = self.vertices[parent].depth + 1;
        let index = self.vertices.len();
        self.vertices.push(VertexRecord { parent: Some(parent), depth, status: Status::Active, birth_step });
        self.active.push(index);
        self.height = self.height.max(depth);
        index
    }

    /// Freezes the vertex at `slot` of the active list (swap-remove).
    pub(crate) fn freeze_slot(&mut self, slot: usize) -> usize {
        let index = self.active.swap_remove(slot);
        self.vertices[index].status = Status::Frozen;
        index
    }

    /// Subtree hanging from `root` with depths taken relative to it.
    /// Vertices keep their relative creation order.
    pub fn subtree(&self, root: usize) -> TreeArena {
        let mut inside = vec![false; self.vertices.len()];
        let mut relabel = vec![usize::MAX; self.vertices.len()];
        inside[root] = true;
        let mut records = vec![(None, self.vertices[root].status, self.vertices[root].birth_step)];
        relabel[root] = 0;
        for index in root + 1..self.vertices.len() {
            let v = &self.vertices[index];
            if let Some(p) = v.parent {
                if inside[p] {
                    inside[index] = true;
                    relabel[index] = records.len();
                    records.push((Some(relabel[p]), v.status, v.birth_step));
                }
            }
        }
        TreeArena::from_records(records).expect("subtree preserves creation order")
    }

    /// The first `count` vertices, which form a tree by the creation-order invariant.
    pub fn prefix(&self, count: usize) -> TreeArena {
        let records = self.vertices[..count].iter().map(|v| (v.parent, v.status, v.birth_step)).collect();
        TreeArena::from_records(records).expect("prefix of a tree is a tree")
    }

    /// Checks every structural invariant; used by tests and on parsed dumps.
    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Domain(msg));
        let root = &self.vertices[0];
        if root.parent.is_some() || root.depth != 0 {
            return fail("root must have no parent and depth 0".into());
        }
        for (i, v) in self.vertices.iter().enumerate().skip(1) {
            match v.parent {
                Some(p) if p < i => {
                    if v.depth != self.vertices[p].depth + 1 {
                        return fail(format!("vertex {i} has inconsistent depth"));
                    }
                }
                _ => return fail(format!("vertex {i} has a bad parent link")),
            }
        }
        let height = self.vertices.iter().map(|v| v.depth).max().unwrap_or(0);
        if height != self.height {
            return fail(format!("cached height {} differs from {height}", self.height));
        }
        let mut listed = self.active.clone();
        listed.sort_unstable();
        let expected: Vec<usize> =
            (0..self.vertices.len()).filter(|&i| self.vertices[i].status == Status::Active).collect();
        if listed != expected {
            return fail("active list does not match vertex statuses".into());
        }
        Ok(())
    }

    /// Canonical encoding of the labelled tree up to reordering of children.
    pub fn canonical(&self) -> String {
        let mut children = vec![Vec::new(); self.vertices.len()];
        for (i, v) in self.vertices.iter().enumerate() {
            if let Some(p) = v.parent {
                children[p].push(i);
            }
        }
        fn encode(v: usize, arena: &TreeArena, children: &[Vec<usize>]) -> String {
            let mut parts: Vec<String> = children[v].iter().map(|&c| encode(c, arena, children)).collect();
            parts.sort();
            format!("{}({})", arena.vertices[v].status.label(), parts.concat())
        }
        encode(0, self, &children)
    }

    /// One vertex per line: `index parent depth status birth_step`, parent `-1` for the root.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.vertices.iter().enumerate() {
            let parent = v.parent.map_or(-1, |p| p as i64);
            let status = match v.status {
                Status::Active => "active",
                Status::Frozen => "frozen",
            };
            writeln!(out, "{i} {parent} {} {status} {}", v.depth, v.birth_step).unwrap();
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<TreeArena> {
        let bad = |line: usize, what: &str| Error::Domain(format!("dump line {}: {what}", line + 1));
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(bad(n, "expected 5 fields"));
            }
            let index: usize = fields[0].parse().map_err(|_| bad(n, "bad index"))?;
            if index != records.len() {
                return Err(bad(n, "indices must be consecutive from 0"));
            }
            let parent: i64 = fields[1].parse().map_err(|_| bad(n, "bad parent"))?;
            let parent = if parent < 0 { None } else { Some(parent as usize) };
            let status = match fields[3] {
                "active" => Status::Active,
                "frozen" => Status::Frozen,
                _ => return Err(bad(n, "status must be active or frozen")),
            };
            let birth: usize = fields[4].parse().map_err(|_| bad(n, "bad birth step"))?;
            records.push((parent, status, birth));
        }
        let arena = TreeArena::from_records(records)?;
        for (n, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let depth: u32 = line.split_whitespace().nth(2).unwrap().parse().map_err(|_| bad(n, "bad depth"))?;
            if depth != arena.depth(n) {
                return Err(bad(n, "depth disagrees with parent links"));
            }
        }
        Ok(arena)
    }
}

impl fmt::Display for TreeArena {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_with_branch() -> TreeArena {
        // 0 - 1 - 2, and 3 under 0
        TreeArena::from_records(vec![
            (None, Status::Frozen, 0),
            (Some(0), Status::Active, 1),
            (Some(1), Status::Active, 2),
            (Some(0), Status::Frozen, 3),
        ])
        .unwrap()
    }

    #[test]
    fn singleton_has_height_zero() {
        let t = TreeArena::singleton(Status::Active);
        assert_eq!(t.height(), 0);
        assert_eq!(t.active_count(), 1);
        t.check().unwrap();
    }

    #[test]
    fn records_compute_depths() {
        let t = path_with_branch();
        assert_eq!(t.height(), 2);
        assert_eq!(t.depth(3), 1);
        assert_eq!(t.active_list(), &[1, 2]);
        t.check().unwrap();
    }

    #[test]
    fn rejects_forward_parent_links() {
        let err = TreeArena::from_records(vec![(None, Status::Active, 0), (Some(1), Status::Active, 1)]);
        assert!(err.is_err());
    }

    #[test]
    fn subtree_recomputes_depths() {
        let t = path_with_branch().subtree(1);
        assert_eq!(t.len(), 2);
        assert_eq!(t.height(), 1);
        assert_eq!(t.vertex(1).birth_step, 2);
    }

    #[test]
    fn dump_round_trips() {
        let t = path_with_branch();
        let dumped = t.dump();
        assert!(dumped.starts_with("0 -1 0 frozen 0\n"));
        assert_eq!(TreeArena::parse_dump(&dumped).unwrap(), t);
        assert!(TreeArena::parse_dump("0 -1 1 active 0\n").is_err());
    }

    #[test]
    fn canonical_form_ignores_child_order() {
        let a = TreeArena::from_records(vec![
            (None, Status::Active, 0),
            (Some(0), Status::Frozen, 1),
            (Some(0), Status::Active, 2),
            (Some(2), Status::Active, 3),
        ])
        .unwrap();
        let b = TreeArena::from_records(vec![
            (None, Status::Active, 0),
            (Some(0), Status::Active, 1),
            (Some(1), Status::Active, 2),
            (Some(0), Status::Frozen, 3),
        ])
        .unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert_ne!(a.canonical(), path_with_branch().canonical());
    }
}
