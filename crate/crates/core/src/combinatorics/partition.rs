//! Set partitions of `{0, ..., n-1}` in restricted-growth-string form.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A partition of `{0, ..., ground_size - 1}`.
///
/// Stored as a restricted growth string: `labels[v]` is the index of the block
/// containing `v`, blocks are numbered in order of their minimum element.
/// Two partitions are equal iff they have the same blocks.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    labels: Vec<u32>,
    block_count: usize,
}

impl Partition {
    /// The partition into singletons (the bottom of the lattice).
    pub fn singletons(n: usize) -> Self {
        Partition {
            labels: (0..n as u32).collect(),
            block_count: n,
        }
    }

    /// The one-block partition (the top of the lattice). Empty for `n = 0`.
    pub fn single_block(n: usize) -> Self {
        Partition {
            labels: vec![0; n],
            block_count: usize::from(n > 0),
        }
    }

    /// Canonicalizes arbitrary block labels: `v ~ w` iff `labels[v] == labels[w]`.
    pub fn from_labels<L: Copy + Eq + std::hash::Hash>(labels: &[L]) -> Self {
        let mut seen = std::collections::HashMap::new();
        let mut out = Vec::with_capacity(labels.len());
        for &l in labels {
            let next = seen.len() as u32;
            out.push(*seen.entry(l).or_insert(next));
        }
        Partition {
            block_count: seen.len(),
            labels: out,
        }
    }

    /// Builds a partition from explicit blocks; they must be nonempty, disjoint and cover `0..n`.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![u32::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidInput("empty block".into()));
            }
            for &v in block {
                if v >= n {
                    return Err(Error::InvalidInput(format!(
                        "element {v} outside ground set of size {n}"
                    )));
                }
                if labels[v] != u32::MAX {
                    return Err(Error::InvalidInput(format!("element {v} in two blocks")));
                }
                labels[v] = b as u32;
            }
        }
        if let Some(v) = labels.iter().position(|&l| l == u32::MAX) {
            return Err(Error::InvalidInput(format!("element {v} not covered")));
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn ground_size(&self) -> usize {
        self.labels.len()
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    /// Canonical block index of `v`.
    #[inline]
    pub fn block_of(&self, v: usize) -> usize {
        self.labels[v] as usize
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn same_block(&self, v: usize, w: usize) -> bool {
        self.labels[v] == self.labels[w]
    }

    /// Blocks sorted by minimum element, each block ascending.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.block_count];
        for (v, &l) in self.labels.iter().enumerate() {
            blocks[l as usize].push(v);
        }
        blocks
    }

    /// `self <= other` in the refinement order: every block of `other` is a union of blocks of `self`.
    pub fn refines(&self, other: &Partition) -> bool {
        assert_eq!(self.ground_size(), other.ground_size());
        let mut image = vec![u32::MAX; self.block_count];
        for (v, &l) in self.labels.iter().enumerate() {
            let slot = &mut image[l as usize];
            if *slot == u32::MAX {
                *slot = other.labels[v];
            } else if *slot != other.labels[v] {
                return false;
            }
        }
        true
    }

    fn check_same_size(&self, other: &Partition) -> Result<()> {
        if self.ground_size() != other.ground_size() {
            return Err(Error::SizeMismatch(format!(
                "partitions of {} and {} elements",
                self.ground_size(),
                other.ground_size()
            )));
        }
        Ok(())
    }

    /// Finest common coarsening.
    pub fn join(&self, other: &Partition) -> Result<Partition> {
        self.check_same_size(other)?;
        let n = self.ground_size();
        let mut uf = UnionFind::new(n);
        let mut first_a = vec![usize::MAX; self.block_count];
        let mut first_b = vec![usize::MAX; other.block_count];
        for v in 0..n {
            for (first, l) in [
                (&mut first_a, self.labels[v]),
                (&mut first_b, other.labels[v]),
            ] {
                let f = &mut first[l as usize];
                if *f == usize::MAX {
                    *f = v;
                } else {
                    uf.union(*f, v);
                }
            }
        }
        Ok(uf.partition())
    }

    /// Blockwise intersections.
    pub fn meet(&self, other: &Partition) -> Result<Partition> {
        self.check_same_size(other)?;
        let pairs: Vec<(u32, u32)> = self
            .labels
            .iter()
            .zip(&other.labels)
            .map(|(&a, &b)| (a, b))
            .collect();
        Ok(Partition::from_labels(&pairs))
    }

    /// Pulls back a partition of the block set: `v ~ w` iff their blocks are related by `coarse`.
    pub fn compose_blocks(&self, coarse: &Partition) -> Partition {
        assert_eq!(coarse.ground_size(), self.block_count);
        let labels: Vec<u32> = self
            .labels
            .iter()
            .map(|&l| coarse.labels[l as usize])
            .collect();
        Partition::from_labels(&labels)
    }

    /// All partitions of `{0..n}` in restricted-growth-string lexicographic order.
    pub fn enumerate(n: usize) -> PartitionIter {
        PartitionIter::new(n)
    }

    /// All partitions `q` with `self <= q`, each exactly once.
    pub fn coarsenings(&self) -> impl Iterator<Item = Partition> + '_ {
        PartitionIter::new(self.block_count).map(move |q| self.compose_blocks(&q))
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, block) in self.blocks().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str("{")?;
            for (j, v) in block.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str("}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.blocks().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let blocks: Vec<Vec<usize>> = Vec::deserialize(deserializer)?;
        let n = blocks.iter().map(Vec::len).sum();
        Partition::from_blocks(n, &blocks).map_err(serde::de::Error::custom)
    }
}

/// Restricted growth string enumeration.
pub struct PartitionIter {
    rgs: Vec<u32>,
    /// `maxes[i] = max(rgs[0..i])`.
    maxes: Vec<u32>,
    started: bool,
    done: bool,
}

impl PartitionIter {
    fn new(n: usize) -> Self {
        PartitionIter {
            rgs: vec![0; n],
            maxes: vec![0; n],
            started: false,
            done: false,
        }
    }

    fn current(&self) -> Partition {
        let block_count = self.rgs.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        Partition {
            labels: self.rgs.clone(),
            block_count,
        }
    }
}

impl Iterator for PartitionIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.current());
        }
        let n = self.rgs.len();
        // Rightmost position that can be incremented: rgs[i] <= max(rgs[0..i]).
        let mut i = n;
        while i > 1 {
            i -= 1;
            if self.rgs[i] <= self.maxes[i] {
                self.rgs[i] += 1;
                for j in i + 1..n {
                    self.rgs[j] = 0;
                    self.maxes[j] = self.maxes[j - 1].max(self.rgs[j - 1]);
                }
                return Some(self.current());
            }
        }
        self.done = true;
        None
    }
}

/// Bell number `B(n)`, saturating.
pub fn bell_number(n: usize) -> u128 {
    // Bell triangle.
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for x in &row {
            let v = next.last().unwrap().saturating_add(*x);
            next.push(v);
        }
        row = next;
    }
    row[0]
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `true` if `a` and `b` were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn partition(&mut self) -> Partition {
        let roots: Vec<usize> = (0..self.parent.len()).map(|v| self.find(v)).collect();
        Partition::from_labels(&roots)
    }
}
