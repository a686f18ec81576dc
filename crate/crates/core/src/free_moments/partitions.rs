//! Set partitions of `{0, …, p−1}` stored as restricted growth strings.

use std::fmt;

use crate::error::{Error, Result};

/// Largest ground set for [`enumerate_partitions`] (Bell(12) ≈ 4.2 million).
pub const MAX_PARTITION_ORDER: usize = 12;
/// Largest ground set for [`enumerate_pair_partitions`] (15!! ≈ 2 million).
pub const MAX_PAIRING_ORDER: usize = 16;

/// A partition of `{0, …, p−1}`.
///
/// `labels[i]` is the index of the block containing `i`; blocks are numbered
/// in order of their smallest element, so the labels form a restricted growth
/// string and every partition has exactly one representation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetPartition {
    labels: Vec<u8>,
    num_blocks: usize,
}

impl SetPartition {
    /// Builds a partition from any block labelling, relabelling canonically.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map: Vec<(usize, u8)> = Vec::new();
        let mut out = Vec::with_capacity(labels.len());
        for &l in labels {
            let id = match map.iter().find(|(k, _)| *k == l) {
                Some(&(_, id)) => id,
                None => {
                    let id = map.len() as u8;
                    map.push((l, id));
                    id
                }
            };
            out.push(id);
        }
        Self { labels: out, num_blocks: map.len() }
    }

    /// Builds a partition from explicit 0-based blocks.
    pub fn from_blocks(p: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; p];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidParameter("partition blocks must be nonempty".into()));
            }
            for &x in block {
                if x >= p || labels[x] != usize::MAX {
                    return Err(Error::InvalidParameter(format!(
                        "element {x} is out of range or appears twice"
                    )));
                }
                labels[x] = b;
            }
        }
        if labels.contains(&usize::MAX) {
            return Err(Error::InvalidParameter("blocks do not cover the ground set".into()));
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Blocks as sorted 0-based element lists, ordered by minimum.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.num_blocks];
        for (i, &l) in self.labels.iter().enumerate() {
            blocks[l as usize].push(i);
        }
        blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_blocks];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    pub fn is_pairing(&self) -> bool {
        self.block_sizes().iter().all(|&s| s == 2)
    }
}

impl fmt::Display for SetPartition {
    /// 1-based, e.g. `{1,3|2}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks = self.blocks();
        write!(f, "{{")?;
        for (b, block) in blocks.iter().enumerate() {
            if b > 0 {
                write!(f, "|")?;
            }
            let parts: Vec<String> = block.iter().map(|x| (x + 1).to_string()).collect();
            write!(f, "{}", parts.join(","))?;
        }
        write!(f, "}}")
    }
}

fn guard(p: usize, max: usize) -> Result<()> {
    if p > max {
        Err(Error::OrderGuard { order: p, max })
    } else {
        Ok(())
    }
}

/// All Bell(p) partitions of `{0, …, p−1}`, in lexicographic order of their
/// restricted growth strings.
pub fn enumerate_partitions(p: usize) -> Result<Vec<SetPartition>> {
    if p == 0 {
        return Err(Error::InvalidParameter("partition order must be at least 1".into()));
    }
    guard(p, MAX_PARTITION_ORDER)?;
    let mut out = Vec::new();
    let mut labels = vec![0u8; p];
    fn rec(i: usize, blocks: u8, labels: &mut Vec<u8>, out: &mut Vec<SetPartition>) {
        if i == labels.len() {
            out.push(SetPartition { labels: labels.clone(), num_blocks: blocks as usize });
            return;
        }
        for l in 0..=blocks {
            labels[i] = l;
            rec(i + 1, blocks.max(l + 1), labels, out);
        }
    }
    rec(1, 1, &mut labels, &mut out);
    Ok(out)
}

/// All `(p−1)!!` pairings; empty for odd `p`.
pub fn enumerate_pair_partitions(p: usize) -> Result<Vec<SetPartition>> {
    guard(p, MAX_PAIRING_ORDER)?;
    if p % 2 == 1 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut labels = vec![u8::MAX; p];
    fn rec(next_block: u8, labels: &mut Vec<u8>, out: &mut Vec<SetPartition>) {
        let Some(first) = labels.iter().position(|&l| l == u8::MAX) else {
            out.push(SetPartition { labels: labels.clone(), num_blocks: next_block as usize });
            return;
        };
        labels[first] = next_block;
        for j in first + 1..labels.len() {
            if labels[j] == u8::MAX {
                labels[j] = next_block;
                rec(next_block + 1, labels, out);
                labels[j] = u8::MAX;
            }
        }
        labels[first] = u8::MAX;
    }
    rec(0, &mut labels, &mut out);
    Ok(out)
}

/// True when no `a < b < c < d` has `a, c` in one block and `b, d` in another.
pub fn is_noncrossing(pi: &SetPartition) -> bool {
    let mut last = vec![0usize; pi.num_blocks];
    for (i, &l) in pi.labels.iter().enumerate() {
        last[l as usize] = i;
    }
    // blocks opened but not yet closed; a block may only continue from the top
    let mut open: Vec<u8> = Vec::new();
    let mut seen = vec![false; pi.num_blocks];
    for (i, &l) in pi.labels.iter().enumerate() {
        if seen[l as usize] {
            if open.last() != Some(&l) {
                return false;
            }
        } else {
            seen[l as usize] = true;
            open.push(l);
        }
        if last[l as usize] == i {
            open.pop();
        }
    }
    true
}

pub fn catalan(k: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}

/// Number of noncrossing pairings of `p` points.
pub fn nc2_count(p: usize) -> u128 {
    if p % 2 == 1 {
        0
    } else {
        catalan(p / 2)
    }
}

/// `d(d−1)⋯(d−|π|+1)`: the number of index tuples in `[d]^p` whose kernel is `π`.
pub fn partition_class_count(pi: &SetPartition, d: usize) -> u128 {
    falling_factorial(d, pi.num_blocks)
}

pub fn falling_factorial(d: usize, k: usize) -> u128 {
    if k > d {
        return 0;
    }
    (0..k).map(|i| (d - i) as u128).product()
}
