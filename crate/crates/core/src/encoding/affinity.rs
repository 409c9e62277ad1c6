//! Contiguous-bit affinity between encoded sequences.
//!
//! The shorter sequence slides along the longer one, one bit at a time, over
//! every fully overlapped alignment. At each alignment we take the longest
//! run of positions where the two sequences agree; the affinity is the best
//! such run over all alignments. Two sequences "match" at threshold `r` when
//! their affinity reaches `r` bits.

use std::collections::HashMap;

use super::bits::{low_mask, BitSequence};
use super::EncodingError;

/// Longest run of agreeing bits over all sliding alignments.
pub fn affinity(a: &BitSequence, b: &BitSequence) -> Result<usize, EncodingError> {
    if a.is_empty() || b.is_empty() {
        return Err(EncodingError::EmptySequence);
    }
    Ok(scan(a, b, usize::MAX))
}

/// `affinity(a, b) >= r`.
pub fn matches(a: &BitSequence, b: &BitSequence, r: usize) -> Result<bool, EncodingError> {
    if a.is_empty() || b.is_empty() {
        return Err(EncodingError::EmptySequence);
    }
    Ok(reaches(a, b, r))
}

/// Infallible form of [`matches`] used on hot paths. Empty inputs never
/// match.
#[inline]
pub(crate) fn reaches(a: &BitSequence, b: &BitSequence, r: usize) -> bool {
    if a.is_empty() || b.is_empty() || r > a.len().min(b.len()) {
        return false;
    }
    scan(a, b, r.max(1)) >= r.max(1)
}

/// Scans alignments, stopping early once a run of `stop_at` bits is seen.
fn scan(a: &BitSequence, b: &BitSequence, stop_at: usize) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let m = short.len();
    let mut best = 0;
    for offset in 0..=(long.len() - m) {
        let mut run = 0usize;
        let mut pos = 0usize;
        while pos < m {
            let width = (m - pos).min(64);
            let mask = low_mask(width);
            let agree = !(long.window64(offset + pos) ^ short.window64(pos)) & mask;
            if agree == mask {
                run += width;
            } else {
                // leading part continues the current run
                let head = agree.trailing_ones() as usize;
                best = best.max(run + head);
                best = best.max(longest_inner_run(agree >> head, width - head));
                // trailing part starts the next run
                let tail = (agree << (64 - width)).leading_ones() as usize;
                run = tail;
            }
            pos += width;
        }
        best = best.max(run);
        if best >= stop_at || best == m {
            break;
        }
    }
    best
}

/// Longest run of ones among the low `width` bits.
#[inline]
fn longest_inner_run(mut x: u64, width: usize) -> usize {
    x &= low_mask(width);
    let mut best = 0;
    while x != 0 {
        let zeros = x.trailing_zeros();
        x >>= zeros;
        let ones = x.trailing_ones();
        best = best.max(ones as usize);
        x = if ones >= 64 { 0 } else { x >> ones };
    }
    best
}

/// Index of every `r`-bit window of a set of sequences, for answering
/// "which indexed sequences match this query at threshold `r`" without
/// scanning every alignment of every pair.
///
/// A run of at least `r` agreeing bits at some alignment exists exactly when
/// an `r`-bit window of one sequence equals an `r`-bit window of the other at
/// positions whose difference is a legal alignment offset, so lookups are
/// exact, not approximate. Thresholds above 64 bits fall back to direct
/// scanning.
#[derive(Debug, Clone)]
pub struct WindowIndex {
    r: usize,
    entries: Vec<BitSequence>,
    windows: HashMap<u64, Vec<(u32, u32)>>,
}

impl WindowIndex {
    pub fn new(r: usize) -> Self {
        Self {
            r: r.max(1),
            entries: Vec::new(),
            windows: HashMap::new(),
        }
    }

    pub fn build<'a, I>(r: usize, sequences: I) -> Self
    where
        I: IntoIterator<Item = &'a BitSequence>,
    {
        let mut index = Self::new(r);
        for seq in sequences {
            index.insert(seq.clone());
        }
        index
    }

    pub fn threshold(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: usize) -> &BitSequence {
        &self.entries[id]
    }

    /// Adds a sequence and returns its entry id.
    pub fn insert(&mut self, seq: BitSequence) -> usize {
        let id = self.entries.len();
        if self.r <= 64 && seq.len() >= self.r {
            let mask = low_mask(self.r);
            for pos in 0..=(seq.len() - self.r) {
                self.windows
                    .entry(seq.window64(pos) & mask)
                    .or_default()
                    .push((id as u32, pos as u32));
            }
        }
        self.entries.push(seq);
        id
    }

    /// True when any indexed sequence matches `query`.
    pub fn any_match(&self, query: &BitSequence) -> bool {
        let mut found = false;
        self.visit(query, |_| {
            found = true;
            false
        });
        found
    }

    /// Ids of indexed sequences matching `query`, ascending, no duplicates.
    pub fn matching(&self, query: &BitSequence) -> Vec<usize> {
        let mut hits = vec![false; self.entries.len()];
        self.visit(query, |id| {
            hits[id] = true;
            true
        });
        hits.iter()
            .enumerate()
            .filter_map(|(id, &hit)| hit.then_some(id))
            .collect()
    }

    /// Calls `f` for matching entries (possibly repeatedly for one entry)
    /// until `f` returns false.
    fn visit(&self, query: &BitSequence, mut f: impl FnMut(usize) -> bool) {
        if query.len() < self.r {
            return;
        }
        if self.r > 64 {
            for (id, entry) in self.entries.iter().enumerate() {
                if reaches(entry, query, self.r) && !f(id) {
                    return;
                }
            }
            return;
        }
        let mask = low_mask(self.r);
        let q_len = query.len();
        for q_pos in 0..=(q_len - self.r) {
            let Some(bucket) = self.windows.get(&(query.window64(q_pos) & mask)) else {
                continue;
            };
            for &(id, e_pos) in bucket {
                let e_len = self.entries[id as usize].len();
                let (e_pos, q_pos) = (e_pos as usize, q_pos);
                let legal = if e_len >= q_len {
                    e_pos >= q_pos && e_pos - q_pos <= e_len - q_len
                } else {
                    q_pos >= e_pos && q_pos - e_pos <= q_len - e_len
                };
                if legal && !f(id as usize) {
                    return;
                }
            }
        }
    }
}
