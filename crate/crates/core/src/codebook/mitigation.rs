use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;

use super::{best_offset, group_rate, FeedbackMode, RateTable, Selection};
use crate::error::{invalid, Result};

/// Number of selections with distinct localization-relevant indices.
fn distinct_count(table: &RateTable, mode: FeedbackMode) -> u128 {
    match mode {
        FeedbackMode::Wideband => table.beams() as u128,
        FeedbackMode::Subband => (table.beams() / 2) as u128,
        FeedbackMode::PerSubband => {
            (table.beams() as u128).checked_pow(table.subbands() as u32).unwrap_or(u128::MAX)
        }
    }
}

/// The `u` best selections with pairwise-distinct beam indices, by decreasing
/// rate; equal rates keep the smaller index first.
pub fn ranked_candidates(table: &RateTable, mode: FeedbackMode, u: usize) -> Result<Vec<(Selection, f64)>> {
    if u == 0 {
        return Err(invalid("U", "U must be >= 1"));
    }
    if mode == FeedbackMode::Subband && table.beams() % 2 != 0 {
        return Err(invalid("O", "mode 2 needs an even codebook size"));
    }
    let available = distinct_count(table, mode);
    if u as u128 > available {
        return Err(invalid("U", format!("U = {u} exceeds {available} distinct selections")));
    }
    Ok(match mode {
        FeedbackMode::Wideband => top_groups(table, table.beams(), 1, |m, _| m, u)
            .into_iter()
            .map(|(m, r)| {
                let n = (0..table.subbands())
                    .map(|k| table.best_cophase(k, m).0 as u8)
                    .collect();
                (Selection::Wideband { m, n }, r)
            })
            .collect(),
        FeedbackMode::Subband => top_groups(table, table.beams() / 2, 4, |m, d| 2 * m + d, u)
            .into_iter()
            .map(|(m, r)| {
                let (delta, n) = (0..table.subbands())
                    .map(|k| {
                        let (d, nk, _) = best_offset(table, k, m);
                        (d as u8, nk as u8)
                    })
                    .unzip();
                (Selection::Subband { m, delta, n }, r)
            })
            .collect(),
        FeedbackMode::PerSubband => k_best_sums(table, u),
    })
}

fn top_groups(
    table: &RateTable,
    groups: usize,
    offsets: usize,
    beam_of: impl Fn(usize, usize) -> usize + Copy,
    u: usize,
) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..groups)
        .map(|g| (g, group_rate(table, g, beam_of, offsets)))
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all.truncate(u);
    all
}

#[derive(PartialEq)]
struct Node {
    rate: f64,
    beams: Vec<usize>,
    ranks: Vec<usize>,
    last: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rate
            .total_cmp(&other.rate)
            .then_with(|| other.beams.cmp(&self.beams))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Top-`u` beam vectors for mode 3. Each vector is reached once: successors
/// only advance coordinates at or after the last advanced one.
fn k_best_sums(table: &RateTable, u: usize) -> Vec<(Selection, f64)> {
    let kk = table.subbands();
    let sorted: Vec<Vec<(usize, usize, f64)>> = (0..kk)
        .map(|k| {
            let mut v: Vec<(usize, usize, f64)> = (0..table.beams())
                .map(|m| {
                    let (n, r) = table.best_cophase(k, m);
                    (m, n, r)
                })
                .collect();
            v.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
            v
        })
        .collect();
    let node = |ranks: Vec<usize>, last: usize| {
        let rate = ranks.iter().enumerate().map(|(k, &r)| sorted[k][r].2).sum();
        let beams = ranks.iter().enumerate().map(|(k, &r)| sorted[k][r].0).collect();
        Node {
            rate,
            beams,
            ranks,
            last,
        }
    };
    let mut heap = BinaryHeap::new();
    heap.push(node(vec![0; kk], 0));
    let mut out = Vec::with_capacity(u);
    while out.len() < u {
        let Some(best) = heap.pop() else { break };
        for j in best.last..kk {
            if best.ranks[j] + 1 < table.beams() {
                let mut r = best.ranks.clone();
                r[j] += 1;
                heap.push(node(r, j));
            }
        }
        let n = best
            .ranks
            .iter()
            .enumerate()
            .map(|(k, &r)| sorted[k][r].1 as u8)
            .collect();
        out.push((Selection::PerSubband { m: best.beams, n }, best.rate));
    }
    out
}

/// Uniform draw among the `u` best distinct selections; `u = 1` is the plain selector.
pub fn select_mitigated<R: Rng + ?Sized>(
    table: &RateTable,
    u: usize,
    mode: FeedbackMode,
    rng: &mut R,
) -> Result<Selection> {
    let mut cands = ranked_candidates(table, mode, u)?;
    let pick = if u == 1 { 0 } else { rng.random_range(0..u) };
    Ok(cands.swap_remove(pick).0)
}
