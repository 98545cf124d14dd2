//! Separated and spanning set counts on a net.
//!
//! Two net points *conflict* at `(n, ε)` when their Bowen distance is at most
//! `ε`. A separated set is an independent set of the conflict graph and a
//! spanning set is a dominating set of it, so both counts are computed from
//! the same graph and the inequality `r ≤ s` holds structurally.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::orbit::OrbitTable;
use crate::error::{Error, Result};
use crate::space::{within, Net, SpatialIndex};
use crate::system::SystemSpec;

/// Largest net on which the exact solvers run.
pub const EXACT_LIMIT: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    Greedy,
    Exact,
}

/// A count together with the net indices realizing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub count: usize,
    pub witness: Vec<usize>,
}

impl Selection {
    fn from_indices(mut witness: Vec<usize>) -> Self {
        witness.sort_unstable();
        Selection {
            count: witness.len(),
            witness,
        }
    }
}

/// Conflict graph at radius `eps`, tightened one time step at a time.
///
/// Stored as lower-neighbour lists in CSR form: `lower[offsets[q]..offsets[q+1]]`
/// holds every `p < q` still in conflict with `q`.
pub(crate) struct Conflicts {
    eps: f64,
    steps: usize,
    offsets: Vec<usize>,
    lower: Vec<u32>,
}

impl Conflicts {
    /// The graph after the first time step (`n = 1`).
    pub(crate) fn initial(table: &OrbitTable, eps: f64) -> Self {
        let count = table.point_count();
        let starts: Vec<_> = (0..count).map(|k| *table.at(k, 0)).collect();
        let index = SpatialIndex::new(table.space(), &starts, eps);
        let lists: Vec<Vec<u32>> = (0..count)
            .into_par_iter()
            .map(|q| {
                let mut out = Vec::new();
                index.for_candidates(&starts[q], |p| {
                    if (p as usize) < q && within(table.step_dist(p as usize, q, 0), eps) {
                        out.push(p);
                    }
                });
                out.sort_unstable();
                out
            })
            .collect();
        let mut offsets = Vec::with_capacity(count + 1);
        offsets.push(0);
        let mut lower = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for l in lists {
            lower.extend(l);
            offsets.push(lower.len());
        }
        Conflicts {
            eps,
            steps: 1,
            offsets,
            lower,
        }
    }

    /// Number of enforced time steps (the current `n`).
    pub(crate) fn steps(&self) -> usize {
        self.steps
    }

    pub(crate) fn edge_count(&self) -> usize {
        self.lower.len()
    }

    fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    fn lower_of(&self, q: usize) -> &[u32] {
        &self.lower[self.offsets[q]..self.offsets[q + 1]]
    }

    /// Drops the pairs that separate at the next time step.
    pub(crate) fn advance(&mut self, table: &OrbitTable) -> Result<()> {
        let j = self.steps;
        if j >= table.len() {
            return Err(Error::input(format!("orbit table holds only {} steps", table.len())));
        }
        const CHUNK: usize = 4096;
        let count = self.node_count();
        let eps = self.eps;
        let pieces: Vec<(Vec<usize>, Vec<u32>)> = (0..count.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut lens = Vec::with_capacity(CHUNK);
                let mut kept = Vec::new();
                for q in c * CHUNK..((c + 1) * CHUNK).min(count) {
                    let before = kept.len();
                    for &p in self.lower_of(q) {
                        if within(table.step_dist(p as usize, q, j), eps) {
                            kept.push(p);
                        }
                    }
                    lens.push(kept.len() - before);
                }
                (lens, kept)
            })
            .collect();
        let mut offsets = Vec::with_capacity(count + 1);
        offsets.push(0);
        let mut lower = Vec::new();
        for (lens, kept) in pieces {
            for l in lens {
                offsets.push(offsets.last().unwrap() + l);
            }
            lower.extend(kept);
        }
        self.offsets = offsets;
        self.lower = lower;
        self.steps += 1;
        Ok(())
    }

    /// Index-order greedy independent set: maximal by inclusion, hence also a
    /// spanning set.
    pub(crate) fn greedy_separated(&self) -> Vec<usize> {
        let count = self.node_count();
        let mut kept = vec![false; count];
        for q in 0..count {
            kept[q] = !self.lower_of(q).iter().any(|&p| kept[p as usize]);
        }
        (0..count).filter(|&q| kept[q]).collect()
    }

    fn symmetric(&self) -> (Vec<usize>, Vec<u32>) {
        let count = self.node_count();
        let mut degree = vec![0usize; count];
        for q in 0..count {
            for &p in self.lower_of(q) {
                degree[q] += 1;
                degree[p as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..count].to_vec();
        let mut adj = vec![0u32; *offsets.last().unwrap()];
        for q in 0..count {
            for &p in self.lower_of(q) {
                adj[fill[q]] = p;
                fill[q] += 1;
                adj[fill[p as usize]] = q as u32;
                fill[p as usize] += 1;
            }
        }
        (offsets, adj)
    }

    /// Greedy set cover by closed Bowen balls centred at net points. Largest
    /// gain first, lowest index on ties.
    pub(crate) fn greedy_spanning(&self) -> Vec<usize> {
        let count = self.node_count();
        let (offsets, adj) = self.symmetric();
        let ball = |c: usize| std::iter::once(c as u32).chain(adj[offsets[c]..offsets[c + 1]].iter().copied());
        let mut covered = vec![false; count];
        let mut remaining = count;
        let mut heap: BinaryHeap<(usize, Reverse<usize>)> = (0..count)
            .map(|c| (offsets[c + 1] - offsets[c] + 1, Reverse(c)))
            .collect();
        let mut centres = Vec::new();
        while remaining > 0 {
            let Some((gain, Reverse(c))) = heap.pop() else { break };
            let actual = ball(c).filter(|&x| !covered[x as usize]).count();
            if actual == gain {
                for x in ball(c) {
                    if !covered[x as usize] {
                        covered[x as usize] = true;
                        remaining -= 1;
                    }
                }
                centres.push(c);
            } else if actual > 0 {
                heap.push((actual, Reverse(c)));
            }
        }
        centres
    }

    /// Closed-ball masks for exact solvers.
    fn masks(&self) -> Result<Vec<u32>> {
        let count = self.node_count();
        if count > EXACT_LIMIT {
            return Err(Error::Oversized {
                size: count,
                limit: EXACT_LIMIT,
            });
        }
        let mut masks: Vec<u32> = (0..count).map(|k| 1u32 << k).collect();
        for q in 0..count {
            for &p in self.lower_of(q) {
                masks[q] |= 1 << p;
                masks[p as usize] |= 1 << q;
            }
        }
        Ok(masks)
    }

    pub(crate) fn exact_separated(&self) -> Result<Vec<usize>> {
        let masks = self.masks()?;
        let all = if masks.is_empty() {
            0
        } else {
            u32::MAX >> (32 - masks.len())
        };
        let mut best = 0u32;
        max_independent(all, &masks, 0, &mut best);
        Ok(bits(best))
    }

    pub(crate) fn exact_spanning(&self) -> Result<Vec<usize>> {
        let masks = self.masks()?;
        let all = if masks.is_empty() {
            0
        } else {
            u32::MAX >> (32 - masks.len())
        };
        let mut best: Vec<usize> = (0..masks.len()).collect();
        let mut chosen = Vec::new();
        let widest = masks.iter().map(|m| m.count_ones()).max().unwrap_or(1);
        min_dominating(all, &masks, widest, &mut chosen, &mut best);
        Ok(best)
    }
}

fn bits(mask: u32) -> Vec<usize> {
    (0..32).filter(|k| mask >> k & 1 == 1).collect()
}

fn max_independent(cand: u32, masks: &[u32], cur: u32, best: &mut u32) {
    if cand == 0 {
        if cur.count_ones() > best.count_ones() {
            *best = cur;
        }
        return;
    }
    if cur.count_ones() + cand.count_ones() <= best.count_ones() {
        return;
    }
    let v = cand.trailing_zeros() as usize;
    let bit = 1u32 << v;
    max_independent(cand & !masks[v], masks, cur | bit, best);
    max_independent(cand & !bit, masks, cur, best);
}

fn min_dominating(uncovered: u32, masks: &[u32], widest: u32, chosen: &mut Vec<usize>, best: &mut Vec<usize>) {
    if uncovered == 0 {
        if chosen.len() < best.len() {
            *best = chosen.clone();
        }
        return;
    }
    let lower_bound = chosen.len() + uncovered.count_ones().div_ceil(widest) as usize;
    if lower_bound >= best.len() {
        return;
    }
    // Branch on the uncovered element with the fewest covering balls.
    let mut pick = uncovered.trailing_zeros() as usize;
    let mut fewest = u32::MAX;
    let mut rest = uncovered;
    while rest != 0 {
        let e = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        let c = masks[e].count_ones();
        if c < fewest {
            fewest = c;
            pick = e;
        }
    }
    let mut options = masks[pick];
    while options != 0 {
        let c = options.trailing_zeros() as usize;
        options &= options - 1;
        chosen.push(c);
        min_dominating(uncovered & !masks[c], masks, widest, chosen, best);
        chosen.pop();
    }
}

fn prepare(sys: &SystemSpec, i: i64, n: usize, eps: f64, net: &Net, mode: CountMode) -> Result<Conflicts> {
    if n == 0 {
        return Err(Error::input("segment length n must be at least 1"));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::input(format!("epsilon {eps} must be positive")));
    }
    if net.space != sys.space {
        return Err(Error::SpaceMismatch("net and system live on different spaces".into()));
    }
    if mode == CountMode::Exact && net.len() > EXACT_LIMIT {
        return Err(Error::Oversized {
            size: net.len(),
            limit: EXACT_LIMIT,
        });
    }
    let table = OrbitTable::build(sys, i, &net.points, n)?;
    let mut conflicts = Conflicts::initial(&table, eps);
    while conflicts.steps() < n {
        conflicts.advance(&table)?;
    }
    Ok(conflicts)
}

/// `(n, ε)`-separated subset of the net: greedy gives a maximal one (a lower
/// bound on `s[n,i]`), exact a maximum one.
pub fn max_separated(sys: &SystemSpec, i: i64, n: usize, eps: f64, net: &Net, mode: CountMode) -> Result<Selection> {
    let c = prepare(sys, i, n, eps, net, mode)?;
    Ok(Selection::from_indices(match mode {
        CountMode::Greedy => c.greedy_separated(),
        CountMode::Exact => c.exact_separated()?,
    }))
}

/// `(n, ε)`-spanning subset of the net with closed Bowen balls: greedy set
/// cover (an upper bound on the net-relative `r[n,i]`) or exact minimum.
pub fn min_spanning(sys: &SystemSpec, i: i64, n: usize, eps: f64, net: &Net, mode: CountMode) -> Result<Selection> {
    let c = prepare(sys, i, n, eps, net, mode)?;
    Ok(Selection::from_indices(match mode {
        CountMode::Greedy => c.greedy_spanning(),
        CountMode::Exact => c.exact_spanning()?,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{uniform_net, SpaceModel};
    use crate::system::{constant_family, MapSpec};

    fn identity_circle() -> SystemSpec {
        constant_family(MapSpec::Identity, &SpaceModel::Circle).unwrap()
    }

    #[test]
    fn exact_limit_enforced() {
        let net = uniform_net(&SpaceModel::Circle, 25).unwrap();
        let err = max_separated(&identity_circle(), 0, 1, 0.2, &net, CountMode::Exact).unwrap_err();
        assert_eq!(err, Error::Oversized { size: 25, limit: 24 });
        assert!(min_spanning(&identity_circle(), 0, 1, 0.2, &net, CountMode::Greedy).is_ok());
    }

    #[test]
    fn large_epsilon_spans_with_one_point() {
        let net = uniform_net(&SpaceModel::Torus2, 6).unwrap();
        let cat = constant_family(MapSpec::cat(), &SpaceModel::Torus2).unwrap();
        for mode in [CountMode::Greedy, CountMode::Exact] {
            let net = if mode == CountMode::Exact {
                uniform_net(&SpaceModel::Torus2, 4).unwrap()
            } else {
                net.clone()
            };
            for n in 1..4 {
                assert_eq!(min_spanning(&cat, 0, n, 1.5, &net, mode).unwrap().count, 1);
            }
        }
    }

    #[test]
    fn witnesses_are_sorted_and_consistent() {
        let net = uniform_net(&SpaceModel::Circle, 12).unwrap();
        let sel = max_separated(&identity_circle(), 0, 1, 0.25, &net, CountMode::Exact).unwrap();
        assert_eq!(sel.count, sel.witness.len());
        assert!(sel.witness.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bad_parameters() {
        let net = uniform_net(&SpaceModel::Circle, 8).unwrap();
        assert!(max_separated(&identity_circle(), 0, 0, 0.2, &net, CountMode::Greedy).is_err());
        assert!(max_separated(&identity_circle(), 0, 1, 0.0, &net, CountMode::Greedy).is_err());
        let tor = uniform_net(&SpaceModel::Torus2, 3).unwrap();
        assert!(max_separated(&identity_circle(), 0, 1, 0.2, &tor, CountMode::Greedy).is_err());
    }
}
