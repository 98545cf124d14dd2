//! Open covers of finite metric models. On a finite model every subset is
//! open, so a cover is any family of subsets whose union is the whole space.
//! Subsets are bitmasks over point indices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{SpaceModel, SpacePoint};
use crate::system::SystemSpec;

/// Largest family on which [`minimal_subcover_count`] runs after reduction.
pub const COVER_LIMIT: usize = 24;

const MAX_POINTS: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteCover {
    points: usize,
    sets: Vec<u64>,
}

fn full_mask(points: usize) -> u64 {
    if points == 64 {
        u64::MAX
    } else {
        (1u64 << points) - 1
    }
}

fn normalize(mut sets: Vec<u64>) -> Vec<u64> {
    sets.retain(|&s| s != 0);
    sets.sort_unstable();
    sets.dedup();
    sets
}

impl FiniteCover {
    /// Cover of a finite space given as lists of point indices.
    pub fn new(space: &SpaceModel, sets: &[Vec<usize>]) -> Result<Self> {
        let points = finite_size(space)?;
        let mut masks = Vec::with_capacity(sets.len());
        for s in sets {
            let mut m = 0u64;
            for &k in s {
                if k >= points {
                    return Err(Error::input(format!("point {k} outside a {points}-point space")));
                }
                m |= 1 << k;
            }
            masks.push(m);
        }
        Self::from_masks(points, masks)
    }

    pub fn from_masks(points: usize, sets: Vec<u64>) -> Result<Self> {
        if points == 0 || points > MAX_POINTS {
            return Err(Error::input(format!(
                "covers need 1 to {MAX_POINTS} points, got {points}"
            )));
        }
        let full = full_mask(points);
        if sets.iter().any(|s| s & !full != 0) {
            return Err(Error::input("cover set outside the space"));
        }
        if sets.iter().fold(0, |acc, s| acc | s) != full {
            return Err(Error::input("sets do not cover the space"));
        }
        Ok(FiniteCover {
            points,
            sets: normalize(sets),
        })
    }

    /// The single-set cover `{M}`.
    pub fn trivial(points: usize) -> Result<Self> {
        Self::from_masks(points, vec![full_mask(points)])
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn masks(&self) -> &[u64] {
        &self.sets
    }

    pub fn sets(&self) -> Vec<Vec<usize>> {
        self.sets
            .iter()
            .map(|&m| (0..self.points).filter(|k| m >> k & 1 == 1).collect())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Whether every set of `self` lies inside some set of `other`.
    pub fn refines(&self, other: &FiniteCover) -> bool {
        self.points == other.points && refines(&self.sets, &other.sets)
    }

    /// Drops duplicates and sets contained in another set; `N` is unchanged.
    pub fn reduced(&self) -> FiniteCover {
        FiniteCover {
            points: self.points,
            sets: reduce(&self.sets),
        }
    }
}

fn refines(fine: &[u64], coarse: &[u64]) -> bool {
    fine.iter().all(|&b| coarse.iter().any(|&a| b & !a == 0))
}

fn reduce(sets: &[u64]) -> Vec<u64> {
    let mut sorted = sets.to_vec();
    // Larger sets first so that each kept set is checked against all supersets.
    sorted.sort_unstable_by_key(|s| (std::cmp::Reverse(s.count_ones()), *s));
    sorted.dedup();
    let mut kept: Vec<u64> = Vec::with_capacity(sorted.len());
    for s in sorted {
        if !kept.iter().any(|&k| s & !k == 0) {
            kept.push(s);
        }
    }
    kept.sort_unstable();
    kept
}

/// Allocation-free `reduce(join_masks(a, b))` for small families; returns the
/// number of sets written to `out`.
fn join_reduced_into(a: &[u64], b: &[u64], out: &mut [u64]) -> usize {
    let mut len = 0;
    for &x in a {
        for &y in b {
            let s = x & y;
            if s != 0 {
                out[len] = s;
                len += 1;
            }
        }
    }
    let buf = &mut out[..len];
    buf.sort_unstable_by_key(|s| std::cmp::Reverse(s.count_ones()));
    let mut kept = 0;
    for k in 0..len {
        let s = buf[k];
        if !buf[..kept].iter().any(|&t| s & !t == 0) {
            buf[kept] = s;
            kept += 1;
        }
    }
    kept
}

fn finite_size(space: &SpaceModel) -> Result<usize> {
    space
        .finite_len()
        .ok_or_else(|| Error::SpaceMismatch("covers are defined on finite models only".into()))
}

/// `𝒜 ∨ 𝔅`: all nonempty pairwise intersections.
pub fn cover_join(a: &FiniteCover, b: &FiniteCover) -> Result<FiniteCover> {
    if a.points != b.points {
        return Err(Error::SpaceMismatch(format!(
            "covers of {} and {} points",
            a.points, b.points
        )));
    }
    Ok(FiniteCover {
        points: a.points,
        sets: join_masks(&a.sets, &b.sets),
    })
}

fn join_masks(a: &[u64], b: &[u64]) -> Vec<u64> {
    normalize(a.iter().flat_map(|&x| b.iter().map(move |&y| x & y)).collect())
}

/// Images `f_i^k(x)` of every point of a finite space.
fn images(sys: &SystemSpec, i: i64, k: usize) -> Result<Vec<usize>> {
    let points = finite_size(&sys.space)?;
    (0..points)
        .map(|x| match sys.compose(i, SpacePoint::Finite(x), k)? {
            SpacePoint::Finite(y) => Ok(y),
            other => Err(Error::SpaceMismatch(format!("finite point mapped to {other}"))),
        })
        .collect()
}

fn preimage(image: &[usize], set: u64) -> u64 {
    image
        .iter()
        .enumerate()
        .filter(|&(_, &y)| set >> y & 1 == 1)
        .fold(0, |acc, (x, _)| acc | 1 << x)
}

/// `(f_i^k)^{-1}(𝒜)`.
pub fn cover_pullback(sys: &SystemSpec, i: i64, k: usize, a: &FiniteCover) -> Result<FiniteCover> {
    let points = finite_size(&sys.space)?;
    if points != a.points {
        return Err(Error::SpaceMismatch("cover and system live on different spaces".into()));
    }
    let image = images(sys, i, k)?;
    Ok(FiniteCover {
        points,
        sets: normalize(a.sets.iter().map(|&s| preimage(&image, s)).collect()),
    })
}

/// `N(𝒜)`, the size of a smallest subcover.
pub fn minimal_subcover_count(a: &FiniteCover) -> Result<usize> {
    let sets = reduce(&a.sets);
    if sets.len() > COVER_LIMIT {
        return Err(Error::Oversized {
            size: sets.len(),
            limit: COVER_LIMIT,
        });
    }
    Ok(min_cover(full_mask(a.points), &sets))
}

/// Exact minimum number of `sets` whose union is `universe`.
fn min_cover(universe: u64, sets: &[u64]) -> usize {
    let widest = sets.iter().map(|s| s.count_ones()).max().unwrap_or(1).max(1);
    let mut best = sets.len();
    cover_search(universe, sets, widest, 0, &mut best);
    best
}

fn cover_search(uncovered: u64, sets: &[u64], widest: u32, depth: usize, best: &mut usize) {
    if uncovered == 0 {
        *best = (*best).min(depth);
        return;
    }
    if depth + uncovered.count_ones().div_ceil(widest) as usize >= *best {
        return;
    }
    // Branch on the uncovered point with the fewest sets containing it; for
    // small families the lowest uncovered point is cheaper and good enough.
    let pick = if sets.len() <= 12 {
        uncovered.trailing_zeros()
    } else {
        let mut pick = 0;
        let mut fewest = usize::MAX;
        let mut rest = uncovered;
        while rest != 0 {
            let p = rest.trailing_zeros();
            rest &= rest - 1;
            let c = sets.iter().filter(|&&s| s >> p & 1 == 1).count();
            if c < fewest {
                fewest = c;
                pick = p;
            }
        }
        pick
    };
    for &s in sets.iter().filter(|&&s| s >> pick & 1 == 1) {
        cover_search(uncovered & !s, sets, widest, depth + 1, best);
    }
}

/// The sequence `N(⋁_{k<n} (f_i^k)^{-1}𝒜)` for `n = 1..=n_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverRate {
    pub counts: Vec<usize>,
    /// `(1/n) log N` for each `n`.
    pub rates: Vec<f64>,
    /// Value at `n = n_max`.
    pub rate: f64,
}

pub fn cover_entropy_rate(sys: &SystemSpec, i: i64, a: &FiniteCover, n_max: usize) -> Result<CoverRate> {
    if n_max < 2 {
        return Err(Error::input("n_max must be at least 2"));
    }
    let points = finite_size(&sys.space)?;
    if points != a.points {
        return Err(Error::SpaceMismatch("cover and system live on different spaces".into()));
    }
    let base = reduce(&a.sets);
    let mut joined = base.clone();
    let mut counts = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        if n > 1 {
            let image = images(sys, i, n - 1)?;
            let pulled: Vec<u64> = base.iter().map(|&s| preimage(&image, s)).collect();
            joined = reduce(&join_masks(&joined, &pulled));
        }
        if joined.len() > COVER_LIMIT {
            return Err(Error::Oversized {
                size: joined.len(),
                limit: COVER_LIMIT,
            });
        }
        counts.push(min_cover(full_mask(points), &joined));
    }
    let rates: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (c as f64).ln() / (k + 1) as f64)
        .collect();
    Ok(CoverRate {
        rate: *rates.last().unwrap(),
        counts,
        rates,
    })
}

/// Scope of an exhaustive cover-law run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawScope {
    /// Covers with at most this many distinct sets are enumerated.
    pub max_sets: usize,
    /// Binary laws pair every enumerated cover with every cover of at most
    /// this many sets.
    pub partner_sets: usize,
    /// Pullback depths `k = 0..=max_shift`.
    pub max_shift: usize,
    /// Join lengths `n = 1..=n_max`.
    pub n_max: usize,
}

/// Checked instances and violations per law.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawTally {
    pub checked: u64,
    pub violations: u64,
}

impl LawTally {
    fn add(&mut self, ok: bool) {
        self.checked += 1;
        self.violations += u64::from(!ok);
    }

    fn merge(&mut self, o: &LawTally) {
        self.checked += o.checked;
        self.violations += o.violations;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverLawReport {
    pub points: usize,
    pub covers: u64,
    pub subadditivity: LawTally,
    pub refinement: LawTally,
    pub pullback: LawTally,
    pub join_bound: LawTally,
    pub sequence_bound: LawTally,
}

impl CoverLawReport {
    pub fn passed(&self) -> bool {
        [
            &self.subadditivity,
            &self.refinement,
            &self.pullback,
            &self.join_bound,
            &self.sequence_bound,
        ]
        .iter()
        .all(|t| t.violations == 0 && t.checked > 0)
    }

    fn merge(&mut self, o: &CoverLawReport) {
        self.covers += o.covers;
        self.subadditivity.merge(&o.subadditivity);
        self.refinement.merge(&o.refinement);
        self.pullback.merge(&o.pullback);
        self.join_bound.merge(&o.join_bound);
        self.sequence_bound.merge(&o.sequence_bound);
    }
}

/// Every cover of `points` points by at most `max_sets` distinct nonempty sets.
pub fn enumerate_covers(points: usize, max_sets: usize) -> Result<Vec<Vec<u64>>> {
    if points == 0 || points > 16 {
        return Err(Error::input("exhaustive enumeration needs 1 to 16 points"));
    }
    let full = full_mask(points);
    let mut out = Vec::new();
    let mut stack = Vec::with_capacity(max_sets);
    fn rec(next: u64, full: u64, max_sets: usize, union: u64, stack: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if union == full {
            out.push(stack.clone());
        }
        if stack.len() == max_sets {
            return;
        }
        for s in next..=full {
            stack.push(s);
            rec(s + 1, full, max_sets, union | s, stack, out);
            stack.pop();
        }
    }
    rec(1, full, max_sets, 0, &mut stack, &mut out);
    Ok(out)
}

/// Checks the cover-entropy laws exactly, in integer form (`N` instead of
/// `log N`), over every cover in scope:
///
/// * `N(𝒜 ∨ 𝔅) ≤ N(𝒜) N(𝔅)`;
/// * `N(𝒜) ≤ N(𝔅)` whenever `𝔅` refines `𝒜`, including `𝔅 = 𝒜 ∨ 𝒞`;
/// * `N((f_i^k)^{-1}𝒜) = N(𝒜)`;
/// * `N(⋁_{k<n} (f_i^k)^{-1}𝒜) ≤ N(𝒜)^n`, and the normalized sequence stays
///   within `[0, log N(𝒜)]`.
pub fn check_cover_laws(sys: &SystemSpec, i: i64, scope: &LawScope) -> Result<CoverLawReport> {
    let points = finite_size(&sys.space)?;
    if scope.n_max < 1 || scope.max_sets < 1 || scope.partner_sets < 1 {
        return Err(Error::input("law scope needs positive bounds"));
    }
    let full = full_mask(points);
    let covers = enumerate_covers(points, scope.max_sets)?;
    let partners: Vec<&Vec<u64>> = covers.iter().filter(|c| c.len() <= scope.partner_sets).collect();
    let partner_n: Vec<usize> = partners.iter().map(|c| min_cover(full, &reduce(c))).collect();
    let shifts: Vec<Vec<usize>> = (0..=scope.max_shift.max(scope.n_max))
        .map(|k| images(sys, i, k))
        .collect::<Result<_>>()?;

    let report = covers
        .par_iter()
        .fold(CoverLawReport::default, |mut rep, a| {
            rep.covers += 1;
            let na = min_cover(full, &reduce(a));
            for image in &shifts[..=scope.max_shift] {
                let pulled: Vec<u64> = a.iter().map(|&s| preimage(image, s)).collect();
                rep.pullback.add(min_cover(full, &reduce(&pulled)) == na);
            }
            let mut joined = reduce(a);
            for n in 1..=scope.n_max {
                if n > 1 {
                    let pulled: Vec<u64> = a.iter().map(|&s| preimage(&shifts[n - 1], s)).collect();
                    joined = reduce(&join_masks(&joined, &pulled));
                }
                let nj = min_cover(full, &joined);
                rep.join_bound.add((nj as u128) <= (na as u128).pow(n as u32));
                let rate = (nj as f64).ln() / n as f64;
                rep.sequence_bound.add(rate >= 0.0 && rate <= (na as f64).ln() + 1e-12);
            }
            let mut buf = [0u64; 64];
            for (b, &nb) in partners.iter().zip(&partner_n) {
                let len = join_reduced_into(a, b, &mut buf);
                let nj = min_cover(full, &buf[..len]);
                rep.subadditivity.add(nj <= na * nb);
                rep.refinement.add(nj >= na.max(nb));
                if refines(b, a) {
                    rep.refinement.add(na <= nb);
                }
                if refines(a, b) {
                    rep.refinement.add(nb <= na);
                }
            }
            rep
        })
        .reduce(CoverLawReport::default, |mut x, y| {
            x.merge(&y);
            x
        });
    Ok(CoverLawReport { points, ..report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{constant_family, MapSpec};

    fn space(n: usize) -> SpaceModel {
        SpaceModel::discrete(n).unwrap()
    }

    #[test]
    fn join_example() {
        let s = space(4);
        let a = FiniteCover::new(&s, &[vec![0, 1], vec![2, 3]]).unwrap();
        let b = FiniteCover::new(&s, &[vec![0, 2], vec![1, 3]]).unwrap();
        let j = cover_join(&a, &b).unwrap();
        assert_eq!(j.sets(), vec![vec![0], vec![1], vec![2], vec![3]]);
        assert_eq!(cover_join(&a, &FiniteCover::trivial(4).unwrap()).unwrap(), a);
        assert_eq!(minimal_subcover_count(&cover_join(&a, &a).unwrap()).unwrap(), 2);
    }

    #[test]
    fn subcover_examples() {
        let s = space(3);
        let tri = FiniteCover::new(&s, &[vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert_eq!(minimal_subcover_count(&tri).unwrap(), 2);
        let part = FiniteCover::new(&s, &[vec![0], vec![1], vec![2]]).unwrap();
        assert_eq!(minimal_subcover_count(&part).unwrap(), 3);
        let with_m = FiniteCover::new(&s, &[vec![0], vec![0, 1, 2]]).unwrap();
        assert_eq!(minimal_subcover_count(&with_m).unwrap(), 1);
    }

    #[test]
    fn rejects_non_covers() {
        assert!(FiniteCover::new(&space(3), &[vec![0, 1]]).is_err());
        assert!(FiniteCover::new(&space(3), &[vec![0, 1, 3]]).is_err());
        assert!(FiniteCover::new(&SpaceModel::Circle, &[vec![0]]).is_err());
    }

    #[test]
    fn oversized_cover() {
        let singles: Vec<Vec<usize>> = (0..30).map(|k| vec![k]).collect();
        let c = FiniteCover::new(&space(30), &singles).unwrap();
        assert!(matches!(
            minimal_subcover_count(&c),
            Err(Error::Oversized { size: 30, .. })
        ));
    }

    #[test]
    fn pullback_under_permutation() {
        let s = space(4);
        let sys = constant_family(MapSpec::permutation(vec![1, 2, 3, 0]).unwrap(), &s).unwrap();
        let a = FiniteCover::new(&s, &[vec![0, 1], vec![1, 2, 3]]).unwrap();
        assert_eq!(cover_pullback(&sys, 0, 0, &a).unwrap(), a);
        let p = cover_pullback(&sys, 0, 1, &a).unwrap();
        assert_eq!(p.sets(), vec![vec![0, 1, 2], vec![0, 3]]);
        let mut sizes: Vec<u32> = p.masks().iter().map(|m| m.count_ones()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 3]);
    }

    #[test]
    fn identity_rate_decays() {
        let s = space(4);
        let sys = constant_family(MapSpec::Identity, &s).unwrap();
        let a = FiniteCover::new(&s, &[vec![0, 1], vec![2, 3]]).unwrap();
        let r = cover_entropy_rate(&sys, 0, &a, 4).unwrap();
        assert_eq!(r.counts, vec![2; 4]);
        for (k, v) in r.rates.iter().enumerate() {
            assert!((v - 2f64.ln() / (k + 1) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn enumeration_counts() {
        // Covers of 2 points: {11}, {01,10}, {01,11}, {10,11}, {01,10,11}.
        assert_eq!(enumerate_covers(2, 3).unwrap().len(), 5);
        assert_eq!(enumerate_covers(3, 1).unwrap().len(), 1);
    }
}
