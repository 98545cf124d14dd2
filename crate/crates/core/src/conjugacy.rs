//! Conjugacies between systems: verification of the commuting relation,
//! the partial-composition iteration `h^N = (g_0^N)^{-1} ∘ f_0^N`, and
//! equicontinuity moduli of a family `(h_i)`.

use std::io::Write;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::format_g;
use crate::error::{Error, Result};
use crate::space::{within, Net, SpaceModel, SpacePoint, SpatialIndex};
use crate::system::{inverse_system, MapSpec, Rule, SystemSpec};

/// A family `i ↦ h_i` realized on a finite index window.
#[derive(Clone, Debug, PartialEq)]
pub struct ConjugacyFamily {
    pub rule: Rule,
    pub window: RangeInclusive<i64>,
    pub space: SpaceModel,
}

impl ConjugacyFamily {
    /// Checks that every `h_i` in the window is an invertible map of `space`.
    pub fn new(rule: Rule, window: RangeInclusive<i64>, space: &SpaceModel) -> Result<Self> {
        if window.is_empty() {
            return Err(Error::input("empty conjugacy window"));
        }
        for i in window.clone() {
            rule.at(i).validate_for(space)?;
        }
        Ok(ConjugacyFamily {
            rule,
            window,
            space: space.clone(),
        })
    }

    pub fn identity(space: &SpaceModel, window: RangeInclusive<i64>) -> Result<Self> {
        Self::new(Rule::Constant(MapSpec::Identity), window, space)
    }

    /// Seeded bump maps `h_i(y) = y + (a_i/2π) sin 2π(y + φ_i)` with
    /// `|a_i| ≤ amplitude`, per coordinate on the torus.
    pub fn bumps(space: &SpaceModel, amplitude: f64, seed: u64, window: RangeInclusive<i64>) -> Result<Self> {
        if !(0.0..1.0).contains(&amplitude) {
            return Err(Error::input(format!("bump amplitude {amplitude} outside [0, 1)")));
        }
        Self::new(
            Rule::Perturbed {
                base: Box::new(Rule::Constant(MapSpec::Identity)),
                amplitude,
                seed,
            },
            window,
            space,
        )
    }

    pub fn at(&self, i: i64) -> MapSpec {
        self.rule.at(i)
    }
}

/// `sup d(h_{i+1}(f_i(x)), g_i(h_i(x)))` over net points and every `i` with
/// `i, i + 1` in the window.
pub fn verify_conjugacy(f: &SystemSpec, g: &SystemSpec, h: &ConjugacyFamily, net: &Net) -> Result<f64> {
    if f.space != g.space || f.space != h.space || net.space != f.space {
        return Err(Error::SpaceMismatch("conjugacy check needs one shared space".into()));
    }
    let (lo, hi) = (*h.window.start(), *h.window.end());
    let mut worst = 0.0f64;
    for i in lo..hi {
        let (fi, gi, hi0, hi1) = (f.map_at(i), g.map_at(i), h.at(i), h.at(i + 1));
        let part = net
            .points
            .par_iter()
            .map(|&x| -> Result<f64> {
                let left = hi1.apply(fi.apply(x)?)?;
                let right = gi.apply(hi0.apply(x)?)?;
                nan_checked(f.space.dist(&left, &right)?)
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        worst = worst.max(part);
    }
    Ok(worst)
}

fn nan_checked(d: f64) -> Result<f64> {
    if d.is_nan() {
        Err(Error::Numeric("distance evaluated to NaN".into()))
    } else {
        Ok(d)
    }
}

/// `h^N(p) = (g_0^N)^{-1}(f_0^N(p))`.
pub fn partial_conjugacy(f: &SystemSpec, g: &SystemSpec, n: usize, p: SpacePoint) -> Result<SpacePoint> {
    if n == 0 {
        return Err(Error::input("N must be at least 1"));
    }
    if f.space != g.space {
        return Err(Error::SpaceMismatch("systems live on different spaces".into()));
    }
    g.compose_inverse(0, f.compose(0, p, n)?, n)
}

/// The negative-side iterate: the same construction on the time-reversed
/// systems.
pub fn partial_conjugacy_back(f: &SystemSpec, g: &SystemSpec, n: usize, p: SpacePoint) -> Result<SpacePoint> {
    partial_conjugacy(&inverse_system(f), &inverse_system(g), n, p)
}

fn sup_over_net(
    net: &Net,
    space: &SpaceModel,
    pair: impl Fn(SpacePoint) -> Result<(SpacePoint, SpacePoint)> + Sync,
) -> Result<f64> {
    net.points
        .par_iter()
        .map(|&x| {
            let (a, b) = pair(x)?;
            nan_checked(space.dist(&a, &b)?)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// `sup_p d(h^N(p), h^{N+1}(p))` over the net.
pub fn cauchy_gap(f: &SystemSpec, g: &SystemSpec, n: usize, net: &Net) -> Result<f64> {
    sup_over_net(net, &f.space, |x| {
        Ok((partial_conjugacy(f, g, n, x)?, partial_conjugacy(f, g, n + 1, x)?))
    })
}

/// `sup_p d(h^N(p), p)` over the net.
pub fn displacement(f: &SystemSpec, g: &SystemSpec, n: usize, net: &Net) -> Result<f64> {
    sup_over_net(net, &f.space, |x| Ok((partial_conjugacy(f, g, n, x)?, x)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub delta: f64,
    pub modulus_h: f64,
    pub modulus_h_inv: f64,
}

/// Worst image distance of net pairs within `δ`, over the window, for `h`
/// and `h^{-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquicontinuityReport {
    pub rows: Vec<ModulusRow>,
}

impl EquicontinuityReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::input(format!("csv: {e}"));
        w.write_record(["delta", "modulus_h", "modulus_h_inv"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([format_g(r.delta), format_g(r.modulus_h), format_g(r.modulus_h_inv)])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::input(e.to_string()))
    }
}

pub fn equicontinuity_modulus(h: &ConjugacyFamily, deltas: &[f64], net: &Net) -> Result<EquicontinuityReport> {
    if net.space != h.space {
        return Err(Error::SpaceMismatch(
            "net and conjugacy live on different spaces".into(),
        ));
    }
    if deltas.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::input("deltas must be finite and nonnegative"));
    }
    let reach = deltas.iter().cloned().fold(0.0, f64::max);
    let space = &h.space;
    let index = SpatialIndex::new(space, &net.points, reach);
    // Pairs within the largest δ, each with its base distance.
    let pairs: Vec<(u32, u32, f64)> = (0..net.len())
        .into_par_iter()
        .flat_map_iter(|q| {
            let mut out = Vec::new();
            index.for_candidates(&net.points[q], |p| {
                if (p as usize) < q {
                    let d = space.dist_unchecked(&net.points[p as usize], &net.points[q]);
                    if within(d, reach) {
                        out.push((p, q as u32, d));
                    }
                }
            });
            out
        })
        .collect();

    let mut mod_h = vec![0.0f64; deltas.len()];
    let mut mod_inv = vec![0.0f64; deltas.len()];
    for i in h.window.clone() {
        let map = h.at(i);
        let fwd: Vec<SpacePoint> = net.points.iter().map(|&x| map.apply(x)).collect::<Result<_>>()?;
        let back: Vec<SpacePoint> = net
            .points
            .iter()
            .map(|&x| map.apply_inverse(x))
            .collect::<Result<_>>()?;
        for &(p, q, d) in &pairs {
            let a = nan_checked(space.dist_unchecked(&fwd[p as usize], &fwd[q as usize]))?;
            let b = nan_checked(space.dist_unchecked(&back[p as usize], &back[q as usize]))?;
            for (k, &delta) in deltas.iter().enumerate() {
                if within(d, delta) {
                    mod_h[k] = mod_h[k].max(a);
                    mod_inv[k] = mod_inv[k].max(b);
                }
            }
        }
    }
    Ok(EquicontinuityReport {
        rows: deltas
            .iter()
            .zip(mod_h.into_iter().zip(mod_inv))
            .map(|(&delta, (modulus_h, modulus_h_inv))| ModulusRow {
                delta,
                modulus_h,
                modulus_h_inv,
            })
            .collect(),
    })
}
