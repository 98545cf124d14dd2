use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::space::{wrap01, SpaceModel, SpacePoint};

/// One homeomorphism `f_i : M_i → M_{i+1}` of a system.
///
/// `CircleBump` post-composes its base with the coordinate-wise circle
/// diffeomorphism `y ↦ y + (a/2π)·sin(2π(y + phase))`, which has derivative
/// in `[1 − |a|, 1 + |a|]` and is therefore invertible whenever `|a| < 1`.
/// On the torus the bump acts on both coordinates with the same parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum MapSpec {
    Identity,
    /// Translation by `alpha` (on every coordinate of the torus).
    Rotation(f64),
    /// Linear automorphism of the 2-torus, `x ↦ A·x mod 1`, `|det A| = 1`.
    ToralAuto([[i64; 2]; 2]),
    CircleBump {
        base: Box<MapSpec>,
        amplitude: f64,
        phase: f64,
    },
    /// `perm[k]` is the image of point `k`.
    FinitePermutation(Vec<usize>),
    Inverse(Box<MapSpec>),
    /// Maps applied left to right.
    Composite(Vec<MapSpec>),
}

/// The 2×2 cat map matrix.
pub const CAT_MATRIX: [[i64; 2]; 2] = [[2, 1], [1, 1]];

impl MapSpec {
    pub fn rotation(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::input(format!("rotation angle {alpha} is not finite")));
        }
        Ok(MapSpec::Rotation(alpha))
    }

    pub fn toral_auto(matrix: [[i64; 2]; 2]) -> Result<Self> {
        let m = MapSpec::ToralAuto(matrix);
        m.check_invertible()?;
        Ok(m)
    }

    pub fn cat() -> Self {
        MapSpec::ToralAuto(CAT_MATRIX)
    }

    pub fn bump(base: MapSpec, amplitude: f64, phase: f64) -> Result<Self> {
        let m = MapSpec::CircleBump {
            base: Box::new(base),
            amplitude,
            phase,
        };
        m.check_invertible()?;
        Ok(m)
    }

    pub fn permutation(perm: Vec<usize>) -> Result<Self> {
        let m = MapSpec::FinitePermutation(perm);
        m.check_invertible()?;
        Ok(m)
    }

    /// Structural inverse; double inverses cancel.
    pub fn inverse(&self) -> MapSpec {
        match self {
            MapSpec::Identity => MapSpec::Identity,
            MapSpec::Inverse(inner) => (**inner).clone(),
            other => MapSpec::Inverse(Box::new(other.clone())),
        }
    }

    /// Validates the invariants that make the map a homeomorphism.
    pub fn check_invertible(&self) -> Result<()> {
        match self {
            MapSpec::Identity => Ok(()),
            MapSpec::Rotation(a) if a.is_finite() => Ok(()),
            MapSpec::Rotation(a) => Err(Error::NonInvertible(format!("rotation by {a}"))),
            MapSpec::ToralAuto(m) => {
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                if det.abs() == 1 {
                    Ok(())
                } else {
                    Err(Error::NonInvertible(format!(
                        "toral matrix {m:?} has determinant {det}"
                    )))
                }
            }
            MapSpec::CircleBump { base, amplitude, phase } => {
                if amplitude.is_nan() || amplitude.abs() >= 1.0 || !phase.is_finite() {
                    return Err(Error::NonInvertible(format!(
                        "bump amplitude {amplitude} must satisfy |a| < 1"
                    )));
                }
                base.check_invertible()
            }
            MapSpec::FinitePermutation(perm) => {
                let mut seen = vec![false; perm.len()];
                for &k in perm {
                    if k >= perm.len() || seen[k] {
                        return Err(Error::NonInvertible(format!("{perm:?} is not a permutation")));
                    }
                    seen[k] = true;
                }
                Ok(())
            }
            MapSpec::Inverse(inner) => inner.check_invertible(),
            MapSpec::Composite(maps) => maps.iter().try_for_each(MapSpec::check_invertible),
        }
    }

    /// Checks invertibility and that the map acts on `space`.
    pub fn validate_for(&self, space: &SpaceModel) -> Result<()> {
        self.check_invertible()?;
        self.check_space(space)
    }

    fn check_space(&self, space: &SpaceModel) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::SpaceMismatch(format!(
                "{what} cannot act on the {} model",
                space.name()
            )))
        };
        match (self, space) {
            (MapSpec::Identity, _) => Ok(()),
            (MapSpec::Rotation(_), SpaceModel::Finite(_)) => bad("rotation"),
            (MapSpec::Rotation(_), _) => Ok(()),
            (MapSpec::ToralAuto(_), SpaceModel::Torus2) => Ok(()),
            (MapSpec::ToralAuto(_), _) => bad("toral automorphism"),
            (MapSpec::CircleBump { .. }, SpaceModel::Finite(_)) => bad("circle bump"),
            (MapSpec::CircleBump { base, .. }, _) => base.check_space(space),
            (MapSpec::FinitePermutation(p), SpaceModel::Finite(m)) if p.len() == m.len() => Ok(()),
            (MapSpec::FinitePermutation(p), _) => bad(&format!("permutation of {} points", p.len())),
            (MapSpec::Inverse(inner), _) => inner.check_space(space),
            (MapSpec::Composite(maps), _) => maps.iter().try_for_each(|m| m.check_space(space)),
        }
    }

    /// True when the map preserves the normalized metric exactly.
    pub fn is_isometry(&self) -> bool {
        match self {
            MapSpec::Identity | MapSpec::Rotation(_) => true,
            // Permutations are isometries of the discrete metric only; callers
            // with other finite metrics must check directly.
            MapSpec::FinitePermutation(_) => false,
            MapSpec::Inverse(inner) => inner.is_isometry(),
            MapSpec::Composite(maps) => maps.iter().all(MapSpec::is_isometry),
            MapSpec::ToralAuto(_) | MapSpec::CircleBump { .. } => false,
        }
    }

    /// Image of `p`, coordinates reduced mod 1.
    pub fn apply(&self, p: SpacePoint) -> Result<SpacePoint> {
        match (self, p) {
            (MapSpec::Identity, _) => Ok(p),
            (MapSpec::Rotation(a), SpacePoint::Circle(x)) => Ok(SpacePoint::Circle(wrap01(x + a))),
            (MapSpec::Rotation(a), SpacePoint::Torus([x, y])) => Ok(SpacePoint::Torus([wrap01(x + a), wrap01(y + a)])),
            (MapSpec::ToralAuto(m), SpacePoint::Torus(v)) => Ok(SpacePoint::Torus(toral_apply(m, v))),
            (MapSpec::CircleBump { base, amplitude, phase }, _) => {
                let y = base.apply(p)?;
                Ok(map_coords(y, |c| bump_forward(c, *amplitude, *phase)))
            }
            (MapSpec::FinitePermutation(perm), SpacePoint::Finite(k)) if k < perm.len() => {
                Ok(SpacePoint::Finite(perm[k]))
            }
            (MapSpec::Inverse(inner), _) => inner.apply_inverse(p),
            (MapSpec::Composite(maps), _) => maps.iter().try_fold(p, |acc, m| m.apply(acc)),
            _ => Err(Error::Dimension(format!("{self:?} cannot act on {p}"))),
        }
    }

    /// Preimage of `p`.
    pub fn apply_inverse(&self, p: SpacePoint) -> Result<SpacePoint> {
        match (self, p) {
            (MapSpec::Identity, _) => Ok(p),
            (MapSpec::Rotation(a), SpacePoint::Circle(x)) => Ok(SpacePoint::Circle(wrap01(x - a))),
            (MapSpec::Rotation(a), SpacePoint::Torus([x, y])) => Ok(SpacePoint::Torus([wrap01(x - a), wrap01(y - a)])),
            (MapSpec::ToralAuto(m), SpacePoint::Torus(v)) => {
                let inv = toral_inverse(m)?;
                Ok(SpacePoint::Torus(toral_apply(&inv, v)))
            }
            (MapSpec::CircleBump { base, amplitude, phase }, _) => {
                let y = map_coords(p, |c| bump_backward(c, *amplitude, *phase));
                base.apply_inverse(y)
            }
            (MapSpec::FinitePermutation(perm), SpacePoint::Finite(k)) if k < perm.len() => perm
                .iter()
                .position(|&img| img == k)
                .map(SpacePoint::Finite)
                .ok_or_else(|| Error::NonInvertible(format!("{perm:?} is not a permutation"))),
            (MapSpec::Inverse(inner), _) => inner.apply(p),
            (MapSpec::Composite(maps), _) => maps.iter().rev().try_fold(p, |acc, m| m.apply_inverse(acc)),
            _ => Err(Error::Dimension(format!("{self:?} cannot act on {p}"))),
        }
    }

    /// Derivative of a circle map at `x`, by the chain rule. `None` for maps
    /// that are not circle maps.
    pub fn circle_derivative(&self, x: f64) -> Option<f64> {
        match self {
            MapSpec::Identity | MapSpec::Rotation(_) => Some(1.0),
            MapSpec::CircleBump { base, amplitude, phase } => {
                let inner = base.circle_derivative(x)?;
                let y = match base.apply(SpacePoint::Circle(wrap01(x))).ok()? {
                    SpacePoint::Circle(y) => y,
                    _ => return None,
                };
                Some(inner * (1.0 + amplitude * (TAU * (y + phase)).cos()))
            }
            MapSpec::Inverse(inner) => {
                let pre = match inner.apply_inverse(SpacePoint::Circle(wrap01(x))).ok()? {
                    SpacePoint::Circle(y) => y,
                    _ => return None,
                };
                Some(1.0 / inner.circle_derivative(pre)?)
            }
            MapSpec::Composite(maps) => {
                let mut d = 1.0;
                let mut cur = wrap01(x);
                for m in maps {
                    d *= m.circle_derivative(cur)?;
                    cur = match m.apply(SpacePoint::Circle(cur)).ok()? {
                        SpacePoint::Circle(y) => y,
                        _ => return None,
                    };
                }
                Some(d)
            }
            MapSpec::ToralAuto(_) | MapSpec::FinitePermutation(_) => None,
        }
    }
}

fn map_coords(p: SpacePoint, f: impl Fn(f64) -> f64) -> SpacePoint {
    match p {
        SpacePoint::Circle(x) => SpacePoint::Circle(f(x)),
        SpacePoint::Torus([x, y]) => SpacePoint::Torus([f(x), f(y)]),
        finite => finite,
    }
}

#[inline]
fn toral_apply(m: &[[i64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    let x = m[0][0] as f64 * v[0] + m[0][1] as f64 * v[1];
    let y = m[1][0] as f64 * v[0] + m[1][1] as f64 * v[1];
    [wrap01(x), wrap01(y)]
}

fn toral_inverse(m: &[[i64; 2]; 2]) -> Result<[[i64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() != 1 {
        return Err(Error::NonInvertible(format!(
            "toral matrix {m:?} has determinant {det}"
        )));
    }
    Ok([[det * m[1][1], -det * m[0][1]], [-det * m[1][0], det * m[0][0]]])
}

#[inline]
fn bump_lift(y: f64, a: f64, phase: f64) -> f64 {
    y + a / TAU * (TAU * (y + phase)).sin()
}

#[inline]
fn bump_forward(y: f64, a: f64, phase: f64) -> f64 {
    wrap01(bump_lift(y, a, phase))
}

/// Inverts the bump on the lift: the root lies within `|a|/2π` of the target,
/// so bisection brackets it and Newton polishes to machine precision.
fn bump_backward(target: f64, a: f64, phase: f64) -> f64 {
    if a == 0.0 {
        return target;
    }
    let reach = a.abs() / TAU + 1e-12;
    let (mut lo, mut hi) = (target - reach, target + reach);
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if bump_lift(mid, a, phase) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..8 {
        let g = bump_lift(x, a, phase) - target;
        let dg = 1.0 + a * (TAU * (x + phase)).cos();
        let step = g / dg;
        x -= step;
        if step.abs() < 4e-16 {
            break;
        }
    }
    wrap01(x)
}
