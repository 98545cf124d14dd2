//! Compact metric space models, the total-space metric and finite nets.
//!
//! Every model is normalized so that its diameter is exactly 1. The circle
//! uses twice the wrap-around distance, the 2-torus twice the wrapped L∞
//! distance, and finite models divide their distance matrix by its maximum.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Slack granted to metric comparisons so that exact ties survive rounding.
///
/// Distances within this amount of a radius count as lying on the closed ball.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Closed-ball membership test shared by every counting routine.
#[inline]
pub fn within(d: f64, radius: f64) -> bool {
    d <= radius + TIE_TOLERANCE
}

/// Reduces a coordinate to `[0, 1)`.
#[inline]
pub fn wrap01(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[inline]
fn wrap_gap(x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    d.min(1.0 - d)
}

/// A finite metric space with labelled points.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMetric {
    labels: Vec<String>,
    raw: Vec<Vec<f64>>,
    scale: f64,
}

impl FiniteMetric {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Raw (unnormalized) distance matrix as supplied.
    pub fn raw_distances(&self) -> &[Vec<f64>] {
        &self.raw
    }
}

/// The phase space `M` shared by every component of the total space.
#[derive(Clone, Debug, PartialEq)]
pub enum SpaceModel {
    Circle,
    Torus2,
    Finite(Arc<FiniteMetric>),
}

/// A point of a [`SpaceModel`]. Continuous coordinates live in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpacePoint {
    Circle(f64),
    Torus([f64; 2]),
    Finite(usize),
}

impl SpacePoint {
    pub fn circle(x: f64) -> Self {
        SpacePoint::Circle(wrap01(x))
    }

    pub fn torus(x: f64, y: f64) -> Self {
        SpacePoint::Torus([wrap01(x), wrap01(y)])
    }

    pub(crate) fn is_finite_number(&self) -> bool {
        match self {
            SpacePoint::Circle(x) => x.is_finite(),
            SpacePoint::Torus([x, y]) => x.is_finite() && y.is_finite(),
            SpacePoint::Finite(_) => true,
        }
    }
}

impl fmt::Display for SpacePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpacePoint::Circle(x) => write!(f, "{x}"),
            SpacePoint::Torus([x, y]) => write!(f, "({x}, {y})"),
            SpacePoint::Finite(k) => write!(f, "#{k}"),
        }
    }
}

/// A point of the total space: `point` placed in the copy `M × {component}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TotalPoint {
    pub point: SpacePoint,
    pub component: i64,
}

impl SpaceModel {
    /// Builds a finite model from labels and a raw distance matrix.
    ///
    /// The matrix must be square, symmetric, zero exactly on the diagonal,
    /// strictly positive elsewhere and satisfy the triangle inequality (all up
    /// to [`TIE_TOLERANCE`] after normalization).
    pub fn finite(labels: Vec<String>, distances: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::input("finite space needs at least one point"));
        }
        if distances.len() != n || distances.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("distance matrix must be {n}x{n}")));
        }
        let mut diam = 0.0f64;
        for row in &distances {
            for &d in row {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::input(format!(
                        "distance {d} is not a finite non-negative number"
                    )));
                }
                diam = diam.max(d);
            }
        }
        let scale = if n == 1 { 1.0 } else { 1.0 / diam };
        if n > 1 && (diam.is_nan() || diam <= 0.0) {
            return Err(Error::input("distinct points must have positive distance"));
        }
        for a in 0..n {
            if distances[a][a] != 0.0 {
                return Err(Error::input(format!("d({a},{a}) must be zero")));
            }
            for b in 0..n {
                let dab = distances[a][b] * scale;
                if ((distances[b][a] * scale) - dab).abs() > TIE_TOLERANCE {
                    return Err(Error::input(format!("distance matrix not symmetric at ({a},{b})")));
                }
                if a != b && dab <= TIE_TOLERANCE {
                    return Err(Error::input(format!("points {a} and {b} are not separated")));
                }
                for (c, row) in distances.iter().enumerate() {
                    let via = (distances[a][c] + row[b]) * scale;
                    if dab > via + TIE_TOLERANCE {
                        return Err(Error::input(format!("triangle inequality fails for ({a},{b}) via {c}")));
                    }
                }
            }
        }
        Ok(SpaceModel::Finite(Arc::new(FiniteMetric {
            labels,
            raw: distances,
            scale,
        })))
    }

    /// The discrete metric on `n` points (all distinct pairs at distance 1).
    pub fn discrete(n: usize) -> Result<Self> {
        let labels = (0..n).map(|k| format!("p{k}")).collect();
        let distances = (0..n)
            .map(|a| (0..n).map(|b| if a == b { 0.0 } else { 1.0 }).collect())
            .collect();
        SpaceModel::finite(labels, distances)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpaceModel::Circle => "circle",
            SpaceModel::Torus2 => "torus2",
            SpaceModel::Finite(_) => "finite",
        }
    }

    /// Factor applied to the raw metric so the diameter is 1.
    pub fn normalization(&self) -> f64 {
        match self {
            SpaceModel::Circle | SpaceModel::Torus2 => 2.0,
            SpaceModel::Finite(m) => m.scale,
        }
    }

    /// Checks that `p` is a point of this space.
    pub fn check_point(&self, p: &SpacePoint) -> Result<()> {
        match (self, p) {
            (SpaceModel::Circle, SpacePoint::Circle(_)) | (SpaceModel::Torus2, SpacePoint::Torus(_)) => {
                if p.is_finite_number() {
                    Ok(())
                } else {
                    Err(Error::Numeric(format!("non-finite coordinate in {p}")))
                }
            }
            (SpaceModel::Finite(m), SpacePoint::Finite(k)) if *k < m.len() => Ok(()),
            (SpaceModel::Finite(m), SpacePoint::Finite(k)) => Err(Error::Dimension(format!(
                "index {k} outside finite space of {} points",
                m.len()
            ))),
            _ => Err(Error::Dimension(format!(
                "point {p} does not belong to the {} model",
                self.name()
            ))),
        }
    }

    /// Normalized distance between two points of this space.
    pub fn dist(&self, p: &SpacePoint, q: &SpacePoint) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(self.dist_unchecked(p, q))
    }

    /// Distance for points already known to belong to this space.
    #[inline]
    pub(crate) fn dist_unchecked(&self, p: &SpacePoint, q: &SpacePoint) -> f64 {
        match (self, p, q) {
            (SpaceModel::Circle, SpacePoint::Circle(x), SpacePoint::Circle(y)) => 2.0 * wrap_gap(*x, *y),
            (SpaceModel::Torus2, SpacePoint::Torus(a), SpacePoint::Torus(b)) => {
                2.0 * wrap_gap(a[0], b[0]).max(wrap_gap(a[1], b[1]))
            }
            (SpaceModel::Finite(m), SpacePoint::Finite(a), SpacePoint::Finite(b)) => m.raw[*a][*b] * m.scale,
            _ => f64::NAN,
        }
    }

    /// Number of points, for finite models.
    pub fn finite_len(&self) -> Option<usize> {
        match self {
            SpaceModel::Finite(m) => Some(m.len()),
            _ => None,
        }
    }
}

/// Distance in the total space: `min(1, d)` inside a component, 1 across.
pub fn total_dist(space: &SpaceModel, tp: &TotalPoint, tq: &TotalPoint) -> Result<f64> {
    let d = space.dist(&tp.point, &tq.point)?;
    if tp.component == tq.component {
        Ok(d.min(1.0))
    } else {
        Ok(1.0)
    }
}

/// A finite set of points with a guaranteed covering radius.
#[derive(Clone, Debug, PartialEq)]
pub struct Net {
    pub points: Vec<SpacePoint>,
    /// Every point of the space lies within this distance of some net point.
    pub density: f64,
    /// Grid resolution the net was built from (points per axis).
    pub resolution: usize,
    pub space: SpaceModel,
}

impl Net {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// A net made of explicitly chosen points. Its density is unknown and
    /// reported as the space diameter.
    pub fn from_points(space: &SpaceModel, points: Vec<SpacePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("net must contain at least one point"));
        }
        for p in &points {
            space.check_point(p)?;
        }
        let resolution = points.len();
        Ok(Net {
            points,
            density: 1.0,
            resolution,
            space: space.clone(),
        })
    }
}

/// Equally spaced net: `m` points on the circle, an `m × m` grid on the
/// torus, every point of a finite model.
pub fn uniform_net(space: &SpaceModel, m: usize) -> Result<Net> {
    if m == 0 {
        return Err(Error::input("net resolution must be at least 1"));
    }
    let step = 1.0 / m as f64;
    let (points, density) = match space {
        SpaceModel::Circle => ((0..m).map(|k| SpacePoint::Circle(k as f64 * step)).collect(), step),
        SpaceModel::Torus2 => {
            let mut pts = Vec::with_capacity(m * m);
            for a in 0..m {
                for b in 0..m {
                    pts.push(SpacePoint::Torus([a as f64 * step, b as f64 * step]));
                }
            }
            (pts, step)
        }
        SpaceModel::Finite(fm) => ((0..fm.len()).map(SpacePoint::Finite).collect(), 0.0),
    };
    let resolution = match space {
        SpaceModel::Finite(fm) => fm.len(),
        _ => m,
    };
    Ok(Net {
        points,
        density,
        resolution,
        space: space.clone(),
    })
}

/// One seeded point per grid cell: `m` points on the circle, `m × m` on the
/// torus, every point of a finite model. Every point of the space shares a
/// cell with a net point, so the density is `2/m`.
///
/// The uniform grid is invariant under integer toral automorphisms, which
/// turns net-relative counts into counts for a permutation of the grid.
/// Jitter breaks that invariance.
pub fn jittered_net(space: &SpaceModel, m: usize, seed: u64) -> Result<Net> {
    if m == 0 {
        return Err(Error::input("net resolution must be at least 1"));
    }
    if let SpaceModel::Finite(_) = space {
        return uniform_net(space, m);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1.0 / m as f64;
    let mut cell = |k: usize| wrap01((k as f64 + rng.gen::<f64>()) * step);
    let points = match space {
        SpaceModel::Torus2 => {
            let mut pts = Vec::with_capacity(m * m);
            for a in 0..m {
                for b in 0..m {
                    let x = cell(a);
                    pts.push(SpacePoint::Torus([x, cell(b)]));
                }
            }
            pts
        }
        _ => (0..m).map(|k| SpacePoint::Circle(cell(k))).collect(),
    };
    Ok(Net {
        points,
        density: (2.0 * step).min(1.0),
        resolution: m,
        space: space.clone(),
    })
}

/// Largest distance from a probe grid point to its nearest net point.
///
/// Brute force over all probe/net pairs. Finite nets are probed at every
/// point of the space.
pub fn net_density_check(net: &Net, probe_resolution: usize) -> Result<f64> {
    let probes: Vec<SpacePoint> = match &net.space {
        SpaceModel::Finite(fm) => (0..fm.len()).map(SpacePoint::Finite).collect(),
        other => {
            if probe_resolution <= net.resolution {
                return Err(Error::input(format!(
                    "probe resolution {probe_resolution} must exceed net resolution {}",
                    net.resolution
                )));
            }
            uniform_net(other, probe_resolution)?.points
        }
    };
    let mut worst = 0.0f64;
    for probe in &probes {
        let nearest = net
            .points
            .iter()
            .map(|q| net.space.dist_unchecked(probe, q))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    Ok(worst)
}

/// Bucket grid over point positions, used to enumerate candidate pairs within
/// a radius without scanning all pairs.
pub(crate) struct SpatialIndex {
    cells_per_axis: usize,
    dims: usize,
    buckets: Vec<Vec<u32>>,
    offsets: Vec<Vec<isize>>,
}

impl SpatialIndex {
    const MAX_CELLS_PER_AXIS: usize = 1024;

    /// Indexes `points` for queries of normalized radius `radius`.
    pub(crate) fn new(space: &SpaceModel, points: &[SpacePoint], radius: f64) -> Self {
        let dims = match space {
            SpaceModel::Circle => 1,
            SpaceModel::Torus2 => 2,
            SpaceModel::Finite(_) => 0,
        };
        let raw_radius = (radius + TIE_TOLERANCE) / space.normalization();
        let cells_per_axis = if dims == 0 || raw_radius >= 0.5 {
            1
        } else {
            ((1.0 / raw_radius).floor() as usize).clamp(1, Self::MAX_CELLS_PER_AXIS)
        };
        let total = cells_per_axis.pow(dims as u32).max(1);
        let mut buckets = vec![Vec::new(); total];
        for (k, p) in points.iter().enumerate() {
            buckets[Self::cell_of(cells_per_axis, p)].push(k as u32);
        }
        // Distinct neighbour offsets per axis (fewer than three cells wrap
        // onto themselves).
        let axis: Vec<isize> = match cells_per_axis {
            1 => vec![0],
            2 => vec![0, 1],
            _ => vec![-1, 0, 1],
        };
        let offsets = match dims {
            0 => vec![vec![]],
            1 => axis.iter().map(|&a| vec![a]).collect(),
            _ => axis
                .iter()
                .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
                .collect(),
        };
        SpatialIndex {
            cells_per_axis,
            dims,
            buckets,
            offsets,
        }
    }

    #[inline]
    fn axis_cell(c: usize, x: f64) -> usize {
        ((x * c as f64) as usize).min(c - 1)
    }

    fn cell_of(c: usize, p: &SpacePoint) -> usize {
        match p {
            SpacePoint::Circle(x) => Self::axis_cell(c, *x),
            SpacePoint::Torus([x, y]) => Self::axis_cell(c, *x) * c + Self::axis_cell(c, *y),
            SpacePoint::Finite(_) => 0,
        }
    }

    /// Calls `visit` with every indexed point that may lie within the radius
    /// of `p` (a superset of the true neighbours).
    pub(crate) fn for_candidates(&self, p: &SpacePoint, mut visit: impl FnMut(u32)) {
        let c = self.cells_per_axis as isize;
        let base: Vec<isize> = match p {
            SpacePoint::Circle(x) => vec![Self::axis_cell(self.cells_per_axis, *x) as isize],
            SpacePoint::Torus([x, y]) => vec![
                Self::axis_cell(self.cells_per_axis, *x) as isize,
                Self::axis_cell(self.cells_per_axis, *y) as isize,
            ],
            SpacePoint::Finite(_) => vec![],
        };
        for off in &self.offsets {
            let mut cell = 0usize;
            for d in 0..self.dims {
                cell = cell * self.cells_per_axis + (base[d] + off[d]).rem_euclid(c) as usize;
            }
            for &k in &self.buckets[cell] {
                visit(k);
            }
        }
    }
}
