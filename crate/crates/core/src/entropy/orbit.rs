use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::space::{within, SpaceModel, SpacePoint};
use crate::system::{check_finite, SystemSpec};

/// Cached orbit segments `f_i^j(x_k)` for `j < len` of a list of points.
///
/// Built once per `(system, i, points, len)` and shared read-only by every
/// counting query.
#[derive(Clone, Debug)]
pub struct OrbitTable {
    space: SpaceModel,
    len: usize,
    count: usize,
    data: Vec<SpacePoint>,
}

impl OrbitTable {
    pub fn build(sys: &SystemSpec, i: i64, points: &[SpacePoint], len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::input("orbit length must be at least 1"));
        }
        for p in points {
            sys.space.check_point(p)?;
        }
        let maps = sys.maps(i, len - 1)?;
        let rows: Vec<Result<Vec<SpacePoint>>> = points
            .par_iter()
            .map(|&p| {
                let mut row = Vec::with_capacity(len);
                row.push(p);
                let mut cur = p;
                for m in &maps {
                    cur = m.apply(cur)?;
                    check_finite(&cur)?;
                    row.push(cur);
                }
                Ok(row)
            })
            .collect();
        let mut data = Vec::with_capacity(points.len() * len);
        for row in rows {
            data.extend(row?);
        }
        Ok(OrbitTable {
            space: sys.space.clone(),
            len,
            count: points.len(),
            data,
        })
    }

    pub fn space(&self) -> &SpaceModel {
        &self.space
    }

    /// Number of stored time steps.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn point_count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn at(&self, k: usize, j: usize) -> &SpacePoint {
        &self.data[k * self.len + j]
    }

    /// Distance between the orbits of points `a` and `b` at time `j`.
    #[inline]
    pub fn step_dist(&self, a: usize, b: usize, j: usize) -> f64 {
        self.space.dist_unchecked(self.at(a, j), self.at(b, j))
    }

    /// Bowen distance `max_{j<n} d(f^j a, f^j b)`.
    pub fn bowen(&self, a: usize, b: usize, n: usize) -> f64 {
        (0..n.min(self.len))
            .map(|j| self.step_dist(a, b, j))
            .fold(0.0, f64::max)
    }

    /// Whether the Bowen distance over `n` steps is at most `eps` (closed ball).
    pub fn within_bowen(&self, a: usize, b: usize, n: usize, eps: f64) -> bool {
        (0..n.min(self.len)).all(|j| within(self.step_dist(a, b, j), eps))
    }
}

/// Bowen distance between `p` and `q` over `n` steps starting at index `i`.
pub fn bowen_dist(sys: &SystemSpec, i: i64, n: usize, p: SpacePoint, q: SpacePoint) -> Result<f64> {
    let table = OrbitTable::build(sys, i, &[p, q], n)?;
    let d = table.bowen(0, 1, n);
    if d.is_nan() {
        return Err(Error::Numeric("distance evaluated to NaN".into()));
    }
    Ok(d)
}
