use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sizes of a uniform space–time grid on `[0, L] × [0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "maxX")]
    pub max_x: usize,
    #[serde(rename = "maxT")]
    pub max_t: usize,
}

/// Uniform grid: `max_x` nodes in space and `max_t` saved times, both
/// including the end points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeshSpec", into = "MeshSpec")]
pub struct Mesh {
    spec: MeshSpec,
    xmesh: Vec<f64>,
    tmesh: Vec<f64>,
}

/// Upper limit on saved grid cells per field.
pub const MAX_CELLS: usize = 10_000_000;

fn linspace(end: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect();
    v[n - 1] = end;
    v
}

impl Mesh {
    pub fn new(length: f64, horizon: f64, max_x: usize, max_t: usize) -> Result<Self> {
        Self::try_from(MeshSpec {
            length,
            horizon,
            max_x,
            max_t,
        })
    }

    pub fn spec(&self) -> MeshSpec {
        self.spec
    }

    pub fn length(&self) -> f64 {
        self.spec.length
    }

    pub fn horizon(&self) -> f64 {
        self.spec.horizon
    }

    pub fn max_x(&self) -> usize {
        self.spec.max_x
    }

    pub fn max_t(&self) -> usize {
        self.spec.max_t
    }

    pub fn xmesh(&self) -> &[f64] {
        &self.xmesh
    }

    pub fn tmesh(&self) -> &[f64] {
        &self.tmesh
    }

    pub fn dx(&self) -> f64 {
        self.spec.length / (self.spec.max_x - 1) as f64
    }

    /// Mesh with `2(n−1)+1` nodes in each direction; every node of `self`
    /// is a node of the refined mesh at twice its index.
    pub fn refined(&self) -> Result<Self> {
        Mesh::new(
            self.spec.length,
            self.spec.horizon,
            2 * (self.spec.max_x - 1) + 1,
            2 * (self.spec.max_t - 1) + 1,
        )
    }
}

impl TryFrom<MeshSpec> for Mesh {
    type Error = Error;

    fn try_from(spec: MeshSpec) -> Result<Self> {
        if !(spec.length > 0.0 && spec.length.is_finite()) {
            return Err(Error::domain(format!("L must be positive, got {}", spec.length)));
        }
        if !(spec.horizon > 0.0 && spec.horizon.is_finite()) {
            return Err(Error::domain(format!("T must be positive, got {}", spec.horizon)));
        }
        if spec.max_x < 3 {
            return Err(Error::domain(format!("maxX must be >= 3, got {}", spec.max_x)));
        }
        if spec.max_t < 2 {
            return Err(Error::domain(format!("maxT must be >= 2, got {}", spec.max_t)));
        }
        if spec.max_x.saturating_mul(spec.max_t) > MAX_CELLS {
            return Err(Error::domain(format!(
                "maxX * maxT must not exceed {MAX_CELLS}, got {} * {}",
                spec.max_x, spec.max_t
            )));
        }
        Ok(Self {
            spec,
            xmesh: linspace(spec.length, spec.max_x),
            tmesh: linspace(spec.horizon, spec.max_t),
        })
    }
}

impl From<Mesh> for MeshSpec {
    fn from(mesh: Mesh) -> Self {
        mesh.spec
    }
}

/// One scalar field sampled on the saved grid, row-major (`max_t` rows of
/// `max_x` values).
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    n_t: usize,
    n_x: usize,
    values: Vec<f64>,
}

impl StateField {
    pub fn from_fn(n_t: usize, n_x: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_t * n_x);
        for i in 0..n_t {
            for j in 0..n_x {
                values.push(f(i, j));
            }
        }
        Self { n_t, n_x, values }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_t = rows.len();
        let n_x = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_x) {
            return Err(Error::domain("ragged rows"));
        }
        Ok(Self {
            n_t,
            n_x,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_x + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[i * self.n_x + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_x..(i + 1) * self.n_x]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_t).map(move |i| self.get(i, j))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Discrete sup-norm of `self − other`.
    pub fn sup_distance(&self, other: &StateField) -> f64 {
        assert_eq!((self.n_t, self.n_x), (other.n_t, other.n_x), "field shapes differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Piecewise-linear interpolation in time of column `j`; `tmesh` gives
    /// the saved times of the rows.
    pub fn interp_time(&self, tmesh: &[f64], t: f64, j: usize) -> Result<f64> {
        if tmesh.len() != self.n_t || self.n_t == 0 {
            return Err(Error::domain("time mesh does not match field"));
        }
        if j >= self.n_x {
            return Err(Error::domain(format!("space index {j} out of range")));
        }
        let (t0, t1) = (tmesh[0], tmesh[self.n_t - 1]);
        if !(t >= t0 && t <= t1) {
            return Err(Error::domain(format!("t = {t} outside [{t0}, {t1}]")));
        }
        Ok(self.interp_unchecked(tmesh, t, j))
    }

    #[inline]
    pub(crate) fn interp_unchecked(&self, tmesh: &[f64], t: f64, j: usize) -> f64 {
        if self.n_t == 1 {
            return self.get(0, j);
        }
        let i = interval_index(tmesh, t);
        let (ta, tb) = (tmesh[i], tmesh[i + 1]);
        let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        let (a, b) = (self.get(i, j), self.get(i + 1, j));
        if w == 0.0 {
            a
        } else if w == 1.0 {
            b
        } else {
            a + w * (b - a)
        }
    }
}

/// Index `i` with `tmesh[i] <= t <= tmesh[i+1]`, clamped to the valid range.
#[inline]
pub(crate) fn interval_index(tmesh: &[f64], t: f64) -> usize {
    let n = tmesh.len();
    let k = tmesh.partition_point(|&s| s <= t);
    k.saturating_sub(1).min(n - 2)
}
