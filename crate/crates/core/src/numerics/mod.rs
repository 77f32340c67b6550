//! Meshing, spatial discretisation and time integration.
//!
//! Two integrators are provided: an explicit embedded Dormand–Prince 5(4)
//! pair for the nonstiff gating equations, and an L-stable TR-BDF2 scheme
//! for the semi-discrete potential equation, whose Newton systems are
//! tridiagonal.

mod dopri;
mod laplacian;
mod mesh;
mod trbdf2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dopri::integrate_rk45;
pub use laplacian::{laplacian_neumann, Tridiagonal};
pub use mesh::{Mesh, MeshSpec, StateField};
pub use trbdf2::{integrate_stiff_mol, MolSystem, SemiDiscreteSystem};

/// Local error tolerances shared by both integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverTolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest internal step, in the time unit of the problem.
    pub max_step: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-6,
            max_step: 1.0,
        }
    }
}

impl SolverTolerances {
    pub fn new(rel_tol: f64, abs_tol: f64, max_step: f64) -> Result<Self> {
        let tol = Self {
            rel_tol,
            abs_tol,
            max_step,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
        ] {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    #[inline]
    fn weight(&self, a: f64, b: f64) -> f64 {
        self.abs_tol + self.rel_tol * a.abs().max(b.abs())
    }
}

/// How output times interact with the step-size controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputMode {
    /// Steps ignore the output times; values there come from the method's
    /// continuous extension.
    #[default]
    Dense,
    /// Every output time is hit exactly by a step end.
    Stop,
}

/// Solution values at the requested output times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    dim: usize,
    values: Vec<f64>,
    pub stats: IntegrationStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl Trajectory {
    fn with_capacity(dim: usize, n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            dim,
            values: Vec::with_capacity(n * dim),
            stats: IntegrationStats::default(),
        }
    }

    fn push(&mut self, t: f64, y: &[f64]) {
        self.times.push(t);
        self.values.extend_from_slice(y);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }
}

fn check_span(y0: &[f64], t_span: (f64, f64), t_eval: &[f64]) -> Result<()> {
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::domain(format!("invalid time span [{t0}, {t1}]")));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("initial state is not finite"));
    }
    if t_eval.iter().any(|&t| !(t >= t0 && t <= t1)) {
        return Err(Error::domain("output time outside the integration span"));
    }
    if t_eval.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("output times must be nondecreasing"));
    }
    Ok(())
}
