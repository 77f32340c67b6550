//! Sufficient sliding condition and empirical onset detection.
//!
//! With `A = ‖v*_t‖ + δ‖v*_xx‖ + f1M‖v*‖ + f2M + f1M‖v₀ − v*‖`, any relay
//! gain `ρ > A` drives the deviation `|v − v*|` below the envelope
//! `q(t) = (‖v₀ − v*‖ − (ρ − A) t)⁺`, which vanishes at
//! `T* = ‖v₀ − v*‖ / (ρ − A)`.
//!
//! `A` is a crude sufficient bound. For the Hodgkin–Huxley coefficients it is
//! of order 10⁵ while gains around 20 already stabilise in practice, so the
//! predicted and observed onsets are reported side by side.

use serde::{Deserialize, Serialize};

use crate::coupled::{ReducedScenario, Scenario, SimulationResult, TargetNorms, TargetTrajectory};
use crate::error::{Error, Result};
use crate::model::{self, GatingBounds, HHParameters};

/// Lipschitz constants `(L_f1, L_f2)` of the membrane coefficients on the
/// cube `[0, M]³`.
pub fn lipschitz_constants(params: &HHParameters, m: f64) -> (f64, f64) {
    let m3 = m.powi(3);
    let l1 = (4.0 * m3 * params.g_k)
        .max(3.0 * m3 * params.g_na)
        .max(m3 * params.g_na);
    let l2 = (4.0 * m3 * params.g_k * params.v_k.abs())
        .max(3.0 * m3 * params.g_na * params.v_na.abs())
        .max(m3 * params.g_na * params.v_na.abs());
    (l1, l2)
}

/// Upper bounds `(f1M, f2M)` on `|f1|` and `|f2|` over the gating box.
pub fn coefficient_bounds(params: &HHParameters, bounds: &GatingBounds) -> (f64, f64) {
    let (l1, l2) = lipschitz_constants(params, bounds.max());
    let s = bounds.sum();
    (
        model::f1(0.0, 0.0, 0.0, params).abs() + l1 * s,
        model::f2(0.0, 0.0, 0.0, params).abs() + l2 * s,
    )
}

pub fn bound_a(norms: &TargetNorms, dev0: f64, f1_max: f64, f2_max: f64, delta: f64) -> f64 {
    norms.dt_sup + delta * norms.dxx_sup + f1_max * norms.sup + f2_max + f1_max * dev0
}

/// Predicted time `T*` at which the trajectory reaches the surface.
pub fn sliding_time(rho: f64, a: f64, dev0: f64) -> Result<f64> {
    if !(rho > a) {
        return Err(Error::ConditionViolated { rho, a });
    }
    Ok(dev0 / (rho - a))
}

/// Comparison envelope `q(t) = (dev0 − (ρ − A) t)⁺`.
pub fn comparison_q(t: f64, rho: f64, a: f64, dev0: f64) -> Result<f64> {
    if !(rho > a) {
        return Err(Error::ConditionViolated { rho, a });
    }
    if t >= dev0 / (rho - a) {
        return Ok(0.0);
    }
    Ok((dev0 - (rho - a) * t).max(0.0))
}

/// Width of the tube around the surface that counts as sliding: the
/// regularised relay's boundary layer plus the outer-loop resolution.
pub fn default_band(epsilon: f64, threshold: f64) -> f64 {
    2.0 * epsilon + 5.0 * threshold
}

/// Earliest saved time from which `sup_x |v − v*| ≤ band` holds for the rest
/// of the horizon.
pub fn detect_sliding(result: &SimulationResult, target: &TargetTrajectory, band: f64) -> Option<f64> {
    let tmesh = result.mesh.tmesh();
    let mut onset = None;
    for i in (0..tmesh.len()).rev() {
        let dev = deviation_at(result, target, i);
        if dev <= band {
            onset = Some(tmesh[i]);
        } else {
            break;
        }
    }
    onset
}

/// `sup_x |v(tᵢ, x) − v*(tᵢ, x)|`.
pub fn deviation_at(result: &SimulationResult, target: &TargetTrajectory, i: usize) -> f64 {
    let t = result.mesh.tmesh()[i];
    result
        .v
        .row(i)
        .iter()
        .enumerate()
        .fold(0.0, |m, (j, v)| m.max((v - target.eval(t, j)).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlidingBound {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "f1M")]
    pub f1_max: f64,
    #[serde(rename = "f2M")]
    pub f2_max: f64,
    pub dev0: f64,
    pub rho: f64,
    /// Smallest gain for which `T* < T`.
    pub rho_min: f64,
    /// Present only when `ρ > rho_min`.
    #[serde(rename = "T_star")]
    pub t_star: Option<f64>,
}

impl SlidingBound {
    pub fn new(
        norms: &TargetNorms,
        dev0: f64,
        f1_max: f64,
        f2_max: f64,
        delta: f64,
        rho: f64,
        horizon: f64,
    ) -> Self {
        let a = bound_a(norms, dev0, f1_max, f2_max, delta);
        let rho_min = a + dev0 / horizon;
        let t_star = if rho > rho_min {
            sliding_time(rho, a, dev0).ok()
        } else {
            None
        };
        Self {
            a,
            f1_max,
            f2_max,
            dev0,
            rho,
            rho_min,
            t_star,
        }
    }

    pub fn envelope(&self, t: f64) -> Result<f64> {
        comparison_q(t, self.rho, self.a, self.dev0)
    }
}

/// Bound for a Hodgkin–Huxley scenario with the given gating box.
pub fn analyze(scenario: &Scenario, bounds: &GatingBounds) -> Result<SlidingBound> {
    scenario.validate()?;
    let p = &scenario.params;
    let (f1_max, f2_max) = coefficient_bounds(p, bounds);
    let norms = scenario.target.norms(&scenario.mesh)?;
    Ok(SlidingBound::new(
        &norms,
        scenario.initial_deviation(),
        f1_max,
        f2_max,
        p.delta,
        p.rho,
        scenario.mesh.horizon(),
    ))
}

pub fn analyze_reduced(problem: &ReducedScenario) -> Result<SlidingBound> {
    let norms = problem.target.norms(&problem.mesh)?;
    Ok(SlidingBound::new(
        &norms,
        problem.initial_deviation(),
        problem.model.f1_max,
        problem.model.f2_max,
        problem.delta,
        problem.rho,
        problem.mesh.horizon(),
    ))
}
