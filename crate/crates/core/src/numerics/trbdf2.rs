//! TR-BDF2: a trapezoidal stage followed by a second-order backward
//! differentiation stage, both with the same iteration matrix `I − d·h·J`.
//! The scheme is L-stable and second order; a third-order companion built
//! from the same stage derivatives drives the step-size controller.

use super::laplacian::{apply_laplacian, Tridiagonal};
use super::{check_span, OutputMode, SolverTolerances, Trajectory};
use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;
/// Position of the intermediate stage, `2 − √2`.
const GAMMA: f64 = 2.0 - SQRT2;
/// Diagonal coefficient of both implicit stages, `γ/2`.
const D: f64 = GAMMA / 2.0;
/// Trapezoidal weight of the first two stage derivatives, `√2/4`.
const W: f64 = SQRT2 / 4.0;
const BDF_Z: f64 = 1.0 / (GAMMA * (2.0 - GAMMA));
#[cfg(test)]
const BDF_Y: f64 = (1.0 - GAMMA) * (1.0 - GAMMA) / (GAMMA * (2.0 - GAMMA));
// third-order weights minus TR-BDF2 weights
const ERR_1: f64 = (1.0 - 4.0 * W) / 3.0;
const ERR_2: f64 = 1.0 / 3.0;
const ERR_3: f64 = -2.0 * D / 3.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const MAX_NEWTON: usize = 12;
const NEWTON_TOL: f64 = 1e-2;
const MAX_NEWTON_RETRIES: usize = 20;

/// Semi-discrete system `y' = f(t, y)` whose Jacobian is tridiagonal.
pub trait SemiDiscreteSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
    /// Writes `∂f/∂y` at `(t, y)` into `jac`.
    fn jacobian(&self, t: f64, y: &[f64], jac: &mut Tridiagonal);
}

/// Method-of-lines system `yⱼ' = κ (D₂ y)ⱼ + r(t, j, yⱼ)` with Neumann
/// ghost rows, where `κ` is the diffusion coefficient divided by `dx²`.
///
/// `slope(t, j, yⱼ)` is the derivative of the local reaction `r` and forms
/// the diagonal part of the Jacobian.
pub struct MolSystem<R, S> {
    dim: usize,
    kappa: f64,
    reaction: R,
    slope: S,
}

impl<R, S> MolSystem<R, S>
where
    R: Fn(f64, usize, f64) -> f64,
    S: Fn(f64, usize, f64) -> f64,
{
    pub fn new(dim: usize, diffusion: f64, dx: f64, reaction: R, slope: S) -> Result<Self> {
        if dim < 3 {
            return Err(Error::domain(format!("need at least 3 nodes, got {dim}")));
        }
        if !(dx > 0.0) || !(diffusion >= 0.0) {
            return Err(Error::domain("dx must be positive and diffusion nonnegative"));
        }
        Ok(Self {
            dim,
            kappa: diffusion / (dx * dx),
            reaction,
            slope,
        })
    }
}

impl<R, S> SemiDiscreteSystem for MolSystem<R, S>
where
    R: Fn(f64, usize, f64) -> f64,
    S: Fn(f64, usize, f64) -> f64,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        apply_laplacian(y, self.kappa, dy);
        for (j, d) in dy.iter_mut().enumerate() {
            *d += (self.reaction)(t, j, y[j]);
        }
    }

    fn jacobian(&self, t: f64, y: &[f64], jac: &mut Tridiagonal) {
        jac.set_neumann_laplacian(self.kappa);
        for (j, d) in jac.diag.iter_mut().enumerate() {
            *d += (self.slope)(t, j, y[j]);
        }
    }
}

struct Workspace {
    jac: Tridiagonal,
    iter: Tridiagonal,
    f: Vec<f64>,
    g: Vec<f64>,
    delta: Vec<f64>,
    trial: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            jac: Tridiagonal::zeros(n),
            iter: Tridiagonal::zeros(n),
            f: vec![0.0; n],
            g: vec![0.0; n],
            delta: vec![0.0; n],
            trial: vec![0.0; n],
            scratch: Vec::with_capacity(n),
        }
    }

    /// `iter = I − dh·J(t, y)`.
    fn build_iteration_matrix<S: SemiDiscreteSystem + ?Sized>(
        &mut self,
        sys: &S,
        t: f64,
        y: &[f64],
        dh: f64,
    ) {
        sys.jacobian(t, y, &mut self.jac);
        for i in 0..self.jac.len() {
            self.iter.lower[i] = -dh * self.jac.lower[i];
            self.iter.upper[i] = -dh * self.jac.upper[i];
            self.iter.diag[i] = 1.0 - dh * self.jac.diag[i];
        }
    }
}

/// Solves `z − dh·f(t, z) = r` by Newton's method with a backtracking line
/// search on `‖z − dh·f(t, z) − r‖₂`. On success `z` holds the root and
/// `fz` holds `f(t, z)`.
#[allow(clippy::too_many_arguments)]
fn newton_solve<S: SemiDiscreteSystem + ?Sized>(
    sys: &S,
    t: f64,
    dh: f64,
    r: &[f64],
    z: &mut [f64],
    fz: &mut [f64],
    tol: &SolverTolerances,
    ws: &mut Workspace,
    evals: &mut usize,
) -> bool {
    let n = z.len();
    let residual = |z: &[f64], f: &[f64], g: &mut [f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            g[i] = z[i] - dh * f[i] - r[i];
            s += g[i] * g[i];
        }
        s.sqrt()
    };
    sys.rhs(t, z, fz);
    *evals += 1;
    let mut gnorm = residual(z, fz, &mut ws.g);
    for _ in 0..MAX_NEWTON {
        if gnorm == 0.0 {
            return true;
        }
        ws.build_iteration_matrix(sys, t, z, dh);
        for i in 0..n {
            ws.delta[i] = -ws.g[i];
        }
        if !ws.iter.solve_in_place(&mut ws.delta, &mut ws.scratch) {
            return false;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            for i in 0..n {
                ws.trial[i] = z[i] + lambda * ws.delta[i];
            }
            sys.rhs(t, &ws.trial, &mut ws.f);
            *evals += 1;
            let trial_norm = residual(&ws.trial, &ws.f, &mut ws.g);
            if trial_norm.is_finite() && trial_norm <= (1.0 - 1e-4 * lambda) * gnorm {
                gnorm = trial_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // stagnation at roundoff level counts as converged
            let step = weighted_max(&ws.delta, z, z, tol);
            if step <= NEWTON_TOL {
                sys.rhs(t, z, fz);
                *evals += 1;
                return true;
            }
            return false;
        }
        let step = lambda * weighted_max(&ws.delta, z, &ws.trial, tol);
        z.copy_from_slice(&ws.trial);
        fz.copy_from_slice(&ws.f);
        if step <= NEWTON_TOL {
            return true;
        }
    }
    false
}

fn weighted_max(v: &[f64], a: &[f64], b: &[f64], tol: &SolverTolerances) -> f64 {
    let mut m = 0.0f64;
    for i in 0..v.len() {
        let r = (v[i] / tol.weight(a[i], b[i])).abs();
        m = if r.is_nan() { f64::INFINITY } else { m.max(r) };
    }
    m
}

/// Integrates a method-of-lines system with adaptive TR-BDF2.
///
/// Newton failures halve the step; `max_step` caps the step length. Output
/// values between step ends use cubic Hermite interpolation.
pub fn integrate_stiff_mol<S: SemiDiscreteSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t_span: (f64, f64),
    t_eval: &[f64],
    tol: &SolverTolerances,
    mode: OutputMode,
) -> Result<Trajectory> {
    check_span(y0, t_span, t_eval)?;
    tol.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::domain(format!(
            "initial state has length {}, system has dimension {n}",
            y0.len()
        )));
    }
    let (t0, t_end) = t_span;
    let span = t_end - t0;
    let h_min = 1e-12 * span;

    let mut out = Trajectory::with_capacity(n, t_eval.len());
    let mut next_out = 0;
    while next_out < t_eval.len() && t_eval[next_out] <= t0 {
        out.push(t_eval[next_out], y0);
        next_out += 1;
    }

    let mut ws = Workspace::new(n);
    let mut y = y0.to_vec();
    let mut f0 = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut fz = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut est = vec![0.0; n];
    let mut interp = vec![0.0; n];

    sys.rhs(t0, &y, &mut f0);
    out.stats.rhs_evals += 1;
    let mut t = t0;
    let mut h = (1e-3 * span).min(tol.max_step);
    let mut newton_retries = 0;
    let mut last_rejected = false;

    while t < t_end {
        let mut target = t_end;
        if mode == OutputMode::Stop && next_out < t_eval.len() {
            target = target.min(t_eval[next_out]);
        }
        if target <= t {
            while next_out < t_eval.len() && t_eval[next_out] <= t {
                out.push(t_eval[next_out], &y);
                next_out += 1;
            }
            continue;
        }
        h = h.min(tol.max_step);
        let mut hit_target = false;
        if t + 1.01 * h >= target {
            h = target - t;
            hit_target = true;
        }
        if h < h_min {
            return Err(Error::StepUnderflow { t, h });
        }
        let t_new = if hit_target { target } else { t + h };
        let dh = D * h;

        // trapezoidal stage to t + γh
        for i in 0..n {
            rhs[i] = y[i] + dh * f0[i];
            z[i] = y[i] + GAMMA * h * f0[i];
        }
        let ok = newton_solve(
            sys,
            t + GAMMA * h,
            dh,
            &rhs,
            &mut z,
            &mut fz,
            tol,
            &mut ws,
            &mut out.stats.rhs_evals,
        );
        // BDF2 stage to t + h
        let ok = ok && {
            for i in 0..n {
                // BDF_Z·z − BDF_Y·y, using BDF_Z − BDF_Y = 1
                rhs[i] = y[i] + BDF_Z * (z[i] - y[i]);
                y1[i] = y[i] + (z[i] - y[i]) / GAMMA;
            }
            newton_solve(
                sys,
                t_new,
                dh,
                &rhs,
                &mut y1,
                &mut f1,
                tol,
                &mut ws,
                &mut out.stats.rhs_evals,
            )
        };
        if !ok {
            newton_retries += 1;
            out.stats.rejected += 1;
            if newton_retries > MAX_NEWTON_RETRIES {
                return Err(Error::NewtonFailure {
                    t,
                    retries: newton_retries,
                });
            }
            h *= 0.5;
            last_rejected = true;
            continue;
        }
        newton_retries = 0;

        // error estimate filtered through (I − dh·J)⁻¹
        for i in 0..n {
            est[i] = h * (ERR_1 * f0[i] + ERR_2 * fz[i] + ERR_3 * f1[i]);
        }
        ws.build_iteration_matrix(sys, t_new, &y1, dh);
        let filtered = ws.iter.solve_in_place(&mut est, &mut ws.scratch);
        let err = if filtered {
            weighted_max(&est, &y, &y1, tol)
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            out.stats.accepted += 1;
            while next_out < t_eval.len() && t_eval[next_out] <= t_new {
                let te = t_eval[next_out];
                if te == t_new {
                    out.push(te, &y1);
                } else {
                    hermite(t, h, &y, &f0, &y1, &f1, te, &mut interp);
                    out.push(te, &interp);
                }
                next_out += 1;
            }
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut f0, &mut f1);
            t = t_new;
            let mut fac = (SAFETY * err.max(1e-10).powf(-1.0 / 3.0)).clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            out.stats.rejected += 1;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-1.0 / 3.0)).max(FAC_MIN)
            } else {
                FAC_MIN
            };
            h *= fac;
            last_rejected = true;
        }
    }
    while next_out < t_eval.len() {
        out.push(t_eval[next_out], &y);
        next_out += 1;
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn hermite(t0: f64, h: f64, y0: &[f64], f0: &[f64], y1: &[f64], f1: &[f64], t: f64, out: &mut [f64]) {
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}
