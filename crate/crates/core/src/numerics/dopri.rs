//! Dormand–Prince 5(4) with FSAL and its fourth-order continuous extension.

use super::{check_span, OutputMode, SolverTolerances, Trajectory};
use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;

/// Integrates `y' = rhs(t, y)` over `t_span` with the adaptive embedded
/// Dormand–Prince pair, returning the solution at `t_eval`.
///
/// Steps are accepted when `max_i |errᵢ| / (atol + rtol·max(|yᵢ|, |y₁ᵢ|)) ≤ 1`.
pub fn integrate_rk45<F>(
    mut rhs: F,
    y0: &[f64],
    t_span: (f64, f64),
    t_eval: &[f64],
    tol: &SolverTolerances,
    mode: OutputMode,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    check_span(y0, t_span, t_eval)?;
    tol.validate()?;
    let n = y0.len();
    let (t0, t_end) = t_span;
    let span = t_end - t0;
    let h_min = 1e-12 * span;

    let mut out = Trajectory::with_capacity(n, t_eval.len());
    let mut next_out = 0;
    while next_out < t_eval.len() && t_eval[next_out] <= t0 {
        out.push(t_eval[next_out], y0);
        next_out += 1;
    }

    let mut y = y0.to_vec();
    let mut y1 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut cont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);

    rhs(t0, &y, &mut k[0]);
    out.stats.rhs_evals += 1;
    let mut t = t0;
    let mut h = initial_step(&mut rhs, t0, &y, &k[0], tol, span, &mut out.stats.rhs_evals);
    let mut last_rejected = false;
    let mut err_prev = 1e-4f64;

    while t < t_end {
        let mut target = t_end;
        if mode == OutputMode::Stop && next_out < t_eval.len() {
            target = target.min(t_eval[next_out]);
        }
        if target <= t {
            // coincident output times already emitted
            while next_out < t_eval.len() && t_eval[next_out] <= t {
                out.push(t_eval[next_out], &y);
                next_out += 1;
            }
            continue;
        }
        h = h.min(tol.max_step);
        let mut hit_target = false;
        if t + h >= target || t + 1.01 * h >= target {
            h = target - t;
            hit_target = true;
        }
        if h < h_min {
            return Err(Error::StepUnderflow { t, h });
        }

        // stages
        let (k1, rest) = k.split_at_mut(1);
        let k1 = &k1[0];
        let [k2, k3, k4, k5, k6, k7] = rest else { unreachable!() };
        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, &ytmp, k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, &ytmp, k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, &ytmp, k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, &ytmp, k5);
        for i in 0..n {
            ytmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if hit_target { target } else { t + h };
        rhs(t_new, &ytmp, k6);
        for i in 0..n {
            y1[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t_new, &y1, k7);
        out.stats.rhs_evals += 6;

        let mut err = 0.0f64;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let r = (e / tol.weight(y[i], y1[i])).abs();
            err = if r.is_nan() { f64::INFINITY } else { err.max(r) };
        }

        if err <= 1.0 {
            out.stats.accepted += 1;
            if next_out < t_eval.len() && t_eval[next_out] <= t_new {
                for i in 0..n {
                    let dy = y1[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    cont[0][i] = y[i];
                    cont[1][i] = dy;
                    cont[2][i] = bspl;
                    cont[3][i] = dy - h * k7[i] - bspl;
                    cont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                while next_out < t_eval.len() && t_eval[next_out] <= t_new {
                    let te = t_eval[next_out];
                    if te == t_new {
                        out.push(te, &y1);
                    } else {
                        let s = (te - t) / h;
                        let s1 = 1.0 - s;
                        for i in 0..n {
                            ytmp[i] = cont[0][i]
                                + s * (cont[1][i]
                                    + s1 * (cont[2][i] + s * (cont[3][i] + s1 * cont[4][i])));
                        }
                        out.push(te, &ytmp);
                    }
                    next_out += 1;
                }
            }
            std::mem::swap(&mut y, &mut y1);
            let (first, last) = k.split_at_mut(6);
            std::mem::swap(&mut first[0], &mut last[0]);
            t = t_new;

            // PI control damps step-size oscillation at the stability limit
            let mut fac = SAFETY * err.max(1e-10).powf(-EXPO) * err_prev.powf(BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            err_prev = err.max(1e-4);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            out.stats.rejected += 1;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-EXPO)).max(FAC_MIN)
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

fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    tol: &SolverTolerances,
    span: f64,
    evals: &mut usize,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len().max(1) as f64;
    let rms = |v: &mut dyn Iterator<Item = f64>| (v.map(|x| x * x).sum::<f64>() / n).sqrt();
    let sc: Vec<f64> = y0.iter().map(|&y| tol.weight(y, y)).collect();
    let d0 = rms(&mut y0.iter().zip(&sc).map(|(y, s)| y / s));
    let d1 = rms(&mut f0.iter().zip(&sc).map(|(f, s)| f / s));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(tol.max_step).min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    rhs(t0 + h0, &y1, &mut f1);
    *evals += 1;
    let d2 = rms(&mut f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| (a - b) / s)) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(tol.max_step).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol(t: f64) -> SolverTolerances {
        SolverTolerances::new(t, t, 10.0).unwrap()
    }

    #[test]
    fn exponential_decay() {
        let tol = tol(1e-6);
        let traj =
            integrate_rk45(|_, y, dy| dy[0] = -y[0], &[1.0], (0.0, 1.0), &[1.0], &tol, OutputMode::Dense)
                .unwrap();
        let err = (traj.state(0)[0] - (-1f64).exp()).abs();
        assert!(err < 10.0 * tol.abs_tol, "err {err}");
    }

    #[test]
    fn zero_rhs_is_constant() {
        let t_eval: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let traj = integrate_rk45(
            |_, _, dy| dy.fill(0.0),
            &[3.5, -2.0],
            (0.0, 10.0),
            &t_eval,
            &tol(1e-6),
            OutputMode::Dense,
        )
        .unwrap();
        for k in 0..traj.len() {
            assert_eq!(traj.state(k), &[3.5, -2.0]);
        }
    }

    #[test]
    fn error_scales_with_tolerance() {
        let run = |t: f64| {
            let traj = integrate_rk45(
                |_, y, dy| dy[0] = -y[0],
                &[1.0],
                (0.0, 5.0),
                &[5.0],
                &tol(t),
                OutputMode::Dense,
            )
            .unwrap();
            (traj.state(0)[0] - (-5f64).exp()).abs()
        };
        let coarse = run(1e-5);
        let fine = run(1e-5 / 16.0);
        assert!(coarse / fine >= 8.0, "coarse {coarse:e} fine {fine:e}");
    }

    #[test]
    fn dense_matches_forced_stops() {
        let t_eval: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0] - 0.1 * y[1] + (0.3 * t).sin();
        };
        let tol = tol(1e-7);
        let dense = integrate_rk45(rhs, &[1.0, 0.0], (0.0, 10.0), &t_eval, &tol, OutputMode::Dense)
            .unwrap();
        let stop = integrate_rk45(rhs, &[1.0, 0.0], (0.0, 10.0), &t_eval, &tol, OutputMode::Stop)
            .unwrap();
        assert_eq!(dense.times, stop.times);
        for k in 0..dense.len() {
            for i in 0..2 {
                let d = (dense.state(k)[i] - stop.state(k)[i]).abs();
                assert!(d < 10.0 * 1e-7, "k={k} d={d:e}");
            }
        }
    }

    #[test]
    fn rejects_bad_span() {
        let r = integrate_rk45(|_, _, _| {}, &[1.0], (1.0, 0.0), &[], &tol(1e-6), OutputMode::Dense);
        assert!(r.is_err());
        let r = integrate_rk45(|_, _, _| {}, &[1.0], (0.0, 1.0), &[2.0], &tol(1e-6), OutputMode::Dense);
        assert!(r.is_err());
    }

    #[test]
    fn blow_up_reports_underflow() {
        // y' = y², y(0) = 1 explodes at t = 1
        let r = integrate_rk45(
            |_, y, dy| dy[0] = y[0] * y[0],
            &[1.0],
            (0.0, 2.0),
            &[2.0],
            &tol(1e-8),
            OutputMode::Dense,
        );
        assert!(matches!(r, Err(Error::StepUnderflow { .. })), "{r:?}");
    }
}
