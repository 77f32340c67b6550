use crate::error::{Error, Result};

/// `δ u_xx` on a uniform grid with homogeneous Neumann ends, using mirror
/// ghost nodes `u₀ = u₂` and `u_{N+1} = u_{N−1}`.
pub fn laplacian_neumann(u: &[f64], dx: f64, delta: f64) -> Result<Vec<f64>> {
    if u.len() < 3 {
        return Err(Error::domain(format!("need at least 3 nodes, got {}", u.len())));
    }
    if !(dx > 0.0) {
        return Err(Error::domain(format!("dx must be positive, got {dx}")));
    }
    let mut out = vec![0.0; u.len()];
    apply_laplacian(u, delta / (dx * dx), &mut out);
    Ok(out)
}

/// `out = coef · D₂ u` where `D₂` is the undivided ghost-node second
/// difference. Requires `u.len() >= 3`.
#[inline]
pub(crate) fn apply_laplacian(u: &[f64], coef: f64, out: &mut [f64]) {
    let n = u.len();
    out[0] = coef * 2.0 * (u[1] - u[0]);
    for j in 1..n - 1 {
        out[j] = coef * (u[j + 1] - 2.0 * u[j] + u[j - 1]);
    }
    out[n - 1] = coef * 2.0 * (u[n - 2] - u[n - 1]);
}

/// Tridiagonal matrix. `lower[i]` multiplies `x[i−1]` in row `i` and
/// `upper[i]` multiplies `x[i+1]`; `lower[0]` and `upper[n−1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Sets `self` to `coef · D₂` with Neumann ghost rows.
    pub fn set_neumann_laplacian(&mut self, coef: f64) {
        let n = self.len();
        for i in 0..n {
            self.lower[i] = coef;
            self.diag[i] = -2.0 * coef;
            self.upper[i] = coef;
        }
        if n > 0 {
            self.lower[0] = 0.0;
            self.upper[0] = 2.0 * coef;
            self.lower[n - 1] = 2.0 * coef;
            self.upper[n - 1] = 0.0;
        }
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    /// Solves `self · x = rhs` in place by the Thomas algorithm. Returns
    /// `false` on a zero pivot.
    pub fn solve_in_place(&self, rhs: &mut [f64], scratch: &mut Vec<f64>) -> bool {
        let n = self.len();
        scratch.clear();
        scratch.resize(n, 0.0);
        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return false;
        }
        rhs[0] /= pivot;
        for i in 1..n {
            scratch[i] = self.upper[i - 1] / pivot;
            pivot = self.diag[i] - self.lower[i] * scratch[i];
            if pivot == 0.0 || !pivot.is_finite() {
                return false;
            }
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i + 1] * rhs[i + 1];
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_maps_to_zero() {
        let out = laplacian_neumann(&[2.5; 7], 0.1, 3.0).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quadratic_interior_exact() {
        let n = 11;
        let dx = 1.0 / (n - 1) as f64;
        let delta = 0.7;
        let u: Vec<f64> = (0..n).map(|j| (j as f64 * dx).powi(2)).collect();
        let out = laplacian_neumann(&u, dx, delta).unwrap();
        for &v in &out[1..n - 1] {
            assert!((v - 2.0 * delta).abs() < 1e-10);
        }
        // left ghost row: 2δ(u₂ − u₁)/dx²
        assert!((out[0] - 2.0 * delta * (u[1] - u[0]) / (dx * dx)).abs() < 1e-12);
    }

    #[test]
    fn cosine_mode_second_order() {
        let delta = 0.1;
        let mut errs = Vec::new();
        for n in [25usize, 49] {
            let dx = 1.0 / (n - 1) as f64;
            let u: Vec<f64> = (0..n).map(|j| (PI * j as f64 * dx).cos()).collect();
            let out = laplacian_neumann(&u, dx, delta).unwrap();
            let err = (0..n)
                .map(|j| (out[j] + delta * PI * PI * u[j]).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[0] < 2e-3, "{errs:?}");
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn short_vector_rejected() {
        assert!(laplacian_neumann(&[1.0, 2.0], 0.1, 1.0).is_err());
    }

    #[test]
    fn matrix_matches_operator() {
        let u = [0.3, -1.0, 2.0, 5.0, 4.5];
        let mut m = Tridiagonal::zeros(5);
        m.set_neumann_laplacian(4.0);
        let mut a = [0.0; 5];
        let mut b = [0.0; 5];
        m.mul_vec(&u, &mut a);
        apply_laplacian(&u, 4.0, &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn thomas_solves_diagonally_dominant() {
        let n = 9;
        let mut m = Tridiagonal::zeros(n);
        m.set_neumann_laplacian(-3.0);
        for d in &mut m.diag {
            *d += 1.5;
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut rhs = vec![0.0; n];
        m.mul_vec(&x, &mut rhs);
        let mut scratch = Vec::new();
        assert!(m.solve_in_place(&mut rhs, &mut scratch));
        for i in 0..n {
            assert!((rhs[i] - x[i]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn neumann_flux_balance(u in proptest::collection::vec(-100.0f64..100.0, 3..60), delta in 0.01f64..50.0) {
            let n = u.len();
            let dx = 1.0 / (n - 1) as f64;
            let lap = laplacian_neumann(&u, dx, delta).unwrap();
            let weighted: f64 = lap.iter().enumerate().map(|(j, v)| {
                let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                w * dx * v
            }).sum();
            let scale = delta / dx * u.iter().map(|x| x.abs()).fold(1.0, f64::max);
            prop_assert!(weighted.abs() < 1e-12 * scale, "{weighted}");
        }
    }
}
