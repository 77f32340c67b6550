//! Hodgkin–Huxley rate functions, membrane coefficient functions and the
//! reduced two-field model.
//!
//! The membrane equation is written as
//!
//! ```text
//! C_M v_t = δ v_xx − f1(n,m,h) v + f2(n,m,h) + I_C
//! w_t     = −h1ᵏ(v) w + h2ᵏ(v),   w ∈ {n, m, h}
//! ```
//!
//! with `f1 = g_K n⁴ + g_Na m³ h + g_l`, `f2 = g_K V_K n⁴ + g_Na V_Na m³ h + g_l V_l`,
//! `h1ᵏ = αₖ + βₖ` and `h2ᵏ = αₖ`. Potentials are in mV relative to rest,
//! times in ms.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the controlled membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HHParameters {
    #[serde(rename = "g_K")]
    pub g_k: f64,
    #[serde(rename = "g_Na")]
    pub g_na: f64,
    pub g_l: f64,
    #[serde(rename = "V_K")]
    pub v_k: f64,
    #[serde(rename = "V_Na")]
    pub v_na: f64,
    #[serde(rename = "V_l")]
    pub v_l: f64,
    pub delta: f64,
    #[serde(rename = "C_M")]
    pub c_m: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for HHParameters {
    fn default() -> Self {
        Self {
            g_k: 36.0,
            g_na: 120.0,
            g_l: 0.3,
            v_k: -12.0,
            v_na: 115.0,
            v_l: 10.613,
            delta: 0.1,
            c_m: 0.91,
            rho: 0.0,
            epsilon: 1e-4,
        }
    }
}

impl HHParameters {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.g_k, self.g_na, self.g_l, self.v_k, self.v_na, self.v_l, self.delta, self.c_m,
            self.rho, self.epsilon,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("parameters must be finite"));
        }
        let positive = [
            ("g_K", self.g_k),
            ("g_Na", self.g_na),
            ("g_l", self.g_l),
            ("delta", self.delta),
            ("C_M", self.c_m),
            ("epsilon", self.epsilon),
        ];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(Error::domain(format!("{name} must be > 0, got {value}")));
            }
        }
        if self.rho < 0.0 {
            return Err(Error::domain(format!("rho must be >= 0, got {}", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatingKind {
    /// Potassium activation.
    N,
    /// Sodium activation.
    M,
    /// Sodium inactivation.
    H,
}

impl GatingKind {
    pub const ALL: [GatingKind; 3] = [GatingKind::N, GatingKind::M, GatingKind::H];

    pub fn name(self) -> &'static str {
        match self {
            GatingKind::N => "n",
            GatingKind::M => "m",
            GatingKind::H => "h",
        }
    }

    /// `(α, β)` at potential `v`, without input validation.
    pub(crate) fn rates(self, v: f64) -> (f64, f64) {
        match self {
            GatingKind::N => (0.1 * exprel_inv(1.0 - 0.1 * v), 0.125 * (-v / 80.0).exp()),
            GatingKind::M => (exprel_inv(2.5 - 0.1 * v), 4.0 * (-v / 18.0).exp()),
            GatingKind::H => (
                0.07 * (-v / 20.0).exp(),
                1.0 / ((3.0 - 0.1 * v).exp() + 1.0),
            ),
        }
    }

    /// `(h1, h2) = (α + β, α)`, without input validation.
    pub(crate) fn coefficients(self, v: f64) -> (f64, f64) {
        let (a, b) = self.rates(v);
        (a + b, a)
    }
}

impl fmt::Display for GatingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GatingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(GatingKind::N),
            "m" => Ok(GatingKind::M),
            "h" => Ok(GatingKind::H),
            other => Err(Error::domain(format!("unknown gating kind `{other}`"))),
        }
    }
}

/// `u / (eᵘ − 1)`, continuous through the removable singularity at `u = 0`.
fn exprel_inv(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 / (1.0 + u / 2.0 + u * u / 6.0)
    } else {
        u / u.exp_m1()
    }
}

fn check_finite(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("potential must be finite, got {v}")))
    }
}

/// Opening rate αₖ(v) in 1/ms.
pub fn alpha(kind: GatingKind, v: f64) -> Result<f64> {
    check_finite(v)?;
    Ok(kind.rates(v).0)
}

/// Closing rate βₖ(v) in 1/ms.
pub fn beta(kind: GatingKind, v: f64) -> Result<f64> {
    check_finite(v)?;
    Ok(kind.rates(v).1)
}

pub fn h1k(kind: GatingKind, v: f64) -> Result<f64> {
    check_finite(v)?;
    Ok(kind.coefficients(v).0)
}

pub fn h2k(kind: GatingKind, v: f64) -> Result<f64> {
    check_finite(v)?;
    Ok(kind.coefficients(v).1)
}

/// Membrane conductance `g_K n⁴ + g_Na m³ h + g_l`.
pub fn f1(n: f64, m: f64, h: f64, p: &HHParameters) -> f64 {
    let n2 = n * n;
    p.g_k * n2 * n2 + p.g_na * m * m * m * h + p.g_l
}

/// Ionic source `g_K V_K n⁴ + g_Na V_Na m³ h + g_l V_l`.
pub fn f2(n: f64, m: f64, h: f64, p: &HHParameters) -> f64 {
    let n2 = n * n;
    p.g_k * p.v_k * n2 * n2 + p.g_na * p.v_na * m * m * m * h + p.g_l * p.v_l
}

/// Long-time limit `α / (α + β)` of the gating equation at frozen potential.
pub fn gating_steady_state(kind: GatingKind, v: f64) -> Result<f64> {
    check_finite(v)?;
    let (h1, h2) = kind.coefficients(v);
    Ok(h2 / h1)
}

/// Uniform potential grid used as a finite stand-in for the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for PotentialGrid {
    fn default() -> Self {
        Self {
            lo: -100.0,
            hi: 200.0,
            step: 0.1,
        }
    }
}

impl PotentialGrid {
    fn len(&self) -> usize {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.step > 0.0) || self.hi < self.lo {
            return 0;
        }
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    fn point(&self, i: usize) -> f64 {
        (self.lo + i as f64 * self.step).min(self.hi)
    }
}

/// Numerical supremum of `h2ᵏ/h1ᵏ` over `grid`, refined by golden-section
/// search around the best grid point and capped at 1.
pub fn gating_sup_ratio(kind: GatingKind, grid: &PotentialGrid) -> Result<f64> {
    let len = grid.len();
    if len == 0 {
        return Err(Error::domain("empty potential grid"));
    }
    let ratio = |v: f64| {
        let (h1, h2) = kind.coefficients(v);
        h2 / h1
    };
    let (best_i, best) = (0..len)
        .map(|i| (i, ratio(grid.point(i))))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });

    let mut lo = grid.point(best_i.saturating_sub(1));
    let mut hi = grid.point((best_i + 1).min(len - 1));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (ratio(c), ratio(d));
    for _ in 0..80 {
        if (hi - lo).abs() < 1e-12 {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = ratio(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = ratio(d);
        }
    }
    Ok(best.max(fc).max(fd).min(1.0))
}

/// Suprema of `h2ᵏ/h1ᵏ` for the three gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatingBounds {
    pub n_max: f64,
    pub m_max: f64,
    pub h_max: f64,
}

impl GatingBounds {
    /// Bounds over the real line. For the Hodgkin–Huxley rates each ratio
    /// tends to 1 in one of the tails, so the supremum is 1 for all gates.
    pub const UNIT: GatingBounds = GatingBounds {
        n_max: 1.0,
        m_max: 1.0,
        h_max: 1.0,
    };

    pub fn from_grid(grid: &PotentialGrid) -> Result<Self> {
        Ok(Self {
            n_max: gating_sup_ratio(GatingKind::N, grid)?,
            m_max: gating_sup_ratio(GatingKind::M, grid)?,
            h_max: gating_sup_ratio(GatingKind::H, grid)?,
        })
    }

    pub fn max(&self) -> f64 {
        self.n_max.max(self.m_max).max(self.h_max)
    }

    pub fn sum(&self) -> f64 {
        self.n_max + self.m_max + self.h_max
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Two-field model `v_t − δ v_xx + f1(w) v + ρ sign(v − v*) ∋ f2(w)`,
/// `w_t = −h1(v) w + h2(v)`.
///
/// Coefficients are arbitrary callables; their bounds are supplied by the
/// caller rather than derived.
#[derive(Clone)]
pub struct ReducedModel {
    pub f1: ScalarFn,
    pub f2: ScalarFn,
    pub h1: ScalarFn,
    pub h2: ScalarFn,
    /// Positive lower bound on `f1`.
    pub a: f64,
    /// Supremum of `h2/h1`.
    pub w_max: f64,
    /// Upper bound on `|f1|` over the invariant region of `w`.
    pub f1_max: f64,
    /// Upper bound on `|f2|` over the invariant region of `w`.
    pub f2_max: f64,
}

impl fmt::Debug for ReducedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReducedModel")
            .field("a", &self.a)
            .field("w_max", &self.w_max)
            .field("f1_max", &self.f1_max)
            .field("f2_max", &self.f2_max)
            .finish_non_exhaustive()
    }
}

impl ReducedModel {
    /// Model with constant coefficients; the bounds follow directly.
    pub fn constant(f1: f64, f2: f64, h1: f64, h2: f64) -> Self {
        Self {
            f1: Arc::new(move |_| f1),
            f2: Arc::new(move |_| f2),
            h1: Arc::new(move |_| h1),
            h2: Arc::new(move |_| h2),
            a: f1,
            w_max: h2 / h1,
            f1_max: f1.abs(),
            f2_max: f2.abs(),
        }
    }

    /// Checks `f1(r) ≥ a > 0`, `h1(r) > 0` and `h2(r) > 0` at the sample
    /// points.
    pub fn check_hypotheses(&self, samples: &[f64]) -> Result<()> {
        if !(self.a > 0.0) {
            return Err(Error::domain(format!("lower bound a must be > 0, got {}", self.a)));
        }
        for &r in samples {
            let f1 = (self.f1)(r);
            if !(f1 >= self.a) {
                return Err(Error::domain(format!("f1({r}) = {f1} is below a = {}", self.a)));
            }
            let (h1, h2) = ((self.h1)(r), (self.h2)(r));
            if !(h1 > 0.0 && h2 > 0.0) {
                return Err(Error::domain(format!(
                    "h1({r}) = {h1}, h2({r}) = {h2} must both be positive"
                )));
            }
        }
        Ok(())
    }
}
