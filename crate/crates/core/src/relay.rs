//! The sign graph, its piecewise-linear regularisation and the relay current.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`; the value of the multivalued sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SignInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// `{1}` for `r > 0`, `{−1}` for `r < 0`, `[−1, 1]` at zero.
pub fn sign_multivalued(r: f64) -> SignInterval {
    if r > 0.0 {
        SignInterval { lo: 1.0, hi: 1.0 }
    } else if r < 0.0 {
        SignInterval { lo: -1.0, hi: -1.0 }
    } else {
        SignInterval { lo: -1.0, hi: 1.0 }
    }
}

/// Width of the linear zone of the regularised sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SignEpsilon(f64);

impl SignEpsilon {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Self(epsilon))
        } else {
            Err(Error::domain(format!("epsilon must be positive and finite, got {epsilon}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Saturation `clamp(r/ε, −1, 1)`. This coincides with the Yosida
    /// approximation `(1/ε)(I − (I + ε sign)⁻¹) r` of the sign graph.
    #[inline]
    pub fn sign(self, r: f64) -> f64 {
        if r >= self.0 {
            1.0
        } else if r <= -self.0 {
            -1.0
        } else {
            r / self.0
        }
    }

    /// Derivative of [`SignEpsilon::sign`]: `1/ε` inside the band, 0 outside.
    #[inline]
    pub fn slope(self, r: f64) -> f64 {
        if r.abs() < self.0 {
            1.0 / self.0
        } else {
            0.0
        }
    }
}

impl TryFrom<f64> for SignEpsilon {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SignEpsilon> for f64 {
    fn from(value: SignEpsilon) -> f64 {
        value.0
    }
}

pub fn sign_eps(s: SignEpsilon, r: f64) -> f64 {
    s.sign(r)
}

/// Control current `−ρ sign_ε(v − v*)`.
#[inline]
pub fn relay_current(s: SignEpsilon, rho: f64, v: f64, v_star: f64) -> f64 {
    -rho * s.sign(v - v_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eps() -> SignEpsilon {
        SignEpsilon::new(1e-4).unwrap()
    }

    /// Resolvent `(I + ε sign)⁻¹ r`: the unique `y` with `r ∈ y + ε sign(y)`.
    fn resolvent(eps: f64, r: f64) -> f64 {
        if r > eps {
            r - eps
        } else if r < -eps {
            r + eps
        } else {
            0.0
        }
    }

    #[test]
    fn multivalued_sign() {
        assert_eq!(sign_multivalued(3.0), SignInterval { lo: 1.0, hi: 1.0 });
        assert_eq!(sign_multivalued(0.0), SignInterval { lo: -1.0, hi: 1.0 });
        assert_eq!(sign_multivalued(-1e-9), SignInterval { lo: -1.0, hi: -1.0 });
    }

    #[test]
    fn regularised_sign_branches() {
        assert_eq!(sign_eps(eps(), 1.0), 1.0);
        assert!((sign_eps(eps(), 5e-5) - 0.5).abs() < 1e-15);
        assert_eq!(sign_eps(eps(), 0.0), 0.0);
        assert_eq!(sign_eps(eps(), -2.0), -1.0);
    }

    #[test]
    fn relay_examples() {
        assert_eq!(relay_current(eps(), 20.0, 5.0, 0.0), -20.0);
        assert_eq!(relay_current(eps(), 20.0, 1.3, 1.3), 0.0);
        assert_eq!(relay_current(eps(), 0.0, 7.0, -3.0), 0.0);
    }

    #[test]
    fn invalid_epsilon() {
        assert!(SignEpsilon::new(0.0).is_err());
        assert!(SignEpsilon::new(-1.0).is_err());
        assert!(SignEpsilon::new(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn exact_outside_band(r in -10.0f64..10.0, e in 1e-8f64..1.0) {
            prop_assume!(r.abs() > e);
            let s = SignEpsilon::new(e).unwrap();
            prop_assert_eq!(s.sign(r), r.signum());
        }

        #[test]
        fn odd_bounded_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0, e in 1e-6f64..0.5) {
            let s = SignEpsilon::new(e).unwrap();
            prop_assert_eq!(s.sign(-a), -s.sign(a));
            prop_assert!(s.sign(a).abs() <= 1.0);
            if a <= b {
                prop_assert!(s.sign(a) <= s.sign(b));
            }
        }

        #[test]
        fn lipschitz_one_over_eps(a in -1e-3f64..1e-3, b in -1e-3f64..1e-3) {
            let s = eps();
            prop_assert!((s.sign(a) - s.sign(b)).abs() <= (a - b).abs() / s.get() * (1.0 + 1e-12));
        }

        #[test]
        fn selection_of_multivalued_sign(r in -1e-3f64..1e-3) {
            let s = eps();
            let v = s.sign(r);
            if r.abs() >= s.get() {
                prop_assert!(sign_multivalued(r).contains(v));
            } else {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn matches_yosida_formula(r in -1e-3f64..1e-3, e in 1e-6f64..1e-3) {
            let s = SignEpsilon::new(e).unwrap();
            let yosida = (r - resolvent(e, r)) / e;
            prop_assert!((s.sign(r) - yosida).abs() < 1e-9);
        }

        #[test]
        fn relay_odd_in_deviation(d in -1.0f64..1.0, vs in -50.0f64..50.0, rho in 0.0f64..100.0) {
            let s = eps();
            let plus = relay_current(s, rho, vs + d, vs);
            let minus = relay_current(s, rho, vs - d, vs);
            prop_assert!((plus + minus).abs() <= 1e-9 * rho.max(1.0) * 1e3);
        }
    }
}
