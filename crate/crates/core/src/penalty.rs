//! The fraction function `rho_a(t) = a|t| / (a|t| + 1)` and the separable
//! penalty `P_a(x) = sum_i rho_a(x_i)` built from it.
//!
//! As `a` grows the penalty approaches the count of nonzero entries; for
//! small `a` it behaves like a scaled l1 norm near the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape parameter of the fraction function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    a: f64,
}

impl PenaltyParams {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Config(format!("penalty shape a must be > 0, got {a}")));
        }
        Ok(Self { a })
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    /// `rho_a(t)`, in `[0, 1)`.
    #[inline]
    pub fn rho(&self, t: f64) -> f64 {
        let at = self.a * t.abs();
        at / (at + 1.0)
    }

    /// `P_a(x)`.
    pub fn penalty(&self, x: &[f64]) -> f64 {
        x.iter().map(|&t| self.rho(t)).sum()
    }

    /// `d/dt rho_a(t) = sign(t) a / (1 + a|t|)^2`, defined only for `t != 0`.
    pub fn rho_derivative(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Err(Error::NumericDomain(
                "fraction function is not differentiable at 0".into(),
            ));
        }
        let d = 1.0 + self.a * t.abs();
        Ok(t.signum() * self.a / (d * d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(a: f64) -> PenaltyParams {
        PenaltyParams::new(a).unwrap()
    }

    #[test]
    fn rejects_nonpositive_shape() {
        assert!(PenaltyParams::new(0.0).is_err());
        assert!(PenaltyParams::new(-1.0).is_err());
        assert!(PenaltyParams::new(f64::NAN).is_err());
    }

    #[test]
    fn rho_examples() {
        assert_eq!(p(1.0).rho(0.0), 0.0);
        assert_eq!(p(1.0).rho(1.0), 0.5);
        assert!((p(2.0).rho(-3.0) - 6.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(p(1.0).penalty(&[0.0; 5]), 0.0);
        assert_eq!(p(1.0).penalty(&[1.0, 1.0, 1.0]), 1.5);
        let v = p(100.0).penalty(&[0.3, 0.0, -0.7]);
        assert!((v - (30.0 / 31.0 + 70.0 / 71.0)).abs() < 1e-14);
        assert!((v - 1.95366).abs() < 1e-5);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(p(1.0).rho_derivative(1.0).unwrap(), 0.25);
        assert_eq!(p(1.0).rho_derivative(-1.0).unwrap(), -0.25);
        assert!((p(3.0).rho_derivative(0.5).unwrap() - 0.48).abs() < 1e-15);
        assert!(p(1.0).rho_derivative(0.0).is_err());
    }

    #[test]
    fn derivative_matches_central_difference_at_example() {
        let k = p(3.0);
        let h = 1e-7;
        let fd = (k.rho(0.5 + h) - k.rho(0.5 - h)) / (2.0 * h);
        assert!((fd - 0.48).abs() < 1e-5);
    }

    #[test]
    fn l0_interpolation_at_large_a() {
        let x = [0.3, 0.0, -0.7, 1e-3, 0.0, 2.0];
        let a = 1e6;
        let delta = 1e-3;
        let l0 = x.iter().filter(|&&t| t != 0.0).count() as f64;
        let gap = (p(a).penalty(&x) - l0).abs();
        assert!(gap <= x.len() as f64 / (a * delta + 1.0));
    }

    proptest! {
        #[test]
        fn rho_bounded_even_monotone(a in 1e-3f64..1e3, t1 in -1e3f64..1e3, t2 in -1e3f64..1e3) {
            let k = p(a);
            let r1 = k.rho(t1);
            prop_assert!((0.0..1.0).contains(&r1));
            prop_assert_eq!(r1, k.rho(-t1));
            if t1.abs() <= t2.abs() {
                prop_assert!(r1 <= k.rho(t2));
            }
        }

        #[test]
        fn rho_concave_on_halfline(a in 1e-2f64..1e2, t1 in 0.0f64..10.0, dt in 1e-6f64..10.0, th in 0.01f64..0.99) {
            let k = p(a);
            let t2 = t1 + dt;
            let lhs = k.rho(th * t1 + (1.0 - th) * t2);
            let rhs = th * k.rho(t1) + (1.0 - th) * k.rho(t2);
            prop_assert!(lhs >= rhs - 1e-15);
        }

        #[test]
        fn derivative_matches_finite_difference(a in 0.1f64..10.0, t in 1e-3f64..10.0, neg in any::<bool>()) {
            let t = if neg { -t } else { t };
            let k = p(a);
            let h = 1e-7 * t.abs().max(1e-3);
            let fd = (k.rho(t + h) - k.rho(t - h)) / (2.0 * h);
            let d = k.rho_derivative(t).unwrap();
            prop_assert!((fd - d).abs() <= 1e-5 * d.abs().max(1e-12));
        }

        #[test]
        fn penalty_bounds(a in 0.01f64..100.0, x in proptest::collection::vec(-10.0f64..10.0, 0..20)) {
            let v = p(a).penalty(&x);
            prop_assert!(v >= 0.0 && v <= x.len() as f64);
            prop_assert_eq!(v == 0.0, x.iter().all(|&t| t == 0.0));
        }
    }
}
