//! Optimality checks and certificates for solver outputs.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::penalty::PenaltyParams;
use crate::problem::{gradient_step, objective_penalized, ObjectiveParams, PortfolioProblem};
use crate::prox::{prox_vector, ProxParams};

/// Regularization level above which `x = 0` minimizes the penalized
/// objective:
///
/// ```text
/// f0 = beta^2 + eta ||b||^2,   g = ||(beta/T) R^T e + eta A^T b||_inf
/// lambda_bar = f0 + g/a + (1/a) sqrt(g^2 + 2 a f0 g)
/// ```
pub fn lambda_bar(p: &PortfolioProblem, a: f64, eta: f64) -> f64 {
    let f0 = p.objective_at_zero(eta);
    let g = p.linear_term(eta).amax();
    f0 + g / a + (g * g + 2.0 * a * f0 * g).sqrt() / a
}

/// `(2/T) R^T (beta e - R x) + 2 eta A^T (b - A x)`, minus the gradient of
/// the smooth part.
pub fn smooth_descent_direction(p: &PortfolioProblem, eta: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    // B_phi(x) - x = (phi / 2) * direction, for any phi
    let b = gradient_step(p, eta, 2.0, x)?;
    Ok(b - x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderReport {
    /// Largest stationarity residual over the support (0 for an empty support).
    pub max_residual: f64,
    pub worst_index: Option<usize>,
    pub tol: f64,
    pub passed: bool,
}

/// Stationarity on the support: for every `i` with `x_i != 0`,
/// `|d_i sign(x_i) - a lam / (1 + a|x_i|)^2|` where `d` is
/// [`smooth_descent_direction`].
pub fn check_first_order(
    p: &PortfolioProblem,
    params: &ObjectiveParams,
    x: &DVector<f64>,
    tol: f64,
) -> Result<FirstOrderReport> {
    let d = smooth_descent_direction(p, params.eta, x)?;
    let mut max_residual = 0.0;
    let mut worst_index = None;
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let rhs = params.a * params.lam / (1.0 + params.a * xi.abs()).powi(2);
        let r = (d[i] * xi.signum() - rhs).abs();
        if r > max_residual {
            max_residual = r;
            worst_index = Some(i);
        }
    }
    Ok(FirstOrderReport {
        max_residual,
        worst_index,
        tol,
        passed: max_residual <= tol,
    })
}

/// Lower-bound check for one support index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCheck {
    pub index: usize,
    pub magnitude: f64,
    /// `(1/T)||R_i||^2 + eta ||A_i||^2`
    pub curvature: f64,
    /// `sqrt(lam / curvature) - 1/a`, present when `a > sqrt(curvature / lam)`.
    pub bound: Option<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum UpperBoundCheck {
    /// `lam <= beta^2 + eta ||b||^2`.
    NotApplicable,
    Checked { bound: f64, norm_inf: f64, holds: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lower: Vec<LowerBoundCheck>,
    pub upper: UpperBoundCheck,
    /// Whether `C(x) <= C(0)`, the premise the upper bound rests on.
    pub no_worse_than_zero: bool,
}

impl BoundsReport {
    pub fn lower_holds(&self) -> bool {
        self.lower.iter().all(|c| c.holds)
    }

    pub fn upper_holds(&self) -> bool {
        !matches!(self.upper, UpperBoundCheck::Checked { holds: false, .. })
    }
}

/// Magnitude bounds satisfied by global minimizers of the penalized
/// objective.
///
/// Lower: comparing `x` with `x - x_i e_i` gives
/// `curvature_i >= lam a^2 / (1 + a|x_i|)^2`, so
/// `|x_i| >= sqrt(lam / curvature_i) - 1/a`, informative when
/// `a > sqrt(curvature_i / lam)`.
///
/// Upper: `C(x) <= C(0) = f0` gives `||x||_inf <= f0 / (a (lam - f0))`
/// whenever `lam > f0`.
pub fn check_bounds(p: &PortfolioProblem, params: &ObjectiveParams, x: &DVector<f64>) -> Result<BoundsReport> {
    let curv = p.column_curvature(params.eta);
    let lower = x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, &v)| {
            let c = curv[i];
            let bound = (params.a > (c / params.lam).sqrt()).then(|| (params.lam / c).sqrt() - 1.0 / params.a);
            LowerBoundCheck {
                index: i,
                magnitude: v.abs(),
                curvature: c,
                bound,
                holds: bound.is_none_or(|b| v.abs() >= b),
            }
        })
        .collect();

    let f0 = p.objective_at_zero(params.eta);
    let upper = if params.lam > f0 {
        let bound = f0 / (params.a * (params.lam - f0));
        let norm_inf = x.amax();
        UpperBoundCheck::Checked {
            bound,
            norm_inf,
            holds: norm_inf <= bound,
        }
    } else {
        UpperBoundCheck::NotApplicable
    };
    let no_worse_than_zero = objective_penalized(p, params, x)? <= f0;
    Ok(BoundsReport {
        lower,
        upper,
        no_worse_than_zero,
    })
}

/// `||x - G_{lam phi}(B_phi(x))||_2`, with the nonnegative projection
/// applied before thresholding when `nonneg` is set.
pub fn fixed_point_residual(
    p: &PortfolioProblem,
    params: &ObjectiveParams,
    phi: f64,
    x: &DVector<f64>,
    nonneg: bool,
) -> Result<f64> {
    let mut b = gradient_step(p, params.eta, phi, x)?;
    if nonneg {
        b.apply(|v| *v = v.max(0.0));
    }
    let prox = ProxParams::new(params.a, params.lam * phi)?;
    let y = prox_vector(&prox, b.as_slice())?;
    Ok((DVector::from_vec(y) - x).norm())
}

/// Surrogate `phi [C(x) - (1/T)||R(x - z)||^2 - eta ||A(x - z)||^2] + ||x - z||^2`.
/// At `x = z` it equals `phi C(z)`.
pub fn surrogate_objective(
    p: &PortfolioProblem,
    params: &ObjectiveParams,
    phi: f64,
    x: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<f64> {
    let c = objective_penalized(p, params, x)?;
    let d = x - z;
    let rd = p.returns() * &d;
    let ad = p.constraint_matrix() * &d;
    let t = p.n_periods() as f64;
    Ok(phi * (c - rd.norm_squared() / t - params.eta * ad.norm_squared()) + d.norm_squared())
}

/// `P_a(x)` for a weight vector.
pub fn penalty_of(a: f64, x: &DVector<f64>) -> Result<f64> {
    Ok(PenaltyParams::new(a)?.penalty(x.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::build_problem;
    use nalgebra::DMatrix;

    #[test]
    fn lambda_bar_vanishes_without_targets() {
        let r = DMatrix::from_row_slice(3, 2, &[0.1, -0.2, 0.3, 0.0, -0.1, 0.2]);
        let a_mat = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let p = PortfolioProblem::from_parts(r, 0.0, a_mat, DVector::zeros(1)).unwrap();
        assert_eq!(lambda_bar(&p, 1.0, 1.0), 0.0);
    }

    #[test]
    fn lambda_bar_dominates_zero_objective() {
        let r = DMatrix::from_row_slice(4, 3, &[0.01, 0.02, -0.01, 0.03, 0.0, 0.01, -0.02, 0.01, 0.02, 0.0, 0.04, 0.01]);
        let p = build_problem(&r, 0.01).unwrap();
        for eta in [0.1, 1.0, 10.0] {
            assert!(lambda_bar(&p, 1.0, eta) >= p.objective_at_zero(eta));
        }
    }

    #[test]
    fn empty_support_is_vacuous() {
        let r = DMatrix::from_row_slice(3, 2, &[0.1, -0.2, 0.3, 0.0, -0.1, 0.2]);
        let p = build_problem(&r, 0.05).unwrap();
        let prm = ObjectiveParams::new(1.0, 0.1, 1.0).unwrap();
        let x = DVector::zeros(2);
        let fo = check_first_order(&p, &prm, &x, 1e-12).unwrap();
        assert!(fo.passed && fo.max_residual == 0.0 && fo.worst_index.is_none());
        let b = check_bounds(&p, &prm, &x).unwrap();
        assert!(b.lower.is_empty() && b.lower_holds() && b.upper_holds());
    }

    #[test]
    fn stationary_point_of_one_weight_instance() {
        // single free weight via a custom problem: A = [1, 0], b = 0 ties
        // the second weight loosely; only x_0 is nonzero
        let r = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 0.5, 0.0]);
        let beta = 0.8;
        let a_mat = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let p = PortfolioProblem::from_parts(r.clone(), beta, a_mat, DVector::zeros(1)).unwrap();
        let (a, lam, eta) = (2.0, 0.05, 1.0);
        let col = r.column(0);
        // stationarity of the scalar objective, solved by bisection
        let df = |v: f64| {
            let g: f64 = col.iter().map(|c| 2.0 * c * (c * v - beta)).sum::<f64>() / 3.0;
            g + lam * a / (1.0 + a * v).powi(2)
        };
        let (mut lo, mut hi) = (0.1, 2.0);
        assert!(df(lo) < 0.0 && df(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if df(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = 0.5 * (lo + hi);
        let x = DVector::from_vec(vec![v, 0.0]);
        let prm = ObjectiveParams::new(a, lam, eta).unwrap();
        let fo = check_first_order(&p, &prm, &x, 1e-8).unwrap();
        assert!(fo.passed, "residual {}", fo.max_residual);
    }

    #[test]
    fn upper_bound_gate() {
        let r = DMatrix::from_row_slice(3, 2, &[0.1, -0.2, 0.3, 0.0, -0.1, 0.2]);
        let p = build_problem(&r, 0.05).unwrap();
        let f0 = p.objective_at_zero(1.0);
        let x = DVector::from_vec(vec![0.5, 0.5]);
        let below = ObjectiveParams::new(1.0, 0.5 * f0, 1.0).unwrap();
        assert_eq!(check_bounds(&p, &below, &x).unwrap().upper, UpperBoundCheck::NotApplicable);
        let above = ObjectiveParams::new(1.0, 3.0 * f0, 1.0).unwrap();
        assert!(matches!(check_bounds(&p, &above, &x).unwrap().upper, UpperBoundCheck::Checked { .. }));
    }

    #[test]
    fn surrogate_on_diagonal_is_scaled_objective() {
        let r = DMatrix::from_row_slice(3, 2, &[0.1, -0.2, 0.3, 0.0, -0.1, 0.2]);
        let p = build_problem(&r, 0.05).unwrap();
        let prm = ObjectiveParams::new(1.0, 0.1, 1.0).unwrap();
        let x = DVector::from_vec(vec![0.3, 0.7]);
        let s = surrogate_objective(&p, &prm, 0.2, &x, &x).unwrap();
        assert!((s - 0.2 * objective_penalized(&p, &prm, &x).unwrap()).abs() < 1e-15);
    }
}
