//! Nonnegative variant of the thresholding iteration (no short selling):
//! `x <- G_{lam phi}(P_+(B_phi(x)))`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifpt::{run_thresholding, SolveResult, SolverConfig};
use crate::problem::PortfolioProblem;
use crate::prox::{prox_vector, ProxParams};

/// `max(0, v)` componentwise.
pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

/// Minimizer of `||x - v||^2 + lam P_a(x)` over `x >= 0`: project, then threshold.
pub fn prox_nonneg(params: &ProxParams, v: &[f64]) -> Result<Vec<f64>> {
    prox_vector(params, &project_nonneg(v))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonnegSolveResult {
    #[serde(flatten)]
    pub result: SolveResult,
    /// `||Ax - b||_2` at termination.
    pub feasibility_violation: f64,
}

/// Solves the penalized problem restricted to `x >= 0` from a nonnegative `x0`.
pub fn infpt_solve(p: &PortfolioProblem, cfg: &SolverConfig, x0: &DVector<f64>) -> Result<NonnegSolveResult> {
    infpt_solve_observed(p, cfg, x0, &mut |_, _| {})
}

/// [`infpt_solve`] calling `observe(k, x_k)` after every step.
pub fn infpt_solve_observed(
    p: &PortfolioProblem,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
    observe: &mut dyn FnMut(usize, &DVector<f64>),
) -> Result<NonnegSolveResult> {
    if let Some(i) = x0.iter().position(|&v| v < 0.0) {
        return Err(Error::Config(format!("x0 must be nonnegative; entry {i} is {}", x0[i])));
    }
    let result = run_thresholding(p, cfg, x0, true, observe)?;
    let feasibility_violation = p.constraint_violation(&result.x_vec())?;
    Ok(NonnegSolveResult {
        result,
        feasibility_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifpt::equal_weight;
    use crate::oracle::{prox_nonneg_oracle, separable_objective};
    use crate::problem::build_problem;
    use crate::prox::prox_scalar;
    use crate::synthetic::gaussian_returns;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn projection_examples() {
        assert_eq!(project_nonneg(&[1.0, -2.0, 0.0]), vec![1.0, 0.0, 0.0]);
        assert_eq!(project_nonneg(&[-1.0, -3.0]), vec![0.0, 0.0]);
        let v = [0.5, 2.0, 0.0];
        assert_eq!(project_nonneg(&project_nonneg(&v)), v.to_vec());
    }

    #[test]
    fn prox_nonneg_examples() {
        let p = ProxParams::new(1.0, 0.5).unwrap();
        assert_eq!(prox_nonneg(&p, &[-1.0, -0.1, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(
            prox_nonneg(&p, &[2.0, -5.0]).unwrap(),
            vec![prox_scalar(&p, 2.0).unwrap(), 0.0]
        );
    }

    #[test]
    fn rejects_negative_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = gaussian_returns(&mut rng, 20, 3, 0.0, 1.0);
        let p = build_problem(&r, 0.1).unwrap();
        let cfg = SolverConfig::fixed(1.0, 1.0, 0.01);
        let x0 = DVector::from_vec(vec![0.5, -0.1, 0.6]);
        assert!(matches!(infpt_solve(&p, &cfg, &x0), Err(Error::Config(_))));
    }

    #[test]
    fn iterates_stay_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = gaussian_returns(&mut rng, 60, 10, 0.0, 1.0);
        let p = build_problem(&r, 0.1).unwrap();
        let res = infpt_solve(&p, &SolverConfig::target(1.0, 1.0, 4), &equal_weight(10)).unwrap();
        assert!(res.result.x.iter().all(|&v| v >= 0.0));
        assert!(res.result.support.len() <= 4);
    }

    proptest! {
        #[test]
        fn matches_constrained_brute_force(a in 0.2f64..5.0, lam in 0.01f64..2.0,
                                           v in proptest::collection::vec(-2.0f64..2.0, 1..=3)) {
            let p = ProxParams::new(a, lam).unwrap();
            let ours = prox_nonneg(&p, &v).unwrap();
            let oracle = prox_nonneg_oracle(&p, &v, 0.01);
            prop_assert!(ours.iter().all(|&x| x >= 0.0));
            prop_assert!(separable_objective(&p, &v, &ours) <= separable_objective(&p, &v, &oracle) + 1e-6);
        }
    }
}
