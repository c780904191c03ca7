//! Iterative fraction penalty thresholding:
//! `x <- G_{lam phi}(B_phi(x))`, a gradient step on the smooth part
//! followed by the closed-form prox of `lam phi P_a`.

use std::cmp::Ordering;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::lambda_bar;
use crate::error::{Error, Result};
use crate::penalty::PenaltyParams;
use crate::problem::{max_step_size, PortfolioProblem};
use crate::prox::{apply_threshold, threshold, ProxParams, Regime};

/// Floor for the adaptive regularization weight. Keeps the threshold
/// positive when fewer than `r + 1` entries of the gradient step are nonzero.
pub const LAMBDA_MIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    FixedLambda(f64),
    /// Choose lambda each iteration so that `r` entries survive thresholding.
    TargetSparsity(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub a: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub mode: LambdaMode,
    pub max_iters: usize,
    /// Stop when `||x_{k+1} - x_k||_2 <= tol_x`. `None` means `1e-8 sqrt(n)`.
    pub tol_x: Option<f64>,
    /// Stop when the objective changes by at most `tol_obj * max(1, |C|)`
    /// (fixed-lambda mode only). Zero disables the test.
    pub tol_obj: f64,
}

impl SolverConfig {
    pub fn new(a: f64, eta: f64, mode: LambdaMode) -> Self {
        Self {
            a,
            eta,
            epsilon: 0.01,
            mode,
            max_iters: 50_000,
            tol_x: None,
            tol_obj: 1e-12,
        }
    }

    pub fn fixed(a: f64, eta: f64, lam: f64) -> Self {
        Self::new(a, eta, LambdaMode::FixedLambda(lam))
    }

    pub fn target(a: f64, eta: f64, r: usize) -> Self {
        Self::new(a, eta, LambdaMode::TargetSparsity(r))
    }

    pub fn tol_x_for(&self, n: usize) -> f64 {
        self.tol_x.unwrap_or(1e-8 * (n as f64).sqrt())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.validate_shared()?;
        match self.mode {
            LambdaMode::FixedLambda(l) => {
                if !(l.is_finite() && l > 0.0) {
                    return Err(Error::Config(format!("lambda must be > 0, got {l}")));
                }
            }
            LambdaMode::TargetSparsity(r) => {
                if r == 0 || r >= n {
                    return Err(Error::Config(format!("target sparsity must lie in [1, {n}), got {r}")));
                }
            }
        }
        Ok(())
    }

    /// Checks every field except the lambda mode.
    pub fn validate_shared(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be > 0, got {v}")))
            }
        };
        pos("a", self.a)?;
        pos("eta", self.eta)?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if let Some(t) = self.tol_x {
            pos("tol_x", t)?;
        }
        if !(self.tol_obj >= 0.0 && self.tol_obj.is_finite()) {
            return Err(Error::Config(format!("tol_obj must be >= 0, got {}", self.tol_obj)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// `||x_{k+1} - x_k|| <= tol_x`.
    Converged,
    /// Objective change fell below `tol_obj` before the step test passed.
    Stalled,
    MaxIters,
    /// The iterate is zero and lambda is at least the zero-solution level.
    ZeroSolution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub x: Vec<f64>,
    /// `C(x_0), C(x_1), ...` where entry `k + 1` is evaluated with the lambda
    /// used for step `k` (and entry 0 with the first step's lambda).
    pub objective_trace: Vec<f64>,
    /// Lambda used at each step.
    pub lambda_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub support: Vec<usize>,
    pub phi: f64,
    /// `||x_k - x_{k-1}||_2` for the last step taken.
    pub last_step: f64,
    pub tol_x: f64,
    pub lambda_bar: f64,
}

impl SolveResult {
    pub fn x_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }

    /// Lambda of the final step.
    pub fn final_lambda(&self) -> f64 {
        *self.lambda_trace.last().expect("at least one step")
    }
}

/// Equal-weight portfolio `e / n`.
pub fn equal_weight(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveLambda {
    pub lam: f64,
    pub regime: Regime,
    /// Threshold paired with `lam phi`.
    pub t_star: f64,
}

/// Sorts magnitudes descending; ties keep ascending index order.
fn sorted_magnitudes(b: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..b.len()).collect();
    idx.sort_by(|&i, &j| b[j].abs().partial_cmp(&b[i].abs()).unwrap_or(Ordering::Equal).then(i.cmp(&j)));
    idx.into_iter().map(|i| b[i].abs()).collect()
}

/// Regularization weight that keeps about `r` entries of `b`:
///
/// ```text
/// lam1 = 2 |b|_(r+1) / (a phi)               if lam1 <= 1 / (a^2 phi)
/// lam2 = (2 a |b|_(r) + 1)^2 / (4 a^2 phi)   otherwise
/// ```
///
/// where `|b|_(i)` is the i-th largest magnitude. The result is floored at
/// [`LAMBDA_MIN`].
pub fn adaptive_lambda(b: &[f64], a: f64, phi: f64, r: usize) -> Result<AdaptiveLambda> {
    let n = b.len();
    if r == 0 || r >= n {
        return Err(Error::Config(format!("target sparsity must lie in [1, {n}), got {r}")));
    }
    let mags = sorted_magnitudes(b);
    let lam1 = 2.0 * mags[r] / (a * phi);
    let (lam, regime) = if lam1 <= 1.0 / (a * a * phi) {
        (lam1, Regime::SmallLambda)
    } else {
        let s = 2.0 * a * mags[r - 1] + 1.0;
        (s * s / (4.0 * a * a * phi), Regime::LargeLambda)
    };
    if lam < LAMBDA_MIN {
        return Ok(AdaptiveLambda {
            lam: LAMBDA_MIN,
            regime: Regime::SmallLambda,
            t_star: LAMBDA_MIN * phi * a / 2.0,
        });
    }
    // the paired thresholds lam1 phi a / 2 and sqrt(lam2 phi) - 1/(2a) equal
    // |b|_(r+1) and |b|_(r) exactly; take them directly to avoid rounding
    let t_star = match regime {
        Regime::SmallLambda => mags[r],
        Regime::LargeLambda => mags[r - 1],
    };
    Ok(AdaptiveLambda { lam, regime, t_star })
}

/// Runs the thresholding iteration; `nonneg` projects the gradient step
/// onto the nonnegative orthant before thresholding.
pub(crate) fn run_thresholding(
    p: &PortfolioProblem,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
    nonneg: bool,
    observe: &mut dyn FnMut(usize, &DVector<f64>),
) -> Result<SolveResult> {
    let n = p.n_assets();
    cfg.validate(n)?;
    if x0.len() != n {
        return Err(Error::Dimension(format!("x0 has length {}, expected {n}", x0.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("x0 must be finite".into()));
    }

    let phi = max_step_size(p, cfg.eta, cfg.epsilon)?;
    let tol_x = cfg.tol_x_for(n);
    let smooth = p.smooth_part(cfg.eta);
    let pen = PenaltyParams::new(cfg.a)?;
    let lbar = lambda_bar(p, cfg.a, cfg.eta);
    let t = p.n_periods() as f64;

    // evaluated from residuals rather than the Gram form for accuracy
    let smooth_value = |x: &DVector<f64>| -> f64 {
        let mut res = p.returns() * x;
        res.add_scalar_mut(-p.beta());
        let cv = p.constraint_matrix() * x - p.constraint_rhs();
        res.norm_squared() / t + cfg.eta * cv.norm_squared()
    };

    let mut x = x0.clone();
    let mut gx = &smooth.gram * &x;
    let mut h_x = smooth_value(&x);
    let mut objective_trace = Vec::new();
    let mut lambda_trace = Vec::new();
    let mut last_step = f64::NAN;
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    for k in 0..cfg.max_iters {
        let mut b = smooth.step_with(&x, &gx, phi);
        if nonneg {
            b.apply(|v| *v = v.max(0.0));
        }
        let (lam, t_star) = match cfg.mode {
            LambdaMode::FixedLambda(l) => (l, threshold(&ProxParams::new(cfg.a, l * phi)?).t_star),
            LambdaMode::TargetSparsity(r) => {
                let al = adaptive_lambda(b.as_slice(), cfg.a, phi, r)?;
                (al.lam, al.t_star)
            }
        };
        if k == 0 {
            objective_trace.push(h_x + lam * pen.penalty(x.as_slice()));
        }
        let next = DVector::from_vec(apply_threshold(cfg.a, lam * phi, t_star, b.as_slice())?);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: k + 1 });
        }
        last_step = (&next - &x).norm();
        x = next;
        observe(k + 1, &x);
        gx = &smooth.gram * &x;
        h_x = smooth_value(&x);
        let c = h_x + lam * pen.penalty(x.as_slice());
        let prev_c = *objective_trace.last().expect("seeded");
        objective_trace.push(c);
        lambda_trace.push(lam);
        iterations = k + 1;

        if lam >= lbar && x.iter().all(|&v| v == 0.0) {
            termination = Termination::ZeroSolution;
            break;
        }
        if last_step <= tol_x {
            termination = Termination::Converged;
            break;
        }
        if matches!(cfg.mode, LambdaMode::FixedLambda(_))
            && cfg.tol_obj > 0.0
            && (prev_c - c).abs() <= cfg.tol_obj * prev_c.abs().max(1.0)
        {
            termination = Termination::Stalled;
            break;
        }
    }

    let support = x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i).collect();
    Ok(SolveResult {
        x: x.as_slice().to_vec(),
        objective_trace,
        lambda_trace,
        iterations,
        termination,
        support,
        phi,
        last_step,
        tol_x,
        lambda_bar: lbar,
    })
}

/// Solves `min (1/T)||Rx - beta e||^2 + lam P_a(x) + eta ||Ax - b||^2`
/// from `x0`.
pub fn ifpt_solve(p: &PortfolioProblem, cfg: &SolverConfig, x0: &DVector<f64>) -> Result<SolveResult> {
    run_thresholding(p, cfg, x0, false, &mut |_, _| {})
}

/// [`ifpt_solve`] calling `observe(k, x_k)` after every step.
pub fn ifpt_solve_observed(
    p: &PortfolioProblem,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
    observe: &mut dyn FnMut(usize, &DVector<f64>),
) -> Result<SolveResult> {
    run_thresholding(p, cfg, x0, false, observe)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaPoint {
    pub eta: f64,
    pub violation: f64,
    pub termination: Termination,
    pub x: Vec<f64>,
}

/// Solves at each `eta` in turn, warm-starting from the previous solution,
/// and reports `||Ax - b||_2`.
pub fn eta_sweep(p: &PortfolioProblem, cfg: &SolverConfig, etas: &[f64], x0: &DVector<f64>) -> Result<Vec<EtaPoint>> {
    if etas.is_empty() {
        return Err(Error::Config("eta sweep needs at least one value".into()));
    }
    if etas.windows(2).any(|w| w[1] <= w[0]) || etas[0] <= 0.0 {
        return Err(Error::Config("eta values must be positive and increasing".into()));
    }
    let mut start = x0.clone();
    let mut out = Vec::with_capacity(etas.len());
    for &eta in etas {
        let c = SolverConfig { eta, ..cfg.clone() };
        let res = ifpt_solve(p, &c, &start)?;
        let x = res.x_vec();
        out.push(EtaPoint {
            eta,
            violation: p.constraint_violation(&x)?,
            termination: res.termination,
            x: res.x.clone(),
        });
        start = x;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::build_problem;
    use crate::synthetic::gaussian_returns;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adaptive_lambda_small_regime_example() {
        let b = [0.5, -0.4, 0.3, 0.2];
        let al = adaptive_lambda(&b, 1.0, 1.0, 2).unwrap();
        assert!((al.lam - 0.6).abs() < 1e-15);
        assert_eq!(al.regime, Regime::SmallLambda);
        assert!((al.t_star - 0.3).abs() < 1e-15);
        let kept = apply_threshold(1.0, al.lam, al.t_star, &b).unwrap();
        assert_eq!(kept.iter().filter(|v| **v != 0.0).count(), 2);
        assert_eq!(kept[2], 0.0);
    }

    #[test]
    fn adaptive_lambda_large_regime_example() {
        // |b|_2 = 3, |b|_3 = 2.5 > 1 / (2a): lam1 = 10 > 1 / (a^2 phi) = 2
        let b = [4.0, 3.0, 2.5, 0.1];
        let al = adaptive_lambda(&b, 1.0, 0.5, 2).unwrap();
        assert_eq!(al.regime, Regime::LargeLambda);
        assert!((al.lam - 24.5).abs() < 1e-12);
        assert!((al.t_star - 3.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_lambda_floor_and_range() {
        let al = adaptive_lambda(&[1.0, 0.0, 0.0], 1.0, 1.0, 1).unwrap();
        assert_eq!(al.lam, LAMBDA_MIN);
        assert!(al.t_star > 0.0);
        assert!(adaptive_lambda(&[1.0, 2.0], 1.0, 1.0, 2).is_err());
        assert!(adaptive_lambda(&[1.0, 2.0], 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn ties_sorted_stably() {
        assert_eq!(sorted_magnitudes(&[-1.0, 2.0, 1.0, -2.0]), vec![2.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::fixed(1.0, 1.0, 0.1).validate(5).is_ok());
        assert!(SolverConfig::fixed(0.0, 1.0, 0.1).validate(5).is_err());
        assert!(SolverConfig::target(1.0, 1.0, 5).validate(5).is_err());
        let mut c = SolverConfig::fixed(1.0, 1.0, 0.1);
        c.epsilon = 1.0;
        assert!(c.validate(5).is_err());
        assert!((c.tol_x_for(4) - 2e-8).abs() < 1e-20);
    }

    #[test]
    fn zero_start_above_lambda_bar_stays_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = gaussian_returns(&mut rng, 40, 6, 0.01, 0.05);
        let p = build_problem(&r, 0.01).unwrap();
        let lbar = lambda_bar(&p, 1.0, 1.0);
        let res = ifpt_solve(&p, &SolverConfig::fixed(1.0, 1.0, lbar), &DVector::zeros(6)).unwrap();
        assert_eq!(res.termination, Termination::ZeroSolution);
        assert_eq!(res.iterations, 1);
        assert!(res.support.is_empty());
    }

    #[test]
    fn rejects_bad_start() {
        let p = build_problem(&DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.0, 0.3]), 0.1).unwrap();
        let cfg = SolverConfig::fixed(1.0, 1.0, 0.1);
        assert!(matches!(ifpt_solve(&p, &cfg, &DVector::zeros(3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn single_eta_sweep_matches_plain_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = gaussian_returns(&mut rng, 30, 5, 0.0, 1.0);
        let p = build_problem(&r, 0.1).unwrap();
        let cfg = SolverConfig::fixed(1.0, 2.0, 1e-3);
        let x0 = equal_weight(5);
        let sweep = eta_sweep(&p, &cfg, &[2.0], &x0).unwrap();
        let plain = ifpt_solve(&p, &cfg, &x0).unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0].x, plain.x);
        assert!(eta_sweep(&p, &cfg, &[2.0, 1.0], &x0).is_err());
    }
}
