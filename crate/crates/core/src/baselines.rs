//! Reference solvers: equality-constrained Markowitz, an l1-penalized
//! proximal-gradient comparator, and exhaustive support enumeration for
//! small instances.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{max_step_size, PortfolioProblem};

/// Condition-number estimate above which a KKT system counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Default cap on `n` for [`exact_cardinality`].
pub const EXACT_N_CAP: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineMethod {
    MarkowitzEquality,
    L1Penalized,
    ExactCardinality,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub method: BaselineMethod,
    /// Iterations (proximal gradient) or supports examined (enumeration).
    pub work: usize,
}

impl BaselineResult {
    pub fn x_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `[2Q, A^T; A, 0] [x; nu] = [2q; b]` with `Q = R_S^T R_S / T`,
/// `q = (beta/T) R_S^T e` for the columns in `cols`.
fn kkt_solve(p: &PortfolioProblem, cols: &[usize]) -> Result<(DVector<f64>, DVector<f64>)> {
    let t = p.n_periods() as f64;
    let rs = p.returns().select_columns(cols.iter());
    let as_ = p.constraint_matrix().select_columns(cols.iter());
    let k = cols.len();
    let m = as_.nrows();
    let mut kkt = DMatrix::zeros(k + m, k + m);
    kkt.view_mut((0, 0), (k, k)).copy_from(&(rs.tr_mul(&rs) * (2.0 / t)));
    kkt.view_mut((0, k), (k, m)).copy_from(&as_.transpose());
    kkt.view_mut((k, 0), (m, k)).copy_from(&as_);
    let mut rhs = DVector::zeros(k + m);
    let rte = DVector::from_iterator(k, rs.column_iter().map(|c| c.sum()));
    rhs.rows_mut(0, k).copy_from(&(rte * (2.0 * p.beta() / t)));
    rhs.rows_mut(k, m).copy_from(p.constraint_rhs());

    let cond = condition_estimate(&kkt);
    if !(cond < SINGULAR_CONDITION) {
        return Err(Error::SingularSystem { condition: cond });
    }
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem { condition: cond })?;
    Ok((sol.rows(0, k).into_owned(), sol.rows(k, m).into_owned()))
}

/// `min (1/T)||Rx - beta e||^2  s.t.  Ax = b` through the KKT system.
pub fn markowitz_equality(p: &PortfolioProblem) -> Result<BaselineResult> {
    let cols: Vec<usize> = (0..p.n_assets()).collect();
    let (x, _) = kkt_solve(p, &cols)?;
    let objective = p.tracking_error(&x)?;
    Ok(BaselineResult {
        x: x.as_slice().to_vec(),
        objective,
        method: BaselineMethod::MarkowitzEquality,
        work: 1,
    })
}

/// Residuals of the Markowitz KKT conditions at `(x, nu)`: constraint
/// residual `||Ax - b||` and Lagrangian gradient norm.
pub fn markowitz_kkt_residual(p: &PortfolioProblem) -> Result<(f64, f64)> {
    let cols: Vec<usize> = (0..p.n_assets()).collect();
    let (x, nu) = kkt_solve(p, &cols)?;
    let t = p.n_periods() as f64;
    let mut res = p.returns() * &x;
    res.add_scalar_mut(-p.beta());
    let grad = p.returns().tr_mul(&res) * (2.0 / t) + p.constraint_matrix().tr_mul(&nu);
    Ok((p.constraint_violation(&x)?, grad.norm()))
}

/// `(1/T)||Rx - beta e||^2 + lam ||x||_1 + eta ||Ax - b||^2`.
pub fn l1_objective(p: &PortfolioProblem, lam: f64, eta: f64, x: &DVector<f64>) -> Result<f64> {
    let cv = p.constraint_violation(x)?;
    Ok(p.tracking_error(x)? + lam * x.lp_norm(1) + eta * cv * cv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Options {
    pub epsilon: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for L1Options {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            max_iters: 50_000,
            tol: 1e-10,
        }
    }
}

/// Proximal gradient (soft thresholding at `lam phi / 2`) on the
/// l1-penalized objective, from `x0`. `lam = 0` is allowed.
pub fn l1_penalized_from(
    p: &PortfolioProblem,
    lam: f64,
    eta: f64,
    opts: &L1Options,
    x0: &DVector<f64>,
) -> Result<(BaselineResult, Vec<f64>)> {
    if !(lam >= 0.0 && lam.is_finite()) {
        return Err(Error::Config(format!("lambda must be >= 0, got {lam}")));
    }
    if x0.len() != p.n_assets() {
        return Err(Error::Dimension(format!("x0 has length {}, expected {}", x0.len(), p.n_assets())));
    }
    let phi = max_step_size(p, eta, opts.epsilon)?;
    let smooth = p.smooth_part(eta);
    let kill = lam * phi / 2.0;
    let mut x = x0.clone();
    let mut trace = vec![l1_objective(p, lam, eta, &x)?];
    let mut iters = 0;
    for k in 0..opts.max_iters {
        let gx = &smooth.gram * &x;
        let mut next = smooth.step_with(&x, &gx, phi);
        next.apply(|v| *v = v.signum() * (v.abs() - kill).max(0.0));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: k + 1 });
        }
        let step = (&next - &x).norm();
        x = next;
        trace.push(l1_objective(p, lam, eta, &x)?);
        iters = k + 1;
        if step <= opts.tol {
            break;
        }
    }
    let objective = *trace.last().expect("nonempty");
    Ok((
        BaselineResult {
            x: x.as_slice().to_vec(),
            objective,
            method: BaselineMethod::L1Penalized,
            work: iters,
        },
        trace,
    ))
}

/// [`l1_penalized_from`] starting at zero.
pub fn l1_penalized(p: &PortfolioProblem, lam: f64, eta: f64, max_iters: usize, tol: f64) -> Result<BaselineResult> {
    let opts = L1Options {
        max_iters,
        tol,
        ..L1Options::default()
    };
    Ok(l1_penalized_from(p, lam, eta, &opts, &DVector::zeros(p.n_assets()))?.0)
}

/// Smallest lambda for which zero is the l1 solution:
/// `2 ||(beta/T) R^T e + eta A^T b||_inf`.
pub fn l1_lambda_max(p: &PortfolioProblem, eta: f64) -> f64 {
    2.0 * p.linear_term(eta).amax()
}

/// Bisects lambda (log scale) for an l1 solution with at most `k`
/// nonzeros, returning the least-penalized one found. Stops early once a
/// solution with exactly `k` nonzeros appears.
pub fn l1_for_sparsity(p: &PortfolioProblem, k: usize, eta: f64, opts: &L1Options, steps: usize) -> Result<BaselineResult> {
    let n = p.n_assets();
    if k == 0 || k > n {
        return Err(Error::Config(format!("sparsity must lie in [1, {n}], got {k}")));
    }
    let count = |r: &BaselineResult| r.x.iter().filter(|v| **v != 0.0).count();
    let mut hi = l1_lambda_max(p, eta).max(1e-300);
    let mut lo = hi * 1e-8;
    let mut warm = DVector::zeros(n);
    let (mut best, _) = l1_penalized_from(p, hi, eta, opts, &warm)?;
    for _ in 0..steps {
        let mid = (lo * hi).sqrt();
        let (res, _) = l1_penalized_from(p, mid, eta, opts, &warm)?;
        let c = count(&res);
        if c <= k {
            hi = mid;
            warm = res.x_vec();
            best = res;
            if c == k {
                break;
            }
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

/// Per-support subproblem used by [`exact_cardinality`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CardinalityForm {
    /// `min (1/T)||R_S x_S - beta e||^2  s.t.  A_S x_S = b`; supports whose
    /// KKT system is singular are skipped.
    Equality,
    /// `min (1/T)||R_S x_S - beta e||^2 + eta ||A_S x_S - b||^2`.
    Penalized { eta: f64 },
}

fn penalized_least_squares(p: &PortfolioProblem, cols: &[usize], eta: f64) -> Option<DVector<f64>> {
    let t = p.n_periods() as f64;
    let rs = p.returns().select_columns(cols.iter());
    let as_ = p.constraint_matrix().select_columns(cols.iter());
    let g = rs.tr_mul(&rs) / t + as_.tr_mul(&as_) * eta;
    let rte = DVector::from_iterator(cols.len(), rs.column_iter().map(|c| c.sum()));
    let c = rte * (p.beta() / t) + as_.tr_mul(p.constraint_rhs()) * eta;
    g.cholesky().map(|ch| ch.solve(&c))
}

fn supports(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == k {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Best portfolio with at most `k` nonzeros by enumerating every support.
/// Ties go to the lexicographically smallest support.
pub fn exact_cardinality(p: &PortfolioProblem, k: usize, form: CardinalityForm, n_cap: usize) -> Result<BaselineResult> {
    let n = p.n_assets();
    if n > n_cap {
        return Err(Error::TooLarge { n, cap: n_cap });
    }
    if k == 0 {
        return Err(Error::Config("sparsity must be at least 1".into()));
    }
    if let CardinalityForm::Penalized { eta } = form {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Config(format!("eta must be > 0, got {eta}")));
        }
    }
    let all = supports(n, k.min(n));
    let total = all.len();
    let best = all
        .into_par_iter()
        .filter_map(|cols| {
            let xs = match form {
                CardinalityForm::Equality => {
                    if cols.len() < p.constraint_rhs().len() {
                        return None;
                    }
                    kkt_solve(p, &cols).ok()?.0
                }
                CardinalityForm::Penalized { eta } => penalized_least_squares(p, &cols, eta)?,
            };
            let mut x = DVector::zeros(n);
            for (j, &c) in cols.iter().enumerate() {
                x[c] = xs[j];
            }
            let obj = match form {
                CardinalityForm::Equality => p.tracking_error(&x).ok()?,
                CardinalityForm::Penalized { eta } => {
                    let cv = p.constraint_violation(&x).ok()?;
                    p.tracking_error(&x).ok()? + eta * cv * cv
                }
            };
            obj.is_finite().then_some((obj, cols, x))
        })
        .reduce_with(|a, b| match a.0.partial_cmp(&b.0) {
            Some(std::cmp::Ordering::Less) => a,
            Some(std::cmp::Ordering::Greater) => b,
            _ => {
                if a.1 <= b.1 {
                    a
                } else {
                    b
                }
            }
        });
    let (objective, _, x) = best.ok_or(Error::SingularSystem {
        condition: f64::INFINITY,
    })?;
    Ok(BaselineResult {
        x: x.as_slice().to_vec(),
        objective,
        method: BaselineMethod::ExactCardinality,
        work: total,
    })
}
