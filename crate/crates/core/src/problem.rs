//! Problem data for the penalized mean-variance model
//!
//! ```text
//! min_x (1/T) ||R x - beta e_T||^2 + lam P_a(x) + eta ||A x - b||^2
//! ```
//!
//! with `A = (mu, e_n)^T` and `b = (beta, 1)^T`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::penalty::PenaltyParams;

const POWER_ITER_TOL: f64 = 1e-10;
const POWER_ITER_CAP: usize = 10_000;

/// Assembled problem data. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PortfolioProblem {
    r: DMatrix<f64>,
    mu: DVector<f64>,
    beta: f64,
    a_mat: DMatrix<f64>,
    b: DVector<f64>,
    // cached pieces of the smooth part
    rtr_over_t: DMatrix<f64>,
    rte_beta_over_t: DVector<f64>,
    ata: DMatrix<f64>,
    atb: DVector<f64>,
    r_norm_sq: f64,
    a_norm_sq: f64,
}

/// `(a, lambda, eta)` for the penalized objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParams {
    pub a: f64,
    pub lam: f64,
    pub eta: f64,
}

impl ObjectiveParams {
    pub fn new(a: f64, lam: f64, eta: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("lambda", lam), ("eta", eta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self { a, lam, eta })
    }
}

/// Builds the problem from a `T x n` return matrix and a per-period target
/// return `beta`. `mu` is the column mean of `returns`.
pub fn build_problem(returns: &DMatrix<f64>, beta: f64) -> Result<PortfolioProblem> {
    let (t, n) = returns.shape();
    if t < 2 || n < 2 {
        return Err(Error::Dimension(format!("need T >= 2 and n >= 2, got {t} x {n}")));
    }
    for j in 0..n {
        for i in 0..t {
            if !returns[(i, j)].is_finite() {
                return Err(Error::MissingData { row: i, col: j });
            }
        }
    }
    if !beta.is_finite() {
        return Err(Error::Config(format!("target return must be finite, got {beta}")));
    }
    let mu = DVector::from_iterator(n, returns.column_iter().map(|c| c.mean()));
    let mut a_mat = DMatrix::from_element(2, n, 1.0);
    a_mat.row_mut(0).copy_from(&mu.transpose());
    let b = DVector::from_vec(vec![beta, 1.0]);
    PortfolioProblem::from_parts(returns.clone(), beta, a_mat, b)
}

impl PortfolioProblem {
    /// Builds a problem with an arbitrary linear constraint system. The data
    /// path goes through [`build_problem`]; this exists for degenerate test
    /// instances and custom constraint rows.
    pub fn from_parts(
        r: DMatrix<f64>,
        beta: f64,
        a_mat: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self> {
        let (t, n) = r.shape();
        if t < 2 || n < 2 {
            return Err(Error::Dimension(format!("need T >= 2 and n >= 2, got {t} x {n}")));
        }
        if a_mat.ncols() != n || a_mat.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "constraint system is {}x{} with rhs length {}, expected n = {n}",
                a_mat.nrows(),
                a_mat.ncols(),
                b.len()
            )));
        }
        let tf = t as f64;
        let mu = DVector::from_iterator(n, r.column_iter().map(|c| c.mean()));
        let rtr_over_t = r.tr_mul(&r) / tf;
        let rte_beta_over_t = DVector::from_iterator(n, r.column_iter().map(|c| c.sum())) * (beta / tf);
        let ata = a_mat.tr_mul(&a_mat);
        let atb = a_mat.tr_mul(&b);
        // ||R||_2^2 / T is the top eigenvalue of R^T R / T
        let r_norm_sq = top_eigenvalue_psd(&rtr_over_t) * tf;
        let a_norm_sq = top_eigenvalue_psd(&ata);
        Ok(Self {
            r,
            mu,
            beta,
            a_mat,
            b,
            rtr_over_t,
            rte_beta_over_t,
            ata,
            atb,
            r_norm_sq,
            a_norm_sq,
        })
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.a_mat
    }
    pub fn constraint_rhs(&self) -> &DVector<f64> {
        &self.b
    }
    pub fn n_periods(&self) -> usize {
        self.r.nrows()
    }
    pub fn n_assets(&self) -> usize {
        self.r.ncols()
    }
    /// `||R||_2^2` (squared spectral norm).
    pub fn r_norm_sq(&self) -> f64 {
        self.r_norm_sq
    }
    /// `||A||_2^2` (squared spectral norm).
    pub fn a_norm_sq(&self) -> f64 {
        self.a_norm_sq
    }

    fn check_len(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n_assets() {
            return Err(Error::Dimension(format!(
                "vector has length {}, expected {}",
                x.len(),
                self.n_assets()
            )));
        }
        Ok(())
    }

    /// `(1/T) ||R x - beta e_T||^2`
    pub fn tracking_error(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_len(x)?;
        let mut res = &self.r * x;
        res.add_scalar_mut(-self.beta);
        Ok(res.norm_squared() / self.n_periods() as f64)
    }

    /// `||A x - b||_2`
    pub fn constraint_violation(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_len(x)?;
        Ok((&self.a_mat * x - &self.b).norm())
    }

    /// `(1/T)||beta e_T||^2 + eta ||b||^2`, the penalized objective at `x = 0`.
    pub fn objective_at_zero(&self, eta: f64) -> f64 {
        self.beta * self.beta + eta * self.b.norm_squared()
    }

    /// `(beta/T) R^T e_T + eta A^T b`
    pub fn linear_term(&self, eta: f64) -> DVector<f64> {
        &self.rte_beta_over_t + &self.atb * eta
    }

    /// Gram form of the smooth part for a given `eta`.
    pub fn smooth_part(&self, eta: f64) -> SmoothPart {
        SmoothPart {
            gram: &self.rtr_over_t + &self.ata * eta,
            linear: self.linear_term(eta),
            constant: self.objective_at_zero(eta),
        }
    }

    /// Columnwise curvature `(1/T)||R_i||^2 + eta ||A_i||^2`.
    pub fn column_curvature(&self, eta: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.n_assets(),
            (0..self.n_assets()).map(|i| self.rtr_over_t[(i, i)] + eta * self.ata[(i, i)]),
        )
    }
}

/// The smooth part `h(x) = x^T G x - 2 c^T x + k` where
/// `G = R^T R / T + eta A^T A`, `c = (beta/T) R^T e_T + eta A^T b`,
/// `k = beta^2 + eta ||b||^2`.
#[derive(Debug, Clone)]
pub struct SmoothPart {
    pub gram: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl SmoothPart {
    /// `h(x)` given a precomputed `G x`.
    pub fn value_with(&self, x: &DVector<f64>, gx: &DVector<f64>) -> f64 {
        x.dot(gx) - 2.0 * self.linear.dot(x) + self.constant
    }

    /// `B_phi(x) = x - phi (G x - c)` given a precomputed `G x`.
    pub fn step_with(&self, x: &DVector<f64>, gx: &DVector<f64>, phi: f64) -> DVector<f64> {
        let mut out = x.clone();
        out.axpy(-phi, gx, 1.0);
        out.axpy(phi, &self.linear, 1.0);
        out
    }
}

/// `C_{lam,eta}(x) = (1/T)||Rx - beta e_T||^2 + lam P_a(x) + eta ||Ax - b||^2`
pub fn objective_penalized(
    p: &PortfolioProblem,
    params: &ObjectiveParams,
    x: &DVector<f64>,
) -> Result<f64> {
    let pen = PenaltyParams::new(params.a)?;
    let cv = p.constraint_violation(x)?;
    Ok(p.tracking_error(x)? + params.lam * pen.penalty(x.as_slice()) + params.eta * cv * cv)
}

/// `C_lam(x) = (1/T)||Rx - beta e_T||^2 + lam P_a(x)`; feasibility is not checked.
pub fn objective_constrained(p: &PortfolioProblem, a: f64, lam: f64, x: &DVector<f64>) -> Result<f64> {
    let pen = PenaltyParams::new(a)?;
    if !(lam >= 0.0 && lam.is_finite()) {
        return Err(Error::Config(format!("lambda must be >= 0, got {lam}")));
    }
    Ok(p.tracking_error(x)? + lam * pen.penalty(x.as_slice()))
}

/// `B_phi(z) = z + (phi/T) R^T (beta e_T - R z) + phi eta A^T (b - A z)`
pub fn gradient_step(p: &PortfolioProblem, eta: f64, phi: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
    p.check_len(z)?;
    if !(phi > 0.0) {
        return Err(Error::Config(format!("step size must be > 0, got {phi}")));
    }
    let mut resid = -(&p.r * z);
    resid.add_scalar_mut(p.beta);
    let cres = &p.b - &p.a_mat * z;
    let mut out = z.clone();
    out.gemv_tr(phi / p.n_periods() as f64, &p.r, &resid, 1.0);
    out.gemv_tr(phi * eta, &p.a_mat, &cres, 1.0);
    Ok(out)
}

/// `(1 - eps) / ((1/T)||R||_2^2 + eta ||A||_2^2)`.
pub fn max_step_size(p: &PortfolioProblem, eta: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon must lie in [0, 1), got {epsilon}")));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Config(format!("eta must be > 0, got {eta}")));
    }
    let lip = p.r_norm_sq / p.n_periods() as f64 + eta * p.a_norm_sq;
    Ok((1.0 - epsilon) / lip)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration.
pub fn top_eigenvalue_psd(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // deterministic, non-symmetric start so it is not orthogonal to the top
    // eigenvector of structured matrices
    let mut v = DVector::from_iterator(n, (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 1.618).sin()));
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..POWER_ITER_CAP {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= POWER_ITER_TOL * next.abs() {
            // the Rayleigh quotient converges from below; one more product
            // gives the eigenvalue to working precision
            return (m * &v).dot(&v).max(next);
        }
        lambda = next;
    }
    lambda
}

/// Spectral norm `||M||_2` via power iteration on `M^T M`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    top_eigenvalue_psd(&m.tr_mul(m)).sqrt()
}
