//! Brute-force verification oracles.
//!
//! These do not share code with the closed-form operators they check: the
//! scalar objective is re-evaluated inline and minimized by grid search
//! followed by golden-section refinement of every grid-local minimum. They
//! exist for tests and the CLI self-test, not for production solves.

use crate::prox::ProxParams;

fn scalar_objective(a: f64, lam: f64, gamma: f64, beta: f64) -> f64 {
    let ab = a * beta.abs();
    (beta - gamma) * (beta - gamma) + lam * ab / (ab + 1.0)
}

/// Golden-section minimization of `f` on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut guard = 0;
    while hi - lo > tol && guard < 200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        guard += 1;
    }
    0.5 * (lo + hi)
}

/// Grid + golden-section minimizer of `f` over `[lo, hi]`. The point `0` is
/// always included as a candidate when it lies in the interval, since the
/// penalty has a kink there.
pub fn minimize_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let xs: Vec<f64> = (0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();

    let mut best_x = xs[0];
    let mut best_f = fs[0];
    let mut consider = |x: f64| {
        let v = f(x);
        if v < best_f {
            best_f = v;
            best_x = x;
        }
    };
    if lo <= 0.0 && 0.0 <= hi {
        consider(0.0);
    }
    for i in 0..xs.len() {
        let left = if i == 0 { f64::INFINITY } else { fs[i - 1] };
        let right = if i + 1 == xs.len() { f64::INFINITY } else { fs[i + 1] };
        if fs[i] <= left && fs[i] <= right {
            consider(xs[i]);
            let a = xs[i.saturating_sub(1)];
            let b = xs[(i + 1).min(xs.len() - 1)];
            if b > a {
                consider(golden_section(&f, a, b, 1e-13));
            }
        }
    }
    best_x
}

/// Brute-force minimizer of `(beta - gamma)^2 + lam * rho_a(beta)` over
/// `[-(|gamma| + halfwidth), |gamma| + halfwidth]`.
pub fn prox_oracle(params: &ProxParams, gamma: f64, grid_halfwidth: f64, grid_step: f64) -> f64 {
    let (a, lam) = (params.a(), params.lam());
    let r = gamma.abs() + grid_halfwidth;
    minimize_1d(|b| scalar_objective(a, lam, gamma, b), -r, r, grid_step)
}

/// Brute-force minimizer of `||x - v||^2 + lam * P_a(x)` subject to `x >= 0`.
///
/// The objective is a sum of one-dimensional terms, so each coordinate is
/// searched independently over `[0, |v_i| + 1]`.
pub fn prox_nonneg_oracle(params: &ProxParams, v: &[f64], grid_step: f64) -> Vec<f64> {
    let (a, lam) = (params.a(), params.lam());
    v.iter()
        .map(|&vi| minimize_1d(|b| scalar_objective(a, lam, vi, b), 0.0, vi.abs() + 1.0, grid_step))
        .collect()
}

/// Objective `||x - v||^2 + lam * P_a(x)`.
pub fn separable_objective(params: &ProxParams, v: &[f64], x: &[f64]) -> f64 {
    v.iter()
        .zip(x)
        .map(|(&vi, &xi)| scalar_objective(params.a(), params.lam(), vi, xi))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_section(|x| (x - 0.3) * (x - 0.3), -1.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
    }

    #[test]
    fn oracle_below_threshold_is_zero() {
        let p = ProxParams::new(1.0, 0.5).unwrap();
        assert!(prox_oracle(&p, 0.2, 1.0, 1e-4).abs() <= 1e-6);
    }

    #[test]
    fn nonneg_oracle_kills_negative_entries() {
        let p = ProxParams::new(1.0, 0.5).unwrap();
        let x = prox_nonneg_oracle(&p, &[-1.0, -0.01], 1e-3);
        assert!(x.iter().all(|&t| t.abs() < 1e-9));
    }
}
