//! Seeded synthetic data: random return matrices, planted sparse
//! portfolios, and factor-model panels in the Fama-French monthly layout.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::data::{ReturnsPanel, YearMonth};
use crate::error::Result;
use crate::problem::{build_problem, PortfolioProblem};

/// `T x n` matrix of i.i.d. normal draws.
pub fn gaussian_returns<R: Rng + ?Sized>(rng: &mut R, t: usize, n: usize, mean: f64, sd: f64) -> DMatrix<f64> {
    let dist = Normal::new(mean, sd).expect("valid normal parameters");
    DMatrix::from_fn(t, n, |_, _| dist.sample(rng))
}

/// A problem whose smooth part is minimized exactly by a known sparse,
/// budget-feasible portfolio.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub problem: PortfolioProblem,
    pub x_true: DVector<f64>,
    /// Sorted support of `x_true`.
    pub support: Vec<usize>,
}

/// Draws `r` nonzero weights of magnitude at least `min_mag` summing to 1.
/// With `nonneg` all weights are positive, which requires `r * min_mag <= 1`.
pub fn planted_weights<R: Rng + ?Sized>(rng: &mut R, r: usize, min_mag: f64, nonneg: bool) -> Vec<f64> {
    assert!(r >= 1);
    if nonneg {
        assert!(r as f64 * min_mag <= 1.0, "cannot plant {r} nonnegative weights >= {min_mag}");
        let slack = 1.0 - r as f64 * min_mag;
        let raw: Vec<f64> = (0..r).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        return raw.iter().map(|w| min_mag + slack * w / s).collect();
    }
    let mags = Uniform::new(min_mag, 3.0 * min_mag).expect("valid range");
    loop {
        let w: Vec<f64> = (0..r)
            .map(|_| {
                let m = mags.sample(rng);
                if rng.random_bool(0.3) {
                    -m
                } else {
                    m
                }
            })
            .collect();
        let s: f64 = w.iter().sum();
        if s <= 0.0 {
            continue;
        }
        let scaled: Vec<f64> = w.iter().map(|v| v / s).collect();
        if scaled.iter().all(|v| v.abs() >= min_mag) {
            return scaled;
        }
    }
}

/// Plants an `r`-sparse portfolio `x_true` with `R x_true = beta e_T`
/// exactly, so `x_true` has zero tracking error and satisfies `Ax = b`.
pub fn planted_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    t: usize,
    r: usize,
    min_mag: f64,
    nonneg: bool,
    beta: f64,
) -> Result<PlantedInstance> {
    let mut support: Vec<usize> = sample(rng, n, r).into_vec();
    support.sort_unstable();
    let weights = planted_weights(rng, r, min_mag, nonneg);
    let mut x_true = DVector::zeros(n);
    for (&i, &w) in support.iter().zip(&weights) {
        x_true[i] = w;
    }
    let r0 = gaussian_returns(rng, t, n, 0.0, 1.0);
    let mut miss = &r0 * &x_true;
    miss.add_scalar_mut(-beta);
    let w = &x_true / x_true.norm_squared();
    let rmat = r0 - miss * w.transpose();
    let problem = build_problem(&rmat, beta)?;
    Ok(PlantedInstance {
        problem,
        x_true,
        support,
    })
}

/// Which Fama-French style universe to imitate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Universe {
    /// 48 industry portfolios.
    Industry48,
    /// 100 size / book-to-market portfolios.
    SizeBm100,
}

impl Universe {
    pub fn asset_names(&self) -> Vec<String> {
        match self {
            Universe::Industry48 => (1..=48).map(|i| format!("Ind{i:02}")).collect(),
            Universe::SizeBm100 => (1..=10)
                .flat_map(|s| (1..=10).map(move |b| format!("ME{s}BM{b}")))
                .collect(),
        }
    }
}

/// One-factor panel with industry-style clustering, in decimal returns.
/// Monthly market premium ~ N(0.9%, 4.5%), loadings in [0.6, 1.4],
/// idiosyncratic volatility in [2%, 6%] and small per-asset alphas.
pub fn factor_panel<R: Rng + ?Sized>(
    rng: &mut R,
    universe: Universe,
    first: YearMonth,
    last: YearMonth,
) -> ReturnsPanel {
    let names = universe.asset_names();
    let n = names.len();
    let dates: Vec<YearMonth> = first.range_inclusive(last).collect();
    let t = dates.len();
    let market = Normal::new(0.9, 4.5).expect("valid");
    let clusters = 6;
    let cluster = Normal::new(0.0, 1.5).expect("valid");
    let loadings: Vec<f64> = (0..n).map(|_| rng.random_range(0.6..1.4)).collect();
    let idio_sd: Vec<f64> = (0..n).map(|_| rng.random_range(2.0..6.0)).collect();
    let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..0.3)).collect();
    let std = Normal::new(0.0, 1.0).expect("valid");
    let mut values = DMatrix::zeros(t, n);
    for row in 0..t {
        let f = market.sample(rng);
        let g: Vec<f64> = (0..clusters).map(|_| cluster.sample(rng)).collect();
        for j in 0..n {
            let pct = alpha[j] + loadings[j] * f + g[j % clusters] + idio_sd[j] * std.sample(rng);
            // file precision is two decimals in percent
            values[(row, j)] = (pct * 100.0).round() / 10_000.0;
        }
    }
    ReturnsPanel::new(dates, names, values).expect("generated panel is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planted_portfolio_has_zero_tracking_error_and_is_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for nonneg in [false, true] {
            let inst = planted_instance(&mut rng, 20, 30, 4, 0.2, nonneg, 0.1).unwrap();
            assert!(inst.problem.tracking_error(&inst.x_true).unwrap() < 1e-20);
            assert!(inst.problem.constraint_violation(&inst.x_true).unwrap() < 1e-12);
            assert!(inst.support.iter().all(|&i| inst.x_true[i].abs() >= 0.2));
            if nonneg {
                assert!(inst.x_true.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn factor_panel_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = factor_panel(&mut rng, Universe::SizeBm100, YearMonth::new(1971, 7).unwrap(), YearMonth::new(1972, 6).unwrap());
        assert_eq!(p.values().shape(), (12, 100));
        assert_eq!(p.assets().len(), 100);
    }
}
