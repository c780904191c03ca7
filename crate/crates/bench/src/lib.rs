//! Seeded fixtures shared by the benchmarks.

use fracport::synthetic::{factor_panel, gaussian_returns, Universe};
use fracport::{build_problem, PortfolioProblem, ReturnsPanel, YearMonth};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `T x n` problem with unit-scale returns.
pub fn unit_problem(seed: u64, t: usize, n: usize) -> PortfolioProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = gaussian_returns(&mut rng, t, n, 0.1, 1.0);
    build_problem(&r, 0.1).expect("valid problem")
}

/// Synthetic 48-industry style panel covering `first..=last`.
pub fn industry_panel(seed: u64, first: (i32, u32), last: (i32, u32)) -> ReturnsPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = YearMonth::new(first.0, first.1).expect("valid month");
    let last = YearMonth::new(last.0, last.1).expect("valid month");
    factor_panel(&mut rng, Universe::Industry48, first, last)
}
