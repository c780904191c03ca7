//! Quick end-to-end checks of the numerical core against brute-force
//! oracles and known properties.

use fracport::ifpt::equal_weight;
use fracport::oracle::{prox_nonneg_oracle, prox_oracle, separable_objective};
use fracport::prox::{large_lambda_threshold, small_lambda_threshold};
use fracport::synthetic::{gaussian_returns, planted_instance};
use fracport::{
    build_problem, ifpt_solve, lambda_bar, prox_nonneg, prox_scalar, PenaltyParams, ProxParams, SolverConfig,
    Termination,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

fn penalty_values() -> Check {
    let p = PenaltyParams::new(1.0).expect("valid a");
    let got = [p.rho(0.0), p.rho(1.0), p.rho(-3.0)];
    let want = [0.0, 0.5, 0.75];
    let err = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    Check {
        name: "penalty values",
        pass: err <= 1e-15,
        detail: format!("max error {err:.1e}"),
    }
}

fn prox_against_oracle(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let params = ProxParams::new(log_uniform(rng, 0.1, 10.0), log_uniform(rng, 1e-3, 10.0)).expect("valid");
        let gamma = rng.random_range(-5.0..5.0);
        let ours = match prox_scalar(&params, gamma) {
            Ok(v) => v,
            Err(e) => {
                return Check {
                    name: "prox vs brute force",
                    pass: false,
                    detail: e.to_string(),
                }
            }
        };
        let oracle = prox_oracle(&params, gamma, 1.0, 1e-3);
        worst = worst.max(params.objective(gamma, ours) - params.objective(gamma, oracle));
    }
    Check {
        name: "prox vs brute force",
        pass: worst <= 1e-9,
        detail: format!("300 triples, worst objective excess {worst:.1e}"),
    }
}

fn threshold_continuity() -> Check {
    let gap = [0.1, 1.0, 10.0]
        .iter()
        .map(|&a| {
            let lam = 1.0 / (a * a);
            (small_lambda_threshold(a, lam) - large_lambda_threshold(a, lam)).abs()
        })
        .fold(0.0, f64::max);
    Check {
        name: "threshold continuity",
        pass: gap <= 1e-12,
        detail: format!("max gap {gap:.1e}"),
    }
}

fn nonneg_prox(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    let mut negative = false;
    for _ in 0..200 {
        let params = ProxParams::new(log_uniform(rng, 0.1, 10.0), log_uniform(rng, 1e-3, 5.0)).expect("valid");
        let n = rng.random_range(1..=3);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ours = prox_nonneg(&params, &v).expect("finite input");
        negative |= ours.iter().any(|&x| x < 0.0);
        let oracle = prox_nonneg_oracle(&params, &v, 1e-3);
        worst = worst.max(separable_objective(&params, &v, &ours) - separable_objective(&params, &v, &oracle));
    }
    Check {
        name: "nonnegative prox",
        pass: worst <= 1e-6 && !negative,
        detail: format!("200 instances, worst objective excess {worst:.1e}"),
    }
}

fn planted_recovery(rng: &mut ChaCha8Rng) -> Check {
    let inst = planted_instance(rng, 20, 60, 4, 0.2, false, 0.1).expect("valid instance");
    let res = ifpt_solve(&inst.problem, &SolverConfig::target(1.0, 1.0, 4), &equal_weight(20));
    match res {
        Ok(r) => {
            let shared = r.support.iter().filter(|i| inst.support.contains(i)).count();
            Check {
                name: "target sparsity",
                pass: r.support.len() == 4,
                detail: format!("{} nonzeros for r = 4, {shared} of them in the planted support", r.support.len()),
            }
        }
        Err(e) => Check {
            name: "target sparsity",
            pass: false,
            detail: e.to_string(),
        },
    }
}

fn descent_and_zero(rng: &mut ChaCha8Rng) -> [Check; 2] {
    let r = gaussian_returns(rng, 60, 15, 0.1, 1.0);
    let p = build_problem(&r, 0.1).expect("valid problem");
    let lbar = lambda_bar(&p, 1.0, 1.0);
    let descent = match ifpt_solve(&p, &SolverConfig::fixed(1.0, 1.0, 0.01 * lbar), &equal_weight(15)) {
        Ok(res) => {
            let rise = res.objective_trace.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            Check {
                name: "monotone descent",
                pass: rise <= 1e-12,
                detail: format!("{} iterations, largest increase {rise:.1e}", res.iterations),
            }
        }
        Err(e) => Check {
            name: "monotone descent",
            pass: false,
            detail: e.to_string(),
        },
    };
    let zero = match ifpt_solve(&p, &SolverConfig::fixed(1.0, 1.0, 1.01 * lbar), &equal_weight(15)) {
        Ok(res) => Check {
            name: "zero above lambda_bar",
            pass: res.termination == Termination::ZeroSolution,
            detail: format!("termination {:?} after {} iterations", res.termination, res.iterations),
        },
        Err(e) => Check {
            name: "zero above lambda_bar",
            pass: false,
            detail: e.to_string(),
        },
    };
    [descent, zero]
}

pub fn run(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = vec![
        penalty_values(),
        prox_against_oracle(&mut rng),
        threshold_continuity(),
        nonneg_prox(&mut rng),
        planted_recovery(&mut rng),
    ];
    checks.extend(descent_and_zero(&mut rng));
    checks
}
