//! Sparse mean-variance portfolio selection with the fraction penalty
//! `rho_a(t) = a|t| / (a|t| + 1)`.
//!
//! The crate provides the closed-form thresholding operator of the
//! penalty, the iterative thresholding solvers with and without short
//! selling, reference baselines, Fama-French style data handling and an
//! out-of-sample backtest.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod baselines;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod ifpt;
pub mod infpt;
pub mod oracle;
pub mod penalty;
pub mod problem;
pub mod prox;
pub mod synthetic;

pub use data::{compute_beta, parse_returns_csv, slice_window, ReturnsPanel, Window, WindowPlan, YearMonth};
pub use diagnostics::{check_bounds, check_first_order, lambda_bar};
pub use error::{Error, Result};
pub use ifpt::{adaptive_lambda, eta_sweep, ifpt_solve, ifpt_solve_observed, LambdaMode, SolveResult, SolverConfig, Termination};
pub use infpt::{infpt_solve, infpt_solve_observed, prox_nonneg, NonnegSolveResult};
pub use penalty::PenaltyParams;
pub use problem::{build_problem, ObjectiveParams, PortfolioProblem};
pub use prox::{prox_scalar, prox_vector, threshold, ProxParams, Regime};
