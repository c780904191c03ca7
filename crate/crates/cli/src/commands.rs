use std::fs;
use std::path::Path;

use fracport::backtest::{
    emit_penalty_plot_data, emit_report, plot_data_tsv, run_backtest, BacktestConfig, Method, ReportFormat,
};
use fracport::baselines::{l1_for_sparsity, l1_penalized_from, markowitz_equality, L1Options};
use fracport::data::{trim_raw_table, write_returns_csv, ParseOptions};
use fracport::diagnostics::{BoundsReport, FirstOrderReport};
use fracport::ifpt::equal_weight;
use fracport::synthetic::{factor_panel, Universe};
use fracport::{
    build_problem, check_bounds, check_first_order, compute_beta, ifpt_solve, infpt_solve, lambda_bar,
    parse_returns_csv, slice_window, LambdaMode, ObjectiveParams, PortfolioProblem, ReturnsPanel, SolveResult,
    SolverConfig, Window, YearMonth,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{method_key, DataSource, RunConfig, SyntheticUniverse};
use crate::error::CliError;

/// Tolerance for the stationarity check written into solution files.
const FIRST_ORDER_TOL: f64 = 1e-6;

fn synthetic_range(cfg: &RunConfig) -> (YearMonth, YearMonth) {
    let plan = cfg.window_plan();
    let mut first = YearMonth::new(1971, 7).expect("valid month");
    let mut last = YearMonth::new(2006, 6).expect("valid month");
    for p in &plan.periods {
        first = first.min(p.estimation.start);
        last = last.max(p.evaluation.end);
    }
    if let Some(w) = cfg.window {
        first = first.min(w.start);
        last = last.max(w.end);
    }
    (first, last)
}

/// Loads the configured panel. `active` scopes the missing-value policy.
pub fn load_panel(cfg: &RunConfig, active: Option<Window>) -> Result<ReturnsPanel, CliError> {
    match &cfg.data {
        DataSource::File(path) => {
            let file = fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let opts = ParseOptions {
                missing: cfg.missing,
                active,
            };
            parse_returns_csv(file, &opts).map_err(|e| CliError::from_data(path, e))
        }
        DataSource::Synthetic(u) => {
            let universe = match u {
                SyntheticUniverse::Ff48 => Universe::Industry48,
                SyntheticUniverse::Ff100 => Universe::SizeBm100,
            };
            let (first, last) = synthetic_range(cfg);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            Ok(factor_panel(&mut rng, universe, first, last))
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::output(path, e))
}

fn prepare_out(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::output(&cfg.out, e))?;
    write_file(&cfg.out.join("config.txt"), cfg.to_text().as_bytes())
}

fn solver_config(cfg: &RunConfig, mode: LambdaMode) -> SolverConfig {
    SolverConfig {
        a: cfg.a,
        eta: cfg.eta,
        epsilon: cfg.epsilon,
        mode,
        max_iters: cfg.max_iters,
        tol_x: cfg.tol_x,
        tol_obj: cfg.tol_obj,
    }
}

fn l1_options(cfg: &RunConfig) -> L1Options {
    L1Options {
        epsilon: cfg.epsilon,
        max_iters: cfg.l1_max_iters,
        tol: cfg.l1_tol,
    }
}

#[derive(Debug, Serialize)]
struct Diagnostics {
    lambda: f64,
    first_order: FirstOrderReport,
    bounds: BoundsReport,
}

#[derive(Debug, Serialize)]
struct SolverTrace {
    termination: String,
    iterations: usize,
    phi: f64,
    last_step: f64,
    tol_x: f64,
    start: usize,
    objective_trace: Vec<f64>,
    lambda_trace: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct SolutionFile {
    method: String,
    assets: Vec<String>,
    window: String,
    beta: f64,
    lambda_bar: f64,
    weights: Vec<f64>,
    support: Vec<usize>,
    support_assets: Vec<String>,
    tracking_error: f64,
    constraint_violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolverTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<Diagnostics>,
}

/// Equal weights followed by `extra` random starts drawn from `rng`.
fn starting_points(n: usize, extra: usize, nonneg: bool, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let mut starts = vec![equal_weight(n)];
    for _ in 0..extra {
        let v = DVector::from_fn(n, |_, _| {
            if nonneg {
                rng.random_range(0.0..1.0)
            } else {
                rng.random_range(-1.0..1.0)
            }
        });
        starts.push(v);
    }
    starts
}

fn run_thresholding_solver(
    p: &PortfolioProblem,
    method: Method,
    scfg: &SolverConfig,
    cfg: &RunConfig,
) -> Result<(usize, SolveResult), CliError> {
    let nonneg = method == Method::Infpt;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(usize, SolveResult)> = None;
    for (i, x0) in starting_points(p.n_assets(), cfg.random_starts, nonneg, &mut rng).iter().enumerate() {
        let res = if nonneg {
            infpt_solve(p, scfg, x0).map(|r| r.result)
        } else {
            ifpt_solve(p, scfg, x0)
        }
        .map_err(CliError::from_solve)?;
        let obj = *res.objective_trace.last().expect("trace is nonempty");
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| obj < *b.objective_trace.last().expect("trace is nonempty"));
        if better {
            best = Some((i, res));
        }
    }
    Ok(best.expect("at least one start"))
}

/// Single solve on the estimation window; writes `solution.json`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<String, CliError> {
    let [method] = cfg.methods[..] else {
        return Err(CliError::Config("solve takes exactly one method".into()));
    };
    let panel = load_panel(cfg, cfg.window)?;
    let window = match cfg.window {
        Some(w) => w,
        None => panel.full_window().ok_or_else(|| CliError::Data("panel has no rows".into()))?,
    };
    let r = slice_window(&panel, &window).map_err(CliError::from_solve)?;
    let beta = compute_beta(&panel, &window).map_err(CliError::from_solve)?;
    let p = build_problem(&r, beta).map_err(CliError::from_solve)?;
    let n = p.n_assets();

    let mode = match (cfg.lambda, &cfg.ks[..]) {
        (Some(l), _) => Some(LambdaMode::FixedLambda(l)),
        (None, [k]) => Some(LambdaMode::TargetSparsity(*k)),
        (None, _) if method == Method::Markowitz => None,
        (None, _) => return Err(CliError::Config("solve needs lambda or exactly one k".into())),
    };

    let (weights, objective, solver, diagnostics) = match method {
        Method::Ifpt | Method::Infpt => {
            let scfg = solver_config(cfg, mode.expect("mode is set for thresholding methods"));
            let (start, res) = run_thresholding_solver(&p, method, &scfg, cfg)?;
            let x = res.x_vec();
            let lam = res.final_lambda();
            let params = ObjectiveParams::new(cfg.a, lam, cfg.eta).map_err(CliError::from_solve)?;
            let diagnostics = Diagnostics {
                lambda: lam,
                first_order: check_first_order(&p, &params, &x, FIRST_ORDER_TOL).map_err(CliError::from_solve)?,
                bounds: check_bounds(&p, &params, &x).map_err(CliError::from_solve)?,
            };
            let objective = res.objective_trace.last().copied();
            let trace = SolverTrace {
                termination: format!("{:?}", res.termination),
                iterations: res.iterations,
                phi: res.phi,
                last_step: res.last_step,
                tol_x: res.tol_x,
                start,
                objective_trace: res.objective_trace,
                lambda_trace: res.lambda_trace,
            };
            (res.x, objective, Some(trace), Some(diagnostics))
        }
        Method::Markowitz => {
            let res = markowitz_equality(&p).map_err(CliError::from_solve)?;
            (res.x, Some(res.objective), None, None)
        }
        Method::L1 => {
            let opts = l1_options(cfg);
            let res = match mode {
                Some(LambdaMode::FixedLambda(l)) => {
                    l1_penalized_from(&p, l, cfg.eta, &opts, &DVector::zeros(n)).map_err(CliError::from_solve)?.0
                }
                Some(LambdaMode::TargetSparsity(k)) => {
                    l1_for_sparsity(&p, k, cfg.eta, &opts, cfg.l1_bisection_steps).map_err(CliError::from_solve)?
                }
                None => unreachable!("l1 always has a mode"),
            };
            (res.x, Some(res.objective), None, None)
        }
    };

    let x = DVector::from_column_slice(&weights);
    let support: Vec<usize> = (0..n).filter(|&i| weights[i] != 0.0).collect();
    let file = SolutionFile {
        method: method_key(method).into(),
        assets: panel.assets().to_vec(),
        window: format!("{}-{}", window.start, window.end),
        beta,
        lambda_bar: lambda_bar(&p, cfg.a, cfg.eta),
        support_assets: support.iter().map(|&i| panel.assets()[i].clone()).collect(),
        support,
        tracking_error: p.tracking_error(&x).map_err(CliError::from_solve)?,
        constraint_violation: p.constraint_violation(&x).map_err(CliError::from_solve)?,
        objective,
        solver,
        diagnostics,
        weights,
    };
    prepare_out(cfg)?;
    let mut json = serde_json::to_vec_pretty(&file).map_err(|e| CliError::Solver(e.to_string()))?;
    json.push(b'\n');
    let path = cfg.out.join("solution.json");
    write_file(&path, &json)?;
    let term = file.solver.as_ref().map(|s| s.termination.as_str()).unwrap_or("closed form");
    Ok(format!(
        "{} on {} ({} assets): {} nonzeros, {term}; wrote {}",
        method.label(),
        file.window,
        n,
        file.support.len(),
        path.display()
    ))
}

/// Runs the backtest and writes `report.{csv,json,md}`.
pub fn cmd_backtest(cfg: &RunConfig) -> Result<String, CliError> {
    if cfg.lambda.is_some() {
        return Err(CliError::Config("backtest targets sparsity levels; unset lambda and use ks".into()));
    }
    let plan = cfg.window_plan();
    plan.validate().map_err(CliError::from_solve)?;
    let active = match (plan.periods.iter().map(|p| p.estimation.start).min(), plan.whole_evaluation()) {
        (Some(start), Some(w)) => Some(Window::new(start, w.end).map_err(CliError::from_solve)?),
        _ => None,
    };
    let panel = load_panel(cfg, active)?;
    let first_k = *cfg.ks.first().ok_or_else(|| CliError::Config("ks must not be empty".into()))?;
    let bcfg = BacktestConfig {
        methods: cfg.methods.clone(),
        ks: cfg.ks.clone(),
        solver: solver_config(cfg, LambdaMode::TargetSparsity(first_k)),
        l1: l1_options(cfg),
        l1_bisection_steps: cfg.l1_bisection_steps,
        compound: cfg.compound,
        stddev_sharpe: cfg.stddev_sharpe,
        units: cfg.units,
    };
    let report = run_backtest(&panel, &plan, &bcfg).map_err(CliError::from_solve)?;
    prepare_out(cfg)?;
    for (format, name) in [
        (ReportFormat::Csv, "report.csv"),
        (ReportFormat::Json, "report.json"),
        (ReportFormat::Markdown, "report.md"),
    ] {
        let bytes = emit_report(&report, format).map_err(CliError::from_solve)?;
        write_file(&cfg.out.join(name), &bytes)?;
    }
    let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
    let violations = report.cells.iter().filter(|c| c.support_violation).count();
    Ok(format!(
        "{} periods x {} columns, {failed} failed cells, {violations} support violations; wrote reports to {}",
        report.periods.len(),
        report.columns().len(),
        cfg.out.display()
    ))
}

/// Writes `penalty.tsv` with `(a, t, rho_a(t))` rows.
pub fn cmd_plot_data(cfg: &RunConfig) -> Result<String, CliError> {
    let rows = emit_penalty_plot_data(&cfg.plot_a, cfg.plot_t_min, cfg.plot_t_max, cfg.plot_samples)
        .map_err(CliError::from_solve)?;
    prepare_out(cfg)?;
    let path = cfg.out.join("penalty.tsv");
    write_file(&path, plot_data_tsv(&rows).as_bytes())?;
    Ok(format!("{} rows; wrote {}", rows.len(), path.display()))
}

/// Writes a seeded synthetic panel in the returns CSV format.
pub fn cmd_synth(universe: SyntheticUniverse, seed: u64, first: YearMonth, last: YearMonth, out: &Path) -> Result<String, CliError> {
    if first > last {
        return Err(CliError::Config(format!("first month {first} is after last month {last}")));
    }
    let u = match universe {
        SyntheticUniverse::Ff48 => Universe::Industry48,
        SyntheticUniverse::Ff100 => Universe::SizeBm100,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let panel = factor_panel(&mut rng, u, first, last);
    let mut buf = Vec::new();
    write_returns_csv(&panel, &mut buf).map_err(CliError::from_solve)?;
    write_file(out, &buf)?;
    Ok(format!("{} months x {} assets; wrote {}", panel.len(), panel.n_assets(), out.display()))
}

/// Extracts one table from a raw Fama-French download and checks it parses.
pub fn cmd_convert(raw: &Path, header_line: usize, first_line: usize, last_line: usize, out: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(raw).map_err(|e| CliError::Data(format!("{}: {e}", raw.display())))?;
    let table = trim_raw_table(&text, header_line, first_line, last_line).map_err(|e| CliError::from_data(raw, e))?;
    let panel = parse_returns_csv(table.as_bytes(), &ParseOptions::default()).map_err(|e| CliError::from_data(raw, e))?;
    write_file(out, table.as_bytes())?;
    Ok(format!("{} months x {} assets; wrote {}", panel.len(), panel.n_assets(), out.display()))
}
