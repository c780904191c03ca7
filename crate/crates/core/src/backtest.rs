//! Out-of-sample backtest: per sub-period estimation, one solve per
//! (method, k), buy-and-hold evaluation over the following months, and
//! report rendering.
//!
//! Metrics per cell, with `r_t = x^T returns_t` over the evaluation months:
//! `m = sum_t r_t` (or the compounded total), `sigma` = sample variance of
//! `r_t` with divisor `months - 1`, and `S = m / sigma`. A zero variance
//! gives `S = +inf`, `-inf` or `NaN` by the sign of `m`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::baselines::{l1_for_sparsity, markowitz_equality, L1Options};
use crate::data::{compute_beta, slice_window, ReturnsPanel, SubPeriod, Window, WindowPlan};
use crate::error::{Error, Result};
use crate::ifpt::{equal_weight, ifpt_solve, LambdaMode, SolverConfig};
use crate::infpt::infpt_solve;
use crate::penalty::PenaltyParams;
use crate::problem::build_problem;

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub mod float_repr {
    use super::*;

    pub fn to_text(v: f64) -> String {
        if v.is_nan() {
            "nan".into()
        } else if v == f64::INFINITY {
            "inf".into()
        } else if v == f64::NEG_INFINITY {
            "-inf".into()
        } else {
            format!("{v}")
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&to_text(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float '{other}'"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ifpt,
    Infpt,
    Markowitz,
    L1,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Ifpt => "IFPT",
            Method::Infpt => "INFPT",
            Method::Markowitz => "Markowitz",
            Method::L1 => "l1-prox",
        }
    }

    /// Whether the method is solved once per target sparsity.
    pub fn uses_k(&self) -> bool {
        !matches!(self, Method::Markowitz)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ifpt" => Ok(Method::Ifpt),
            "infpt" => Ok(Method::Infpt),
            "markowitz" => Ok(Method::Markowitz),
            "l1" => Ok(Method::L1),
            other => Err(Error::Config(format!("unknown method '{other}' (expected ifpt, infpt, markowitz or l1)"))),
        }
    }
}

/// Reporting units for `m` and `sigma`. Percent scales `m` by 100 and
/// `sigma` by 10^4, so `S` shrinks by 100.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Decimal,
    Percent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub methods: Vec<Method>,
    pub ks: Vec<usize>,
    /// Solver settings for IFPT/INFPT; the lambda mode is replaced per k.
    pub solver: SolverConfig,
    pub l1: L1Options,
    pub l1_bisection_steps: usize,
    /// Compound monthly returns for `m` instead of summing them.
    pub compound: bool,
    /// Also report `m / sqrt(sigma)`.
    pub stddev_sharpe: bool,
    pub units: Units,
}

impl BacktestConfig {
    pub fn new(methods: Vec<Method>, ks: Vec<usize>, solver: SolverConfig) -> Self {
        Self {
            methods,
            ks,
            solver,
            l1: L1Options::default(),
            l1_bisection_steps: 40,
            compound: false,
            stddev_sharpe: false,
            units: Units::Decimal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodInfo {
    pub label: String,
    pub estimation: Window,
    pub evaluation: Window,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    #[serde(with = "float_repr")]
    pub m: f64,
    #[serde(with = "float_repr")]
    pub sigma: f64,
    #[serde(with = "float_repr")]
    pub sharpe: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub sharpe_stddev: Option<f64>,
}

mod opt_float {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(x) => float_repr::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
        float_repr::deserialize(d).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    /// Target sparsity; `None` for methods without one.
    pub k: Option<usize>,
    /// Index into `periods`, or `None` for the whole-period aggregate.
    pub period: Option<usize>,
    pub metrics: Option<CellMetrics>,
    pub support_size: Option<usize>,
    /// Holdings for sub-period cells.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holdings: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<String>,
    /// Set when an adaptive solve ends with more than `k` nonzeros.
    #[serde(default)]
    pub support_violation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub assets: Vec<String>,
    pub periods: Vec<PeriodInfo>,
    pub aggregate_label: String,
    pub config: BacktestConfig,
    pub cells: Vec<Cell>,
}

impl BacktestReport {
    pub fn cell(&self, method: Method, k: Option<usize>, period: Option<usize>) -> Option<&Cell> {
        self.cells.iter().find(|c| c.method == method && c.k == k && c.period == period)
    }

    /// `(method, k)` column keys in report order.
    pub fn columns(&self) -> Vec<(Method, Option<usize>)> {
        columns_for(&self.config)
    }
}

fn columns_for(cfg: &BacktestConfig) -> Vec<(Method, Option<usize>)> {
    let mut cols = Vec::new();
    for &k in &cfg.ks {
        for &m in cfg.methods.iter().filter(|m| m.uses_k()) {
            cols.push((m, Some(k)));
        }
    }
    for &m in cfg.methods.iter().filter(|m| !m.uses_k()) {
        cols.push((m, None));
    }
    cols
}

/// Portfolio returns `R x` per evaluation month.
fn portfolio_returns(r: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (r * DVector::from_column_slice(x)).as_slice().to_vec()
}

/// `(m, sigma, S)` for a series of monthly portfolio returns.
pub fn evaluate_returns(series: &[f64], compound: bool, stddev_sharpe: bool, units: Units) -> Result<CellMetrics> {
    if series.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    let (ms, ss) = match units {
        Units::Decimal => (1.0, 1.0),
        Units::Percent => (100.0, 1e4),
    };
    let n = series.len() as f64;
    let m_raw = if compound {
        series.iter().map(|r| 1.0 + r).product::<f64>() - 1.0
    } else {
        series.iter().sum()
    };
    let mean = series.iter().sum::<f64>() / n;
    let constant = series.iter().all(|&r| r == series[0]);
    // rounding in the mean would otherwise leave a tiny positive variance
    let var = if constant {
        0.0
    } else {
        series.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let m = m_raw * ms;
    let sigma = var * ss;
    let sharpe = sharpe_of(m, sigma);
    let sharpe_stddev = stddev_sharpe.then(|| sharpe_of(m, sigma.sqrt()));
    Ok(CellMetrics {
        m,
        sigma,
        sharpe,
        sharpe_stddev,
    })
}

struct Solved {
    x: Vec<f64>,
    termination: Option<String>,
}

fn solve_cell(
    method: Method,
    k: Option<usize>,
    r: &DMatrix<f64>,
    beta: f64,
    cfg: &BacktestConfig,
) -> Result<Solved> {
    let p = build_problem(r, beta)?;
    let n = p.n_assets();
    let with_k = |k: usize| SolverConfig {
        mode: LambdaMode::TargetSparsity(k),
        ..cfg.solver.clone()
    };
    match (method, k) {
        (Method::Ifpt, Some(k)) => {
            let res = ifpt_solve(&p, &with_k(k), &equal_weight(n))?;
            Ok(Solved {
                termination: Some(format!("{:?}", res.termination)),
                x: res.x,
            })
        }
        (Method::Infpt, Some(k)) => {
            let res = infpt_solve(&p, &with_k(k), &equal_weight(n))?;
            Ok(Solved {
                termination: Some(format!("{:?}", res.result.termination)),
                x: res.result.x,
            })
        }
        (Method::L1, Some(k)) => {
            let res = l1_for_sparsity(&p, k, cfg.solver.eta, &cfg.l1, cfg.l1_bisection_steps)?;
            Ok(Solved { x: res.x, termination: None })
        }
        (Method::Markowitz, None) => Ok(Solved {
            x: markowitz_equality(&p)?.x,
            termination: None,
        }),
        _ => Err(Error::Config(format!("method {} with k = {k:?}", method.label()))),
    }
}

/// Runs every (sub-period, method, k) cell and appends one whole-period
/// aggregate per (method, k) built from the pooled evaluation months.
/// Cell failures are recorded in the report and do not stop the run.
pub fn run_backtest(panel: &ReturnsPanel, plan: &WindowPlan, cfg: &BacktestConfig) -> Result<BacktestReport> {
    plan.validate()?;
    let n = panel.n_assets();
    for &k in &cfg.ks {
        if k == 0 || k >= n {
            return Err(Error::Config(format!("k must lie in [1, {n}), got {k}")));
        }
    }
    cfg.solver.validate_shared()?;

    struct PeriodData {
        est: DMatrix<f64>,
        eval: DMatrix<f64>,
        beta: f64,
    }
    let mut periods = Vec::with_capacity(plan.periods.len());
    let mut data = Vec::with_capacity(plan.periods.len());
    for SubPeriod { estimation, evaluation } in &plan.periods {
        let beta = compute_beta(panel, estimation)?;
        data.push(PeriodData {
            est: slice_window(panel, estimation)?,
            eval: slice_window(panel, evaluation)?,
            beta,
        });
        periods.push(PeriodInfo {
            label: evaluation.label(),
            estimation: *estimation,
            evaluation: *evaluation,
            beta,
        });
    }

    let columns = columns_for(cfg);
    let jobs: Vec<(usize, Method, Option<usize>)> = (0..data.len())
        .flat_map(|pi| columns.iter().map(move |&(m, k)| (pi, m, k)))
        .collect();

    let results: Vec<(Cell, Option<Vec<f64>>)> = jobs
        .par_iter()
        .map(|&(pi, method, k)| {
            let d = &data[pi];
            let mut cell = Cell {
                method,
                k,
                period: Some(pi),
                metrics: None,
                support_size: None,
                holdings: Vec::new(),
                termination: None,
                support_violation: false,
                error: None,
            };
            match solve_cell(method, k, &d.est, d.beta, cfg) {
                Ok(solved) => {
                    let series = portfolio_returns(&d.eval, &solved.x);
                    let support = solved.x.iter().filter(|v| **v != 0.0).count();
                    cell.support_size = Some(support);
                    cell.support_violation = k.is_some_and(|k| support > k);
                    cell.termination = solved.termination;
                    match evaluate_returns(&series, cfg.compound, cfg.stddev_sharpe, cfg.units) {
                        Ok(m) => cell.metrics = Some(m),
                        Err(e) => cell.error = Some(e.to_string()),
                    }
                    cell.holdings = solved.x;
                    (cell, Some(series))
                }
                Err(e) => {
                    cell.error = Some(e.to_string());
                    (cell, None)
                }
            }
        })
        .collect();

    let mut cells = Vec::with_capacity(results.len() + columns.len());
    let mut pooled: Vec<Option<Vec<f64>>> = vec![Some(Vec::new()); columns.len()];
    for (idx, (cell, series)) in results.into_iter().enumerate() {
        let col = idx % columns.len();
        match (series, &mut pooled[col]) {
            (Some(s), Some(acc)) => acc.extend(s),
            _ => pooled[col] = None,
        }
        cells.push(cell);
    }
    for (col, &(method, k)) in columns.iter().enumerate() {
        let mut cell = Cell {
            method,
            k,
            period: None,
            metrics: None,
            support_size: None,
            holdings: Vec::new(),
            termination: None,
            support_violation: false,
            error: None,
        };
        match &pooled[col] {
            Some(series) if !data.is_empty() => match evaluate_aggregate(series, &data.iter().map(|d| d.eval.nrows()).collect::<Vec<_>>(), cfg) {
                Ok(m) => cell.metrics = Some(m),
                Err(e) => cell.error = Some(e.to_string()),
            },
            _ => cell.error = Some("one or more sub-period solves failed".into()),
        }
        cells.push(cell);
    }

    let aggregate_label = plan
        .whole_evaluation()
        .map(|w| w.label())
        .unwrap_or_default();
    Ok(BacktestReport {
        assets: panel.assets().to_vec(),
        periods,
        aggregate_label,
        config: cfg.clone(),
        cells,
    })
}

/// Aggregate over pooled months. `m` is the sum of the sub-period totals
/// (compounded per sub-period when compounding is on), `sigma` the sample
/// variance of all pooled monthly returns.
fn evaluate_aggregate(series: &[f64], lengths: &[usize], cfg: &BacktestConfig) -> Result<CellMetrics> {
    let base = evaluate_returns(series, false, cfg.stddev_sharpe, cfg.units)?;
    if !cfg.compound {
        return Ok(base);
    }
    let mut start = 0;
    let mut m = 0.0;
    for &len in lengths {
        m += evaluate_returns(&series[start..start + len], true, false, cfg.units)?.m;
        start += len;
    }
    Ok(CellMetrics {
        m,
        sigma: base.sigma,
        sharpe: sharpe_of(m, base.sigma),
        sharpe_stddev: base.sharpe_stddev.map(|_| sharpe_of(m, base.sigma.sqrt())),
    })
}

/// `m / s`, or a signed infinity (NaN for `m = 0`) when `s = 0`.
fn sharpe_of(m: f64, s: f64) -> f64 {
    if s > 0.0 {
        m / s
    } else if m > 0.0 {
        f64::INFINITY
    } else if m < 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::NAN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

/// Renders a report. Output is a pure function of the report.
pub fn emit_report(report: &BacktestReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => emit_csv(report),
        ReportFormat::Markdown => Ok(emit_markdown(report).into_bytes()),
    }
}

fn period_label(report: &BacktestReport, period: Option<usize>) -> String {
    match period {
        Some(i) => report.periods[i].label.clone(),
        None => report.aggregate_label.clone(),
    }
}

fn emit_csv(report: &BacktestReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let stddev = report.config.stddev_sharpe;
    let mut header = vec!["method", "k", "period", "m", "sigma", "sharpe"];
    if stddev {
        header.push("sharpe_stddev");
    }
    header.extend(["support_size", "termination", "error"]);
    let wr = |e: csv::Error| Error::Parse {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(&header).map_err(wr)?;
    for c in &report.cells {
        let f = |v: Option<f64>| v.map(float_repr::to_text).unwrap_or_default();
        let mut rec = vec![
            c.method.label().to_string(),
            c.k.map(|k| k.to_string()).unwrap_or_default(),
            period_label(report, c.period),
            f(c.metrics.as_ref().map(|m| m.m)),
            f(c.metrics.as_ref().map(|m| m.sigma)),
            f(c.metrics.as_ref().map(|m| m.sharpe)),
        ];
        if stddev {
            rec.push(f(c.metrics.as_ref().and_then(|m| m.sharpe_stddev)));
        }
        rec.push(c.support_size.map(|s| s.to_string()).unwrap_or_default());
        rec.push(c.termination.clone().unwrap_or_default());
        rec.push(c.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(wr)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.2}"),
        Some(x) => float_repr::to_text(x),
        None => "n/a".into(),
    }
}

fn markdown_table(report: &BacktestReport, title: &str, pick: impl Fn(&Cell) -> Option<f64>) -> String {
    let cols = report.columns();
    let mut s = String::new();
    let _ = writeln!(s, "## {title}\n");
    let mut head = String::from("| Period |");
    let mut rule = String::from("|---|");
    for (m, k) in &cols {
        match k {
            Some(k) => {
                let _ = write!(head, " k={k} {} |", m.label());
            }
            None => {
                let _ = write!(head, " {} |", m.label());
            }
        }
        rule.push_str("---:|");
    }
    let _ = writeln!(s, "{head}\n{rule}");
    let rows: Vec<Option<usize>> = (0..report.periods.len()).map(Some).chain(std::iter::once(None)).collect();
    if cols.is_empty() {
        return s;
    }
    for period in rows {
        let _ = write!(s, "| {} |", period_label(report, period));
        for &(m, k) in &cols {
            let v = report.cell(m, k, period).and_then(&pick);
            let _ = write!(s, " {} |", fmt_cell(v));
        }
        s.push('\n');
    }
    s
}

fn emit_markdown(report: &BacktestReport) -> String {
    let units = match report.config.units {
        Units::Decimal => "decimal returns",
        Units::Percent => "percent returns",
    };
    let mut s = format!("# Out-of-sample performance ({units})\n\n");
    s.push_str(&markdown_table(report, "Sharpe ratio S = m / sigma", |c| c.metrics.as_ref().map(|m| m.sharpe)));
    s.push('\n');
    if report.config.stddev_sharpe {
        s.push_str(&markdown_table(report, "m / sqrt(sigma)", |c| c.metrics.as_ref().and_then(|m| m.sharpe_stddev)));
        s.push('\n');
    }
    s.push_str(&markdown_table(report, "Total return m", |c| c.metrics.as_ref().map(|m| m.m)));
    s.push('\n');
    s.push_str(&markdown_table(report, "Variance sigma", |c| c.metrics.as_ref().map(|m| m.sigma)));
    s.push('\n');
    s.push_str(&markdown_table(report, "Support size", |c| c.support_size.map(|v| v as f64)));
    let failures: Vec<&Cell> = report.cells.iter().filter(|c| c.error.is_some()).collect();
    if !failures.is_empty() {
        s.push_str("\n## Failed cells\n\n");
        for c in failures {
            let _ = writeln!(
                s,
                "- {} k={} {}: {}",
                c.method.label(),
                c.k.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
                period_label(report, c.period),
                c.error.as_deref().unwrap_or("")
            );
        }
    }
    s
}

/// `(a, t, rho_a(t))` on `samples` evenly spaced points of `[t_min, t_max]`
/// for every `a`.
pub fn emit_penalty_plot_data(a_values: &[f64], t_min: f64, t_max: f64, samples: usize) -> Result<Vec<(f64, f64, f64)>> {
    if samples < 2 {
        return Err(Error::Config(format!("need at least 2 samples, got {samples}")));
    }
    if !(t_min < t_max) {
        return Err(Error::Config(format!("empty range [{t_min}, {t_max}]")));
    }
    let mut rows = Vec::with_capacity(a_values.len() * samples);
    for &a in a_values {
        let pen = PenaltyParams::new(a)?;
        for i in 0..samples {
            let t = if i + 1 == samples {
                t_max
            } else {
                t_min + (t_max - t_min) * i as f64 / (samples - 1) as f64
            };
            rows.push((a, t, pen.rho(t)));
        }
    }
    Ok(rows)
}

/// Tab-separated `a  t  rho` with a header line.
pub fn plot_data_tsv(rows: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("a\tt\trho\n");
    for (a, t, r) in rows {
        let _ = writeln!(s, "{a}\t{t}\t{r}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::YearMonth;

    fn ym(y: i32, m: u32) -> YearMonth {
        YearMonth::new(y, m).unwrap()
    }

    #[test]
    fn metrics_single_asset_sum() {
        let r = DMatrix::from_row_slice(3, 2, &[0.01, 0.0, 0.02, 0.0, -0.005, 0.0]);
        let series = portfolio_returns(&r, &[1.0, 0.0]);
        let m = evaluate_returns(&series, false, false, Units::Decimal).unwrap();
        assert!((m.m - 0.025).abs() < 1e-15);
        assert!((m.sharpe * m.sigma - m.m).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_gives_sentinel() {
        let m = evaluate_returns(&[0.01; 12], false, true, Units::Decimal).unwrap();
        assert_eq!(m.sigma, 0.0);
        assert_eq!(m.sharpe, f64::INFINITY);
        assert!(evaluate_returns(&[0.0; 4], false, false, Units::Decimal).unwrap().sharpe.is_nan());
        assert_eq!(evaluate_returns(&[-0.01; 4], false, false, Units::Decimal).unwrap().sharpe, f64::NEG_INFINITY);
    }

    #[test]
    fn variance_uses_sample_divisor() {
        let m = evaluate_returns(&[0.0, 0.02], false, false, Units::Decimal).unwrap();
        assert!((m.sigma - 2e-4).abs() < 1e-18);
        let pct = evaluate_returns(&[0.0, 0.02], false, false, Units::Percent).unwrap();
        assert!((pct.m - 2.0).abs() < 1e-12 && (pct.sigma - 2.0).abs() < 1e-12);
        let comp = evaluate_returns(&[0.1, 0.1], true, false, Units::Decimal).unwrap();
        assert!((comp.m - 0.21).abs() < 1e-15);
    }

    #[test]
    fn plot_data_examples() {
        let rows = emit_penalty_plot_data(&[1.0], -5.0, 5.0, 3).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!((rows[0].1, rows[1].1, rows[2].1), (-5.0, 0.0, 5.0));
        assert!((rows[0].2 - 5.0 / 6.0).abs() < 1e-15 && rows[1].2 == 0.0 && (rows[2].2 - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(emit_penalty_plot_data(&[2.0], 0.0, 1.0, 2).unwrap().len(), 2);
        assert!(emit_penalty_plot_data(&[1.0], 0.0, 1.0, 1).is_err());
        let tsv = plot_data_tsv(&rows);
        assert!(tsv.starts_with("a\tt\trho\n"));
        assert_eq!(tsv.lines().count(), 4);
    }

    fn constant_panel() -> ReturnsPanel {
        let dates: Vec<_> = ym(2000, 1).range_inclusive(ym(2001, 12)).collect();
        let t = dates.len();
        ReturnsPanel::new(
            dates,
            vec!["A".into(), "B".into(), "C".into()],
            DMatrix::from_fn(t, 3, |i, j| 0.01 + 0.001 * (((i * 7 + j * 3) % 5) as f64)),
        )
        .unwrap()
    }

    fn small_plan() -> WindowPlan {
        WindowPlan::consecutive(ym(2001, 1), 2, 6, 12, true)
    }

    #[test]
    fn empty_methods_give_header_only() {
        let cfg = BacktestConfig::new(vec![], vec![1], SolverConfig::target(1.0, 1.0, 1));
        let report = run_backtest(&constant_panel(), &small_plan(), &cfg).unwrap();
        assert!(report.cells.is_empty());
        let csv = String::from_utf8(emit_report(&report, ReportFormat::Csv).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 1);
        let md = String::from_utf8(emit_report(&report, ReportFormat::Markdown).unwrap()).unwrap();
        assert!(md.contains("| Period |"));
    }

    #[test]
    fn one_cell_report_has_single_data_row() {
        let cfg = BacktestConfig::new(vec![Method::Markowitz], vec![], SolverConfig::target(1.0, 1.0, 1));
        let plan = WindowPlan::consecutive(ym(2001, 1), 1, 12, 12, true);
        let report = run_backtest(&constant_panel(), &plan, &cfg).unwrap();
        // one sub-period cell plus its aggregate
        assert_eq!(report.cells.len(), 2);
        let csv = String::from_utf8(emit_report(&report, ReportFormat::Csv).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let cfg = BacktestConfig {
            stddev_sharpe: true,
            ..BacktestConfig::new(vec![Method::Ifpt, Method::Markowitz], vec![1, 2], SolverConfig::target(1.0, 1.0, 1))
        };
        let mut report = run_backtest(&constant_panel(), &small_plan(), &cfg).unwrap();
        report.cells[0].metrics = Some(CellMetrics {
            m: 0.1,
            sigma: 0.0,
            sharpe: f64::INFINITY,
            sharpe_stddev: Some(f64::NAN),
        });
        let a = emit_report(&report, ReportFormat::Json).unwrap();
        let back: BacktestReport = serde_json::from_slice(&a).unwrap();
        let b = emit_report(&back, ReportFormat::Json).unwrap();
        assert_eq!(String::from_utf8(a).unwrap(), String::from_utf8(b).unwrap());
    }

    #[test]
    fn aggregate_m_is_sum_of_periods() {
        let cfg = BacktestConfig::new(vec![Method::Ifpt, Method::Markowitz], vec![2], SolverConfig::target(1.0, 1.0, 2));
        let report = run_backtest(&constant_panel(), &small_plan(), &cfg).unwrap();
        for (m, k) in report.columns() {
            let parts: f64 = (0..2).map(|p| report.cell(m, k, Some(p)).unwrap().metrics.as_ref().unwrap().m).sum();
            let agg = report.cell(m, k, None).unwrap().metrics.as_ref().unwrap().m;
            assert!((parts - agg).abs() < 1e-12);
        }
    }
}
