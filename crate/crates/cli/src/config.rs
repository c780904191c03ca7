//! Flat `key = value` run configuration.
//!
//! Values come from an optional config file and are then overridden by
//! command-line flags. Unknown keys are rejected. [`RunConfig::to_text`]
//! writes every key with its effective value, so a run can be repeated from
//! the echoed file alone.

use std::collections::BTreeMap;
use std::path::PathBuf;

use fracport::backtest::{Method, Units};
use fracport::data::MissingPolicy;
use fracport::{Window, WindowPlan, YearMonth};

use crate::error::CliError;

/// Synthetic stand-in used when no data file is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticUniverse {
    Ff48,
    Ff100,
}

impl SyntheticUniverse {
    pub fn name(&self) -> &'static str {
        match self {
            SyntheticUniverse::Ff48 => "ff48",
            SyntheticUniverse::Ff100 => "ff100",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Synthetic(SyntheticUniverse),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanSpec {
    SixPeriods,
    /// `count` back-to-back evaluation windows starting at `first_eval`.
    Consecutive {
        first_eval: YearMonth,
        count: usize,
        eval_months: usize,
        est_months: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub missing: MissingPolicy,
    pub plan: PlanSpec,
    pub fixed_estimation: bool,
    /// Estimation window for `solve`; the whole panel when absent.
    pub window: Option<Window>,
    pub methods: Vec<Method>,
    pub ks: Vec<usize>,
    pub lambda: Option<f64>,
    pub a: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub tol_x: Option<f64>,
    pub tol_obj: f64,
    pub l1_max_iters: usize,
    pub l1_tol: f64,
    pub l1_bisection_steps: usize,
    pub units: Units,
    pub compound: bool,
    pub stddev_sharpe: bool,
    pub seed: u64,
    /// Extra random starts for `solve`; the lowest objective wins.
    pub random_starts: usize,
    pub out: PathBuf,
    pub plot_a: Vec<f64>,
    pub plot_t_min: f64,
    pub plot_t_max: f64,
    pub plot_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(SyntheticUniverse::Ff48),
            missing: MissingPolicy::Error,
            plan: PlanSpec::SixPeriods,
            fixed_estimation: false,
            window: None,
            methods: vec![Method::Ifpt],
            ks: (6..=20).step_by(2).collect(),
            lambda: None,
            a: 1.0,
            eta: 1.0,
            epsilon: 0.01,
            max_iters: 50_000,
            tol_x: None,
            tol_obj: 1e-12,
            l1_max_iters: 50_000,
            l1_tol: 1e-10,
            l1_bisection_steps: 40,
            units: Units::Decimal,
            compound: false,
            stddev_sharpe: false,
            seed: 0,
            random_starts: 0,
            out: PathBuf::from("out"),
            plot_a: vec![0.5, 1.0, 2.0, 5.0, 10.0],
            plot_t_min: -3.0,
            plot_t_max: 3.0,
            plot_samples: 601,
        }
    }
}

pub const KEYS: &[&str] = &[
    "data",
    "missing",
    "plan",
    "fixed_estimation",
    "window",
    "methods",
    "ks",
    "lambda",
    "a",
    "eta",
    "epsilon",
    "max_iters",
    "tol_x",
    "tol_obj",
    "l1_max_iters",
    "l1_tol",
    "l1_bisection_steps",
    "units",
    "compound",
    "stddev_sharpe",
    "seed",
    "random_starts",
    "out",
    "plot_a",
    "plot_t_min",
    "plot_t_max",
    "plot_samples",
];

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("config line {}: unknown key '{key}'", i + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("config line {}: duplicate key '{key}'", i + 1)));
        }
    }
    Ok(out)
}

/// Shortest round-trip text for `v`, in exponent form for very small or
/// large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Config spelling of a method.
pub fn method_key(m: Method) -> &'static str {
    match m {
        Method::Ifpt => "ifpt",
        Method::Infpt => "infpt",
        Method::Markowitz => "markowitz",
        Method::L1 => "l1",
    }
}

fn bad(key: &str, value: &str, expected: &str) -> CliError {
    CliError::Config(format!("{key} = '{value}': expected {expected}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(key, v, "a finite number"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, CliError> {
    v.parse().map_err(|_| bad(key, v, "a nonnegative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, v, "true or false")),
    }
}

fn parse_opt<T>(v: &str, f: impl FnOnce(&str) -> Result<T, CliError>) -> Result<Option<T>, CliError> {
    if v == "none" || v.is_empty() {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

fn parse_ym(key: &str, v: &str) -> Result<YearMonth, CliError> {
    v.parse().map_err(|_| bad(key, v, "a month as YYYYMM"))
}

fn parse_window(key: &str, v: &str) -> Result<Window, CliError> {
    let (s, e) = v.split_once('-').ok_or_else(|| bad(key, v, "YYYYMM-YYYYMM"))?;
    Window::new(parse_ym(key, s.trim())?, parse_ym(key, e.trim())?).map_err(|e| CliError::Config(e.to_string()))
}

fn parse_plan(v: &str) -> Result<PlanSpec, CliError> {
    if v == "six-periods" {
        return Ok(PlanSpec::SixPeriods);
    }
    let expected = "six-periods or FIRST_EVAL:COUNT:EVAL_MONTHS:EST_MONTHS";
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(bad("plan", v, expected));
    }
    let first_eval = parse_ym("plan", parts[0])?;
    let count = parse_usize("plan", parts[1])?;
    let eval_months = parse_usize("plan", parts[2])?;
    let est_months = parse_usize("plan", parts[3])?;
    if count == 0 || eval_months == 0 || est_months == 0 {
        return Err(bad("plan", v, "positive counts"));
    }
    Ok(PlanSpec::Consecutive {
        first_eval,
        count,
        eval_months,
        est_months,
    })
}

impl RunConfig {
    /// Builds a config from `pairs` on top of the defaults.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut c = RunConfig::default();
        for (key, v) in pairs {
            let v = v.as_str();
            let k = key.as_str();
            match k {
                "data" => {
                    c.data = match v {
                        "synthetic:ff48" => DataSource::Synthetic(SyntheticUniverse::Ff48),
                        "synthetic:ff100" => DataSource::Synthetic(SyntheticUniverse::Ff100),
                        _ if v.is_empty() => return Err(bad(k, v, "a path or synthetic:ff48|ff100")),
                        _ => DataSource::File(PathBuf::from(v)),
                    }
                }
                "missing" => {
                    c.missing = match v {
                        "error" => MissingPolicy::Error,
                        "drop-assets" => MissingPolicy::DropAssets,
                        _ => return Err(bad(k, v, "error or drop-assets")),
                    }
                }
                "plan" => c.plan = parse_plan(v)?,
                "fixed_estimation" => c.fixed_estimation = parse_bool(k, v)?,
                "window" => c.window = parse_opt(v, |s| parse_window(k, s))?,
                "methods" => {
                    c.methods = parse_list(v, |s| s.parse::<Method>().map_err(|e| CliError::Config(e.to_string())))?
                }
                "ks" => c.ks = parse_list(v, |s| parse_usize(k, s))?,
                "lambda" => c.lambda = parse_opt(v, |s| parse_f64(k, s))?,
                "a" => c.a = parse_f64(k, v)?,
                "eta" => c.eta = parse_f64(k, v)?,
                "epsilon" => c.epsilon = parse_f64(k, v)?,
                "max_iters" => c.max_iters = parse_usize(k, v)?,
                "tol_x" => c.tol_x = parse_opt(v, |s| parse_f64(k, s))?,
                "tol_obj" => c.tol_obj = parse_f64(k, v)?,
                "l1_max_iters" => c.l1_max_iters = parse_usize(k, v)?,
                "l1_tol" => c.l1_tol = parse_f64(k, v)?,
                "l1_bisection_steps" => c.l1_bisection_steps = parse_usize(k, v)?,
                "units" => {
                    c.units = match v {
                        "decimal" => Units::Decimal,
                        "percent" => Units::Percent,
                        _ => return Err(bad(k, v, "decimal or percent")),
                    }
                }
                "compound" => c.compound = parse_bool(k, v)?,
                "stddev_sharpe" => c.stddev_sharpe = parse_bool(k, v)?,
                "seed" => c.seed = v.parse().map_err(|_| bad(k, v, "an unsigned integer"))?,
                "random_starts" => c.random_starts = parse_usize(k, v)?,
                "out" => c.out = PathBuf::from(v),
                "plot_a" => c.plot_a = parse_list(v, |s| parse_f64(k, s))?,
                "plot_t_min" => c.plot_t_min = parse_f64(k, v)?,
                "plot_t_max" => c.plot_t_max = parse_f64(k, v)?,
                "plot_samples" => c.plot_samples = parse_usize(k, v)?,
                _ => return Err(CliError::Config(format!("unknown key '{k}'"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |m: String| Err(CliError::Config(m));
        if self.methods.is_empty() {
            return cfg("methods must not be empty".into());
        }
        if self.ks.contains(&0) {
            return cfg("ks entries must be >= 1".into());
        }
        if !(self.a > 0.0) {
            return cfg(format!("a must be > 0, got {}", self.a));
        }
        if !(self.eta > 0.0) {
            return cfg(format!("eta must be > 0, got {}", self.eta));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return cfg(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return cfg(format!("lambda must be > 0, got {l}"));
            }
        }
        if self.max_iters == 0 || self.l1_max_iters == 0 {
            return cfg("iteration limits must be >= 1".into());
        }
        if self.tol_x.is_some_and(|t| !(t > 0.0)) || self.tol_obj < 0.0 || !(self.l1_tol > 0.0) {
            return cfg("tolerances must be positive (tol_obj may be 0)".into());
        }
        if self.plot_samples < 2 || !(self.plot_t_min < self.plot_t_max) {
            return cfg("plot range needs plot_t_min < plot_t_max and plot_samples >= 2".into());
        }
        if self.plot_a.iter().any(|a| !(*a > 0.0)) {
            return cfg("plot_a entries must be > 0".into());
        }
        Ok(())
    }

    pub fn window_plan(&self) -> WindowPlan {
        let rolling = !self.fixed_estimation;
        match self.plan {
            PlanSpec::SixPeriods => WindowPlan::six_periods(rolling),
            PlanSpec::Consecutive {
                first_eval,
                count,
                eval_months,
                est_months,
            } => WindowPlan::consecutive(first_eval, count, eval_months, est_months, rolling),
        }
    }

    /// Every key with its effective value, one per line, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let list = |v: &[String]| v.join(",");
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let mut s = String::from("# effective configuration\n");
        for &key in KEYS {
            let value = match key {
                "data" => match &self.data {
                    DataSource::File(p) => p.display().to_string(),
                    DataSource::Synthetic(u) => format!("synthetic:{}", u.name()),
                },
                "missing" => match self.missing {
                    MissingPolicy::Error => "error".into(),
                    MissingPolicy::DropAssets => "drop-assets".into(),
                },
                "plan" => match self.plan {
                    PlanSpec::SixPeriods => "six-periods".into(),
                    PlanSpec::Consecutive {
                        first_eval,
                        count,
                        eval_months,
                        est_months,
                    } => format!("{first_eval}:{count}:{eval_months}:{est_months}"),
                },
                "fixed_estimation" => self.fixed_estimation.to_string(),
                "window" => opt(self.window.map(|w| format!("{}-{}", w.start, w.end))),
                "methods" => list(&self.methods.iter().map(|m| method_key(*m).to_string()).collect::<Vec<_>>()),
                "ks" => list(&self.ks.iter().map(|k| k.to_string()).collect::<Vec<_>>()),
                "lambda" => opt(self.lambda.map(fmt_f64)),
                "a" => fmt_f64(self.a),
                "eta" => fmt_f64(self.eta),
                "epsilon" => fmt_f64(self.epsilon),
                "max_iters" => self.max_iters.to_string(),
                "tol_x" => opt(self.tol_x.map(fmt_f64)),
                "tol_obj" => fmt_f64(self.tol_obj),
                "l1_max_iters" => self.l1_max_iters.to_string(),
                "l1_tol" => fmt_f64(self.l1_tol),
                "l1_bisection_steps" => self.l1_bisection_steps.to_string(),
                "units" => match self.units {
                    Units::Decimal => "decimal".into(),
                    Units::Percent => "percent".into(),
                },
                "compound" => self.compound.to_string(),
                "stddev_sharpe" => self.stddev_sharpe.to_string(),
                "seed" => self.seed.to_string(),
                "random_starts" => self.random_starts.to_string(),
                "out" => self.out.display().to_string(),
                "plot_a" => list(&self.plot_a.iter().map(|&a| fmt_f64(a)).collect::<Vec<_>>()),
                "plot_t_min" => fmt_f64(self.plot_t_min),
                "plot_t_max" => fmt_f64(self.plot_t_max),
                "plot_samples" => self.plot_samples.to_string(),
                _ => unreachable!("every key is listed"),
            };
            s.push_str(&format!("{key} = {value}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let c = RunConfig::default();
        let back = RunConfig::from_pairs(&parse_pairs(&c.to_text()).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn custom_values_round_trip() {
        let text = "data = panel.csv\nmethods = ifpt, l1, markowitz\nks = 4,6\nlambda = 0.001\n\
                    window = 197107-197606\nplan = 198001:3:12:24\nunits = percent\ntol_x = 1e-9\n";
        let c = RunConfig::from_pairs(&parse_pairs(text).unwrap()).unwrap();
        assert_eq!(c.methods, vec![Method::Ifpt, Method::L1, Method::Markowitz]);
        assert_eq!(c.ks, vec![4, 6]);
        assert_eq!(c.lambda, Some(0.001));
        assert_eq!(c.tol_x, Some(1e-9));
        assert!(matches!(c.plan, PlanSpec::Consecutive { count: 3, .. }));
        let back = RunConfig::from_pairs(&parse_pairs(&c.to_text()).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(matches!(parse_pairs("colour = red"), Err(CliError::Config(_))));
        assert!(matches!(parse_pairs("a = 1\na = 2"), Err(CliError::Config(_))));
        assert!(matches!(parse_pairs("just text"), Err(CliError::Config(_))));
    }

    #[test]
    fn rejects_bad_values() {
        for text in ["a = -1", "eta = x", "epsilon = 1", "ks = 0", "methods = lasso", "plan = 1:2", "compound = maybe"] {
            let r = parse_pairs(text).and_then(|p| RunConfig::from_pairs(&p));
            assert!(matches!(r, Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn float_text_round_trips() {
        for v in [1e-12, 0.01, 1.0, 2.5e20, -3e-7, 1234.5] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1e-12), "1e-12");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let p = parse_pairs("# header\n\na = 2 # inline\n").unwrap();
        assert_eq!(p.get("a").map(String::as_str), Some("2"));
    }
}
