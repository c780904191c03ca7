//! `fracport`: sparse portfolio solves, backtests and self-checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod selftest;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fracport::YearMonth;

use config::{parse_pairs, RunConfig, SyntheticUniverse};
use error::CliError;

#[derive(Parser)]
#[command(name = "fracport", version, about = "Sparse mean-variance portfolios with the fraction penalty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one portfolio problem on an estimation window.
    Solve(RunArgs),
    /// Run the rolling out-of-sample backtest.
    Backtest(RunArgs),
    /// Check the numerical core against brute-force oracles.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write penalty curves as TSV.
    PlotData(RunArgs),
    /// Write a seeded synthetic returns panel.
    Synth {
        #[arg(long, value_enum, default_value_t = UniverseArg::Ff48)]
        universe: UniverseArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "197107")]
        first: String,
        #[arg(long, default_value = "200606")]
        last: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract one table from a raw Fama-French download.
    Convert {
        #[arg(long)]
        raw: PathBuf,
        /// 1-based line of the column header.
        #[arg(long)]
        header_line: usize,
        /// 1-based first data line.
        #[arg(long)]
        first_line: usize,
        /// 1-based last data line (inclusive).
        #[arg(long)]
        last_line: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum UniverseArg {
    Ff48,
    Ff100,
}

/// Flags override the matching config-file keys.
#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Returns CSV, or synthetic:ff48 / synthetic:ff100.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Comma-separated: ifpt, infpt, markowitz, l1.
    #[arg(long)]
    method: Option<String>,
    /// Target sparsity, or a comma-separated list for backtests.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Estimate every sub-period on the first estimation window.
    #[arg(long)]
    fixed_estimation: bool,
    /// Any other config key, as KEY=VALUE.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                parse_pairs(&text)?
            }
            None => BTreeMap::new(),
        };
        let mut put = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                pairs.insert(k.to_string(), v.clone());
            }
        };
        put("data", &self.data);
        put("out", &self.out);
        put("methods", &self.method);
        put("ks", &self.k);
        put("lambda", &self.lambda);
        put("a", &self.a);
        put("eta", &self.eta);
        put("epsilon", &self.epsilon);
        put("seed", &self.seed);
        if self.fixed_estimation {
            pairs.insert("fixed_estimation".into(), "true".into());
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set '{kv}': expected KEY=VALUE")))?;
            let extra = parse_pairs(&format!("{} = {}", k.trim(), v.trim()))?;
            pairs.extend(extra);
        }
        RunConfig::from_pairs(&pairs)
    }
}

fn parse_month(s: &str) -> Result<YearMonth, CliError> {
    s.parse()
        .map_err(|_| CliError::Config(format!("'{s}' is not a month as YYYYMM")))
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Solve(args) => commands::cmd_solve(&args.resolve()?),
        Command::Backtest(args) => commands::cmd_backtest(&args.resolve()?),
        Command::PlotData(args) => commands::cmd_plot_data(&args.resolve()?),
        Command::Selftest { seed } => {
            let checks = selftest::run(seed);
            let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
            for c in &checks {
                println!("{:<width$}  {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                return Err(CliError::Solver(format!("{failed} self-test checks failed")));
            }
            Ok(format!("all {} checks passed", checks.len()))
        }
        Command::Synth {
            universe,
            seed,
            first,
            last,
            out,
        } => {
            let u = match universe {
                UniverseArg::Ff48 => SyntheticUniverse::Ff48,
                UniverseArg::Ff100 => SyntheticUniverse::Ff100,
            };
            commands::cmd_synth(u, seed, parse_month(&first)?, parse_month(&last)?, &out)
        }
        Command::Convert {
            raw,
            header_line,
            first_line,
            last_line,
            out,
        } => commands::cmd_convert(&raw, header_line, first_line, last_line, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(CliError::Config(String::new()).exit_code());
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fracport: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
