use criterion::{criterion_group, criterion_main, Criterion};
use fracport::backtest::{run_backtest, BacktestConfig, Method};
use fracport::{SolverConfig, WindowPlan, YearMonth};
use fracport_bench::industry_panel;

fn two_period_backtest(c: &mut Criterion) {
    let panel = industry_panel(3, (1976, 1), (1985, 12));
    let plan = WindowPlan::consecutive(YearMonth::new(1981, 1).unwrap(), 2, 24, 60, true);
    let mut solver = SolverConfig::target(1.0, 1.0, 6);
    solver.max_iters = 2000;
    let cfg = BacktestConfig::new(vec![Method::Ifpt, Method::Markowitz], vec![6, 10], solver);
    let mut g = c.benchmark_group("backtest");
    g.sample_size(10);
    g.bench_function("ff48_two_periods", |b| b.iter(|| run_backtest(&panel, &plan, &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, two_period_backtest);
criterion_main!(benches);
