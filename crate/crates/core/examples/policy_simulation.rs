//! Runs the policy forward on fresh price scenarios from an empty and a
//! full battery and compares the cumulated rewards.

use convex_switching::config::RunConfig;
use convex_switching::diagnostics::{mean_and_se, simulate_policy};
use convex_switching::experiment::Experiment;
use convex_switching::solver::Evaluation;
use convex_switching::stochastic::simulate_paths;

fn main() -> convex_switching::Result<()> {
    let mut config = RunConfig::case_study();
    config.horizon = 96;
    config.grid.count = 201;
    config.sampling.count = 2000;
    let exp = Experiment::new(config)?;
    let result = exp.solve()?;
    let scenarios = simulate_paths(exp.ar1(), [1.0, 0.0], 96, 2000, 1, 99)?;

    for start in [0.0, 100.0] {
        let p = exp.level_index(start)?;
        let traces = simulate_policy(
            &result,
            &scenarios,
            exp.model(),
            exp.price(),
            p,
            5,
            Evaluation::Exact,
        )?;
        let totals: Vec<f64> = traces.iter().map(|t| t.total()).collect();
        let (mean, se) = mean_and_se(&totals);
        let mut sorted = totals.clone();
        sorted.sort_by(f64::total_cmp);
        println!(
            "start {start:>5}: mean {mean:>10.2} (se {se:.2}), 5% {:>10.2}, 95% {:>10.2}",
            sorted[sorted.len() / 20],
            sorted[sorted.len() * 19 / 20]
        );
        let mean_level = |t: usize| {
            traces
                .iter()
                .map(|tr| exp.model().lattice().level(tr.levels[t]))
                .sum::<f64>()
                / traces.len() as f64
        };
        println!(
            "  mean level at t = 0, 24, 48, 72, 96: {:?}",
            [0, 24, 48, 72, 96].map(mean_level)
        );
    }
    Ok(())
}
