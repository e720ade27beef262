//! Full case study: solve, then lower and upper bounds for every starting
//! level from nested simulation.

use std::time::Instant;

use convex_switching::config::RunConfig;
use convex_switching::diagnostics::BoundOptions;
use convex_switching::experiment::Experiment;

fn main() -> convex_switching::Result<()> {
    let exp = Experiment::new(RunConfig::case_study())?;
    let start = Instant::now();
    let result = exp.solve()?;
    println!("solved in {:.1?}", start.elapsed());

    let start = Instant::now();
    let report = exp.diagnose(&result, BoundOptions::default())?;
    println!("diagnosed in {:.1?}", start.elapsed());

    println!("{:>6} {:>18} {:>18}", "level", "lower (se)", "upper (se)");
    for p in 0..report.levels.len() {
        println!(
            "{:>6} {:>10.3} ({:.3}) {:>10.3} ({:.3})",
            report.levels[p],
            report.lower_mean[p],
            report.lower_se[p],
            report.upper_mean[p],
            report.upper_se[p]
        );
    }
    Ok(())
}
