//! Solves a one-day problem and prints the initial values and the optimal
//! margins along the price axis.

use convex_switching::config::RunConfig;
use convex_switching::experiment::Experiment;

fn main() -> convex_switching::Result<()> {
    let mut config = RunConfig::case_study();
    config.horizon = 48;
    config.battery.p_max = 50.0;
    config.grid.count = 201;
    config.sampling.count = 2000;
    let exp = Experiment::new(config)?;
    let result = exp.solve()?;

    let levels = exp.model().lattice().levels();
    for (level, value) in levels.iter().zip(exp.initial_values(&result)?) {
        println!("v0({level:>4}) = {value:>10.3}");
    }

    println!("margin at t = 0 by level (rows) and z2 (columns)");
    let z2s = [-4.0, -2.0, 0.0, 2.0, 4.0];
    println!("      {}", z2s.map(|z| format!("{z:>6}")).join(""));
    for (p, level) in levels.iter().enumerate() {
        let row: Vec<String> = z2s
            .iter()
            .map(|&z| {
                let a = result
                    .policy(exp.model(), exp.price(), 0, p, [1.0, z])
                    .unwrap();
                format!("{:>6}", exp.model().actions().margin(a))
            })
            .collect();
        println!("{level:>5} {}", row.join(""));
    }
    Ok(())
}
