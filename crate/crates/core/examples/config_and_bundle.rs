//! Reads a TOML configuration, solves it, stores the result in a bundle and
//! reloads it for diagnostics.

use convex_switching::bundle::Bundle;
use convex_switching::config::RunConfig;
use convex_switching::diagnostics::BoundOptions;
use convex_switching::experiment::Experiment;

const CONFIG: &str = r#"
horizon = 24
scrap = "zero"

[battery]
p_max = 20.0

[ar1]
phi = 0.6

[grid]
count = 101

[sampling]
count = 1000

[diagnostics]
paths = 40
subsims = 20
seed = 3
"#;

fn main() -> convex_switching::Result<()> {
    let config = RunConfig::from_toml_str(CONFIG)?;
    let exp = Experiment::new(config.clone())?;
    let result = exp.solve()?;

    let path = std::env::temp_dir().join("config_and_bundle.bin");
    Bundle::new(config, result).save(&path)?;
    let bundle = Bundle::load(&path)?;
    println!(
        "bundle {} ({} bytes)",
        path.display(),
        std::fs::metadata(&path)?.len()
    );

    let exp = Experiment::new(bundle.config.clone())?;
    exp.check_result(&bundle.result)?;
    let report = exp.diagnose(&bundle.result, BoundOptions::default())?;
    for p in 0..report.levels.len() {
        println!(
            "level {:>4}: [{:.3}, {:.3}]",
            report.levels[p], report.lower_mean[p], report.upper_mean[p]
        );
    }
    std::fs::remove_file(&path)?;

    match RunConfig::from_toml_str("[ar1]\nphi = \"fast\"\n") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }
    Ok(())
}
