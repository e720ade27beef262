//! Sweeps capacity and scrap rule with a coarser grid and sampling and prints
//! the marginal value of extra storage.

use convex_switching::config::Scrap;
use convex_switching::diagnostics::BoundOptions;
use convex_switching::experiment::{sweep, SweepAxes, SweepSpec};

fn main() -> convex_switching::Result<()> {
    let mut spec = SweepSpec::case_study();
    spec.base.grid.count = 201;
    spec.base.sampling.count = 2000;
    spec.base.diagnostics.paths = 50;
    spec.base.diagnostics.subsims = 20;
    spec.blocks = vec![SweepAxes {
        capacity: vec![10.0, 20.0, 40.0, 80.0],
        scrap: vec![Scrap::Sell, Scrap::Zero],
        ..SweepAxes::default()
    }];
    let rows = sweep(&spec.cases(), 0.0, BoundOptions::default())?;

    for scrap in [Scrap::Sell, Scrap::Zero] {
        println!("scrap = {scrap}");
        let mut prev: Option<(f64, f64)> = None;
        for r in rows.iter().filter(|r| r.scrap == scrap) {
            let marginal = prev.map(|(c, v)| (r.lower - v) / (r.capacity - c));
            println!(
                "  capacity {:>5}: lower {:>10.3} upper {:>10.3} marginal {}",
                r.capacity,
                r.lower,
                r.upper,
                marginal.map_or("-".to_string(), |m| format!("{m:.3}"))
            );
            prev = Some((r.capacity, r.lower));
        }
    }
    Ok(())
}
