//! Battery level transitions, expected excess and shortage, and the
//! reward collected for a margin at a given price.

use convex_switching::battery::{
    ActionSet, BatteryLattice, BatteryModel, DemandModel, GridPrices, ScrapMode,
};
use convex_switching::stochastic::make_case_study_price;

fn main() -> convex_switching::Result<()> {
    let model = BatteryModel::new(
        BatteryLattice::new(0.0, 100.0, 5.0)?,
        ActionSet::uniform(11, 5.0)?,
        DemandModel::new(10.0)?,
        GridPrices::new(0.0, 20.0)?,
        ScrapMode::Sell,
    );
    let price = make_case_study_price(335)?;
    let lattice = model.lattice();

    for (p, a) in [(0, 0), (4, 2), (20, 10)] {
        let level = lattice.level(p);
        let margin = model.actions().margin(a);
        println!(
            "level {level}, margin {margin}: excess {:.4}, shortage {:.4}",
            model.excess(p, a),
            model.shortage(p, a)
        );
        for (q, prob) in model.alpha(p, a).iter().enumerate() {
            if *prob > 1e-4 {
                println!("  -> {:>5} with probability {prob:.4}", lattice.level(q));
            }
        }
    }

    println!("reward at t = 0 from level 50 for every margin, z2 = 0 and z2 = 2:");
    for a in 0..model.action_count() {
        println!(
            "  margin {:>4}: {:>9.3} {:>9.3}",
            model.actions().margin(a),
            model.exact_reward(0, 10, a, [1.0, 0.0], &price)?,
            model.exact_reward(0, 10, a, [1.0, 2.0], &price)?
        );
    }
    Ok(())
}
