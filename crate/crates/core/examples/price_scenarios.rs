//! Seasonal prices, the quantile disturbance sampling and simulated
//! antithetic price paths.

use convex_switching::stochastic::{
    build_disturbance_sampling, make_case_study_price, simulate_paths, Ar1Params,
};

fn main() -> convex_switching::Result<()> {
    let params = Ar1Params::new(0.0, 0.5, 0.9)?;
    let sampling = build_disturbance_sampling(params, 9)?;
    println!(
        "quantile innovations (weight {:.4} each):",
        sampling.weights()[0]
    );
    for b in sampling.innovations() {
        println!("  {b:>8.4}");
    }

    let horizon = 48;
    let price = make_case_study_price(horizon)?;
    let paths = simulate_paths(params, [1.0, 0.0], horizon, 4, 1, 7)?;
    println!("t, u_t, v_t, price on paths 0..4 (paths 2 and 3 mirror 0 and 1)");
    for t in (0..=horizon).step_by(6) {
        let prices: Vec<String> = (0..paths.paths())
            .map(|k| format!("{:>7.3}", price.price(t, paths.state(k, t)[1]).unwrap()))
            .collect();
        println!(
            "{t:>3} {:>6.3} {:>6.3} {}",
            price.intercept(t),
            price.slope(t),
            prices.join(" ")
        );
    }
    Ok(())
}
