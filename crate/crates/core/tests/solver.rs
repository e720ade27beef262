mod common;

use common::{small_instance, tangent_oracle, tree_value, Q75};
use convex_switching::battery::{
    ActionSet, BatteryLattice, BatteryModel, DemandModel, GridPrices, ScrapMode,
};
use convex_switching::pwc::Grid;
use convex_switching::solver::{solve, solve_with, Expectation, SolveOptions};
use convex_switching::stochastic::{
    build_disturbance_sampling, Ar1Params, DisturbanceSampling, SeasonalPrice, TrigSeason,
};

#[test]
fn small_instance_matches_tangent_enumeration() {
    for scrap in [ScrapMode::Sell, ScrapMode::Zero] {
        let inst = small_instance(scrap);
        for (k, b) in inst.sampling.innovations().iter().enumerate() {
            assert!((b - inst.draws[k].0).abs() < 1e-15);
        }
        let s = inst.grid.line_abscissae().unwrap().to_vec();
        let oracle = tangent_oracle(&inst.model, &inst.price, &inst.draws, inst.phi, &s);
        for route in [Expectation::Auto, Expectation::Direct] {
            let res = solve_with(
                &inst.model,
                &inst.price,
                &inst.sampling,
                &inst.grid,
                SolveOptions { expectation: route },
            )
            .unwrap();
            for t in 0..=3 {
                for p in 0..3 {
                    for (i, &x) in s.iter().enumerate() {
                        let z = [1.0, x];
                        let r = oracle.rows[t][p][i];
                        let want = r[0] + r[1] * x;
                        let got = res.value_at(t, p, &z).unwrap();
                        assert!(
                            (got - want).abs() < 1e-8,
                            "{route:?} t={t} p={p} i={i}: {got} vs {want}"
                        );
                        if t >= 1 {
                            let r = oracle.expected[t - 1][p][i];
                            let want = r[0] + r[1] * x;
                            let got = res.expected_value_at(t, p, &z).unwrap();
                            assert!((got - want).abs() < 1e-8);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn modified_values_never_exceed_the_scenario_tree() {
    let inst = small_instance(ScrapMode::Sell);
    let res = solve(&inst.model, &inst.price, &inst.sampling, &inst.grid).unwrap();
    for t in 0..=3 {
        for g in inst.grid.points() {
            let exact = tree_value(
                &inst.model,
                &inst.price,
                &inst.draws,
                inst.phi,
                t,
                [g[0], g[1]],
            );
            for (p, e) in exact.iter().enumerate() {
                let v = res.value_at(t, p, g).unwrap();
                assert!(v <= e + 1e-9, "t={t} p={p} z={g:?}: {v} > {e}");
            }
        }
    }
}

#[test]
fn expectation_dominates_value_at_mean_map() {
    let inst = small_instance(ScrapMode::Sell);
    let res = solve(&inst.model, &inst.price, &inst.sampling, &inst.grid).unwrap();
    let mean_b: f64 = inst.draws.iter().map(|(b, w)| b * w).sum();
    for t in 1..=3 {
        for p in 0..3 {
            for g in inst.grid.points() {
                let mapped = [1.0, mean_b + inst.phi * g[1]];
                let jensen = res.value_at(t, p, &mapped).unwrap();
                let ve = res.expected_value_at(t, p, g).unwrap();
                assert!(ve >= jensen - 1e-10, "t={t} p={p} z={g:?}");
            }
        }
    }
}

fn deterministic_setup() -> (
    BatteryModel,
    SeasonalPrice,
    DisturbanceSampling,
    Grid,
    f64,
    f64,
) {
    let (mu, phi) = (0.3, 0.9);
    let model = BatteryModel::new(
        BatteryLattice::new(0.0, 20.0, 5.0).unwrap(),
        ActionSet::new(vec![5.0]).unwrap(),
        DemandModel::new(4.0).unwrap(),
        GridPrices::new(1.0, 20.0).unwrap(),
        ScrapMode::Sell,
    );
    let price = SeasonalPrice::trig(10, TrigSeason::CASE_STUDY).unwrap();
    let sampling = build_disturbance_sampling(Ar1Params::new(mu, 0.0, phi).unwrap(), 4).unwrap();
    let grid = Grid::line(21, -3.0, 3.0).unwrap();
    (model, price, sampling, grid, mu, phi)
}

#[test]
fn single_action_without_noise_accumulates_rewards() {
    let (model, price, sampling, grid, mu, phi) = deterministic_setup();
    let res = solve(&model, &price, &sampling, &grid).unwrap();
    let np = model.levels();
    for z2 in [-3.0, -0.45, 0.0, 1.7, 3.0, 6.0] {
        for p0 in 0..np {
            let mut dist = vec![0.0; np];
            dist[p0] = 1.0;
            let mut z = z2;
            let mut total = 0.0;
            for t in 0..10 {
                for (p, &w) in dist.iter().enumerate() {
                    let c = model.reward_coeffs(t, p, 0, &price);
                    total += w * (c[0] + c[1] * z);
                }
                let mut next = vec![0.0; np];
                for (p, &w) in dist.iter().enumerate() {
                    for (q, &a) in model.alpha(p, 0).iter().enumerate() {
                        next[q] += w * a;
                    }
                }
                dist = next;
                z = mu + phi * z;
            }
            for (p, &w) in dist.iter().enumerate() {
                let level = model.lattice().level(p);
                total += w * level * (price.intercept(10) + price.slope(10) * z);
            }
            let got = res.value_at(0, p0, &[1.0, z2]).unwrap();
            assert!(
                (got - total).abs() < 1e-9 * (1.0 + total.abs()),
                "p0={p0} z2={z2}: {got} vs {total}"
            );
        }
    }
}

#[test]
fn one_step_with_zero_rewards_is_zero() {
    let model = BatteryModel::new(
        BatteryLattice::new(0.0, 10.0, 5.0).unwrap(),
        ActionSet::new(vec![0.0]).unwrap(),
        DemandModel::new(1e-3).unwrap(),
        GridPrices::new(0.0, 20.0).unwrap(),
        ScrapMode::Zero,
    );
    let price = SeasonalPrice::trig(1, TrigSeason::CASE_STUDY).unwrap();
    let sampling = build_disturbance_sampling(Ar1Params::new(0.0, 0.5, 0.9).unwrap(), 5).unwrap();
    let grid = Grid::line(5, -2.0, 2.0).unwrap();
    let res = solve(&model, &price, &sampling, &grid).unwrap();
    for p in 1..3 {
        for g in grid.points() {
            assert_eq!(res.value_at(0, p, g).unwrap(), 0.0);
        }
    }
    assert_eq!(res.policy(&model, &price, 0, 2, [1.0, 0.3]).unwrap(), 0);
}

#[test]
fn value_functions_are_convex_along_lines() {
    let inst = small_instance(ScrapMode::Sell);
    let res = solve(&inst.model, &inst.price, &inst.sampling, &inst.grid).unwrap();
    for t in 0..3 {
        for p in 0..3 {
            for k in 0..200 {
                let a = -8.0 + 0.08 * k as f64;
                let b = a + 1.3;
                let mid = 0.5 * (a + b);
                let f = |x: f64| res.value_at(t, p, &[1.0, x]).unwrap();
                assert!(f(mid) <= 0.5 * (f(a) + f(b)) + 1e-9);
                let e = |x: f64| res.expected_value_at(t + 1, p, &[1.0, x]).unwrap();
                assert!(e(mid) <= 0.5 * (e(a) + e(b)) + 1e-9);
            }
        }
    }
}

#[test]
fn noiseless_expectation_is_composition() {
    let (model, price, sampling, grid, mu, phi) = deterministic_setup();
    let res = solve(&model, &price, &sampling, &grid).unwrap();
    for t in 1..=10 {
        for p in 0..model.levels() {
            for g in grid.points() {
                let direct = res.value_at(t, p, &[1.0, mu + phi * g[1]]).unwrap();
                let ve = res.expected_value_at(t, p, g).unwrap();
                assert!((ve - direct).abs() < 1e-9 * (1.0 + direct.abs()));
            }
        }
    }
}

#[test]
fn quartile_constant_is_the_upper_quartile() {
    let mass = common::integrate(|x| common::normal_density(x, 0.0, 1.0), -40.0, Q75, 1e-15);
    assert!((mass - 0.75).abs() < 1e-12);
}
