//! Oracles shared by the integration tests. Nothing here calls the crate's
//! operators or closed forms; models are only read through their public
//! tables.

#![allow(dead_code)]

use convex_switching::battery::{
    ActionSet, BatteryLattice, BatteryModel, DemandModel, GridPrices, ScrapMode,
};
use convex_switching::pwc::{FunctionMatrix, Grid};
use convex_switching::stochastic::{
    build_disturbance_sampling, Ar1Params, DisturbanceSampling, SeasonalPrice, TrigSeason,
};
use rand::Rng;

/// Upper quartile of the standard normal distribution.
pub const Q75: f64 = 0.674_489_750_196_081_7;

pub fn normal_density(x: f64, mean: f64, sd: f64) -> f64 {
    let u = (x - mean) / sd;
    (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adapt(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adapt(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let f: &dyn Fn(f64) -> f64 = &f;
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (lo, hi) = (a + h * k as f64, a + h * (k + 1) as f64);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = simpson(lo, hi, fa, fm, fb);
            adapt(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// `∫_{cut}^∞ (x − p_max) N(mean, sd)(dx)` by quadrature.
pub fn quad_excess(p_max: f64, cut: f64, mean: f64, sd: f64) -> f64 {
    let hi = mean.max(cut) + 40.0 * sd;
    integrate(
        |x| (x - p_max) * normal_density(x, mean, sd),
        cut,
        hi,
        1e-12,
    )
}

/// `∫_{−∞}^{cut} (p_min − x) N(mean, sd)(dx)` by quadrature.
pub fn quad_shortage(p_min: f64, cut: f64, mean: f64, sd: f64) -> f64 {
    let lo = mean.min(cut) - 40.0 * sd;
    integrate(
        |x| (p_min - x) * normal_density(x, mean, sd),
        lo,
        cut,
        1e-12,
    )
}

/// `N(mean, sd)([lo, hi])` by quadrature, infinite ends truncated at 40 sd.
pub fn quad_mass(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    let lo = lo.max(mean - 40.0 * sd);
    let hi = hi.min(mean + 40.0 * sd);
    integrate(|x| normal_density(x, mean, sd), lo, hi, 1e-13)
}

/// Random convex function with `rows` random affine pieces on `ℝ²`.
pub fn random_convex(rng: &mut impl Rng, rows: usize) -> FunctionMatrix {
    let data: Vec<f64> = (0..rows * 2)
        .map(|_| rng.random_range(-10.0..10.0))
        .collect();
    FunctionMatrix::new(rows, 2, data).unwrap()
}

/// Random grid of distinct points `(1, s)` sorted by `s`.
pub fn random_line_grid(rng: &mut impl Rng, count: usize) -> Grid {
    let mut s: Vec<f64> = (0..count).map(|_| rng.random_range(-5.0..5.0)).collect();
    s.sort_by(f64::total_cmp);
    s.dedup();
    Grid::new(s.into_iter().map(|x| vec![1.0, x]).collect()).unwrap()
}

/// Small but fully featured problem: three levels, two margins, three
/// disturbances, three steps, eleven grid points.
pub struct SmallInstance {
    pub model: BatteryModel,
    pub price: SeasonalPrice,
    pub sampling: DisturbanceSampling,
    pub grid: Grid,
    /// `(innovation, weight)` pairs built from the known quartile.
    pub draws: Vec<(f64, f64)>,
    pub phi: f64,
}

pub fn small_instance(scrap: ScrapMode) -> SmallInstance {
    let (mu, sigma, phi) = (0.1, 0.5, 0.8);
    let model = BatteryModel::new(
        BatteryLattice::new(0.0, 10.0, 5.0).unwrap(),
        ActionSet::new(vec![0.0, 5.0]).unwrap(),
        DemandModel::new(3.0).unwrap(),
        GridPrices::new(2.0, 20.0).unwrap(),
        scrap,
    );
    let price = SeasonalPrice::trig(
        3,
        TrigSeason {
            period: 5.0,
            ..TrigSeason::CASE_STUDY
        },
    )
    .unwrap();
    let sampling = build_disturbance_sampling(Ar1Params::new(mu, sigma, phi).unwrap(), 3).unwrap();
    let grid = Grid::line(11, -5.0, 5.0).unwrap();
    let draws = [-Q75, 0.0, Q75]
        .iter()
        .map(|q| (mu + sigma * q, 1.0 / 3.0))
        .collect();
    SmallInstance {
        model,
        price,
        sampling,
        grid,
        draws,
        phi,
    }
}

type Row = [f64; 2];

fn dot(r: &Row, z: &Row) -> f64 {
    r[0] * z[0] + r[1] * z[1]
}

/// `W(n) z` for `W = [[1, 0], [b, φ]]`.
fn apply_w(b: f64, phi: f64, z: &Row) -> Row {
    [z[0], b * z[0] + phi * z[1]]
}

/// `rowᵀ W`, the coefficients of `z ↦ row · (W z)`.
fn pull_back(row: &Row, b: f64, phi: f64) -> Row {
    [row[0] + row[1] * b, row[1] * phi]
}

/// First row attaining `max_j rows[j] · z`.
fn active(rows: &[Row], z: &Row) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (j, r) in rows.iter().enumerate() {
        let v = dot(r, z);
        if v > best_v {
            best_v = v;
            best = j;
        }
    }
    best
}

/// Tangent rows of the grid-modified recursion, evaluated point by point:
/// `rows[t][p][i]` is the tangent of `v_t(p, ·)` at grid point `i`, and
/// `expected[t][p][i]` the tangent of `v^E_t(p, ·)` (index `t − 1`).
pub struct TangentOracle {
    pub rows: Vec<Vec<Vec<Row>>>,
    pub expected: Vec<Vec<Vec<Row>>>,
}

/// Enumerates the recursion from the scrap value backwards. The
/// expectation at grid point `gⁱ` sums, over every draw, the tangent of
/// `v_{t+1}` that is active at `W(n) gⁱ`, pulled back through `W(n)`; the
/// maximization keeps, per grid point, the first action with the largest
/// value there.
pub fn tangent_oracle(
    model: &BatteryModel,
    price: &SeasonalPrice,
    draws: &[(f64, f64)],
    phi: f64,
    grid_s: &[f64],
) -> TangentOracle {
    let horizon = price.horizon();
    let np = model.levels();
    let m = grid_s.len();
    let points: Vec<Row> = grid_s.iter().map(|&s| [1.0, s]).collect();
    let mut rows = vec![Vec::new(); horizon + 1];
    let mut expected = vec![Vec::new(); horizon];
    rows[horizon] = (0..np)
        .map(|p| vec![model.scrap_coeffs(p, price); m])
        .collect();
    for t in (0..horizon).rev() {
        let next: &Vec<Vec<Row>> = &rows[t + 1];
        let ve: Vec<Vec<Row>> = next
            .iter()
            .map(|vrows| {
                points
                    .iter()
                    .map(|g| {
                        let mut acc = [0.0; 2];
                        for &(b, w) in draws {
                            let j = active(vrows, &apply_w(b, phi, g));
                            let r = pull_back(&vrows[j], b, phi);
                            acc[0] += w * r[0];
                            acc[1] += w * r[1];
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let cur: Vec<Vec<Row>> = (0..np)
            .map(|p| {
                points
                    .iter()
                    .enumerate()
                    .map(|(i, g)| {
                        let mut best = [0.0; 2];
                        let mut best_v = f64::NEG_INFINITY;
                        for a in 0..model.action_count() {
                            let mut r = model.reward_coeffs(t, p, a, price);
                            for (q, &prob) in model.alpha(p, a).iter().enumerate() {
                                r[0] += prob * ve[q][i][0];
                                r[1] += prob * ve[q][i][1];
                            }
                            let v = dot(&r, g);
                            if v > best_v {
                                best_v = v;
                                best = r;
                            }
                        }
                        best
                    })
                    .collect()
            })
            .collect();
        expected[t] = ve;
        rows[t] = cur;
    }
    TangentOracle { rows, expected }
}

/// Unmodified backward induction evaluated on the full scenario tree:
/// `V_t(p, z) = max_a r_t(p, z, a) + Σ_{p'} α Σ_n ν(n) V_{t+1}(p', W(n) z)`.
pub fn tree_value(
    model: &BatteryModel,
    price: &SeasonalPrice,
    draws: &[(f64, f64)],
    phi: f64,
    t: usize,
    z: Row,
) -> Vec<f64> {
    let np = model.levels();
    if t == price.horizon() {
        return (0..np)
            .map(|p| dot(&model.scrap_coeffs(p, price), &z))
            .collect();
    }
    let mut ev = vec![0.0; np];
    for &(b, w) in draws {
        let next = tree_value(model, price, draws, phi, t + 1, apply_w(b, phi, &z));
        for (e, v) in ev.iter_mut().zip(next) {
            *e += w * v;
        }
    }
    (0..np)
        .map(|p| {
            (0..model.action_count())
                .map(|a| {
                    let r = dot(&model.reward_coeffs(t, p, a, price), &z);
                    r + model
                        .alpha(p, a)
                        .iter()
                        .zip(&ev)
                        .map(|(x, y)| x * y)
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}
