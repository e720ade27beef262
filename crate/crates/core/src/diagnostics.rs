//! Primal and dual Monte Carlo bounds for the policy value.
//!
//! Along each sample path the martingale increments
//!
//! ```text
//! φ^k_{t+1}(p, a) = Σ_{p'} α^a_{p,p'} ( (1/I) Σ_i v_{t+1}(p', w^{i,k}_{t+1} z^k_t) − v_{t+1}(p', z^k_{t+1}) )
//! ```
//!
//! correct the pathwise recursions
//!
//! ```text
//! v̄_t(p) = max_a [ r_t(p, z_t, a) + φ_{t+1}(p, a) + Σ α^a_{p,p'} v̄_{t+1}(p') ]
//! v̲_t(p) =        r_t(p, z_t, π_t) + φ_{t+1}(p, π_t) + Σ α^{π_t}_{p,p'} v̲_{t+1}(p')
//! ```
//!
//! whose path averages bracket the optimal value from below and above.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::battery::BatteryModel;
use crate::error::{check_dim, invalid, Result};
use crate::pwc::dot;
use crate::solver::{choose_action, Evaluation, SolveResult};
use crate::stochastic::{PathSet, SeasonalPrice};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundOptions {
    /// Evaluation of `v^E` when the candidate policy picks actions.
    pub policy_eval: Evaluation,
    /// When false the increments are forced to zero and the lower bound
    /// becomes a plain policy evaluation along the paths.
    pub increments: bool,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            policy_eval: Evaluation::Exact,
            increments: true,
        }
    }
}

/// Lower and upper bound estimates per starting level.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub levels: Vec<f64>,
    pub lower_mean: Vec<f64>,
    pub lower_se: Vec<f64>,
    pub upper_mean: Vec<f64>,
    pub upper_se: Vec<f64>,
    pub paths: usize,
    pub nest: usize,
    pub seed: Option<u64>,
}

impl DiagnosticsReport {
    pub fn gap(&self, p: usize) -> f64 {
        self.upper_mean[p] - self.lower_mean[p]
    }
}

/// Increments `φ^k_{t+1}(p, a)` for every path, step, level and action.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementTable {
    horizon: usize,
    levels: usize,
    actions: usize,
    data: Vec<f64>,
}

impl IncrementTable {
    /// `φ^k_{t+1}(p, a)`, the increment of the step `t → t+1`.
    pub fn get(&self, k: usize, t: usize, p: usize, a: usize) -> f64 {
        self.data[((k * self.horizon + t) * self.levels + p) * self.actions + a]
    }

    pub fn paths(&self) -> usize {
        self.data.len() / (self.horizon * self.levels * self.actions)
    }
}

fn check_inputs(result: &SolveResult, paths: &PathSet, model: &BatteryModel) -> Result<()> {
    check_dim(result.levels(), model.levels())?;
    check_dim(result.horizon(), paths.horizon())?;
    check_dim(2, result.grid().dim())?;
    Ok(())
}

/// Increments of path `k` into `out`, laid out `[t][p][a]`.
fn path_increments(
    result: &SolveResult,
    paths: &PathSet,
    model: &BatteryModel,
    k: usize,
    out: &mut [f64],
) {
    let (np, na) = (model.levels(), model.action_count());
    let nest = paths.nest() as f64;
    let mut mean = vec![0.0; np];
    let mut at_next = vec![0.0; np];
    let mut scratch = vec![0.0; np];
    for t in 0..paths.horizon() {
        mean.iter_mut().for_each(|x| *x = 0.0);
        result.values_into(t + 1, &paths.state(k, t + 1), &mut at_next);
        for w in paths.nested_states(k, t) {
            result.values_into(t + 1, &w, &mut scratch);
            for ((m, v), x) in mean.iter_mut().zip(&scratch).zip(&at_next) {
                *m += v - x;
            }
        }
        let diff: Vec<f64> = mean.iter().map(|m| m / nest).collect();
        let block = &mut out[t * np * na..(t + 1) * np * na];
        for p in 0..np {
            for a in 0..na {
                block[p * na + a] = dot(model.alpha(p, a), &diff);
            }
        }
    }
}

pub fn martingale_increments(
    result: &SolveResult,
    paths: &PathSet,
    model: &BatteryModel,
) -> Result<IncrementTable> {
    check_inputs(result, paths, model)?;
    let (np, na, horizon) = (model.levels(), model.action_count(), paths.horizon());
    let block = horizon * np * na;
    let mut data = vec![0.0; paths.paths() * block];
    data.par_chunks_mut(block)
        .enumerate()
        .for_each(|(k, out)| path_increments(result, paths, model, k, out));
    Ok(IncrementTable {
        horizon,
        levels: np,
        actions: na,
        data,
    })
}

/// Pathwise bounds of one path for all times and starting levels.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBounds {
    levels: usize,
    /// `[t][p]`, `t = 0 … T`.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Policy actions `[t][p]`, `t = 0 … T−1`.
    pub actions: Vec<usize>,
}

impl PathBounds {
    pub fn lower_at(&self, t: usize, p: usize) -> f64 {
        self.lower[t * self.levels + p]
    }

    pub fn upper_at(&self, t: usize, p: usize) -> f64 {
        self.upper[t * self.levels + p]
    }
}

pub fn path_bounds(
    result: &SolveResult,
    paths: &PathSet,
    model: &BatteryModel,
    price: &SeasonalPrice,
    k: usize,
    options: BoundOptions,
) -> Result<PathBounds> {
    check_inputs(result, paths, model)?;
    check_dim(result.horizon(), price.horizon())?;
    if k >= paths.paths() {
        return Err(invalid(format!("path {k} out of {}", paths.paths())));
    }
    Ok(path_bounds_unchecked(
        result, paths, model, price, k, options,
    ))
}

fn path_bounds_unchecked(
    result: &SolveResult,
    paths: &PathSet,
    model: &BatteryModel,
    price: &SeasonalPrice,
    k: usize,
    options: BoundOptions,
) -> PathBounds {
    let (np, na, horizon) = (model.levels(), model.action_count(), paths.horizon());
    let mut inc = vec![0.0; horizon * np * na];
    if options.increments {
        path_increments(result, paths, model, k, &mut inc);
    }
    let mut lower = vec![0.0; (horizon + 1) * np];
    let mut upper = vec![0.0; (horizon + 1) * np];
    let mut actions = vec![0; horizon * np];
    let z_t = paths.state(k, horizon);
    for p in 0..np {
        let r = model.scrap_unchecked(p, z_t, price);
        lower[horizon * np + p] = r;
        upper[horizon * np + p] = r;
    }
    let mut ev = vec![0.0; np];
    for t in (0..horizon).rev() {
        let z = paths.state(k, t);
        for (q, e) in ev.iter_mut().enumerate() {
            *e = expected(result, t + 1, q, &z, options.policy_eval);
        }
        let (done, todo) = upper.split_at_mut((t + 1) * np);
        let (up_now, up_next) = (&mut done[t * np..], &todo[..np]);
        let (ldone, ltodo) = lower.split_at_mut((t + 1) * np);
        let (lo_now, lo_next) = (&mut ldone[t * np..], &ltodo[..np]);
        for p in 0..np {
            let phi = &inc[(t * np + p) * na..(t * np + p + 1) * na];
            let mut best = f64::NEG_INFINITY;
            for (a, inc_a) in phi.iter().enumerate() {
                let x = model.reward_unchecked(t, p, a, z, price) + inc_a;
                let v = x + dot(model.alpha(p, a), up_next);
                if v > best {
                    best = v;
                }
            }
            up_now[p] = best;
            let a = choose_action(model, price, t, p, z, &ev);
            actions[t * np + p] = a;
            let x = model.reward_unchecked(t, p, a, z, price) + phi[a];
            lo_now[p] = x + dot(model.alpha(p, a), lo_next);
        }
    }
    PathBounds {
        levels: np,
        lower,
        upper,
        actions,
    }
}

#[inline]
fn expected(result: &SolveResult, t: usize, p: usize, z: &[f64], mode: Evaluation) -> f64 {
    result.expected_unchecked(t, p, z, mode)
}

/// Mean and standard error (`sd / √K`, sample sd); the error is NaN for a
/// single sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn primal_dual(
    result: &SolveResult,
    paths: &PathSet,
    model: &BatteryModel,
    price: &SeasonalPrice,
) -> Result<DiagnosticsReport> {
    primal_dual_with(result, paths, model, price, BoundOptions::default())
}

pub fn primal_dual_with(
    result: &SolveResult,
    paths: &PathSet,
    model: &BatteryModel,
    price: &SeasonalPrice,
    options: BoundOptions,
) -> Result<DiagnosticsReport> {
    check_inputs(result, paths, model)?;
    check_dim(result.horizon(), price.horizon())?;
    let np = model.levels();
    let starts: Vec<(Vec<f64>, Vec<f64>)> = (0..paths.paths())
        .into_par_iter()
        .map(|k| {
            let b = path_bounds_unchecked(result, paths, model, price, k, options);
            (b.lower[..np].to_vec(), b.upper[..np].to_vec())
        })
        .collect();
    let mut report = DiagnosticsReport {
        levels: model.lattice().levels(),
        lower_mean: Vec::with_capacity(np),
        lower_se: Vec::with_capacity(np),
        upper_mean: Vec::with_capacity(np),
        upper_se: Vec::with_capacity(np),
        paths: paths.paths(),
        nest: paths.nest(),
        seed: paths.seed(),
    };
    for p in 0..np {
        let lo: Vec<f64> = starts.iter().map(|(l, _)| l[p]).collect();
        let up: Vec<f64> = starts.iter().map(|(_, u)| u[p]).collect();
        let (lm, ls) = mean_and_se(&lo);
        let (um, us) = mean_and_se(&up);
        report.lower_mean.push(lm);
        report.lower_se.push(ls);
        report.upper_mean.push(um);
        report.upper_se.push(us);
    }
    Ok(report)
}

/// One forward run of the policy with sampled battery transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTrace {
    /// Level indices, `t = 0 … T`.
    pub levels: Vec<usize>,
    /// Action indices, `t = 0 … T−1`.
    pub actions: Vec<usize>,
    /// Reward collected at each `t = 0 … T` (scrap last).
    pub rewards: Vec<f64>,
}

impl PolicyTrace {
    pub fn total(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Runs the policy forward along the state paths of `paths`, starting every
/// path from level index `start`. Next levels are drawn from `α` with
/// per-path ChaCha streams of `seed`.
pub fn simulate_policy(
    result: &SolveResult,
    paths: &PathSet,
    model: &BatteryModel,
    price: &SeasonalPrice,
    start: usize,
    seed: u64,
    mode: Evaluation,
) -> Result<Vec<PolicyTrace>> {
    check_inputs(result, paths, model)?;
    check_dim(result.horizon(), price.horizon())?;
    if start >= model.levels() {
        return Err(invalid(format!("start level index {start} out of range")));
    }
    let horizon = paths.horizon();
    let np = model.levels();
    Ok((0..paths.paths())
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1_e995_9e37_79b9);
            rng.set_stream(k as u64);
            let mut p = start;
            let mut levels = Vec::with_capacity(horizon + 1);
            let mut actions = Vec::with_capacity(horizon);
            let mut rewards = Vec::with_capacity(horizon + 1);
            let mut ev = vec![0.0; np];
            for t in 0..horizon {
                let z = paths.state(k, t);
                for (q, e) in ev.iter_mut().enumerate() {
                    *e = expected(result, t + 1, q, &z, mode);
                }
                let a = choose_action(model, price, t, p, z, &ev);
                levels.push(p);
                actions.push(a);
                rewards.push(model.reward_unchecked(t, p, a, z, price));
                p = sample_index(model.alpha(p, a), rng.random::<f64>());
            }
            levels.push(p);
            rewards.push(model.scrap_unchecked(p, paths.state(k, horizon), price));
            PolicyTrace {
                levels,
                actions,
                rewards,
            }
        })
        .collect())
}

/// Inverse-CDF draw from a probability vector.
fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &q) in probs.iter().enumerate() {
        acc += q;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
