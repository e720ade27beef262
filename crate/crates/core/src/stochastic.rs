//! Linear state dynamics `Z_{t+1} = W_{t+1} Z_t` for an AR(1) factor in the
//! embedding `Z = (1, Z⁽²⁾)`, the quantile discretization of its disturbance
//! matrices, the seasonal price map, and sample paths for diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erfc_inv;

use crate::error::{check_dim, invalid, Error, Result};
use crate::pwc::Matrix;

/// Two-dimensional state `(1, z⁽²⁾)`.
pub type State = [f64; 2];

/// `Z⁽²⁾_{t+1} = μ + σ N_{t+1} + φ Z⁽²⁾_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Params {
    pub mu: f64,
    pub sigma: f64,
    pub phi: f64,
}

impl Ar1Params {
    pub fn new(mu: f64, sigma: f64, phi: f64) -> Result<Self> {
        let p = Self { mu, sigma, phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(invalid("ar1 mu must be finite"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!(
                "ar1 sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(invalid(format!(
                "ar1 phi must lie in [0, 1], got {}",
                self.phi
            )));
        }
        Ok(())
    }

    /// Disturbance matrix `[[1, 0], [μ + σ n, φ]]` for a standard normal
    /// draw `n`.
    pub fn innovation(&self, n: f64) -> f64 {
        self.mu + self.sigma * n
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Weighted finite sample `{(W(n), ν(n))}` of the disturbance matrix.
///
/// Every matrix has the AR form `[[1, 0], [b(n), φ]]`, so only the
/// innovations `b(n)` and the shared `φ` are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSampling {
    phi: f64,
    innovations: Vec<f64>,
    weights: Vec<f64>,
}

impl DisturbanceSampling {
    pub fn new(phi: f64, innovations: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if innovations.is_empty() {
            return Err(invalid("disturbance sampling needs at least one sample"));
        }
        check_dim(innovations.len(), weights.len())?;
        if weights.iter().any(|w| w.is_nan() || *w < 0.0)
            || innovations.iter().any(|b| !b.is_finite())
        {
            return Err(invalid(
                "weights must be nonnegative and innovations finite",
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self {
            phi,
            innovations,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.innovations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.innovations.is_empty()
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn innovations(&self) -> &[f64] {
        &self.innovations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn matrix(&self, n: usize) -> Matrix {
        ar_matrix(self.innovations[n], self.phi)
    }
}

pub fn ar_matrix(innovation: f64, phi: f64) -> Matrix {
    Matrix::new(2, 2, vec![1.0, 0.0, innovation, phi]).expect("2x2")
}

/// `N` equally weighted matrices built from the standard normal quantiles at
/// levels `n / (N + 1)`, `n = 1 … N`.
///
/// The upper half of the quantiles mirrors the lower half, so the sampled
/// set is exactly symmetric about zero.
pub fn build_disturbance_sampling(params: Ar1Params, count: usize) -> Result<DisturbanceSampling> {
    params.validate()?;
    if count < 2 {
        return Err(invalid(format!("need at least 2 quantiles, got {count}")));
    }
    let mut q = vec![0.0; count];
    let denom = (count + 1) as f64;
    for n in 1..=count / 2 {
        let x = normal_quantile(n as f64 / denom);
        q[n - 1] = x;
        q[count - n] = -x;
    }
    let innovations = q.iter().map(|&x| params.innovation(x)).collect();
    let w = 1.0 / count as f64;
    DisturbanceSampling::new(params.phi, innovations, vec![w; count])
}

/// Affine price map `Π_t = u_t + v_t z⁽²⁾`, `t = 0 … T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalPrice {
    u: Vec<f64>,
    v: Vec<f64>,
}

/// Parameters of `u_t = a + A cos(2π t / P + θ)`, `v_t = b + B sin(2π t / P + θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigSeason {
    pub intercept: f64,
    pub intercept_amplitude: f64,
    pub slope: f64,
    pub slope_amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

impl TrigSeason {
    /// Daily cycle over half-hourly epochs.
    pub const CASE_STUDY: TrigSeason = TrigSeason {
        intercept: 10.0,
        intercept_amplitude: 1.0,
        slope: 1.0,
        slope_amplitude: 0.5,
        period: 48.0,
        phase: 1.5 * std::f64::consts::PI,
    };
}

impl SeasonalPrice {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        check_dim(u.len(), v.len())?;
        if u.len() < 2 {
            return Err(invalid("seasonal price needs a horizon of at least 1"));
        }
        Ok(Self { u, v })
    }

    pub fn trig(horizon: usize, season: TrigSeason) -> Result<Self> {
        if horizon < 1 {
            return Err(invalid("horizon must be at least 1"));
        }
        if season.period.is_nan() || season.period <= 0.0 {
            return Err(invalid("season period must be positive"));
        }
        let angle = |t: usize| 2.0 * std::f64::consts::PI / season.period * t as f64 + season.phase;
        let u = (0..=horizon)
            .map(|t| season.intercept + season.intercept_amplitude * angle(t).cos())
            .collect();
        let v = (0..=horizon)
            .map(|t| season.slope + season.slope_amplitude * angle(t).sin())
            .collect();
        Self::new(u, v)
    }

    pub fn horizon(&self) -> usize {
        self.u.len() - 1
    }

    pub fn intercept(&self, t: usize) -> f64 {
        self.u[t]
    }

    pub fn slope(&self, t: usize) -> f64 {
        self.v[t]
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.u
    }

    pub fn slopes(&self) -> &[f64] {
        &self.v
    }

    pub fn price(&self, t: usize, z2: f64) -> Result<f64> {
        if t >= self.u.len() {
            return Err(Error::IndexOutOfRange {
                what: "time",
                index: t,
                len: self.u.len(),
            });
        }
        Ok(self.u[t] + self.v[t] * z2)
    }
}

pub fn make_case_study_price(horizon: usize) -> Result<SeasonalPrice> {
    SeasonalPrice::trig(horizon, TrigSeason::CASE_STUDY)
}

/// State trajectories driven by primary disturbances, plus the nested
/// (subsimulation) disturbances used by martingale increments.
///
/// Disturbances are stored as AR innovations `b`, the matrix being
/// `[[1, 0], [b, φ]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    phi: f64,
    horizon: usize,
    paths: usize,
    nest: usize,
    states: Vec<State>,
    primary: Vec<f64>,
    nested: Vec<f64>,
    seed: Option<u64>,
}

impl PathSet {
    /// Builds trajectories from explicit innovations: `primary[k·T + t]`
    /// drives the step `t → t+1` of path `k`, and
    /// `nested[(k·T + t)·I + i]` is subsimulation `i` of that step.
    pub fn from_innovations(
        phi: f64,
        z0: State,
        horizon: usize,
        paths: usize,
        nest: usize,
        primary: Vec<f64>,
        nested: Vec<f64>,
    ) -> Result<Self> {
        if z0[0] != 1.0 {
            return Err(invalid("initial state must have first component 1"));
        }
        if horizon < 1 || paths < 1 || nest < 1 {
            return Err(invalid("horizon, path count and nest count must be >= 1"));
        }
        check_dim(paths * horizon, primary.len())?;
        check_dim(paths * horizon * nest, nested.len())?;
        let mut states = Vec::with_capacity(paths * (horizon + 1));
        for k in 0..paths {
            let mut z = z0;
            states.push(z);
            for t in 0..horizon {
                z = [z[0], primary[k * horizon + t] * z[0] + phi * z[1]];
                states.push(z);
            }
        }
        Ok(Self {
            phi,
            horizon,
            paths,
            nest,
            states,
            primary,
            nested,
            seed: None,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn nest(&self) -> usize {
        self.nest
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn state(&self, k: usize, t: usize) -> State {
        self.states[k * (self.horizon + 1) + t]
    }

    pub fn trajectory(&self, k: usize) -> &[State] {
        &self.states[k * (self.horizon + 1)..(k + 1) * (self.horizon + 1)]
    }

    /// Innovation of `w^{0,k}_{t+1}`.
    pub fn primary_innovation(&self, k: usize, t: usize) -> f64 {
        self.primary[k * self.horizon + t]
    }

    pub fn primary_innovations(&self) -> &[f64] {
        &self.primary
    }

    /// Innovations of `w^{i,k}_{t+1}`, `i = 1 … I`.
    pub fn nested_innovations(&self, k: usize, t: usize) -> &[f64] {
        let start = (k * self.horizon + t) * self.nest;
        &self.nested[start..start + self.nest]
    }

    /// `w^{i,k}_{t+1} z^k_t` for every nested draw `i`.
    pub fn nested_states(&self, k: usize, t: usize) -> impl Iterator<Item = State> + '_ {
        let z = self.state(k, t);
        let phi = self.phi;
        self.nested_innovations(k, t)
            .iter()
            .map(move |&b| [z[0], b * z[0] + phi * z[1]])
    }
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fills `out` with antithetic pairs `(x, -x)` drawn from `rng`; a trailing
/// odd slot gets a fresh draw.
fn antithetic_fill(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let x: f64 = StandardNormal.sample(rng);
        pair[0] = x;
        pair[1] = -x;
    }
    if let [last] = chunks.into_remainder() {
        *last = StandardNormal.sample(rng);
    }
}

/// Simulates `K` trajectories of length `T` from `z0` with `I` nested draws
/// per step.
///
/// Primary draws are antithetic across paths: path `k + ⌊K/2⌋` replays the
/// negated draws of path `k`, and an odd last path pairs its own
/// consecutive steps. Nested draws pair consecutive subsimulations. Path
/// `k` draws from the ChaCha streams `2k` (primary) and `2k + 1` (nested)
/// of `seed`, so the result does not depend on thread scheduling.
pub fn simulate_paths(
    params: Ar1Params,
    z0: State,
    horizon: usize,
    paths: usize,
    nest: usize,
    seed: u64,
) -> Result<PathSet> {
    params.validate()?;
    if horizon < 1 || paths < 1 || nest < 1 {
        return Err(invalid("horizon, path count and nest count must be >= 1"));
    }
    let half = paths / 2;
    let fresh: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|k| {
            let mut draws = vec![0.0; horizon];
            if k < half {
                let mut rng = path_rng(seed, 2 * k as u64);
                for d in draws.iter_mut() {
                    *d = StandardNormal.sample(&mut rng);
                }
            } else if k == 2 * half {
                let mut rng = path_rng(seed, 2 * k as u64);
                antithetic_fill(&mut rng, &mut draws);
            }
            draws
        })
        .collect();
    let mut primary = Vec::with_capacity(paths * horizon);
    for k in 0..paths {
        let src = if k >= half && k < 2 * half {
            fresh[k - half].iter().map(|x| -x).collect::<Vec<_>>()
        } else {
            fresh[k].clone()
        };
        primary.extend(src.into_iter().map(|n| params.innovation(n)));
    }
    let nested: Vec<f64> = (0..paths)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut rng = path_rng(seed, 2 * k as u64 + 1);
            let mut draws = vec![0.0; horizon * nest];
            for step in draws.chunks_mut(nest) {
                antithetic_fill(&mut rng, step);
            }
            draws.into_iter().map(move |n| params.innovation(n))
        })
        .collect();
    let mut set = PathSet::from_innovations(params.phi, z0, horizon, paths, nest, primary, nested)?;
    set.seed = Some(seed);
    Ok(set)
}
