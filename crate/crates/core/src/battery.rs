//! Battery storage with forward trading: storage lattice, safety-margin
//! actions, controlled level transitions, expected excess and shortage
//! energy, and the affine reward and scrap functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::pwc::FunctionMatrix;
use crate::stochastic::{SeasonalPrice, State};

/// `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `1 − Φ(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal mass of `[lo, hi]`, evaluated on the tail where it does
/// not cancel.
fn band_mass(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    }
}

/// Equidistant storage levels `p_min, p_min + Δ, …, p_max` (MWh).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryLattice {
    p_min: f64,
    p_max: f64,
    step: f64,
    count: usize,
}

impl BatteryLattice {
    pub fn new(p_min: f64, p_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!(
                "battery step must be positive, got {step}"
            )));
        }
        if !(p_min.is_finite() && p_max.is_finite() && p_max > p_min) {
            return Err(invalid(format!(
                "battery range [{p_min}, {p_max}] is empty"
            )));
        }
        let intervals = (p_max - p_min) / step;
        let rounded = intervals.round();
        if (intervals - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(invalid(format!(
                "battery range {p_min}..{p_max} is not a multiple of step {step}"
            )));
        }
        Ok(Self {
            p_min,
            p_max,
            step,
            count: rounded as usize + 1,
        })
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn level(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.p_max
        } else {
            self.p_min + self.step * i as f64
        }
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.level(i)).collect()
    }

    /// Index of the lattice level equal to `p` (within 1e-9).
    pub fn index_of(&self, p: f64) -> Option<usize> {
        let x = (p - self.p_min) / self.step;
        let i = x.round();
        ((x - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.count).then_some(i as usize)
    }
}

/// Safety margins `l(a)` (MWh) of the available actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    margins: Vec<f64>,
}

impl ActionSet {
    pub fn new(margins: Vec<f64>) -> Result<Self> {
        if margins.is_empty() {
            return Err(invalid("action set must not be empty"));
        }
        if margins.iter().any(|m| !m.is_finite()) {
            return Err(invalid("safety margins must be finite"));
        }
        Ok(Self { margins })
    }

    /// `l(a) = step · (a − 1)` for `a = 1 … count`.
    pub fn uniform(count: usize, step: f64) -> Result<Self> {
        Self::new((0..count).map(|a| step * a as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.margins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.margins.is_empty()
    }

    pub fn margin(&self, a: usize) -> f64 {
        self.margins[a]
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }
}

/// Standard deviation `ς` of the net demand forecast error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandModel {
    std_dev: f64,
}

impl DemandModel {
    pub fn new(std_dev: f64) -> Result<Self> {
        if !(std_dev > 0.0 && std_dev.is_finite()) {
            return Err(invalid(format!(
                "demand std dev must be positive, got {std_dev}"
            )));
        }
        Ok(Self { std_dev })
    }

    pub fn std_dev(&self) -> f64 {
        self.std_dev
    }
}

/// Constant real-time grid prices: excess is sold at `sell`, shortage is
/// bought at `buy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPrices {
    sell: f64,
    buy: f64,
}

impl GridPrices {
    pub fn new(sell: f64, buy: f64) -> Result<Self> {
        if !(0.0 <= sell && sell < buy && buy.is_finite()) {
            return Err(invalid(format!(
                "grid prices need 0 <= sell < buy, got sell={sell} buy={buy}"
            )));
        }
        Ok(Self { sell, buy })
    }

    pub fn sell(&self) -> f64 {
        self.sell
    }

    pub fn buy(&self) -> f64 {
        self.buy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScrapMode {
    /// Remaining energy is sold at the terminal price.
    Sell,
    /// Remaining energy is worthless.
    Zero,
}

/// Distribution of the next level from `level` under margin `margin`:
/// mass of `N(level + margin, ς)` on each level's `±Δ/2` band, with the
/// tails absorbed by the end levels.
pub fn transition_probabilities(
    lattice: &BatteryLattice,
    level: f64,
    margin: f64,
    std_dev: f64,
) -> Vec<f64> {
    let center = level + margin;
    let half = lattice.step() / 2.0;
    let n = lattice.len();
    let z = |x: f64| (x - center) / std_dev;
    (0..n)
        .map(|j| {
            let p = lattice.level(j);
            if j == 0 {
                normal_cdf(z(p + half))
            } else if j + 1 == n {
                normal_sf(z(p - half))
            } else {
                band_mass(z(p - half), z(p + half))
            }
        })
        .collect()
}

/// Expected energy spilling over the full battery,
/// `∫_{p_max + Δ/2}^∞ (x − p_max) N(level + margin, ς)(dx)`.
pub fn expected_excess(lattice: &BatteryLattice, level: f64, margin: f64, std_dev: f64) -> f64 {
    let center = level + margin;
    let cut = (lattice.p_max() + lattice.step() / 2.0 - center) / std_dev;
    std_dev * normal_pdf(cut) + (center - lattice.p_max()) * normal_sf(cut)
}

/// Expected energy missing below the empty battery,
/// `∫_{−∞}^{p_min − Δ/2} (p_min − x) N(level + margin, ς)(dx)`.
pub fn expected_shortage(lattice: &BatteryLattice, level: f64, margin: f64, std_dev: f64) -> f64 {
    let center = level + margin;
    let cut = (lattice.p_min() - lattice.step() / 2.0 - center) / std_dev;
    std_dev * normal_pdf(cut) + (lattice.p_min() - center) * normal_cdf(cut)
}

/// The battery control model with all tables precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryModel {
    lattice: BatteryLattice,
    actions: ActionSet,
    demand: DemandModel,
    prices: GridPrices,
    scrap_mode: ScrapMode,
    /// `alpha[(p·|A| + a)·|P| + p']`.
    alpha: Vec<f64>,
    excess: Vec<f64>,
    shortage: Vec<f64>,
}

impl BatteryModel {
    pub fn new(
        lattice: BatteryLattice,
        actions: ActionSet,
        demand: DemandModel,
        prices: GridPrices,
        scrap_mode: ScrapMode,
    ) -> Self {
        let (np, na) = (lattice.len(), actions.len());
        let s = demand.std_dev();
        let mut alpha = Vec::with_capacity(np * na * np);
        let mut excess = Vec::with_capacity(np * na);
        let mut shortage = Vec::with_capacity(np * na);
        for p in 0..np {
            let level = lattice.level(p);
            for &m in actions.margins() {
                alpha.extend(transition_probabilities(&lattice, level, m, s));
                excess.push(expected_excess(&lattice, level, m, s));
                shortage.push(expected_shortage(&lattice, level, m, s));
            }
        }
        Self {
            lattice,
            actions,
            demand,
            prices,
            scrap_mode,
            alpha,
            excess,
            shortage,
        }
    }

    pub fn lattice(&self) -> &BatteryLattice {
        &self.lattice
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn demand(&self) -> &DemandModel {
        &self.demand
    }

    pub fn prices(&self) -> &GridPrices {
        &self.prices
    }

    pub fn scrap_mode(&self) -> ScrapMode {
        self.scrap_mode
    }

    pub fn levels(&self) -> usize {
        self.lattice.len()
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    /// `α^a_{p,·}` over next levels.
    pub fn alpha(&self, p: usize, a: usize) -> &[f64] {
        let np = self.levels();
        let start = (p * self.action_count() + a) * np;
        &self.alpha[start..start + np]
    }

    pub fn excess(&self, p: usize, a: usize) -> f64 {
        self.excess[p * self.action_count() + a]
    }

    pub fn shortage(&self, p: usize, a: usize) -> f64 {
        self.shortage[p * self.action_count() + a]
    }

    /// Coefficients `(c₁, c₂)` of `r_t(p, z, a) = c₁ z₁ + c₂ z₂` for `t < T`.
    pub fn reward_coeffs(&self, t: usize, p: usize, a: usize, price: &SeasonalPrice) -> [f64; 2] {
        let l = self.actions.margin(a);
        [
            -l * price.intercept(t) - self.shortage(p, a) * self.prices.buy()
                + self.excess(p, a) * self.prices.sell(),
            -l * price.slope(t),
        ]
    }

    /// Coefficients of the scrap value `r_T(p, z)`.
    pub fn scrap_coeffs(&self, p: usize, price: &SeasonalPrice) -> [f64; 2] {
        match self.scrap_mode {
            ScrapMode::Sell => {
                let level = self.lattice.level(p);
                let t = price.horizon();
                [level * price.intercept(t), level * price.slope(t)]
            }
            ScrapMode::Zero => [0.0, 0.0],
        }
    }

    /// Grid representative of the (affine) reward: the same row on every
    /// one of `rows` grid rows.
    pub fn reward_matrix(
        &self,
        t: usize,
        p: usize,
        a: usize,
        price: &SeasonalPrice,
        rows: usize,
    ) -> FunctionMatrix {
        FunctionMatrix::affine(&self.reward_coeffs(t, p, a, price), rows)
    }

    pub fn scrap_matrix(&self, p: usize, price: &SeasonalPrice, rows: usize) -> FunctionMatrix {
        FunctionMatrix::affine(&self.scrap_coeffs(p, price), rows)
    }

    /// Reward at state `z`; at `t = T` the scrap value (the action is
    /// ignored).
    pub fn exact_reward(
        &self,
        t: usize,
        p: usize,
        a: usize,
        z: State,
        price: &SeasonalPrice,
    ) -> Result<f64> {
        if p >= self.levels() {
            return Err(Error::IndexOutOfRange {
                what: "level",
                index: p,
                len: self.levels(),
            });
        }
        if t > price.horizon() {
            return Err(Error::IndexOutOfRange {
                what: "time",
                index: t,
                len: price.horizon() + 1,
            });
        }
        let c = if t == price.horizon() {
            self.scrap_coeffs(p, price)
        } else {
            if a >= self.action_count() {
                return Err(Error::IndexOutOfRange {
                    what: "action",
                    index: a,
                    len: self.action_count(),
                });
            }
            self.reward_coeffs(t, p, a, price)
        };
        Ok(c[0] * z[0] + c[1] * z[1])
    }

    pub(crate) fn reward_unchecked(
        &self,
        t: usize,
        p: usize,
        a: usize,
        z: State,
        price: &SeasonalPrice,
    ) -> f64 {
        let c = self.reward_coeffs(t, p, a, price);
        c[0] * z[0] + c[1] * z[1]
    }

    pub(crate) fn scrap_unchecked(&self, p: usize, z: State, price: &SeasonalPrice) -> f64 {
        let c = self.scrap_coeffs(p, price);
        c[0] * z[0] + c[1] * z[1]
    }
}
