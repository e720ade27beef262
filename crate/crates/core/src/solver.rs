//! Backward induction over grid representatives.
//!
//! For `t = T−1 … 0` and every level `p`:
//!
//! ```text
//! V^E_{t+1}(p) = Σ_n ν(n) Υ[V_{t+1}(p) W(n)]
//! V_t(p)       = Υ ⊔_a ( R_t(p, a) + Σ_{p'} α^a_{p,p'} V^E_{t+1}(p') )
//! ```
//!
//! starting from the scrap representative `V_T(p)`. All stored matrices have
//! one row per grid point, and row `i` attains the maximum at grid point `i`.
//!
//! When the grid lies on the line `z₁ = 1` (the usual state embedding) the
//! expectation is computed without forming the `N` products: along the line
//! `V_{t+1}(p)` is a convex piecewise linear function whose active row
//! changes at known breakpoints, so each rearranged row of `V W(n)` is
//! determined by the bucket its image `b(n) + φ s_i` falls in, and the
//! weighted sum over samples reduces to prefix sums over the sorted
//! innovations. This gives the same matrix as the literal operator route
//! (kept in [`Expectation::Direct`]) up to rounding and tie selection at
//! exact breakpoints.

use rayon::prelude::*;

use crate::battery::BatteryModel;
use crate::error::{check_dim, invalid, Error, Result};
use crate::pwc::{self, dot, FunctionMatrix, Grid};
use crate::stochastic::{DisturbanceSampling, SeasonalPrice, State};

/// How `V^E` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Expectation {
    /// Breakpoint/prefix-sum route on line grids, direct route otherwise.
    #[default]
    Auto,
    /// `Σ_n ν(n) Υ_G[V W(n)]` and `Υ_G ⊔_a` with the generic operators.
    Direct,
}

/// How value functions are evaluated off the grid when choosing actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evaluation {
    /// Maximum over all rows.
    #[default]
    Exact,
    /// Row of the nearest grid point only.
    NearestNeighbor,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub expectation: Expectation,
}

/// Value and expected-value representatives for every `(t, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    grid: Grid,
    horizon: usize,
    levels: usize,
    values: Vec<FunctionMatrix>,
    expected: Vec<FunctionMatrix>,
}

impl SolveResult {
    /// Assembles a result from stored matrices: `values` holds `V_t(p)` at
    /// `t·|P| + p` for `t = 0 … T`, `expected` holds `V^E_t(p)` at
    /// `(t−1)·|P| + p` for `t = 1 … T`.
    pub fn from_parts(
        grid: Grid,
        horizon: usize,
        levels: usize,
        values: Vec<FunctionMatrix>,
        expected: Vec<FunctionMatrix>,
    ) -> Result<Self> {
        check_dim((horizon + 1) * levels, values.len())?;
        check_dim(horizon * levels, expected.len())?;
        for m in values.iter().chain(&expected) {
            check_dim(grid.len(), m.rows())?;
            check_dim(grid.dim(), m.cols())?;
        }
        Ok(Self {
            grid,
            horizon,
            levels,
            values,
            expected,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    fn check(&self, t: usize, p: usize, first_t: usize) -> Result<()> {
        if t < first_t || t > self.horizon {
            return Err(Error::IndexOutOfRange {
                what: "time",
                index: t,
                len: self.horizon + 1,
            });
        }
        if p >= self.levels {
            return Err(Error::IndexOutOfRange {
                what: "level",
                index: p,
                len: self.levels,
            });
        }
        Ok(())
    }

    /// `V_t(p)`.
    pub fn value_matrix(&self, t: usize, p: usize) -> Result<&FunctionMatrix> {
        self.check(t, p, 0)?;
        Ok(&self.values[t * self.levels + p])
    }

    /// `V^E_t(p)`, `t ≥ 1`.
    pub fn expected_matrix(&self, t: usize, p: usize) -> Result<&FunctionMatrix> {
        self.check(t, p, 1)?;
        Ok(&self.expected[(t - 1) * self.levels + p])
    }

    pub fn values(&self) -> &[FunctionMatrix] {
        &self.values
    }

    pub fn expected(&self) -> &[FunctionMatrix] {
        &self.expected
    }

    /// `v_t(p, z) = max(V_t(p) z)`.
    pub fn value_at(&self, t: usize, p: usize, z: &[f64]) -> Result<f64> {
        self.check(t, p, 0)?;
        check_dim(self.grid.dim(), z.len())?;
        Ok(self.value_unchecked(t, p, z))
    }

    /// `v^E_t(p, z) = max(V^E_t(p) z)`, `t ≥ 1`.
    pub fn expected_value_at(&self, t: usize, p: usize, z: &[f64]) -> Result<f64> {
        self.check(t, p, 1)?;
        check_dim(self.grid.dim(), z.len())?;
        Ok(self.expected_unchecked(t, p, z, Evaluation::Exact))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, t: usize, p: usize, z: &[f64]) -> f64 {
        self.grid
            .eval_anchored(&self.values[t * self.levels + p], z)
    }

    #[inline]
    pub(crate) fn expected_unchecked(
        &self,
        t: usize,
        p: usize,
        z: &[f64],
        mode: Evaluation,
    ) -> f64 {
        let m = &self.expected[(t - 1) * self.levels + p];
        match mode {
            Evaluation::Exact => self.grid.eval_anchored(m, z),
            Evaluation::NearestNeighbor => dot(m.row(self.grid.nearest(z)), z),
        }
    }

    /// `v_t(p', z)` for every level `p'` into `out`.
    pub(crate) fn values_into(&self, t: usize, z: &[f64], out: &mut [f64]) {
        let mats = &self.values[t * self.levels..(t + 1) * self.levels];
        match self.grid.anchor_pair(z) {
            Some((lo, hi)) => {
                for (o, m) in out.iter_mut().zip(mats) {
                    let a = dot(m.row(lo), z);
                    let b = dot(m.row(hi), z);
                    *o = if b > a { b } else { a };
                }
            }
            None => {
                for (o, m) in out.iter_mut().zip(mats) {
                    *o = self.grid.eval_anchored(m, z);
                }
            }
        }
    }

    /// `v^E_t(p', z)` for every level `p'`.
    pub fn expected_values(&self, t: usize, z: &[f64], mode: Evaluation) -> Result<Vec<f64>> {
        self.check(t, 0, 1)?;
        check_dim(self.grid.dim(), z.len())?;
        Ok((0..self.levels)
            .map(|p| self.expected_unchecked(t, p, z, mode))
            .collect())
    }

    /// Approximately optimal action at `(t, p, z)`, `t < T`; ties go to the
    /// lowest action index.
    pub fn policy(
        &self,
        model: &BatteryModel,
        price: &SeasonalPrice,
        t: usize,
        p: usize,
        z: State,
    ) -> Result<usize> {
        self.policy_with(model, price, t, p, z, Evaluation::Exact)
    }

    pub fn policy_with(
        &self,
        model: &BatteryModel,
        price: &SeasonalPrice,
        t: usize,
        p: usize,
        z: State,
        mode: Evaluation,
    ) -> Result<usize> {
        if t >= self.horizon {
            return Err(Error::IndexOutOfRange {
                what: "decision time",
                index: t,
                len: self.horizon,
            });
        }
        self.check(t, p, 0)?;
        check_dim(self.levels, model.levels())?;
        let ev = self.expected_values(t + 1, &z, mode)?;
        Ok(choose_action(model, price, t, p, z, &ev))
    }
}

/// `argmax_a r_t(p, z, a) + Σ_{p'} α^a_{p,p'} ev[p']`, lowest index on ties.
pub(crate) fn choose_action(
    model: &BatteryModel,
    price: &SeasonalPrice,
    t: usize,
    p: usize,
    z: State,
    ev: &[f64],
) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for a in 0..model.action_count() {
        let v = model.reward_unchecked(t, p, a, z, price) + dot(model.alpha(p, a), ev);
        if v > best_v {
            best_v = v;
            best = a;
        }
    }
    best
}

pub fn solve(
    model: &BatteryModel,
    price: &SeasonalPrice,
    sampling: &DisturbanceSampling,
    grid: &Grid,
) -> Result<SolveResult> {
    solve_with(model, price, sampling, grid, SolveOptions::default())
}

pub fn solve_with(
    model: &BatteryModel,
    price: &SeasonalPrice,
    sampling: &DisturbanceSampling,
    grid: &Grid,
    options: SolveOptions,
) -> Result<SolveResult> {
    check_dim(2, grid.dim())?;
    let horizon = price.horizon();
    if horizon < 1 {
        return Err(invalid("horizon must be at least 1"));
    }
    let levels = model.levels();
    let m = grid.len();

    let fast = match (options.expectation, grid.line_abscissae()) {
        (Expectation::Auto, Some(s)) => Some(LineExpectation::new(s, sampling)),
        _ => None,
    };

    let mut values: Vec<Vec<FunctionMatrix>> = vec![Vec::new(); horizon + 1];
    let mut expected: Vec<Vec<FunctionMatrix>> = vec![Vec::new(); horizon];
    values[horizon] = (0..levels)
        .map(|p| model.scrap_matrix(p, price, m))
        .collect();

    for t in (0..horizon).rev() {
        let next = &values[t + 1];
        let ve: Vec<FunctionMatrix> = next
            .par_iter()
            .map(|v| match &fast {
                Some(line) => Ok(line.apply(v)),
                None => direct_expectation(v, sampling, grid),
            })
            .collect::<Result<_>>()?;
        let current: Vec<FunctionMatrix> = (0..levels)
            .into_par_iter()
            .map(|p| maximize(model, price, grid, t, p, &ve, options.expectation))
            .collect::<Result<_>>()?;
        expected[t] = ve;
        values[t] = current;
    }

    Ok(SolveResult {
        grid: grid.clone(),
        horizon,
        levels,
        values: values.into_iter().flatten().collect(),
        expected: expected.into_iter().flatten().collect(),
    })
}

/// `Υ ⊔_a (R_t(p, a) + Σ_{p'} α^a_{p,p'} V^E(p'))`.
///
/// Row `i` of each summand attains its maximum at grid point `i`, so the
/// rearranged binding only compares the `|A|` candidates for row `i`. The
/// direct route rearranges the full binding instead.
fn maximize(
    model: &BatteryModel,
    price: &SeasonalPrice,
    grid: &Grid,
    t: usize,
    p: usize,
    ve: &[FunctionMatrix],
    route: Expectation,
) -> Result<FunctionMatrix> {
    let m = grid.len();
    let mut sum = vec![0.0; 2 * m];
    let mut best = vec![0.0; 2 * m];
    let mut best_v = vec![f64::NEG_INFINITY; m];
    let mut bound: Option<FunctionMatrix> = None;
    for a in 0..model.action_count() {
        let r = model.reward_coeffs(t, p, a, price);
        for pair in sum.chunks_exact_mut(2) {
            pair.copy_from_slice(&r);
        }
        for (w, v) in model.alpha(p, a).iter().zip(ve) {
            for (s, x) in sum.iter_mut().zip(v.as_slice()) {
                *s += w * x;
            }
        }
        match route {
            Expectation::Auto => {
                for (i, g) in grid.points().enumerate() {
                    let row = &sum[2 * i..2 * i + 2];
                    let v = dot(row, g);
                    if v > best_v[i] {
                        best_v[i] = v;
                        best[2 * i..2 * i + 2].copy_from_slice(row);
                    }
                }
            }
            Expectation::Direct => {
                let f = FunctionMatrix::new(m, 2, sum.clone())?;
                bound = Some(match bound {
                    None => f,
                    Some(b) => b.bind(&f)?,
                });
            }
        }
    }
    match bound {
        Some(b) => pwc::row_rearrange(&b, grid),
        None => FunctionMatrix::new(m, 2, best),
    }
}

/// `Σ_n ν(n) Υ_G[V W(n)]` with compensated accumulation.
fn direct_expectation(
    v: &FunctionMatrix,
    sampling: &DisturbanceSampling,
    grid: &Grid,
) -> Result<FunctionMatrix> {
    let mut acc = vec![Neumaier::default(); v.rows() * v.cols()];
    let mut out = vec![0.0; grid.len() * v.cols()];
    for (n, &w) in sampling.weights().iter().enumerate() {
        let r = pwc::compose_linear(v, &sampling.matrix(n), grid)?;
        for (a, x) in acc.iter_mut().zip(r.as_slice()) {
            a.add(w * x);
        }
    }
    for (o, a) in out.iter_mut().zip(&acc) {
        *o = a.sum();
    }
    FunctionMatrix::new(grid.len(), v.cols(), out)
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Expectation on a line grid `(1, s_i)` with AR disturbances
/// `[[1, 0], [b(n), φ]]`.
struct LineExpectation<'a> {
    s: &'a [f64],
    phi: f64,
    /// Innovations in ascending order.
    b: Vec<f64>,
    /// Prefix sums of weights and weighted innovations in that order.
    cum_w: Vec<f64>,
    cum_wb: Vec<f64>,
    index: SortedIndex,
}

impl<'a> LineExpectation<'a> {
    fn new(s: &'a [f64], sampling: &DisturbanceSampling) -> Self {
        let mut order: Vec<usize> = (0..sampling.len()).collect();
        let inn = sampling.innovations();
        order.sort_by(|&i, &j| inn[i].total_cmp(&inn[j]));
        let b: Vec<f64> = order.iter().map(|&i| inn[i]).collect();
        let mut cum_w = Vec::with_capacity(b.len() + 1);
        let mut cum_wb = Vec::with_capacity(b.len() + 1);
        let (mut sw, mut swb) = (Neumaier::default(), Neumaier::default());
        cum_w.push(0.0);
        cum_wb.push(0.0);
        for &i in &order {
            let w = sampling.weights()[i];
            sw.add(w);
            swb.add(w * inn[i]);
            cum_w.push(sw.sum());
            cum_wb.push(swb.sum());
        }
        let index = SortedIndex::new(&b);
        Self {
            s,
            phi: sampling.phi(),
            b,
            cum_w,
            cum_wb,
            index,
        }
    }

    fn apply(&self, v: &FunctionMatrix) -> FunctionMatrix {
        let m = self.s.len();
        let n = self.b.len();
        let rows: Vec<[f64; 2]> = (0..m).map(|j| [v.row(j)[0], v.row(j)[1]]).collect();
        // Row j is selected on (kink[j-1], kink[j]].
        let kinks: Vec<f64> = (0..m - 1)
            .map(|j| {
                let ([c0, d0], [c1, d1]) = (rows[j], rows[j + 1]);
                let k = if d1 > d0 {
                    (c0 - c1) / (d1 - d0)
                } else {
                    self.s[j]
                };
                k.clamp(self.s[j], self.s[j + 1])
            })
            .collect();
        let (b_lo, b_hi) = (self.b[0], self.b[n - 1]);
        let mut out = Vec::with_capacity(2 * m);
        for &si in self.s {
            let shift = self.phi * si;
            let mut j = kinks.partition_point(|&k| k < b_lo + shift);
            let mut prev = 0;
            let (mut c, mut d) = (0.0, 0.0);
            loop {
                let cnt = if j + 1 == m || kinks[j] - shift >= b_hi {
                    n
                } else {
                    self.index.count_le(&self.b, kinks[j] - shift)
                };
                if cnt > prev {
                    let dw = self.cum_w[cnt] - self.cum_w[prev];
                    let db = self.cum_wb[cnt] - self.cum_wb[prev];
                    let [cj, dj] = rows[j];
                    c += cj * dw + dj * db;
                    d += dj * dw;
                    prev = cnt;
                }
                if cnt == n {
                    break;
                }
                j += 1;
            }
            out.push(c);
            out.push(self.phi * d);
        }
        FunctionMatrix::new(m, 2, out).expect("line expectation shape")
    }
}

/// Bucketed lookup of `#{n : b_n ≤ θ}` on a sorted slice.
struct SortedIndex {
    lo: f64,
    width: f64,
    start: Vec<usize>,
}

impl SortedIndex {
    fn new(b: &[f64]) -> Self {
        let (lo, hi) = (b[0], b[b.len() - 1]);
        let buckets = 2 * b.len();
        let width = (hi - lo) / buckets as f64;
        let start = if width > 0.0 {
            let mut start = Vec::with_capacity(buckets);
            let mut idx = 0;
            for k in 0..buckets {
                let edge = lo + width * k as f64;
                while idx < b.len() && b[idx] < edge {
                    idx += 1;
                }
                start.push(idx);
            }
            start
        } else {
            Vec::new()
        };
        Self { lo, width, start }
    }

    #[inline]
    fn count_le(&self, b: &[f64], theta: f64) -> usize {
        if theta < self.lo {
            return 0;
        }
        if self.start.is_empty() {
            return b.len();
        }
        let k = (((theta - self.lo) / self.width) as usize).min(self.start.len() - 1);
        let mut idx = self.start[k];
        while idx > 0 && b[idx - 1] > theta {
            idx -= 1;
        }
        while idx < b.len() && b[idx] <= theta {
            idx += 1;
        }
        idx
    }
}
