//! Model assembly from a [`RunConfig`] and configuration sweeps.

use serde::{Deserialize, Serialize};

use crate::battery::{ActionSet, BatteryLattice, BatteryModel, DemandModel, GridPrices};
use crate::config::{RunConfig, Scrap, SeasonalConfig};
use crate::diagnostics::{primal_dual_with, BoundOptions, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::pwc::Grid;
use crate::solver::{solve_with, SolveOptions, SolveResult};
use crate::stochastic::{
    build_disturbance_sampling, simulate_paths, Ar1Params, DisturbanceSampling, PathSet,
    SeasonalPrice, TrigSeason,
};

fn keyed(key: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::Config {
            key: key.to_string(),
            message: other.to_string(),
        },
    }
}

fn require(key: &str, ok: bool, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config {
            key: key.to_string(),
            message: message.into(),
        })
    }
}

/// Everything needed to solve and assess one configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: RunConfig,
    model: BatteryModel,
    price: SeasonalPrice,
    ar1: Ar1Params,
    sampling: DisturbanceSampling,
    grid: Grid,
}

impl Experiment {
    pub fn new(config: RunConfig) -> Result<Self> {
        let c = &config;
        require("horizon", c.horizon >= 1, "must be at least 1")?;
        require(
            "z0",
            c.z0[0] == 1.0 && c.z0[1].is_finite(),
            "first coordinate must be 1 and the second finite",
        )?;
        let lattice = BatteryLattice::new(c.battery.p_min, c.battery.p_max, c.battery.step)
            .map_err(keyed("battery"))?;
        let actions =
            ActionSet::new(c.actions.margins.clone()).map_err(keyed("actions.margins"))?;
        let demand = DemandModel::new(c.demand.std_dev).map_err(keyed("demand.std_dev"))?;
        let prices =
            GridPrices::new(c.grid_prices.sell, c.grid_prices.buy).map_err(keyed("grid_prices"))?;
        let ar1 = Ar1Params::new(c.ar1.mu, c.ar1.sigma, c.ar1.phi).map_err(keyed("ar1"))?;
        let price = match &c.seasonal {
            SeasonalConfig::Trig {
                intercept,
                intercept_amplitude,
                slope,
                slope_amplitude,
                period,
                phase,
            } => SeasonalPrice::trig(
                c.horizon,
                TrigSeason {
                    intercept: *intercept,
                    intercept_amplitude: *intercept_amplitude,
                    slope: *slope,
                    slope_amplitude: *slope_amplitude,
                    period: *period,
                    phase: *phase,
                },
            ),
            SeasonalConfig::Explicit { u, v } => {
                require(
                    "seasonal.u",
                    u.len() == c.horizon + 1,
                    format!("expected {} entries, got {}", c.horizon + 1, u.len()),
                )?;
                require(
                    "seasonal.v",
                    v.len() == c.horizon + 1,
                    format!("expected {} entries, got {}", c.horizon + 1, v.len()),
                )?;
                SeasonalPrice::new(u.clone(), v.clone())
            }
        }
        .map_err(keyed("seasonal"))?;
        require(
            "grid.count",
            c.grid.count >= 2,
            format!("need at least 2 points, got {}", c.grid.count),
        )?;
        require(
            "grid",
            c.grid.z2_min.is_finite() && c.grid.z2_max.is_finite() && c.grid.z2_min < c.grid.z2_max,
            "z2_min must be below z2_max",
        )?;
        let grid = Grid::line(c.grid.count, c.grid.z2_min, c.grid.z2_max).map_err(keyed("grid"))?;
        let sampling =
            build_disturbance_sampling(ar1, c.sampling.count).map_err(keyed("sampling.count"))?;
        require(
            "diagnostics.paths",
            c.diagnostics.paths >= 1,
            "must be at least 1",
        )?;
        require(
            "diagnostics.subsims",
            c.diagnostics.subsims >= 1,
            "must be at least 1",
        )?;
        let model = BatteryModel::new(lattice, actions, demand, prices, c.scrap.into());
        Ok(Self {
            config,
            model,
            price,
            ar1,
            sampling,
            grid,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn model(&self) -> &BatteryModel {
        &self.model
    }

    pub fn price(&self) -> &SeasonalPrice {
        &self.price
    }

    pub fn ar1(&self) -> Ar1Params {
        self.ar1
    }

    pub fn sampling(&self) -> &DisturbanceSampling {
        &self.sampling
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn solve(&self) -> Result<SolveResult> {
        solve_with(
            &self.model,
            &self.price,
            &self.sampling,
            &self.grid,
            SolveOptions::default(),
        )
    }

    /// Diagnostic paths with the configured sizes and seed.
    pub fn paths(&self) -> Result<PathSet> {
        let d = &self.config.diagnostics;
        self.paths_with(d.paths, d.subsims, d.seed)
    }

    pub fn paths_with(&self, paths: usize, nest: usize, seed: u64) -> Result<PathSet> {
        simulate_paths(
            self.ar1,
            self.config.z0,
            self.config.horizon,
            paths,
            nest,
            seed,
        )
    }

    /// Fails unless `result` has the shape this experiment produces.
    pub fn check_result(&self, result: &SolveResult) -> Result<()> {
        let ok = result.horizon() == self.config.horizon
            && result.levels() == self.model.levels()
            && result.grid() == &self.grid;
        if ok {
            Ok(())
        } else {
            Err(Error::Bundle(
                "solution does not match the configured horizon, levels or grid".into(),
            ))
        }
    }

    pub fn diagnose(
        &self,
        result: &SolveResult,
        options: BoundOptions,
    ) -> Result<DiagnosticsReport> {
        self.check_result(result)?;
        let paths = self.paths()?;
        primal_dual_with(result, &paths, &self.model, &self.price, options)
    }

    /// `v_0(p, z0)` for every level.
    pub fn initial_values(&self, result: &SolveResult) -> Result<Vec<f64>> {
        (0..self.model.levels())
            .map(|p| result.value_at(0, p, &self.config.z0))
            .collect()
    }

    /// Index of the lattice level equal to `level`.
    pub fn level_index(&self, level: f64) -> Result<usize> {
        self.model.lattice().index_of(level).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "{level} is not a battery level of this configuration"
            ))
        })
    }
}

/// Lists of parameter values whose cross product forms sweep cases. An
/// empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub phi: Vec<f64>,
    pub capacity: Vec<f64>,
    pub scrap: Vec<Scrap>,
}

/// A base configuration and one or more blocks of axes:
///
/// ```toml
/// start_level = 0.0
///
/// [base]
/// sampling.count = 2000
///
/// [[block]]
/// phi = [0.9, 0.1]
/// capacity = [5.0, 100.0]
///
/// [[block]]
/// capacity = [10.0, 20.0]
/// scrap = ["sell", "zero"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub base: RunConfig,
    /// Starting battery level reported for every case.
    pub start_level: f64,
    #[serde(rename = "block")]
    pub blocks: Vec<SweepAxes>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            base: RunConfig::default(),
            start_level: 0.0,
            blocks: Vec::new(),
        }
    }
}

/// One member of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCase {
    pub label: String,
    pub config: RunConfig,
}

impl SweepSpec {
    /// Mean reversion levels against a small and a large battery, and
    /// capacities 10 to 100 MWh under both scrap rules, all from an empty
    /// battery.
    pub fn case_study() -> Self {
        Self {
            base: RunConfig::case_study(),
            start_level: 0.0,
            blocks: vec![
                SweepAxes {
                    phi: vec![0.9, 0.6, 0.3, 0.1],
                    capacity: vec![5.0, 100.0],
                    scrap: Vec::new(),
                },
                SweepAxes {
                    phi: Vec::new(),
                    capacity: (1..=10).map(|c| 10.0 * c as f64).collect(),
                    scrap: vec![Scrap::Sell, Scrap::Zero],
                },
            ],
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            key: "sweep".into(),
            message: e.message().trim().to_string(),
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        Self::from_toml_str(&text)
    }

    /// Cases block by block, each in phi-major, then capacity, then scrap
    /// order. A case already produced by an earlier block is skipped. No
    /// blocks means the base configuration alone.
    pub fn cases(&self) -> Vec<SweepCase> {
        let single = [SweepAxes::default()];
        let blocks: &[SweepAxes] = if self.blocks.is_empty() {
            &single
        } else {
            &self.blocks
        };
        let mut out: Vec<SweepCase> = Vec::new();
        for axes in blocks {
            let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
            let phis = or(&axes.phi, self.base.ar1.phi);
            let caps = or(&axes.capacity, self.base.battery.p_max);
            let scraps = if axes.scrap.is_empty() {
                vec![self.base.scrap]
            } else {
                axes.scrap.clone()
            };
            for &phi in &phis {
                for &cap in &caps {
                    for &scrap in &scraps {
                        let label = format!("phi={phi},capacity={cap},scrap={scrap}");
                        if out.iter().any(|c| c.label == label) {
                            continue;
                        }
                        let mut config = self.base.clone();
                        config.ar1.phi = phi;
                        config.battery.p_max = cap;
                        config.scrap = scrap;
                        out.push(SweepCase { label, config });
                    }
                }
            }
        }
        out
    }
}

/// Bounds at one starting level for one sweep case.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub phi: f64,
    pub capacity: f64,
    pub scrap: Scrap,
    pub start_level: f64,
    /// `v_0(start, z0)` from the value function approximation.
    pub value: f64,
    pub lower: f64,
    pub lower_se: f64,
    pub upper: f64,
    pub upper_se: f64,
}

/// Solves and diagnoses every case in order. The first failing case aborts
/// the sweep and is named in the error.
pub fn sweep(
    cases: &[SweepCase],
    start_level: f64,
    options: BoundOptions,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(cases.len());
    for case in cases {
        let row = run_case(case, start_level, options).map_err(|e| Error::Sweep {
            case: case.label.clone(),
            source: Box::new(e),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

fn run_case(case: &SweepCase, start_level: f64, options: BoundOptions) -> Result<SweepRow> {
    let exp = Experiment::new(case.config.clone())?;
    let p = exp.level_index(start_level)?;
    let result = exp.solve()?;
    let report = exp.diagnose(&result, options)?;
    Ok(SweepRow {
        label: case.label.clone(),
        phi: case.config.ar1.phi,
        capacity: case.config.battery.p_max,
        scrap: case.config.scrap,
        start_level,
        value: result.value_at(0, p, &case.config.z0)?,
        lower: report.lower_mean[p],
        lower_se: report.lower_se[p],
        upper: report.upper_mean[p],
        upper_se: report.upper_se[p],
    })
}
