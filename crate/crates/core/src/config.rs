//! Run configuration in TOML.
//!
//! Every key is optional; missing keys take the case-study values, so an
//! empty file (or `RunConfig::default()`) is the reference setup:
//!
//! ```toml
//! horizon = 335
//! scrap = "sell"
//! z0 = [1.0, 0.0]
//!
//! [battery]
//! p_min = 0.0
//! p_max = 100.0
//! step = 5.0
//!
//! [actions]
//! margins = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0]
//!
//! [demand]
//! std_dev = 10.0
//!
//! [grid_prices]
//! sell = 0.0
//! buy = 20.0
//!
//! [ar1]
//! mu = 0.0
//! sigma = 0.5
//! phi = 0.9
//!
//! [seasonal]
//! kind = "trig"
//! intercept = 10.0
//! intercept_amplitude = 1.0
//! slope = 1.0
//! slope_amplitude = 0.5
//! period = 48.0
//! phase = 4.71238898038469
//!
//! [grid]
//! count = 501
//! z2_min = -15.0
//! z2_max = 15.0
//!
//! [sampling]
//! count = 10000
//!
//! [diagnostics]
//! paths = 100
//! subsims = 100
//! seed = 12345
//! ```
//!
//! `[seasonal]` alternatively takes `kind = "explicit"` with arrays `u` and
//! `v` of length `horizon + 1`.

use serde::{Deserialize, Serialize};

use crate::battery::ScrapMode;
use crate::error::{Error, Result};
use crate::stochastic::TrigSeason;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scrap {
    Sell,
    Zero,
}

impl From<Scrap> for ScrapMode {
    fn from(s: Scrap) -> Self {
        match s {
            Scrap::Sell => ScrapMode::Sell,
            Scrap::Zero => ScrapMode::Zero,
        }
    }
}

impl std::fmt::Display for Scrap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scrap::Sell => "sell",
            Scrap::Zero => "zero",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub p_min: f64,
    pub p_max: f64,
    pub step: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            p_min: 0.0,
            p_max: 100.0,
            step: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionsConfig {
    pub margins: Vec<f64>,
}

impl Default for ActionsConfig {
    fn default() -> Self {
        Self {
            margins: (0..11).map(|a| 5.0 * a as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    pub std_dev: f64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self { std_dev: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridPricesConfig {
    pub sell: f64,
    pub buy: f64,
}

impl Default for GridPricesConfig {
    fn default() -> Self {
        Self {
            sell: 0.0,
            buy: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ar1Config {
    pub mu: f64,
    pub sigma: f64,
    pub phi: f64,
}

impl Default for Ar1Config {
    fn default() -> Self {
        Self {
            mu: 0.0,
            sigma: 0.5,
            phi: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SeasonalConfig {
    Trig {
        #[serde(default = "trig_intercept")]
        intercept: f64,
        #[serde(default = "trig_intercept_amplitude")]
        intercept_amplitude: f64,
        #[serde(default = "trig_slope")]
        slope: f64,
        #[serde(default = "trig_slope_amplitude")]
        slope_amplitude: f64,
        #[serde(default = "trig_period")]
        period: f64,
        #[serde(default = "trig_phase")]
        phase: f64,
    },
    Explicit {
        u: Vec<f64>,
        v: Vec<f64>,
    },
}

fn trig_intercept() -> f64 {
    TrigSeason::CASE_STUDY.intercept
}
fn trig_intercept_amplitude() -> f64 {
    TrigSeason::CASE_STUDY.intercept_amplitude
}
fn trig_slope() -> f64 {
    TrigSeason::CASE_STUDY.slope
}
fn trig_slope_amplitude() -> f64 {
    TrigSeason::CASE_STUDY.slope_amplitude
}
fn trig_period() -> f64 {
    TrigSeason::CASE_STUDY.period
}
fn trig_phase() -> f64 {
    TrigSeason::CASE_STUDY.phase
}

impl Default for SeasonalConfig {
    fn default() -> Self {
        let s = TrigSeason::CASE_STUDY;
        SeasonalConfig::Trig {
            intercept: s.intercept,
            intercept_amplitude: s.intercept_amplitude,
            slope: s.slope,
            slope_amplitude: s.slope_amplitude,
            period: s.period,
            phase: s.phase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub count: usize,
    pub z2_min: f64,
    pub z2_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            count: 501,
            z2_min: -15.0,
            z2_max: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub count: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { count: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub paths: usize,
    pub subsims: usize,
    pub seed: u64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            paths: 100,
            subsims: 100,
            seed: 12345,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: usize,
    pub scrap: Scrap,
    pub z0: [f64; 2],
    pub battery: BatteryConfig,
    pub actions: ActionsConfig,
    pub demand: DemandConfig,
    pub grid_prices: GridPricesConfig,
    pub ar1: Ar1Config,
    pub seasonal: SeasonalConfig,
    pub grid: GridConfig,
    pub sampling: SamplingConfig,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            horizon: 335,
            scrap: Scrap::Sell,
            z0: [1.0, 0.0],
            battery: BatteryConfig::default(),
            actions: ActionsConfig::default(),
            demand: DemandConfig::default(),
            grid_prices: GridPricesConfig::default(),
            ar1: Ar1Config::default(),
            seasonal: SeasonalConfig::default(),
            grid: GridConfig::default(),
            sampling: SamplingConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

impl RunConfig {
    /// The case-study setup.
    pub fn case_study() -> Self {
        Self::default()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .and_then(|span| key_at(text, span.start))
                .unwrap_or_else(|| "<root>".to_string());
            Error::Config {
                key,
                message: e.message().trim().to_string(),
            }
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

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The configuration without the diagnostics section, which is all the
    /// value functions depend on.
    pub fn model_part(&self) -> RunConfig {
        RunConfig {
            diagnostics: DiagnosticsConfig::default(),
            ..self.clone()
        }
    }

    /// Top-level sections whose values differ between `self` and `other`.
    pub fn differing_sections(&self, other: &RunConfig) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut check = |name: &'static str, same: bool| {
            if !same {
                out.push(name);
            }
        };
        check("horizon", self.horizon == other.horizon);
        check("scrap", self.scrap == other.scrap);
        check("z0", self.z0 == other.z0);
        check("battery", self.battery == other.battery);
        check("actions", self.actions == other.actions);
        check("demand", self.demand == other.demand);
        check("grid_prices", self.grid_prices == other.grid_prices);
        check("ar1", self.ar1 == other.ar1);
        check("seasonal", self.seasonal == other.seasonal);
        check("grid", self.grid == other.grid);
        check("sampling", self.sampling == other.sampling);
        check("diagnostics", self.diagnostics == other.diagnostics);
        out
    }
}

/// Dotted key (`section.key`) of the assignment on the line containing
/// byte offset `pos`.
fn key_at(text: &str, pos: usize) -> Option<String> {
    let pos = pos.min(text.len());
    let line_start = text[..pos].rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next().unwrap_or("");
    let section = text[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    let key = line
        .split('=')
        .next()
        .map(str::trim)
        .filter(|k| !k.is_empty());
    let header = line.trim();
    if header.starts_with('[') {
        return Some(
            header
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string(),
        );
    }
    match (section, key) {
        (Some(s), Some(k)) if line.contains('=') => Some(format!("{s}.{k}")),
        (None, Some(k)) if line.contains('=') => Some(k.to_string()),
        (Some(s), _) => Some(s),
        _ => None,
    }
}
