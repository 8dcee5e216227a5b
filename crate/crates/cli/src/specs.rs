//! Input files: single configs, sweep grids and comparison plans.

use std::path::Path;

use nd_core::{BaseAlgorithm, NdError, SeedSpec, SimConfig, Variant};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const DEFAULT_SWEEP_CAP: usize = 1000;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Command-line overrides of a config's seed list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SeedOverride {
    pub count: Option<usize>,
    pub base: Option<u64>,
}

impl SeedOverride {
    /// Reads the base seed from `ND_SEED_BASE` when set.
    pub fn from_env(count: Option<usize>) -> CliResult<Self> {
        let base = match std::env::var("ND_SEED_BASE") {
            Ok(v) => Some(v.trim().parse::<u64>().map_err(|e| CliError::Parse {
                path: "ND_SEED_BASE".into(),
                message: format!("{v:?} is not an unsigned integer ({e})"),
            })?),
            Err(_) => None,
        };
        Ok(Self { count, base })
    }

    pub fn apply(&self, config: &mut SimConfig) {
        if self.count.is_none() && self.base.is_none() {
            return;
        }
        let (count, base) = match &config.seeds {
            SeedSpec::Range { count, base } => (*count, *base),
            SeedSpec::List(v) => (v.len(), v.iter().copied().min().unwrap_or(1)),
        };
        config.seeds = SeedSpec::Range {
            count: self.count.unwrap_or(count),
            base: self.base.unwrap_or(base),
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValues {
    List {
        values: Vec<Value>,
    },
    /// Inclusive arithmetic range.
    Range {
        start: f64,
        stop: f64,
        step: f64,
    },
}

/// One named sweep dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    #[serde(flatten)]
    pub values: AxisValues,
}

pub const AXIS_NAMES: [&str; 11] = [
    "node_count",
    "p_t",
    "beam_count",
    "r",
    "a",
    "b",
    "xi",
    "noise_floor",
    "beta",
    "h",
    "variant",
];

fn tidy(v: f64) -> f64 {
    // keeps 0.1 + 0.05 from printing as 0.15000000000000002
    (v * 1e12).round() / 1e12
}

impl Axis {
    pub fn expand(&self) -> CliResult<Vec<Value>> {
        if !AXIS_NAMES.contains(&self.name.as_str()) {
            return Err(invalid(format!(
                "unknown sweep axis {:?}; expected one of {}",
                self.name,
                AXIS_NAMES.join(", ")
            )));
        }
        match &self.values {
            AxisValues::List { values } => {
                if values.is_empty() {
                    return Err(invalid(format!("axis {} has no values", self.name)));
                }
                Ok(values.clone())
            }
            AxisValues::Range { start, stop, step } => {
                if !(step.is_finite() && *step > 0.0) || !(start.is_finite() && stop.is_finite()) {
                    return Err(invalid(format!(
                        "axis {}: range needs finite bounds and a positive step",
                        self.name
                    )));
                }
                if stop < start {
                    return Err(invalid(format!("axis {}: stop is below start", self.name)));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                Ok((0..n)
                    .map(|i| Value::from(tidy(start + i as f64 * step)))
                    .collect())
            }
        }
    }

    /// Writes one value of this axis into `config`.
    pub fn apply(&self, value: &Value, config: &mut SimConfig) -> CliResult<()> {
        let name = self.name.as_str();
        if name == "variant" {
            let text = value.as_str().ok_or_else(|| {
                invalid(format!("variant axis values must be strings, got {value}"))
            })?;
            config.variant = text.parse::<Variant>()?;
            return Ok(());
        }
        let x = value
            .as_f64()
            .ok_or_else(|| invalid(format!("axis {name} needs numbers, got {value}")))?;
        let whole = || -> CliResult<u64> {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as u64)
            } else {
                Err(invalid(format!(
                    "axis {name} needs non-negative integers, got {x}"
                )))
            }
        };
        match name {
            "node_count" => config.node_count = whole()? as usize,
            "beam_count" => config.beam_count = whole()? as u32,
            "h" => config.variant.h = whole()? as u32,
            "p_t" => config.p_t = x,
            "r" => config.r = x,
            "a" => config.a = x,
            "b" => config.b = x,
            "xi" => config.phy.xi = x,
            "noise_floor" => config.phy.noise_floor = x,
            "beta" => config.phy.beta = x,
            _ => unreachable!("axis names are checked in expand"),
        }
        Ok(())
    }
}

fn invalid(msg: String) -> CliError {
    CliError::Invalid(NdError::Config(msg))
}

fn default_cap() -> usize {
    DEFAULT_SWEEP_CAP
}

/// Cartesian grid of configs derived from `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: SimConfig,
    #[serde(default)]
    pub axes: Vec<Axis>,
    /// Slots at which the mean fraction discovered is reported.
    #[serde(default)]
    pub fraction_at: Vec<u64>,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

/// One grid point: its axis values (in axis order) and the resulting config.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub values: Vec<Value>,
    pub config: SimConfig,
}

impl SweepSpec {
    pub fn grid_size(&self) -> CliResult<usize> {
        let mut size = 1usize;
        for axis in &self.axes {
            size = size.saturating_mul(axis.expand()?.len());
        }
        Ok(size)
    }

    /// Grid points in row-major order (last axis varies fastest).
    pub fn grid(&self) -> CliResult<Vec<GridPoint>> {
        let size = self.grid_size()?;
        if size > self.cap {
            return Err(CliError::Cap {
                points: size,
                cap: self.cap,
            });
        }
        let expanded: Vec<Vec<Value>> = self
            .axes
            .iter()
            .map(Axis::expand)
            .collect::<CliResult<_>>()?;
        let mut points = Vec::with_capacity(size);
        for index in 0..size {
            let mut rest = index;
            let mut values = vec![Value::Null; expanded.len()];
            for (k, vals) in expanded.iter().enumerate().rev() {
                values[k] = vals[rest % vals.len()].clone();
                rest /= vals.len();
            }
            let mut config = self.base.clone();
            for (axis, v) in self.axes.iter().zip(&values) {
                axis.apply(v, &mut config)?;
            }
            config.validate()?;
            points.push(GridPoint { values, config });
        }
        Ok(points)
    }
}

/// Per-base parameters used in a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSetting {
    pub base: BaseAlgorithm,
    pub p_t: f64,
    pub beam_count: u32,
}

impl BaseSetting {
    /// Best-performing settings reported for each scan scheme: p_t = 0.1
    /// with π/3 beams for SBA, p_t = 0.2 with π/2 beams for CRA.
    pub fn tuned(base: BaseAlgorithm) -> Self {
        match base {
            BaseAlgorithm::Sba => Self {
                base,
                p_t: 0.1,
                beam_count: 6,
            },
            BaseAlgorithm::Cra => Self {
                base,
                p_t: 0.2,
                beam_count: 4,
            },
        }
    }
}

fn default_bases() -> Vec<BaseSetting> {
    vec![
        BaseSetting::tuned(BaseAlgorithm::Sba),
        BaseSetting::tuned(BaseAlgorithm::Cra),
    ]
}

fn default_mpr_h() -> u32 {
    2
}

fn default_threshold() -> f64 {
    0.95
}

/// Plain, SIC and SIC+MPR runs of each base at each node count, with the
/// matching theory curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    /// Arena, PHY, budget and seeds; its variant, p_t and beam_count are
    /// replaced per base.
    pub base: SimConfig,
    /// Defaults to the base config's node count.
    #[serde(default)]
    pub node_counts: Vec<usize>,
    #[serde(default = "default_mpr_h")]
    pub mpr_h: u32,
    #[serde(default = "default_bases")]
    pub bases: Vec<BaseSetting>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl CompareSpec {
    pub fn node_counts(&self) -> Vec<usize> {
        if self.node_counts.is_empty() {
            vec![self.base.node_count]
        } else {
            self.node_counts.clone()
        }
    }

    pub fn variants(&self, base: BaseAlgorithm) -> [Variant; 3] {
        [
            Variant::plain(base),
            Variant::sic(base),
            Variant::sic_mpr(base, self.mpr_h),
        ]
    }

    pub fn config_for(
        &self,
        setting: &BaseSetting,
        variant: Variant,
        node_count: usize,
    ) -> SimConfig {
        SimConfig {
            node_count,
            p_t: setting.p_t,
            beam_count: setting.beam_count,
            variant,
            ..self.base.clone()
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.bases.is_empty() {
            return Err(invalid("compare needs at least one base".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(invalid(format!(
                "threshold must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        for setting in &self.bases {
            for n in self.node_counts() {
                for v in self.variants(setting.base) {
                    self.config_for(setting, v, n).validate()?;
                }
            }
        }
        Ok(())
    }
}
