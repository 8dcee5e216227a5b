//! Experiment parameterization shared by the engine, the analysis and the
//! command line runner.

use serde::{Deserialize, Serialize};

use crate::deployment::{ArenaSpec, BeamGeometry};
use crate::error::{NdError, Result};
use crate::phy::{PhyConfig, DEFAULT_UNPACK_SAMPLES};
use crate::protocol::{variant_phy, Variant};

pub const DEFAULT_SLOT_BUDGET: u64 = 5000;
pub const DEFAULT_SEED_COUNT: usize = 20;
pub const DEFAULT_SEED_BASE: u64 = 1;

/// Physical-layer constants; the SIC mode and modulation count come from
/// the variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyParams {
    pub beta: f64,
    pub lambda0: f64,
    pub tx_power: f64,
    pub gain_tx: f64,
    pub gain_rx: f64,
    pub noise_floor: f64,
    pub xi: f64,
}

impl Default for PhyParams {
    fn default() -> Self {
        let p = PhyConfig::default();
        Self {
            beta: p.beta,
            lambda0: p.lambda0,
            tx_power: p.tx_power,
            gain_tx: p.gain_tx,
            gain_rx: p.gain_rx,
            noise_floor: p.noise_floor,
            xi: p.xi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range {
        count: usize,
        #[serde(default = "default_seed_base")]
        base: u64,
    },
}

fn default_seed_base() -> u64 {
    DEFAULT_SEED_BASE
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Range {
            count: DEFAULT_SEED_COUNT,
            base: DEFAULT_SEED_BASE,
        }
    }
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { count, base } => (0..*count as u64).map(|i| base + i).collect(),
        }
    }
}

fn default_side() -> f64 {
    3000.0
}

fn default_slot_budget() -> u64 {
    DEFAULT_SLOT_BUDGET
}

fn default_thresholds() -> Vec<f64> {
    vec![0.95]
}

fn default_pbar_samples() -> usize {
    DEFAULT_UNPACK_SAMPLES
}

/// Full description of one experiment point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_side")]
    pub a: f64,
    #[serde(default = "default_side")]
    pub b: f64,
    pub node_count: usize,
    pub r: f64,
    /// Number of beams; the beam width is 2π / beam_count.
    pub beam_count: u32,
    pub p_t: f64,
    pub variant: Variant,
    #[serde(default)]
    pub phy: PhyParams,
    #[serde(default = "default_slot_budget")]
    pub slot_budget: u64,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_pbar_samples")]
    pub pbar_samples: usize,
}

impl SimConfig {
    /// The 3000 m x 3000 m, r = 800 m setup with β = 4 and λ₀ = 0.125 m.
    pub fn reference(node_count: usize, variant: Variant, p_t: f64, beam_count: u32) -> Self {
        Self {
            a: 3000.0,
            b: 3000.0,
            node_count,
            r: 800.0,
            beam_count,
            p_t,
            variant,
            phy: PhyParams::default(),
            slot_budget: DEFAULT_SLOT_BUDGET,
            seeds: SeedSpec::default(),
            thresholds: default_thresholds(),
            pbar_samples: DEFAULT_UNPACK_SAMPLES,
        }
    }

    pub fn arena(&self) -> ArenaSpec {
        ArenaSpec {
            a: self.a,
            b: self.b,
            node_count: self.node_count,
            r: self.r,
        }
    }

    pub fn geometry(&self) -> Result<BeamGeometry> {
        BeamGeometry::new(self.beam_count)
    }

    /// PHY parameters with the variant's SIC mode and modulation count.
    pub fn phy_config(&self) -> PhyConfig {
        let base = PhyConfig {
            beta: self.phy.beta,
            lambda0: self.phy.lambda0,
            tx_power: self.phy.tx_power,
            gain_tx: self.phy.gain_tx,
            gain_rx: self.phy.gain_rx,
            noise_floor: self.phy.noise_floor,
            xi: self.phy.xi,
            ..PhyConfig::default()
        };
        variant_phy(&self.variant, &base)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.seeds()
    }

    pub fn validate(&self) -> Result<()> {
        self.arena().validate()?;
        self.geometry()?;
        self.variant.validate()?;
        self.phy_config().validate()?;
        if !(0.0..=1.0).contains(&self.p_t) {
            return Err(NdError::Config(format!(
                "p_t must lie in [0, 1], got {}",
                self.p_t
            )));
        }
        if let Some(t) = self
            .thresholds
            .iter()
            .find(|t| !(t.is_finite() && **t > 0.0 && **t <= 1.0))
        {
            return Err(NdError::Config(format!(
                "thresholds must lie in (0, 1], got {t}"
            )));
        }
        if self.pbar_samples == 0 {
            return Err(NdError::Config("pbar_samples must be >= 1".into()));
        }
        if self.seed_list().is_empty() {
            return Err(NdError::Config("at least one seed is required".into()));
        }
        Ok(())
    }
}
