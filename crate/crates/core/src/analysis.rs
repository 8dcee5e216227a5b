//! Closed-form per-slot discovery probabilities, the expected time to find
//! every neighbor, and a mean-field fraction-discovered curve.
//!
//! All probabilities are evaluated per beam: `k` is the mean number of
//! neighbors inside one beam and `j` is how many of them are already known.
//! The combinatorial terms use the integer count `k_int = round(k)`.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::deployment::{avg_neighbors_analytic, per_beam_neighbors};
use crate::error::{NdError, Result};
use crate::phy::{max_unpack_count, SicMode, UnpackCache, UnpackTable};
use crate::protocol::{BaseAlgorithm, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub variant: Variant,
    /// Mean neighbors per beam.
    pub k: f64,
    pub p_t: f64,
    pub beam_count: u32,
    /// Modulation count used by the MPR formulas.
    pub h: u32,
    /// Unpack bound.
    pub n0: u32,
    /// Expected unpack probability for 1..=n0 collided packets.
    pub pbar: Vec<f64>,
}

impl AnalysisParams {
    /// Parameters for a simulation config, with the unpack table estimated
    /// by Monte Carlo (`pbar_samples` draws, stream rooted at `seed`).
    pub fn from_config(config: &SimConfig, cache: &UnpackCache, seed: u64) -> Result<Self> {
        config.validate()?;
        let n_bar = avg_neighbors_analytic(&config.arena())?;
        let geom = config.geometry()?;
        let k = per_beam_neighbors(n_bar, &geom);
        let phy = config.phy_config();
        let table = cache.get(&phy, config.r, config.pbar_samples, seed);
        let params = Self {
            variant: config.variant,
            k,
            p_t: config.p_t,
            beam_count: config.beam_count,
            h: config.variant.h.max(1),
            n0: max_unpack_count(&phy, config.r),
            pbar: table.values.clone(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_table(
        variant: Variant,
        k: f64,
        p_t: f64,
        beam_count: u32,
        table: &UnpackTable,
    ) -> Self {
        Self {
            variant,
            k,
            p_t,
            beam_count,
            h: variant.h.max(1),
            n0: table.n0,
            pbar: table.values.clone(),
        }
    }

    /// Integer neighbor count used inside binomial terms.
    pub fn k_int(&self) -> i64 {
        self.k.round() as i64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(NdError::Config(format!(
                "mean neighbors per beam must be positive, got {}",
                self.k
            )));
        }
        if self.k_int() < 1 {
            return Err(NdError::Config(format!(
                "mean neighbors per beam K = {:.3} rounds to 0; use more nodes, a larger \
                 radius or wider beams (fewer beams) so that K >= 0.5",
                self.k
            )));
        }
        if !(0.0..=1.0).contains(&self.p_t) {
            return Err(NdError::Config(format!(
                "p_t must lie in [0, 1], got {}",
                self.p_t
            )));
        }
        if self.beam_count == 0 || self.h == 0 {
            return Err(NdError::Config("beam_count and h must be >= 1".into()));
        }
        if self.pbar.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(NdError::Config(
                "unpack probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn pbar(&self, m: i64) -> f64 {
        if m < 1 || m > self.n0 as i64 {
            0.0
        } else {
            self.pbar.get((m - 1) as usize).copied().unwrap_or(0.0)
        }
    }

    /// Beam alignment factor: θ/2π when beams are drawn at random, 1 when
    /// the scan schedule aligns them.
    fn alignment(&self) -> f64 {
        match self.variant.base {
            BaseAlgorithm::Cra => 1.0 / self.beam_count as f64,
            BaseAlgorithm::Sba => 1.0,
        }
    }

    /// Share of slots in which a given beam is in play. Under SBA a beam is
    /// scanned once per cycle of `beam_count` slots; under CRA the alignment
    /// factor already accounts for beam choice.
    pub fn slot_activity(&self) -> f64 {
        match self.variant.base {
            BaseAlgorithm::Cra => 1.0,
            BaseAlgorithm::Sba => 1.0 / self.beam_count as f64,
        }
    }
}

fn binomial(n: i64, k: i64) -> f64 {
    if k < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `sum_{m=0}^{min(trials, upper)} C(trials, m) x^m (1-x)^(trials-m) pbar(m + offset)`,
/// clamped to [0, 1] against rounding in the binomial weights.
fn weighted_binomial_sum(
    params: &AnalysisParams,
    trials: i64,
    upper: i64,
    x: f64,
    offset: i64,
) -> f64 {
    if trials < 0 {
        return 0.0;
    }
    let top = trials.min(upper);
    (0..=top)
        .map(|m| {
            binomial(trials, m)
                * x.powi(m as i32)
                * (1.0 - x).powi((trials - m) as i32)
                * params.pbar(m + offset)
        })
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Components of the per-slot discovery probability for one `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryTerms {
    /// A receives B's HELLO.
    pub p_receive: f64,
    /// B receives A's HELLO.
    pub p_transmit: f64,
    /// A competing neighbor replies toward A.
    pub p_reply: f64,
    /// B's ACK survives the competing replies.
    pub p_ack: f64,
    /// `p_receive + p_transmit * p_ack`, clamped to [0, 1].
    pub total: f64,
    /// Whether `total` needed clamping.
    pub clamped: bool,
}

pub fn discovery_terms(params: &AnalysisParams, j: i64) -> Result<DiscoveryTerms> {
    let k = params.k_int();
    if k < 1 || j < 0 || j > k - 1 {
        return Err(NdError::Domain(format!(
            "discovered count j={j} outside 0..={} (K={k})",
            k - 1
        )));
    }
    let p = params.p_t;
    let q = params.alignment();
    let n0 = params.n0 as i64;
    let kf = k as f64;
    let jf = j as f64;

    let (p_receive, p_transmit, p_reply, p_ack) = match (params.variant.sic_mode, params.h) {
        (SicMode::None, _) => {
            let free = (1.0 - q * p).powi((k - 1) as i32);
            let p_r = q * (1.0 - p) * q * p * free;
            let p_reply = (q * (1.0 - p) * free).clamp(0.0, 1.0);
            let p_ack = (1.0 - p_reply).powi((k - 1 - j) as i32);
            (p_r, p_r, p_reply, p_ack)
        }
        (_, h) => {
            let hf = h.max(1) as f64;
            let x = q * p / hf;
            let survive = weighted_binomial_sum(params, k - 1, n0 - 1, x, 1);
            let p_r = q * (1.0 - p) * q * p * survive;
            // a neighbor that already knows A replies only if it decodes a
            // new sender next to A; one that does not know A replies to A
            let relay = if h > 1 {
                weighted_binomial_sum(params, k - 2, n0 - 2, x, 2) / hf
                    + (1.0 - 1.0 / hf) * weighted_binomial_sum(params, k - 2, n0 - 1, x, 1)
            } else {
                weighted_binomial_sum(params, k - 2, n0 - 2, x, 2)
            };
            let p_reply = (jf / kf) * q * (1.0 - p) * (kf - jf) * q * p * relay
                + ((kf - jf) / kf) * q * (1.0 - p) * survive;
            let p_reply = p_reply.clamp(0.0, 1.0);
            let p_ack = weighted_binomial_sum(params, k - 1, n0 - 1, p_reply / hf, 1);
            (p_r, p_r, p_reply, p_ack)
        }
    };
    let raw = p_receive + p_transmit * p_ack;
    let total = raw.clamp(0.0, 1.0);
    Ok(DiscoveryTerms {
        p_receive,
        p_transmit,
        p_reply,
        p_ack,
        total,
        clamped: total != raw,
    })
}

/// Probability that a node discovers one particular unknown neighbor in a
/// slot, given `j` neighbors of that beam are already known.
pub fn discovery_prob(params: &AnalysisParams, j: i64) -> Result<f64> {
    discovery_terms(params, j).map(|t| t.total)
}

/// Expected slots to find every neighbor in every beam. Infinite when some
/// step has zero probability.
pub fn expected_total_slots(params: &AnalysisParams) -> Result<f64> {
    let k = params.k_int();
    if k < 1 {
        return Err(NdError::Domain(format!("K rounds to {k}; need at least 1")));
    }
    let mut sum = 0.0;
    for j in 0..k {
        let p = discovery_prob(params, j)?;
        if p <= 0.0 {
            return Ok(f64::INFINITY);
        }
        sum += 1.0 / ((k - j) as f64 * p);
    }
    Ok(params.beam_count as f64 * sum)
}

/// Mean-field expected fraction discovered after each of `slots` slots.
///
/// `D(t) = D(t-1) + a (K - D(t-1)) P(round(D(t-1)))` with `D(0) = 0`, where
/// `a` is [`AnalysisParams::slot_activity`].
pub fn theory_curve(params: &AnalysisParams, slots: u64) -> Result<Vec<f64>> {
    let k_int = params.k_int();
    if k_int < 1 {
        return Err(NdError::Domain(format!(
            "K rounds to {k_int}; need at least 1"
        )));
    }
    let probs: Vec<f64> = (0..k_int)
        .map(|j| discovery_prob(params, j))
        .collect::<Result<_>>()?;
    let activity = params.slot_activity();
    let k = params.k;
    let mut d = 0.0f64;
    let mut curve = Vec::with_capacity(slots as usize);
    for _ in 0..slots {
        let j = (d.round() as i64).clamp(0, k_int - 1) as usize;
        d += activity * (k - d) * probs[j];
        d = d.min(k);
        curve.push(d / k);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    /// Per-slot discovery probability for `j = 0..k_int`.
    pub discovery_prob: Vec<f64>,
    pub expected_total_slots: f64,
    pub theory_curve: Vec<f64>,
}

pub fn analyze(params: &AnalysisParams, slots: u64) -> Result<AnalysisResult> {
    params.validate()?;
    Ok(AnalysisResult {
        discovery_prob: (0..params.k_int())
            .map(|j| discovery_prob(params, j))
            .collect::<Result<_>>()?,
        expected_total_slots: expected_total_slots(params)?,
        theory_curve: theory_curve(params, slots)?,
    })
}
