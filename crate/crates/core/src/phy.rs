//! Free-space received power, SIC/MPR reception, and the unpack-count
//! quantities used by the closed-form analysis.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::deployment::near_field_bound;
use crate::error::{NdError, Result};
use crate::rng::{purpose, RngStream};

pub const DEFAULT_UNPACK_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SicMode {
    None,
    Perfect,
    Imperfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhyConfig {
    /// SIR/SINR decode threshold.
    pub beta: f64,
    /// Carrier wavelength in meters.
    pub lambda0: f64,
    pub tx_power: f64,
    pub gain_tx: f64,
    pub gain_rx: f64,
    /// Receiver noise power in watts; ignored unless `sic_mode` is imperfect.
    pub noise_floor: f64,
    /// Residual fraction of a cancelled packet's power; imperfect mode only.
    pub xi: f64,
    pub sic_mode: SicMode,
    /// Number of orthogonal modulations. 1 disables MPR.
    pub mpr_modulations: u32,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            beta: 4.0,
            lambda0: 0.125,
            tx_power: 1.0,
            gain_tx: 1.0,
            gain_rx: 1.0,
            noise_floor: 0.0,
            xi: 0.0,
            sic_mode: SicMode::Perfect,
            mpr_modulations: 1,
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.beta) {
            return Err(NdError::Config(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if !pos(self.lambda0) {
            return Err(NdError::Config(format!(
                "lambda0 must be > 0, got {}",
                self.lambda0
            )));
        }
        if !pos(self.tx_power) || !pos(self.gain_tx) || !pos(self.gain_rx) {
            return Err(NdError::Config(
                "tx_power, gain_tx and gain_rx must be > 0".into(),
            ));
        }
        if !(self.xi.is_finite() && (0.0..=1.0).contains(&self.xi)) {
            return Err(NdError::Config(format!(
                "xi must lie in [0, 1], got {}",
                self.xi
            )));
        }
        if !(self.noise_floor.is_finite() && self.noise_floor >= 0.0) {
            return Err(NdError::Config(format!(
                "noise_floor must be >= 0, got {}",
                self.noise_floor
            )));
        }
        if self.mpr_modulations == 0 {
            return Err(NdError::Config("mpr_modulations must be >= 1".into()));
        }
        Ok(())
    }

    fn residual(&self) -> f64 {
        match self.sic_mode {
            SicMode::Imperfect => self.xi,
            _ => 0.0,
        }
    }

    fn noise(&self) -> f64 {
        match self.sic_mode {
            SicMode::Imperfect => self.noise_floor,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PacketKind {
    Hello,
    Ack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivingPacket {
    pub sender: usize,
    /// Watts at the receiver.
    pub power: f64,
    /// 1-based modulation index.
    pub modulation: u32,
    pub kind: PacketKind,
    /// ACK addressees, sorted; empty for HELLO.
    pub addressees: Arc<[usize]>,
}

impl ArrivingPacket {
    pub fn hello(sender: usize, power: f64, modulation: u32) -> Self {
        Self {
            sender,
            power,
            modulation,
            kind: PacketKind::Hello,
            addressees: Arc::from([]),
        }
    }

    pub fn ack(sender: usize, power: f64, modulation: u32, addressees: Arc<[usize]>) -> Self {
        Self {
            sender,
            power,
            modulation,
            kind: PacketKind::Ack,
            addressees,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptionOutcome {
    /// Senders in decode order.
    pub decoded: Vec<usize>,
    /// Senders whose packets were lost, sorted by id.
    pub dropped: Vec<usize>,
}

impl ReceptionOutcome {
    pub fn is_decoded(&self, sender: usize) -> bool {
        self.decoded.contains(&sender)
    }
}

/// Free-space received power at distance `d`.
pub fn received_power(d: f64, phy: &PhyConfig) -> Result<f64> {
    let bound = near_field_bound(phy.lambda0);
    if !(d >= bound) {
        return Err(NdError::Domain(format!(
            "distance {d} m is inside the near field (< {bound} m)"
        )));
    }
    let ratio = phy.lambda0 / (4.0 * PI * d);
    Ok(ratio * ratio * phy.tx_power * phy.gain_tx * phy.gain_rx)
}

/// Single-group reception: collision loss without SIC, otherwise the
/// strongest-first cancellation chain that stops at its first failure.
pub fn sic_decode(packets: &[ArrivingPacket], phy: &PhyConfig) -> ReceptionOutcome {
    if let [only] = packets {
        return decode_alone(only, phy);
    }
    let mut idx: Vec<usize> = (0..packets.len()).collect();
    sic_decode_indices(packets, &mut idx, phy)
}

fn decode_alone(p: &ArrivingPacket, phy: &PhyConfig) -> ReceptionOutcome {
    let noise = phy.noise();
    let ok = phy.sic_mode == SicMode::None || noise <= 0.0 || p.power / noise >= phy.beta;
    let mut out = ReceptionOutcome::default();
    if ok {
        out.decoded.push(p.sender);
    } else {
        out.dropped.push(p.sender);
    }
    out
}

fn sic_decode_indices(
    packets: &[ArrivingPacket],
    idx: &mut [usize],
    phy: &PhyConfig,
) -> ReceptionOutcome {
    let mut out = ReceptionOutcome::default();
    match idx.len() {
        0 => return out,
        1 => return decode_alone(&packets[idx[0]], phy),
        _ if phy.sic_mode == SicMode::None => {
            out.dropped = idx.iter().map(|&i| packets[i].sender).collect();
            out.dropped.sort_unstable();
            return out;
        }
        _ => {}
    }

    idx.sort_by(|&i, &j| {
        packets[j]
            .power
            .total_cmp(&packets[i].power)
            .then(packets[i].sender.cmp(&packets[j].sender))
    });

    // weaker[i] = sum of powers strictly after position i
    let mut weaker = vec![0.0; idx.len()];
    let mut acc = 0.0;
    for pos in (0..idx.len()).rev() {
        weaker[pos] = acc;
        acc += packets[idx[pos]].power;
    }

    let xi = phy.residual();
    let noise = phy.noise();
    let mut residual = 0.0;
    let mut failed_at = idx.len();
    for (pos, &i) in idx.iter().enumerate() {
        let s = packets[i].power;
        let denom = weaker[pos] + residual + noise;
        let ok = denom <= 0.0 || s / denom >= phy.beta;
        if !ok {
            failed_at = pos;
            break;
        }
        out.decoded.push(packets[i].sender);
        residual += xi * s;
    }
    out.dropped = idx[failed_at..]
        .iter()
        .map(|&i| packets[i].sender)
        .collect();
    out.dropped.sort_unstable();
    out
}

/// Modulation-separated reception: each modulation group is decoded on its
/// own, with no interference from other groups.
pub fn mpr_sic_decode(packets: &[ArrivingPacket], phy: &PhyConfig) -> ReceptionOutcome {
    if phy.mpr_modulations <= 1 {
        return sic_decode(packets, phy);
    }
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, p) in packets.iter().enumerate() {
        groups.entry(p.modulation).or_default().push(i);
    }
    let mut out = ReceptionOutcome::default();
    for (_, mut idx) in groups {
        let part = sic_decode_indices(packets, &mut idx, phy);
        out.decoded.extend(part.decoded);
        out.dropped.extend(part.dropped);
    }
    out.dropped.sort_unstable();
    out
}

/// Decodes with or without modulation separation depending on `phy`.
pub fn decode(packets: &[ArrivingPacket], phy: &PhyConfig) -> ReceptionOutcome {
    if phy.mpr_modulations > 1 {
        mpr_sic_decode(packets, phy)
    } else {
        sic_decode(packets, phy)
    }
}

/// Largest number of packets perfect SIC can separate when every sender
/// lies within `r`.
pub fn max_unpack_count(phy: &PhyConfig, r: f64) -> u32 {
    let arg = 16.0 * PI * PI * r * r / (phy.lambda0 * phy.lambda0 * phy.beta);
    if !(arg > 0.0) || !arg.is_finite() {
        return 1;
    }
    let n = (2.0 + arg.ln() / (1.0 + phy.beta).ln()).floor();
    if n < 1.0 {
        1
    } else {
        n as u32
    }
}

/// Per-sample value of the expected unpack probability for sorted distances
/// `d[0] <= ... <= d[m-1]`, clamped to `[0, 1]`.
pub fn unpack_prob_sample(sorted_distances: &[f64], beta: f64, r: f64) -> f64 {
    let m = sorted_distances.len();
    if m == 0 {
        return 0.0;
    }
    // p[m-1] = 1; p[m-1-n] = 1 / (beta r^2 sum_{i<n} 1/d[m-1-i]^2)
    let mut p = vec![1.0; m];
    let mut inv_sq_sum = 0.0;
    for n in 1..m {
        let d = sorted_distances[m - n];
        inv_sq_sum += 1.0 / (d * d);
        p[m - 1 - n] = 1.0 / (beta * r * r * inv_sq_sum);
    }
    let mut prefix = 1.0;
    let mut total = 0.0;
    for (i, pj) in p.iter().enumerate() {
        prefix *= pj;
        total += (i + 1) as f64 * prefix;
    }
    (total / m as f64).clamp(0.0, 1.0)
}

/// Monte Carlo estimate of the expected unpack probability among `m`
/// collided packets whose senders are area-uniform in a sector of radius
/// `r`. Returns 0 above the unpack bound.
pub fn expected_unpack_prob<R: Rng + ?Sized>(
    m: u32,
    phy: &PhyConfig,
    r: f64,
    samples: usize,
    rng: &mut R,
) -> f64 {
    if m == 0 {
        return 0.0;
    }
    if m == 1 {
        return 1.0;
    }
    if m > max_unpack_count(phy, r) {
        return 0.0;
    }
    let samples = samples.max(1);
    let d_min = near_field_bound(phy.lambda0).min(r);
    let lo = d_min * d_min;
    let span = r * r - lo;
    let mut d = vec![0.0; m as usize];
    let mut sum = 0.0;
    for _ in 0..samples {
        for v in d.iter_mut() {
            *v = (lo + rng.random::<f64>() * span).sqrt();
        }
        d.sort_by(f64::total_cmp);
        sum += unpack_prob_sample(&d, phy.beta, r);
    }
    sum / samples as f64
}

/// Table of expected unpack probabilities for `m = 1..=n0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnpackTable {
    pub n0: u32,
    pub values: Vec<f64>,
}

impl UnpackTable {
    pub fn compute(phy: &PhyConfig, r: f64, samples: usize, seed: u64) -> Self {
        let n0 = max_unpack_count(phy, r);
        let values = (1..=n0)
            .map(|m| {
                let mut rng = RngStream::with_path(seed, &[purpose::UNPACK_PROB, m as u64]);
                expected_unpack_prob(m, phy, r, samples, &mut rng)
            })
            .collect();
        Self { n0, values }
    }

    /// Value for `m` collided packets; zero outside `1..=n0`.
    pub fn get(&self, m: i64) -> f64 {
        if m < 1 || m > self.n0 as i64 {
            0.0
        } else {
            self.values[(m - 1) as usize]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct TableKey {
    beta: u64,
    lambda0: u64,
    r: u64,
    samples: usize,
    seed: u64,
}

/// Shared cache of unpack tables, safe for concurrent readers.
#[derive(Debug, Default)]
pub struct UnpackCache {
    tables: RwLock<HashMap<TableKey, Arc<UnpackTable>>>,
}

impl UnpackCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, phy: &PhyConfig, r: f64, samples: usize, seed: u64) -> Arc<UnpackTable> {
        let key = TableKey {
            beta: phy.beta.to_bits(),
            lambda0: phy.lambda0.to_bits(),
            r: r.to_bits(),
            samples,
            seed,
        };
        if let Some(t) = self.tables.read().expect("cache poisoned").get(&key) {
            return Arc::clone(t);
        }
        let table = Arc::new(UnpackTable::compute(phy, r, samples, seed));
        let mut w = self.tables.write().expect("cache poisoned");
        Arc::clone(w.entry(key).or_insert(table))
    }

    pub fn len(&self) -> usize {
        self.tables.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
