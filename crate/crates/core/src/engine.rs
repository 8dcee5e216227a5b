//! Seeded slot loop: decisions, HELLO mini-slot, ACK mini-slot, metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::deployment::{build_neighbor_graph, near_field_bound, place_nodes};
use crate::error::{NdError, Result};
use crate::phy::PhyConfig;
use crate::protocol::{
    choose_slot_decision, mini_slot1, mini_slot2, AckPhase, BaseAlgorithm, DiscoveryState,
    HelloPhase, Role, SlotDecision, Topology, Variant,
};
use crate::rng::{purpose, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdHit {
    pub threshold: f64,
    /// First slot whose fraction reached the threshold.
    pub slot: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Fraction of discovered directed neighbor pairs after each slot.
    pub fraction_curve: Vec<f64>,
    /// Thresholds that were reached; unreached ones are absent.
    pub slots_to_threshold: Vec<ThresholdHit>,
    pub total_directed_pairs: usize,
}

impl Metrics {
    pub fn slots_to(&self, threshold: f64) -> Option<u64> {
        self.slots_to_threshold
            .iter()
            .find(|h| h.threshold == threshold)
            .map(|h| h.slot)
    }

    /// Fraction after `slot` slots; runs that stopped early hold their final
    /// value.
    pub fn fraction_at(&self, slot: u64) -> f64 {
        if slot == 0 {
            return if self.total_directed_pairs == 0 {
                1.0
            } else {
                0.0
            };
        }
        match self.fraction_curve.get(slot as usize - 1) {
            Some(&f) => f,
            None => {
                self.fraction_curve
                    .last()
                    .copied()
                    .unwrap_or(if self.total_directed_pairs == 0 {
                        1.0
                    } else {
                        0.0
                    })
            }
        }
    }
}

/// Per-slot hook that sees the full slot state; used for invariant audits.
pub trait SlotObserver {
    fn observe(&mut self, slot: SlotView<'_>) -> Result<()>;
}

pub struct SlotView<'a> {
    pub slot: u64,
    pub variant: &'a Variant,
    pub topology: &'a Topology,
    pub decisions: &'a [SlotDecision],
    pub hello: &'a HelloPhase,
    pub ack: &'a AckPhase,
    pub state: &'a DiscoveryState,
    pub previous_counts: &'a [usize],
}

/// Checks the protocol invariants after every slot.
#[derive(Debug, Default)]
pub struct InvariantAudit {
    pub slots_checked: u64,
}

impl SlotObserver for InvariantAudit {
    fn observe(&mut self, s: SlotView<'_>) -> Result<()> {
        let topo = s.topology;
        let n = topo.node_count();
        // half duplex: HELLO receivers reply, HELLO senders listen
        for (r, addressees) in s.hello.pending_acks.iter().enumerate() {
            if !addressees.is_empty() && s.decisions[r].role != Role::Receive {
                return Err(NdError::Invariant(format!(
                    "slot {}: node {r} sent an ACK after transmitting a HELLO",
                    s.slot
                )));
            }
            // stop mechanism: every addressee was unknown before this slot
            for &a in addressees {
                if s.state.discovered_at(topo, r, a) != Some(s.slot) {
                    return Err(NdError::Invariant(format!(
                        "slot {}: node {r} acknowledged already known neighbor {a}",
                        s.slot
                    )));
                }
            }
        }
        for (l, out) in s.ack.outcomes.iter().enumerate() {
            if out.is_some() && s.decisions[l].role != Role::Transmit {
                return Err(NdError::Invariant(format!(
                    "slot {}: node {l} received an ACK without having transmitted",
                    s.slot
                )));
            }
        }
        for (v, out) in s.hello.outcomes.iter().enumerate() {
            if out.is_some() && s.decisions[v].role != Role::Receive {
                return Err(NdError::Invariant(format!(
                    "slot {}: transmitting node {v} received a HELLO",
                    s.slot
                )));
            }
        }
        // monotone discovery and pair accounting
        let mut sum = 0;
        for u in 0..n {
            let c = s.state.count(u);
            if c < s.previous_counts[u] {
                return Err(NdError::Invariant(format!(
                    "slot {}: node {u} lost discoveries",
                    s.slot
                )));
            }
            if c > topo.graph.degree(u) {
                return Err(NdError::Invariant(format!(
                    "slot {}: node {u} knows more nodes than its degree",
                    s.slot
                )));
            }
            if s.state
                .per_beam_counts(u)
                .iter()
                .map(|&x| x as usize)
                .sum::<usize>()
                != c
            {
                return Err(NdError::Invariant(format!(
                    "slot {}: per-beam counts of node {u} disagree with its total",
                    s.slot
                )));
            }
            sum += c;
        }
        if sum != s.state.total() {
            return Err(NdError::Invariant(format!(
                "slot {}: pair total {} != per-node sum {sum}",
                s.slot,
                s.state.total()
            )));
        }
        // SBA lockstep
        if s.variant.base == BaseAlgorithm::Sba {
            if let Some(first) = s.decisions.first() {
                if s.decisions
                    .iter()
                    .any(|d| d.tx_beam != first.tx_beam || d.rx_beam != first.rx_beam)
                {
                    return Err(NdError::Invariant(format!(
                        "slot {}: SBA nodes disagree on the scan beam",
                        s.slot
                    )));
                }
                if first.rx_beam != topo.geom.opposite(first.tx_beam) {
                    return Err(NdError::Invariant(format!(
                        "slot {}: SBA receive beam is not opposite the scan beam",
                        s.slot
                    )));
                }
            }
        }
        self.slots_checked += 1;
        Ok(())
    }
}

/// One seeded network instance stepping slot by slot.
pub struct Simulation {
    config: SimConfig,
    phy: PhyConfig,
    seed: u64,
    topology: Topology,
    state: DiscoveryState,
    slot: u64,
    decisions: Vec<SlotDecision>,
}

impl Simulation {
    pub fn new(config: &SimConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let phy = config.phy_config();
        let geom = config.geometry()?;
        let arena = config.arena();
        let mut placement_rng = RngStream::with_path(seed, &[purpose::PLACEMENT]);
        let nodes = place_nodes(&arena, near_field_bound(phy.lambda0), &mut placement_rng)?;
        let graph = build_neighbor_graph(&nodes, arena.r);
        let topology = Topology::new(nodes, graph, geom, &phy)?;
        let state = DiscoveryState::new(&topology);
        Ok(Self {
            config: config.clone(),
            phy,
            seed,
            decisions: Vec::with_capacity(topology.node_count()),
            topology,
            state,
            slot: 0,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn state(&self) -> &DiscoveryState {
        &self.state
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn total_pairs(&self) -> usize {
        self.topology.graph.directed_pair_count()
    }

    pub fn fraction(&self) -> f64 {
        let total = self.total_pairs();
        if total == 0 {
            1.0
        } else {
            self.state.total() as f64 / total as f64
        }
    }

    /// Advances one slot and returns the new discovered fraction.
    pub fn step(&mut self, observer: Option<&mut dyn SlotObserver>) -> Result<f64> {
        self.slot += 1;
        let slot = self.slot;
        let geom = self.topology.geom;
        self.decisions.clear();
        for u in 0..self.topology.node_count() {
            let mut rng = RngStream::with_path(self.seed, &[purpose::DECISION, u as u64, slot]);
            self.decisions.push(choose_slot_decision(
                &self.config.variant,
                slot,
                self.config.p_t,
                &geom,
                &mut rng,
            ));
        }
        let previous: Vec<usize> = match observer {
            Some(_) => (0..self.topology.node_count())
                .map(|u| self.state.count(u))
                .collect(),
            None => Vec::new(),
        };
        let hello = mini_slot1(
            &self.decisions,
            &self.topology,
            &mut self.state,
            &self.phy,
            slot,
        )?;
        let ack = mini_slot2(
            &hello,
            &self.decisions,
            &self.topology,
            &mut self.state,
            &self.phy,
            slot,
        )?;
        if let Some(obs) = observer {
            obs.observe(SlotView {
                slot,
                variant: &self.config.variant,
                topology: &self.topology,
                decisions: &self.decisions,
                hello: &hello,
                ack: &ack,
                state: &self.state,
                previous_counts: &previous,
            })?;
        }
        Ok(self.fraction())
    }

    /// Runs until the slot budget is spent or every pair is discovered.
    pub fn run_to_end(&mut self, mut observer: Option<&mut dyn SlotObserver>) -> Result<Metrics> {
        let mut thresholds: Vec<f64> = self.config.thresholds.clone();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        let total = self.total_pairs();
        let mut curve = Vec::new();
        let mut hits = Vec::new();
        let mut next = 0;
        if self.config.slot_budget > 0 && total == 0 {
            hits = thresholds
                .iter()
                .map(|&t| ThresholdHit {
                    threshold: t,
                    slot: 0,
                })
                .collect();
        } else {
            while self.slot < self.config.slot_budget {
                let f = match observer {
                    Some(ref mut o) => self.step(Some(&mut **o))?,
                    None => self.step(None)?,
                };
                curve.push(f);
                while next < thresholds.len() && f >= thresholds[next] {
                    hits.push(ThresholdHit {
                        threshold: thresholds[next],
                        slot: self.slot,
                    });
                    next += 1;
                }
                if self.state.total() == total {
                    break;
                }
            }
        }
        Ok(Metrics {
            fraction_curve: curve,
            slots_to_threshold: hits,
            total_directed_pairs: total,
        })
    }
}

/// Runs one seeded instance.
pub fn run(config: &SimConfig, seed: u64) -> Result<Metrics> {
    Simulation::new(config, seed)?.run_to_end(None)
}

/// Runs one seeded instance while auditing every slot's invariants.
pub fn run_audited(config: &SimConfig, seed: u64) -> Result<(Metrics, InvariantAudit)> {
    let mut audit = InvariantAudit::default();
    let metrics = Simulation::new(config, seed)?.run_to_end(Some(&mut audit))?;
    Ok((metrics, audit))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStats {
    pub threshold: f64,
    /// Runs that reached the threshold within the budget.
    pub reached: usize,
    pub runs: usize,
    /// Mean and sample standard deviation over the runs that reached it.
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    /// Seeds in ascending order.
    pub seeds: Vec<u64>,
    pub mean_curve: Vec<f64>,
    pub std_curve: Vec<f64>,
    pub thresholds: Vec<ThresholdStats>,
    pub runs: Vec<SeedRun>,
}

impl AggregateMetrics {
    pub fn threshold(&self, t: f64) -> Option<&ThresholdStats> {
        self.thresholds.iter().find(|s| s.threshold == t)
    }

    /// Mean fraction after `slot` slots.
    pub fn mean_fraction_at(&self, slot: u64) -> f64 {
        let n = self.runs.len() as f64;
        self.runs
            .iter()
            .map(|r| r.metrics.fraction_at(slot))
            .sum::<f64>()
            / n
    }

    /// Per-seed slots to `t`, `None` where the budget ran out first.
    pub fn slots_to(&self, t: f64) -> Vec<(u64, Option<u64>)> {
        self.runs
            .iter()
            .map(|r| (r.seed, r.metrics.slots_to(t)))
            .collect()
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs every seed (in parallel) and aggregates. The result does not depend
/// on the order of `seeds`.
pub fn run_many(config: &SimConfig, seeds: &[u64]) -> Result<AggregateMetrics> {
    if seeds.is_empty() {
        return Err(NdError::Config("run_many needs at least one seed".into()));
    }
    config.validate()?;
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    let runs: Vec<SeedRun> = sorted
        .par_iter()
        .map(|&seed| run(config, seed).map(|metrics| SeedRun { seed, metrics }))
        .collect::<Result<_>>()?;
    Ok(aggregate(config, runs))
}

fn aggregate(config: &SimConfig, runs: Vec<SeedRun>) -> AggregateMetrics {
    let len = runs
        .iter()
        .map(|r| r.metrics.fraction_curve.len())
        .max()
        .unwrap_or(0);
    let mut mean_curve = Vec::with_capacity(len);
    let mut std_curve = Vec::with_capacity(len);
    let mut column = Vec::with_capacity(runs.len());
    for slot in 1..=len as u64 {
        column.clear();
        column.extend(runs.iter().map(|r| r.metrics.fraction_at(slot)));
        let (m, s) = mean_std(&column);
        mean_curve.push(m);
        std_curve.push(s);
    }
    let mut ts = config.thresholds.clone();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let thresholds = ts
        .into_iter()
        .map(|t| {
            let reached: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.metrics.slots_to(t))
                .map(|s| s as f64)
                .collect();
            let (mean, std) = if reached.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&reached);
                (Some(m), Some(s))
            };
            ThresholdStats {
                threshold: t,
                reached: reached.len(),
                runs: runs.len(),
                mean,
                std,
            }
        })
        .collect();
    AggregateMetrics {
        seeds: runs.iter().map(|r| r.seed).collect(),
        mean_curve,
        std_curve,
        thresholds,
        runs,
    }
}
