//! Per-slot node behavior for the six discovery variants: role and beam
//! choice, the HELLO/ACK handshake over two mini-slots, and the stop rule.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::deployment::{BeamGeometry, NeighborGraph, Node};
use crate::error::{NdError, Result};
use crate::phy::{decode, received_power, ArrivingPacket, PhyConfig, ReceptionOutcome, SicMode};

/// Beam selection order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseAlgorithm {
    /// Completely random: every node draws its beam uniformly each slot.
    #[serde(rename = "CRA")]
    Cra,
    /// Scan based: all nodes follow the same counterclockwise schedule.
    #[serde(rename = "SBA")]
    Sba,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub base: BaseAlgorithm,
    pub sic_mode: SicMode,
    /// Number of modulations; 1 means MPR is off.
    #[serde(default = "one")]
    pub h: u32,
}

fn one() -> u32 {
    1
}

impl Variant {
    pub const fn new(base: BaseAlgorithm, sic_mode: SicMode, h: u32) -> Self {
        Self { base, sic_mode, h }
    }

    pub const fn plain(base: BaseAlgorithm) -> Self {
        Self::new(base, SicMode::None, 1)
    }

    pub const fn sic(base: BaseAlgorithm) -> Self {
        Self::new(base, SicMode::Perfect, 1)
    }

    pub const fn sic_mpr(base: BaseAlgorithm, h: u32) -> Self {
        Self::new(base, SicMode::Perfect, h)
    }

    /// The six named variants, with `h` modulations for the MPR ones.
    pub fn all(h: u32) -> [Variant; 6] {
        use BaseAlgorithm::*;
        [
            Self::plain(Cra),
            Self::plain(Sba),
            Self::sic(Cra),
            Self::sic(Sba),
            Self::sic_mpr(Cra, h),
            Self::sic_mpr(Sba, h),
        ]
    }

    pub fn mpr_enabled(&self) -> bool {
        self.h > 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(NdError::Config("variant h must be >= 1".into()));
        }
        if self.mpr_enabled() && self.sic_mode == SicMode::None {
            return Err(NdError::Config(
                "MPR (h > 1) is only defined together with SIC".into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for BaseAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseAlgorithm::Cra => "CRA",
            BaseAlgorithm::Sba => "SBA",
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.base)?;
        match self.sic_mode {
            SicMode::None => {}
            SicMode::Perfect => f.write_str("-SIC")?,
            SicMode::Imperfect => f.write_str("-ISIC")?,
        }
        if self.mpr_enabled() {
            write!(f, "-MPR{}", self.h)?;
        }
        Ok(())
    }
}

impl FromStr for Variant {
    type Err = NdError;

    /// Accepts names like `SBA`, `CRA-SIC`, `SBA-ISIC`, `CRA-SIC-MPR`
    /// (h = 2) or `SBA-SIC-MPR3`.
    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        let mut parts = upper.split('-');
        let base = match parts.next() {
            Some("CRA") => BaseAlgorithm::Cra,
            Some("SBA") => BaseAlgorithm::Sba,
            _ => return Err(NdError::Config(format!("unknown variant `{s}`"))),
        };
        let mut v = Variant::plain(base);
        for part in parts {
            match part {
                "SIC" => v.sic_mode = SicMode::Perfect,
                "ISIC" => v.sic_mode = SicMode::Imperfect,
                "MPR" => v.h = 2,
                p if p.starts_with("MPR") => {
                    v.h = p[3..]
                        .parse()
                        .map_err(|_| NdError::Config(format!("bad MPR count in `{s}`")))?
                }
                _ => return Err(NdError::Config(format!("unknown variant `{s}`"))),
            }
        }
        v.validate()?;
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Transmit,
    Receive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDecision {
    pub role: Role,
    /// Beam used to send the HELLO and then to listen for ACKs.
    pub tx_beam: u32,
    /// Beam used to listen for HELLOs and then to send the ACK.
    pub rx_beam: u32,
    /// HELLO modulation.
    pub modulation: u32,
    /// Modulation of the ACK, drawn afresh for mini-slot 2.
    pub ack_modulation: u32,
}

/// SBA's beam for `slot` (1-based): beams are scanned in order 1, 2, ...
pub fn sba_beam(slot: u64, geom: &BeamGeometry) -> u32 {
    ((slot - 1) % geom.beam_count() as u64) as u32 + 1
}

/// Draws one node's role, beams and modulations for a slot. The stream is
/// always consumed in the same order (role, beam, modulation, ACK
/// modulation) so every variant sees the same draws for a given seed.
pub fn choose_slot_decision<R: Rng + ?Sized>(
    variant: &Variant,
    slot: u64,
    p_t: f64,
    geom: &BeamGeometry,
    rng: &mut R,
) -> SlotDecision {
    let role_draw: f64 = rng.random();
    let beam_draw = rng.random_range(1..=geom.beam_count());
    let h = variant.h.max(1);
    let mod_draw = rng.random_range(1..=h);
    let ack_mod_draw = rng.random_range(1..=h);

    let role = if role_draw < p_t {
        Role::Transmit
    } else {
        Role::Receive
    };
    let (tx_beam, rx_beam) = match variant.base {
        BaseAlgorithm::Cra => (beam_draw, beam_draw),
        BaseAlgorithm::Sba => {
            let k = sba_beam(slot, geom);
            (k, geom.opposite(k))
        }
    };
    let (modulation, ack_modulation) = if variant.mpr_enabled() {
        (mod_draw, ack_mod_draw)
    } else {
        (1, 1)
    };
    SlotDecision {
        role,
        tx_beam,
        rx_beam,
        modulation,
        ack_modulation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub peer: usize,
    /// Received power in either direction (the path is symmetric).
    pub power: f64,
}

/// Placed nodes with their neighbor graph, the beam each neighbor falls
/// in, and per-link received power.
#[derive(Debug, Clone)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub graph: NeighborGraph,
    pub geom: BeamGeometry,
    /// `neighbor_beam[u][i]` is the beam of `u` that contains
    /// `graph.adjacency[u][i]`.
    pub neighbor_beam: Vec<Vec<u32>>,
    /// `by_beam[u][k - 1]` lists the neighbors of `u` inside beam `k`.
    pub by_beam: Vec<Vec<Vec<Link>>>,
}

impl Topology {
    pub fn new(
        nodes: Vec<Node>,
        graph: NeighborGraph,
        geom: BeamGeometry,
        phy: &PhyConfig,
    ) -> Result<Self> {
        let n = nodes.len();
        let bc = geom.beam_count() as usize;
        let mut neighbor_beam: Vec<Vec<u32>> =
            graph.adjacency.iter().map(|a| vec![0; a.len()]).collect();
        let mut by_beam = vec![vec![Vec::new(); bc]; n];
        for u in 0..n {
            for (i, &v) in graph.adjacency[u].iter().enumerate() {
                // the reverse direction is derived from the forward one so
                // that the two bearings always land in opposite beams
                let beam = if u < v {
                    geom.beam_of(&nodes[u], &nodes[v])?
                } else {
                    let back = graph.neighbor_index(v, u).expect("graph is symmetric");
                    geom.opposite(neighbor_beam[v][back])
                };
                neighbor_beam[u][i] = beam;
                let power = received_power(graph.distances[u][i], phy)?;
                by_beam[u][beam as usize - 1].push(Link { peer: v, power });
            }
        }
        Ok(Self {
            nodes,
            graph,
            geom,
            neighbor_beam,
            by_beam,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn beam_neighbors(&self, u: usize, beam: u32) -> &[Link] {
        &self.by_beam[u][beam as usize - 1]
    }
}

/// Which neighbors every node has discovered, and when.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryState {
    /// `found_at[u][i]` is the slot in which `u` discovered
    /// `adjacency[u][i]`, or 0 if it has not yet.
    found_at: Vec<Vec<u64>>,
    counts: Vec<usize>,
    per_beam: Vec<Vec<u32>>,
    total: usize,
}

impl DiscoveryState {
    pub fn new(topo: &Topology) -> Self {
        let bc = topo.geom.beam_count() as usize;
        Self {
            found_at: topo
                .graph
                .adjacency
                .iter()
                .map(|a| vec![0; a.len()])
                .collect(),
            counts: vec![0; topo.node_count()],
            per_beam: vec![vec![0; bc]; topo.node_count()],
            total: 0,
        }
    }

    pub fn is_discovered(&self, topo: &Topology, u: usize, v: usize) -> bool {
        topo.graph
            .neighbor_index(u, v)
            .is_some_and(|i| self.found_at[u][i] != 0)
    }

    /// Slot in which `u` discovered `v`, if it has.
    pub fn discovered_at(&self, topo: &Topology, u: usize, v: usize) -> Option<u64> {
        let i = topo.graph.neighbor_index(u, v)?;
        match self.found_at[u][i] {
            0 => None,
            s => Some(s),
        }
    }

    /// Records that `u` discovered `v` in `slot`; returns false if it already
    /// had. Non-neighbors are rejected.
    pub fn mark(&mut self, topo: &Topology, u: usize, v: usize, slot: u64) -> Result<bool> {
        let i = topo.graph.neighbor_index(u, v).ok_or_else(|| {
            NdError::Invariant(format!("node {u} cannot discover non-neighbor {v}"))
        })?;
        if self.found_at[u][i] != 0 {
            return Ok(false);
        }
        self.found_at[u][i] = slot.max(1);
        self.counts[u] += 1;
        self.per_beam[u][topo.neighbor_beam[u][i] as usize - 1] += 1;
        self.total += 1;
        Ok(true)
    }

    pub fn discovered(&self, topo: &Topology, u: usize) -> Vec<usize> {
        topo.graph.adjacency[u]
            .iter()
            .zip(&self.found_at[u])
            .filter(|(_, &s)| s != 0)
            .map(|(&v, _)| v)
            .collect()
    }

    pub fn count(&self, u: usize) -> usize {
        self.counts[u]
    }

    pub fn per_beam_counts(&self, u: usize) -> &[u32] {
        &self.per_beam[u]
    }

    /// Discovered ordered pairs `(u, v)` over the whole network.
    pub fn total(&self) -> usize {
        self.total
    }
}

/// Result of mini-slot 1 at every node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HelloPhase {
    /// Decode result per node; `None` for transmitters and for receivers
    /// that heard nothing.
    pub outcomes: Vec<Option<ReceptionOutcome>>,
    /// Newly discovered senders each receiver will acknowledge, sorted.
    pub pending_acks: Vec<Vec<usize>>,
}

/// Result of mini-slot 2 at every node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AckPhase {
    pub outcomes: Vec<Option<ReceptionOutcome>>,
    /// `(listener, replier)` pairs that completed a handshake.
    pub discoveries: Vec<(usize, usize)>,
}

/// HELLO exchange. A transmitter's HELLO reaches a neighbor only when the
/// neighbor is receiving, the transmitter's beam covers the neighbor and
/// the neighbor's beam covers the transmitter.
pub fn mini_slot1(
    decisions: &[SlotDecision],
    topo: &Topology,
    state: &mut DiscoveryState,
    phy: &PhyConfig,
    slot: u64,
) -> Result<HelloPhase> {
    let n = topo.node_count();
    let mut arrivals = Vec::new();
    for (u, d) in decisions.iter().enumerate() {
        if d.role != Role::Transmit {
            continue;
        }
        let facing = topo.geom.opposite(d.tx_beam);
        for link in topo.beam_neighbors(u, d.tx_beam) {
            let rx = &decisions[link.peer];
            if rx.role == Role::Receive && rx.rx_beam == facing {
                arrivals.push((
                    link.peer,
                    ArrivingPacket::hello(u, link.power, d.modulation),
                ));
            }
        }
    }

    let mut phase = HelloPhase {
        outcomes: vec![None; n],
        pending_acks: vec![Vec::new(); n],
    };
    let (runs, all) = by_receiver(arrivals);
    for (v, range) in runs {
        let outcome = decode(&all[range], phy);
        for &sender in &outcome.decoded {
            // stop rule: only senders not yet known get an ACK
            if state.mark(topo, v, sender, slot)? {
                phase.pending_acks[v].push(sender);
            }
        }
        phase.pending_acks[v].sort_unstable();
        phase.outcomes[v] = Some(outcome);
    }
    Ok(phase)
}

/// Sorts `(receiver, packet)` pairs by receiver, keeping arrival order
/// within a receiver, and returns each receiver's run of packets.
fn by_receiver(
    mut arrivals: Vec<(usize, ArrivingPacket)>,
) -> (Vec<(usize, Range<usize>)>, Vec<ArrivingPacket>) {
    arrivals.sort_by_key(|(v, _)| *v);
    let mut runs: Vec<(usize, Range<usize>)> = Vec::new();
    for (i, (v, _)) in arrivals.iter().enumerate() {
        match runs.last_mut() {
            Some((last, range)) if last == v => range.end = i + 1,
            _ => runs.push((*v, i..i + 1)),
        }
    }
    (runs, arrivals.into_iter().map(|(_, p)| p).collect())
}

/// ACK exchange. Each receiver with pending addressees replies once in its
/// receive beam; mini-slot-1 transmitters listen in their transmit beam. A
/// listener discovers a replier only if it decodes the ACK and is named in
/// it.
pub fn mini_slot2(
    hello: &HelloPhase,
    decisions: &[SlotDecision],
    topo: &Topology,
    state: &mut DiscoveryState,
    phy: &PhyConfig,
    slot: u64,
) -> Result<AckPhase> {
    let n = topo.node_count();
    let mut arrivals = Vec::new();
    for (r, addressees) in hello.pending_acks.iter().enumerate() {
        if addressees.is_empty() {
            continue;
        }
        let d = &decisions[r];
        let facing = topo.geom.opposite(d.rx_beam);
        let shared: Arc<[usize]> = addressees.as_slice().into();
        for link in topo.beam_neighbors(r, d.rx_beam) {
            let listener = &decisions[link.peer];
            if listener.role == Role::Transmit && listener.tx_beam == facing {
                arrivals.push((
                    link.peer,
                    ArrivingPacket::ack(r, link.power, d.ack_modulation, Arc::clone(&shared)),
                ));
            }
        }
    }

    let mut phase = AckPhase {
        outcomes: vec![None; n],
        discoveries: Vec::new(),
    };
    let (runs, all) = by_receiver(arrivals);
    for (l, range) in runs {
        let packets = &all[range];
        let outcome = decode(packets, phy);
        for &replier in &outcome.decoded {
            let named = packets
                .iter()
                .find(|p| p.sender == replier)
                .is_some_and(|p| p.addressees.binary_search(&l).is_ok());
            if named && state.mark(topo, l, replier, slot)? {
                phase.discoveries.push((l, replier));
            }
        }
        phase.outcomes[l] = Some(outcome);
    }
    Ok(phase)
}

/// Decode parameters for a variant on top of a base PHY.
pub fn variant_phy(variant: &Variant, base: &PhyConfig) -> PhyConfig {
    PhyConfig {
        sic_mode: variant.sic_mode,
        mpr_modulations: variant.h.max(1),
        ..*base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deployment::build_neighbor_graph;
    use crate::rng::RngStream;

    fn topo(points: &[(f64, f64)], beams: u32, r: f64) -> Topology {
        let nodes: Vec<Node> = points
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Node { id, x, y })
            .collect();
        let graph = build_neighbor_graph(&nodes, r);
        Topology::new(
            nodes,
            graph,
            BeamGeometry::new(beams).unwrap(),
            &PhyConfig::default(),
        )
        .unwrap()
    }

    fn tx(beam: u32) -> SlotDecision {
        SlotDecision {
            role: Role::Transmit,
            tx_beam: beam,
            rx_beam: beam,
            modulation: 1,
            ack_modulation: 1,
        }
    }

    fn rx(beam: u32) -> SlotDecision {
        SlotDecision {
            role: Role::Receive,
            ..tx(beam)
        }
    }

    fn phy_for(v: Variant) -> PhyConfig {
        variant_phy(&v, &PhyConfig::default())
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::all(3) {
            let parsed: Variant = v.to_string().parse().unwrap();
            assert_eq!(parsed, v);
        }
        assert_eq!(
            "cra-sic-mpr".parse::<Variant>().unwrap(),
            Variant::sic_mpr(BaseAlgorithm::Cra, 2)
        );
        assert!("SBA-MPR".parse::<Variant>().is_err());
        assert!("XYZ".parse::<Variant>().is_err());
    }

    #[test]
    fn sba_schedule() {
        let geom = BeamGeometry::new(12).unwrap();
        let v = Variant::plain(BaseAlgorithm::Sba);
        for (slot, beam) in [(1, 1), (12, 12), (13, 1), (14, 2)] {
            let d = choose_slot_decision(&v, slot, 0.5, &geom, &mut RngStream::new(slot));
            assert_eq!(d.tx_beam, beam);
            assert_eq!(d.rx_beam, geom.opposite(beam));
        }
        let d = choose_slot_decision(&v, 1, 0.5, &geom, &mut RngStream::new(0));
        assert_eq!((d.tx_beam, d.rx_beam), (1, 7));
    }

    #[test]
    fn role_extremes_and_fixed_modulation() {
        let geom = BeamGeometry::new(4).unwrap();
        let v = Variant::sic(BaseAlgorithm::Cra);
        for s in 0..100 {
            let mut rng = RngStream::new(s);
            assert_eq!(
                choose_slot_decision(&v, 1, 1.0, &geom, &mut rng).role,
                Role::Transmit
            );
            let mut rng = RngStream::new(s);
            let d = choose_slot_decision(&v, 1, 0.0, &geom, &mut rng);
            assert_eq!(d.role, Role::Receive);
            assert_eq!((d.modulation, d.ack_modulation), (1, 1));
        }
    }

    #[test]
    fn hello_and_ack_complete_a_handshake() {
        // A at origin transmitting east toward B, B listening west
        let t = topo(&[(0.0, 0.0), (100.0, 0.0)], 4, 800.0);
        let mut state = DiscoveryState::new(&t);
        let phy = phy_for(Variant::plain(BaseAlgorithm::Sba));
        let dec = [tx(1), rx(3)];
        let hello = mini_slot1(&dec, &t, &mut state, &phy, 1).unwrap();
        assert_eq!(hello.outcomes[1].as_ref().unwrap().decoded, vec![0]);
        assert_eq!(hello.pending_acks[1], vec![0]);
        assert!(state.is_discovered(&t, 1, 0));
        assert!(!state.is_discovered(&t, 0, 1));

        let ack = mini_slot2(&hello, &dec, &t, &mut state, &phy, 1).unwrap();
        assert_eq!(ack.discoveries, vec![(0, 1)]);
        assert!(state.is_discovered(&t, 0, 1));
        assert_eq!(state.total(), 2);
    }

    #[test]
    fn misaligned_beams_do_not_connect() {
        let t = topo(&[(0.0, 0.0), (100.0, 0.0)], 4, 800.0);
        let mut state = DiscoveryState::new(&t);
        let phy = phy_for(Variant::plain(BaseAlgorithm::Cra));
        for dec in [[tx(2), rx(3)], [tx(1), rx(1)]] {
            let hello = mini_slot1(&dec, &t, &mut state, &phy, 1).unwrap();
            assert!(hello.outcomes[1].is_none());
        }
        assert_eq!(state.total(), 0);
    }

    #[test]
    fn collision_without_sic_loses_both() {
        // A west of B, C further west-ish; both transmit toward B (beam 1)
        let t = topo(&[(0.0, 0.0), (300.0, 10.0), (100.0, 5.0)], 4, 800.0);
        let mut state = DiscoveryState::new(&t);
        let dec = [tx(1), rx(3), tx(1)];
        let hello = mini_slot1(
            &dec,
            &t,
            &mut state,
            &phy_for(Variant::plain(BaseAlgorithm::Sba)),
            1,
        )
        .unwrap();
        let out = hello.outcomes[1].as_ref().unwrap();
        assert!(out.decoded.is_empty());
        assert_eq!(out.dropped, vec![0, 2]);
        assert!(hello.pending_acks[1].is_empty());
    }

    #[test]
    fn sic_recovers_both_and_acks_both() {
        // distances 300 and 20 from B: power ratio 225 >> 4
        let t = topo(&[(0.0, 0.0), (300.0, 0.0), (280.0, 0.0)], 4, 800.0);
        let mut state = DiscoveryState::new(&t);
        let phy = phy_for(Variant::sic(BaseAlgorithm::Sba));
        let dec = [tx(1), rx(3), tx(1)];
        let hello = mini_slot1(&dec, &t, &mut state, &phy, 1).unwrap();
        assert_eq!(hello.outcomes[1].as_ref().unwrap().decoded, vec![2, 0]);
        assert_eq!(hello.pending_acks[1], vec![0, 2]);
        let ack = mini_slot2(&hello, &dec, &t, &mut state, &phy, 1).unwrap();
        let mut got = ack.discoveries.clone();
        got.sort_unstable();
        assert_eq!(got, vec![(0, 1), (2, 1)]);
    }

    #[test]
    fn known_sender_gets_no_ack() {
        let t = topo(&[(0.0, 0.0), (100.0, 0.0)], 4, 800.0);
        let mut state = DiscoveryState::new(&t);
        state.mark(&t, 1, 0, 1).unwrap();
        let phy = phy_for(Variant::plain(BaseAlgorithm::Sba));
        let dec = [tx(1), rx(3)];
        let hello = mini_slot1(&dec, &t, &mut state, &phy, 2).unwrap();
        assert_eq!(hello.outcomes[1].as_ref().unwrap().decoded, vec![0]);
        assert!(hello.pending_acks[1].is_empty());
        let ack = mini_slot2(&hello, &dec, &t, &mut state, &phy, 2).unwrap();
        assert!(ack.discoveries.is_empty());
        assert!(!state.is_discovered(&t, 0, 1));
    }

    #[test]
    fn unaddressed_ack_discovers_nothing() {
        // A (0) listens east; B (1) replies west but only to C (2)
        let t = topo(&[(0.0, 0.0), (100.0, 0.0), (-100.0, 0.0)], 4, 800.0);
        let mut state = DiscoveryState::new(&t);
        let phy = phy_for(Variant::sic(BaseAlgorithm::Cra));
        let hello = HelloPhase {
            outcomes: vec![None; 3],
            pending_acks: vec![vec![], vec![2], vec![]],
        };
        let dec = [tx(1), rx(3), rx(1)];
        let ack = mini_slot2(&hello, &dec, &t, &mut state, &phy, 1).unwrap();
        assert_eq!(ack.outcomes[0].as_ref().unwrap().decoded, vec![1]);
        assert!(ack.discoveries.is_empty());
    }

    #[test]
    fn two_acks_collide_without_sic() {
        // A at origin transmits east; B and D both reply west toward A
        let t = topo(&[(0.0, 0.0), (100.0, 10.0), (300.0, 20.0)], 4, 800.0);
        let mut state = DiscoveryState::new(&t);
        let phy = phy_for(Variant::plain(BaseAlgorithm::Sba));
        let hello = HelloPhase {
            outcomes: vec![None; 3],
            pending_acks: vec![vec![], vec![0], vec![0]],
        };
        let dec = [tx(1), rx(3), rx(3)];
        let ack = mini_slot2(&hello, &dec, &t, &mut state, &phy, 1).unwrap();
        assert!(ack.outcomes[0].as_ref().unwrap().decoded.is_empty());
        assert!(ack.discoveries.is_empty());
        assert_eq!(state.total(), 0);
    }

    #[test]
    fn opposite_beam_table_is_consistent() {
        let mut rng = RngStream::new(4);
        let pts: Vec<(f64, f64)> = (0..60)
            .map(|_| (rng.random::<f64>() * 500.0, rng.random::<f64>() * 500.0))
            .collect();
        let t = topo(&pts, 6, 200.0);
        for u in 0..t.node_count() {
            let mut total = 0;
            for k in 1..=6 {
                for link in t.beam_neighbors(u, k) {
                    let back = t.graph.neighbor_index(link.peer, u).unwrap();
                    assert_eq!(t.neighbor_beam[link.peer][back], t.geom.opposite(k));
                }
                total += t.beam_neighbors(u, k).len();
            }
            assert_eq!(total, t.graph.degree(u));
        }
    }
}
