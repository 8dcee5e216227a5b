//! Node placement, the ground-truth neighbor graph, and sector geometry.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NdError, Result};

/// Redraws allowed per node before placement gives up.
pub const PLACEMENT_RETRY_BUDGET: usize = 10_000;

/// Rectangular deployment area with a uniform node population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArenaSpec {
    /// Length in meters.
    pub a: f64,
    /// Width in meters.
    pub b: f64,
    pub node_count: usize,
    /// Communication radius in meters.
    pub r: f64,
}

impl ArenaSpec {
    pub fn new(a: f64, b: f64, node_count: usize, r: f64) -> Result<Self> {
        let arena = Self {
            a,
            b,
            node_count,
            r,
        };
        arena.validate()?;
        Ok(arena)
    }

    /// Checks the conditions needed for placement. The analytic neighbor
    /// count additionally needs [`ArenaSpec::check_analytic_domain`].
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.a) || !finite_pos(self.b) {
            return Err(NdError::Config(format!(
                "arena sides must be positive, got a={} b={}",
                self.a, self.b
            )));
        }
        if !finite_pos(self.r) {
            return Err(NdError::Config(format!(
                "radius r must be positive, got {}",
                self.r
            )));
        }
        if self.node_count == 0 {
            return Err(NdError::Config("node_count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn check_analytic_domain(&self) -> Result<()> {
        self.validate()?;
        if self.a < 2.0 * self.r || self.b < 2.0 * self.r {
            return Err(NdError::Domain(format!(
                "boundary-corrected neighbor count needs a >= 2r and b >= 2r \
                 (a={}, b={}, r={})",
                self.a, self.b, self.r
            )));
        }
        Ok(())
    }

    /// Nodes per square meter, always `node_count / (a*b)`.
    pub fn density(&self) -> f64 {
        self.node_count as f64 / (self.a * self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

impl Node {
    pub fn distance(&self, other: &Node) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Smallest distance at which the far-field power law is valid.
pub fn near_field_bound(lambda0: f64) -> f64 {
    lambda0 / (4.0 * PI)
}

/// Places `arena.node_count` nodes uniformly in the rectangle. A candidate
/// closer than `min_separation` to an already placed node is redrawn.
pub fn place_nodes<R: Rng + ?Sized>(
    arena: &ArenaSpec,
    min_separation: f64,
    rng: &mut R,
) -> Result<Vec<Node>> {
    arena.validate()?;
    let min_sq = min_separation * min_separation;
    let mut nodes: Vec<Node> = Vec::with_capacity(arena.node_count);
    for id in 0..arena.node_count {
        let mut attempts = 0;
        loop {
            let x = rng.random::<f64>() * arena.a;
            let y = rng.random::<f64>() * arena.b;
            let clear = nodes.iter().all(|n| {
                let dx = n.x - x;
                let dy = n.y - y;
                dx * dx + dy * dy >= min_sq
            });
            if clear {
                nodes.push(Node { id, x, y });
                break;
            }
            attempts += 1;
            if attempts >= PLACEMENT_RETRY_BUDGET {
                return Err(NdError::Config(format!(
                    "could not place node {id} at least {min_separation} m from the \
                     others after {PLACEMENT_RETRY_BUDGET} draws; density too high"
                )));
            }
        }
    }
    Ok(nodes)
}

/// Exact r-disk graph. Neighbor lists are sorted by id and `distances[u][i]`
/// belongs to the edge `(u, adjacency[u][i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraph {
    pub adjacency: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
}

impl NeighborGraph {
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    /// Position of `v` inside `u`'s neighbor list.
    pub fn neighbor_index(&self, u: usize, v: usize) -> Option<usize> {
        self.adjacency[u].binary_search(&v).ok()
    }

    pub fn are_neighbors(&self, u: usize, v: usize) -> bool {
        self.neighbor_index(u, v).is_some()
    }

    /// Number of ordered pairs `(u, v)` with `v` a neighbor of `u`.
    pub fn directed_pair_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.adjacency.is_empty() {
            return 0.0;
        }
        self.directed_pair_count() as f64 / self.adjacency.len() as f64
    }
}

pub fn build_neighbor_graph(nodes: &[Node], r: f64) -> NeighborGraph {
    let n = nodes.len();
    let mut adjacency = vec![Vec::new(); n];
    let mut distances = vec![Vec::new(); n];
    let r_sq = r * r;
    for u in 0..n {
        for v in (u + 1)..n {
            let dx = nodes[u].x - nodes[v].x;
            let dy = nodes[u].y - nodes[v].y;
            if dx * dx + dy * dy <= r_sq {
                let d = nodes[u].distance(&nodes[v]);
                adjacency[u].push(v);
                distances[u].push(d);
                adjacency[v].push(u);
                distances[v].push(d);
            }
        }
    }
    // pushes happen in increasing partner id for both endpoints, so lists
    // are already sorted
    NeighborGraph {
        adjacency,
        distances,
    }
}

/// Equal-width sectors sharing one global orientation. Beam `k` (1-based)
/// covers bearings `[(k-1)θ, kθ)` counterclockwise from the +x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamGeometry {
    beam_count: u32,
}

impl BeamGeometry {
    pub fn new(beam_count: u32) -> Result<Self> {
        if beam_count < 2 || !beam_count.is_multiple_of(2) {
            return Err(NdError::Config(format!(
                "beam_count must be an even integer >= 2, got {beam_count}"
            )));
        }
        Ok(Self { beam_count })
    }

    /// A single omnidirectional "beam"; only meaningful for the analytic
    /// formulas, never for the simulator.
    pub fn omni() -> Self {
        Self { beam_count: 1 }
    }

    pub fn beam_count(&self) -> u32 {
        self.beam_count
    }

    pub fn theta(&self) -> f64 {
        TAU / self.beam_count as f64
    }

    /// Fraction of the full circle covered by one beam, θ/2π.
    pub fn fraction(&self) -> f64 {
        1.0 / self.beam_count as f64
    }

    pub fn opposite(&self, beam: u32) -> u32 {
        (beam - 1 + self.beam_count / 2) % self.beam_count + 1
    }

    /// Beam index containing a bearing in radians.
    pub fn beam_for_bearing(&self, bearing: f64) -> u32 {
        let b = bearing.rem_euclid(TAU);
        let idx = (b / TAU * self.beam_count as f64).floor() as u32;
        idx.min(self.beam_count - 1) + 1
    }

    pub fn beam_of(&self, source: &Node, target: &Node) -> Result<u32> {
        let dx = target.x - source.x;
        let dy = target.y - source.y;
        if dx == 0.0 && dy == 0.0 {
            return Err(NdError::Domain(format!(
                "nodes {} and {} are coincident; bearing undefined",
                source.id, target.id
            )));
        }
        Ok(self.beam_for_bearing(dy.atan2(dx)))
    }
}

/// Boundary-corrected mean neighbor count of a node in the arena.
pub fn avg_neighbors_analytic(arena: &ArenaSpec) -> Result<f64> {
    arena.check_analytic_domain()?;
    let (a, b, r) = (arena.a, arena.b, arena.r);
    let lambda = arena.density();
    let r2 = r * r;
    let numerator = 3.0 * PI * lambda * r2 * r2 - 8.0 * (a + b) * lambda * r2 * r
        + 6.0 * PI * lambda * a * b * r2;
    Ok(numerator / (6.0 * a * b))
}

/// Exact mean neighbor count for `N` uniform nodes: `(N - 1)` times the
/// probability that two uniform points in the `a x b` rectangle lie within
/// `r`. Differs from [`avg_neighbors_analytic`] in the corner term, which is
/// `r^4 / (2ab)` here instead of `pi r^4 / (2ab)`, and in counting `N - 1`
/// peers instead of `N`.
pub fn avg_neighbors_exact(arena: &ArenaSpec) -> Result<f64> {
    arena.check_analytic_domain()?;
    let (a, b, r) = (arena.a, arena.b, arena.r);
    let ab = a * b;
    let pair = (PI * r * r * ab - 4.0 / 3.0 * (a + b) * r.powi(3) + 0.5 * r.powi(4)) / (ab * ab);
    Ok(arena.node_count.saturating_sub(1) as f64 * pair)
}

/// Mean neighbors inside one beam of width θ.
pub fn per_beam_neighbors(n_bar: f64, geom: &BeamGeometry) -> f64 {
    geom.fraction() * n_bar
}
