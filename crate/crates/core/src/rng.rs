//! Seeded random streams addressed by a derivation path.
//!
//! A stream is identified by a root seed plus a path of integers such as
//! `[purpose, node, slot]`. Each distinct path yields an independent
//! xoshiro256++ stream, so the order in which a simulation visits nodes never
//! changes the values any node draws.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Path tags for the streams used by the simulator.
pub mod purpose {
    pub const PLACEMENT: u64 = 1;
    pub const DECISION: u64 = 2;
    pub const UNPACK_PROB: u64 = 3;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deepest derivation path a stream can carry.
pub const MAX_PATH_DEPTH: usize = 6;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    path: [u64; MAX_PATH_DEPTH],
    depth: usize,
    inner: Xoshiro256PlusPlus,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_path(seed, &[])
    }

    /// Panics if `path` is longer than [`MAX_PATH_DEPTH`].
    pub fn with_path(seed: u64, path: &[u64]) -> Self {
        assert!(path.len() <= MAX_PATH_DEPTH, "rng path too deep");
        let mut stored = [0; MAX_PATH_DEPTH];
        stored[..path.len()].copy_from_slice(path);
        Self {
            seed,
            path: stored,
            depth: path.len(),
            inner: Xoshiro256PlusPlus::from_seed(derive_key(seed, path)),
        }
    }

    /// Child stream at `self.path ++ extra`. Independent of how many values
    /// have been drawn from `self`.
    pub fn derive(&self, extra: &[u64]) -> Self {
        let mut path = self.path().to_vec();
        path.extend_from_slice(extra);
        Self::with_path(self.seed, &path)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path[..self.depth]
    }
}

fn derive_key(seed: u64, path: &[u64]) -> [u8; 32] {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for (depth, &p) in path.iter().enumerate() {
        // mixing in the depth keeps [a, 0] and [a] apart
        state ^= p.wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ (depth as u64 + 1);
        acc = splitmix64(&mut state) ^ acc.rotate_left(17);
    }
    let mut key = [0u8; 32];
    let mut s = acc ^ (path.len() as u64).wrapping_mul(0xA076_1D64_78BD_642F);
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    key
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
