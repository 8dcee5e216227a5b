//! Directional neighbor discovery with successive interference
//! cancellation (SIC) and multi-packet reception (MPR).
//!
//! The crate has two halves that are meant to be checked against each
//! other:
//!
//! * a deterministic slot-synchronous simulator ([`engine`]) built from node
//!   placement ([`deployment`]), reception models ([`phy`]) and the per-slot
//!   handshake ([`protocol`]);
//! * closed-form discovery probabilities and expected discovery times
//!   ([`analysis`]).
//!
//! Six protocol variants are covered: CRA and SBA beam selection, each
//! plain, with SIC, or with SIC plus MPR.

pub mod analysis;
pub mod config;
pub mod deployment;
pub mod engine;
pub mod error;
pub mod phy;
pub mod protocol;
pub mod rng;

pub use config::{PhyParams, SeedSpec, SimConfig};
pub use error::{NdError, Result};
pub use phy::SicMode;
pub use protocol::{BaseAlgorithm, Variant};
