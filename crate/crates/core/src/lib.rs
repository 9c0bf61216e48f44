//! Protocol layer for a stake-incentivized decentralized inference network:
//! token ledger, sharded toy inference, batch reward economy, quality-score
//! judges, VRF committee election with median-consensus slashing, and a
//! deterministic discrete-event simulator that ties them together.
//!
//! All economic state is integer fixed-point (no floats in consensus-relevant
//! paths) and every source of randomness is a named substream of a scenario
//! seed, so simulation reports are reproducible byte for byte.

pub mod amount;
pub mod consensus;
pub mod economy;
pub mod inference;
pub mod ledger;
pub mod rng;
pub mod simnet;
pub mod tiqe;

pub use amount::{Ratio, TokenAmount};
pub use tiqe::QualityScore;
