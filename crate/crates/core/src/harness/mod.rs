//! In-process two-party simulator: metered channel, dataset generation per
//! structure class, the protocol runner and the verification grid.

pub mod dataset;
pub mod meter;
pub mod runner;
pub mod transcript;
pub mod verify;
