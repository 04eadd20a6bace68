//! Fuzzy private set union (FPSU) between two parties: a receiver holding a
//! set of `d`-dimensional integer points `X` with a fuzziness radius `δ`, and
//! a sender holding a smaller point set `Y`. The receiver learns
//! `X ⊔ {y ∈ Y : min_i dist_∞(x_i, y) > δ}` and the number of `Y` points that
//! fell inside the union of balls; the sender learns nothing.
//!
//! The building blocks, bottom up:
//!
//! * [`crypto`] — additively homomorphic encryption (composite-residuosity)
//!   and a correctness-only mock scheme with unbounded multiplication.
//! * [`geometry`] — points, L∞ balls and the brute-force union oracle.
//! * [`graph`] — the induced edge-labeled graph of a ball set, axis
//!   exclusivity, DSATUR coloring and stripping partitions.
//! * [`sokvs`] — a split oblivious key-value store: a large vector `L` kept
//!   by the encoder and a short vector `R` shipped to the querier.
//! * [`pir`] — batched private information retrieval with cuckoo bucketing.
//! * [`okher`] — oblivious key homomorphic-encryption retrieval, the
//!   composition of the two previous blocks.
//! * [`fpsu`] — the five protocol variants (`ng`, `nf`, `lay`, `exc`, `str`)
//!   built on per-dimension OKHER executions.
//! * [`harness`] — an in-process two-party simulator with a metered channel,
//!   dataset generators and the verification grid.

pub mod crypto;
pub mod error;
pub mod fpsu;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod okher;
pub mod pir;
pub mod seed;
pub mod sokvs;
pub mod wire;

pub use crypto::{CipherValue, KeyPair, PublicKey, SchemeDescriptor, SchemeKind, SecretKey};
pub use error::{Error, Result};
pub use fpsu::{FpsuConfig, Variant};
pub use geometry::{FuzzyDataset, Point};
pub use graph::{LabeledGraph, Partition};
pub use harness::{
    dataset::{gen_dataset, DatasetSpec, StructureClass},
    runner::{run_protocol, RunOutcome},
    transcript::{MsgTag, Party, Transcript},
};
