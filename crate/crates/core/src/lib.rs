//! Inference of position-selecting choice functions from active queries,
//! population mixtures and passive streams, plus distance-comparison choice
//! procedures.
//!
//! Every algorithm talks to ground truth only through the simulators in
//! [`oracle`], so query counts are exact and reproducible from a seed.

pub mod active;
pub mod choice;
pub mod combinatorics;
pub mod distance;
pub mod error;
pub mod harness;
pub mod mixture;
pub mod oracle;
pub mod passive;
pub mod rng;
pub mod sorting;
pub mod stats;

pub use choice::{Alternative, KSet, LatentOrder, PositionSelector};
pub use error::{Error, Result};
