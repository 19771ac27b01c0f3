//! Variable selection for high-dimensional noisy black-box functions by
//! hierarchical diagonal sampling, followed by GP-UCB over the selected
//! coordinates.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod fdt;
pub mod gp;
pub mod gpt;
pub mod gpucb;
pub mod harness;
pub mod hds;
pub mod par;
pub mod rng;

pub use error::{Error, Result};
pub use hds::{hds_run, HdsConfig, HdsOutcome, Oracle, TesterKind};
pub use rng::RunSeed;
