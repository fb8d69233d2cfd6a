//! Chirp-based underwater acoustic links, a fully connected neural
//! receiver, and federated meta-learning over randomly scheduled nodes.
//!
//! Module map:
//!
//! * [`chirp_phy`]: up/down chirp symbols, framing, matched filtering and
//!   operation-count models.
//! * [`uwa_channel`]: Rayleigh tapped-delay-line channels, noise, timing
//!   offset and Doppler time scaling, CIR files.
//! * [`cdnn`]: the MLP receiver with exact gradients and Hessian-vector
//!   products.
//! * [`fml`]: MAML local updates, random scheduling, weighted aggregation
//!   and the FedAvg baseline.
//! * [`bound`]: the convergence-bound calculator and a quadratic harness.
//! * [`datasets`]: per-node labeled symbol sets and their file format.
//! * [`cli`]: experiment driver emitting CSV.

pub mod bound;
pub mod cdnn;
pub mod chirp_phy;
pub mod cli;
pub mod datasets;
pub mod dsp;
pub mod error;
pub mod fml;
pub mod rng;
pub mod uwa_channel;
mod wire;

pub use error::{Error, Result};
