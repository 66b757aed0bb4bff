//! Bayesian optimal experimental design for seismic monitoring networks.
//!
//! This crate answers two questions about a network of seismic sensors:
//!
//! 1. **How informative is it?** For a prior over candidate events
//!    (location, depth, magnitude), the expected information gain (EIG) is
//!    the prior-to-posterior KL divergence averaged over hypothetical
//!    datasets of phase detections and arrival times. The [`eig`] module
//!    estimates it by nested Monte Carlo over a discrete quasi-Monte Carlo
//!    event grid, giving both per-event sensitivity maps and the network
//!    total.
//! 2. **Where should the next sensors go?** The [`optimize`] module places
//!    sensors greedily, maximizing EIG one sensor at a time with a
//!    Gaussian-process surrogate and Expected Improvement acquisition,
//!    under box or polygon placement constraints.
//!
//! The observation model combines a logistic detection probability
//! ([`detection`]), an analytic layered-crust travel-time ensemble with
//! polynomial/interpolated surrogates ([`earthmodel`]), and an
//! SNR-dependent arrival-time likelihood whose origin time is analytically
//! marginalized under an improper uniform prior ([`arrivals`]). A fitted
//! [`bundle::ModelBundle`] packages all of it and serializes to JSON.
//!
//! Everything is deterministic given a seed: Monte Carlo streams are keyed
//! by `(seed, event, replicate)` rather than drawn sequentially, so results
//! are byte-identical across runs and across worker counts.
//!
//! The `netoed` binary (feature `cli`, on by default) exposes the four
//! workflows `fit`, `analyze`, `optimize`, and `synth` around a JSON config
//! file; see the crate README for the file formats.

pub mod arrivals;
pub mod bundle;
#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
pub mod detection;
pub mod earthmodel;
pub mod eig;
pub mod error;
pub mod geo;
pub mod network;
pub mod optimize;
pub mod priors;
pub mod rng;
pub mod synth;

mod stats;

pub use error::{Error, Result};
