//! Simulation of a two-transmitter, two-receiver distributed network MIMO
//! downlink where each transmitter holds its own limited-feedback channel
//! estimate.
//!
//! The crate covers the whole chain used to study the rate loss of
//! decentralized zero-forcing:
//!
//! - [`channel`]: i.i.d. Rayleigh channel draws and the 2-vector / 2×2
//!   complex algebra shared by every other module,
//! - [`rvq`]: random vector quantization codebooks and the per-transmitter
//!   channel estimates built from them,
//! - [`quantizer`]: the scalar quantizer applied to power-control values and
//!   Monte Carlo estimators of its accuracy and consistency,
//! - [`precoding`]: centralized ZF, the hybrid active-passive (HAP) precoder
//!   and the baselines,
//! - [`evaluation`]: rates, the nested Monte Carlo engine, rate-gap bounds and
//!   estimate-convergence validators.
//!
//! Row convention: a [`CMat2`] stores the channel rows `h_i^H`, so entry
//! `(i, k)` is already conjugated with respect to the column vector `h_i`.
//! All zero-forcing ratios are formed from these row entries.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod evaluation;
pub mod precoding;
pub mod quantizer;
pub mod rng;
pub mod rvq;
pub mod stats;

pub use channel::{inner_product_herm, sample_channel, sample_cn01, CMat2, CVec2, ChannelRealization};
pub use error::{Error, Result};
pub use rng::RngStream;
