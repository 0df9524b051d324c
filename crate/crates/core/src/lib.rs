//! Rate-compatible polar (RCP) codes and hybrid-ARQ design over the
//! binary-input AWGN channel.
//!
//! * [`channel`]: BPSK/AWGN transmission, LLRs, capacity.
//! * [`reliability`]: Gaussian-approximation density evolution, puncturing and
//!   information-set selection.
//! * [`codec`]: encoder and successive-cancellation decoder.
//! * [`rcp`]: greedy repetition assignment and the union-bound BLER estimate.
//! * [`design`]: greedy HARQ scheme search maximizing approximate throughput.
//! * [`sim`]: Monte Carlo simulation of the incremental-redundancy protocol.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix it to `f64`, which is what the command-line tool uses.

pub mod channel;
pub mod codec;
pub mod design;
pub mod error;
pub mod rcp;
pub mod reliability;
pub mod scalar;
pub mod sim;
pub mod special;
pub mod stats;

pub use channel::{bawgn_capacity, channel_llr_distribution, transmit, ChannelParams};
pub use codec::{polar_encode, rcp_encode, sc_decode, DecoderScratch, PolarCodeSpec, RcpCode};
pub use error::{Error, Result};
pub use scalar::Real;

pub type LlrWord = channel::LlrWord<f64>;
pub type LlrDistribution = reliability::LlrDistribution<f64>;
pub type ReliabilityTable = reliability::ReliabilityTable<f64>;
pub type RepetitionPlan = rcp::RepetitionPlan<f64>;
pub type BlerEstimate = rcp::BlerEstimate<f64>;
pub type RcpConstruction = rcp::RcpConstruction<f64>;
pub type BlerCurve = design::BlerCurve<f64>;
pub type Design = design::Design<f64>;


pub type LlrWordF32 = channel::LlrWord<f32>;
pub type LlrDistributionF32 = reliability::LlrDistribution<f32>;
pub type ReliabilityTableF32 = reliability::ReliabilityTable<f32>;
