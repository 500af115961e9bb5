//! Spiking-network multi-object tracking at desk scale.
//!
//! The crate has three layers:
//!
//! * a detection core built from integer-spiking convolution blocks
//!   ([`snn`]) with a decoupled anchor-free head ([`head`]),
//! * the Gaussian-Wasserstein box-similarity family with a batch-adaptive
//!   normalization factor and analytic gradients ([`geometry`]), and
//! * a training-free association pipeline (NSA Kalman filter, exact
//!   assignment, track-perspective association) in [`tracker`], with
//!   MOTChallenge I/O ([`mot`]), CLEAR/IDF1/HOTA metrics ([`metrics`]),
//!   a synthetic-sequence oracle ([`synth`]) and sweep harnesses
//!   ([`harness`]).
//!
//! Every capability has a runnable demo under `examples/`; the `smtrack`
//! binary exposes the same functionality as subcommands.

pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod head;
pub mod metrics;
pub mod mot;
pub mod snn;
pub mod synth;
pub mod tracker;
pub mod train;

pub use error::{Error, Result};
