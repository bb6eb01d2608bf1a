//! Spatial diffuseness features and sampling-based uncertainty decoding.
//!
//! The crate covers the full chain from synthetic multichannel scenes to
//! per-frame state posteriors:
//!
//! ```text
//! scene synthesis -> STFT -> pair coherence -> CDR -> diffuseness ->
//! mel pooling -> feature assembly -> Gaussian sampling -> MLP posteriors
//! ```
//!
//! All randomness flows through the counter-based generator in [`rng`], so
//! every stage is reproducible from a single seed.

// index loops mirror the per-band/per-tap math and stay
#![allow(clippy::needless_range_loop)]

pub mod diffuseness;
pub mod error;
pub mod features;
pub mod posterior;
pub mod rng;
pub mod sampler;
pub mod sim;
pub mod stft;

pub use error::{Error, Result};
