//! # dembed-core
//!
//! Multi-bit watermarking that embeds a message in the joint law of the
//! generated sequence and a shared auxiliary sequence, over finite
//! alphabets and at desk scale.
//!
//! A watermark encoder receives a message `M ∈ [1, m]` and the source
//! distribution `Q` of length-`T` sequences, and outputs a joint law of the
//! generated sequence `X` and an auxiliary sequence `ζ` shared with the
//! decoder. The decoder sees `(X, ζ)` and returns a message or `0`
//! ("unwatermarked"). The crate computes the universal min-max message
//! error under a worst-case false-alarm level `α` and a distortion budget
//! `d`, builds the schemes achieving it, and evaluates schemes exactly and
//! by simulation.
//!
//! ## Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`prob`] | PMFs, entropy, KL, TV, overhang, i.i.d. extensions, seeded sampling |
//! | [`optimize`] | min-overhang and max-entropy programs, exponent bound |
//! | [`scheme`] | Latin-square decoders, optimal couplings, finite and typical-set schemes |
//! | [`harness`] | exact errors, false alarm, validation, Monte Carlo, oracle, exponent fits |
//! | [`greenred`] | green/red-list baseline watermark |
//!
//! All numeric code is generic over [`Scalar`] (`f64` and `f32`); the
//! aliases below fix the scalar to `f64`, which is what the CLI uses.

pub mod error;
pub mod greenred;
pub mod harness;
pub mod optimize;
pub mod prob;
pub mod scalar;
pub mod scheme;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Pmf64 = prob::Pmf<f64>;
pub type Pmf32 = prob::Pmf<f32>;
pub type OptimizerReport64 = optimize::OptimizerReport<f64>;
pub type CouplingTable64 = scheme::CouplingTable<f64>;
pub type SchemeBundle64 = scheme::SchemeBundle<f64>;
pub type SchemeBundle32 = scheme::SchemeBundle<f32>;
pub type TypicalIndex64 = scheme::TypicalIndex<f64>;
pub type AsymptoticScheme64 = scheme::AsymptoticScheme<f64>;
pub type ValidationReport64 = harness::ValidationReport<f64>;
