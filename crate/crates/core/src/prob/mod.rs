//! Finite distributions: PMFs, divergences, i.i.d. sequence extensions and
//! seeded sampling.

mod measures;
mod pmf;
mod rng;
mod sequence;

pub use measures::{clipped_mass, entropy, kl_divergence, overhang, tv_distance};
pub use pmf::Pmf;
pub use rng::{sample_index, RngSeed, SampleStream, Sampler};
pub use sequence::{iid_extension, IidSource, MaterializeLimit, SequenceSpace, DEFAULT_MATERIALIZE_LIMIT};
