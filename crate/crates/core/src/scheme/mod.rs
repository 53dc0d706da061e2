//! Scheme constructions: Latin-square decoders, per-message optimal
//! couplings, the finite-length optimal bundle, and the typical-set scheme.

mod asymptotic;
mod coupling;
mod decoder;
mod finite;
mod typical;

pub use asymptotic::{build_asymptotic_scheme, AsymptoticScheme, RateCondition};
pub use coupling::{build_coupling, build_pzeta_star, build_pzeta_star_for, CouplingTable};
pub use decoder::{DecoderFamily, DecoderSpec, ALIGNED_MESSAGE};
pub use finite::{
    build_finite_scheme, read_couplings, sequence_source, BundleManifest, SchemeBundle, SchemeParams, COUPLING_MAGIC,
};
pub use typical::{default_eta, TypicalIndex};
