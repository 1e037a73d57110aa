//! Fourier representation of zero-mean real fields on the 2-torus.

mod constants;
mod field;
mod grid;
mod ops;
mod random;
pub mod snapshot;

pub use constants::{
    commutator_ratio_max, product_ratio_max, riesz_ratio_max, sobolev_exponent, sobolev_ratio_max,
    EmpiricalConstants, CORPUS_SEED, CORPUS_SIZE, FROZEN,
};
pub use field::SpectralField;
pub use grid::{Grid, GridSpec, Level};
pub(crate) use ops::dealiased_products_with;
pub use ops::{
    apply_lambda_s, dealiased_product, lp_norm, lp_norm_samples, poisson_filter, riesz_perp, sobolev_norm,
    spectral_divergence_max,
};
pub use random::{random_corpus, random_field, RandomFieldSpec};
