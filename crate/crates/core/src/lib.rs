//! Sample-distortion functions, bounds and bandwise sample allocation for
//! statistical compressed sensing, with AMP / turbo decoders over wavelet
//! image models.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocate;
pub mod codec;
pub mod error;
pub mod presets;
pub mod priors;
pub mod quad;
pub mod sd;
pub mod sim;
pub mod turbo;
pub mod wavelet;
pub mod rng;

pub use error::{Error, Result};
pub use priors::{GgdPrior, GmdPrior, Prior, VarianceMixture};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/priors.md")]
    mod priors {}
    #[doc = include_str!("../../../book/src/sd_curves.md")]
    mod sd_curves {}
    #[doc = include_str!("../../../book/src/allocation.md")]
    mod allocation {}
    #[doc = include_str!("../../../book/src/wavelets.md")]
    mod wavelets {}
    #[doc = include_str!("../../../book/src/decoding.md")]
    mod decoding {}
    #[doc = include_str!("../../../book/src/turbo.md")]
    mod turbo {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}
