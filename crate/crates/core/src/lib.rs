//! Third-order orientation analysis for stationary Poisson branching-cluster
//! (Hawkes-type) processes on the line.
//!
//! The crate evaluates closed-form Bartlett spectra and bispectra, builds
//! reversible spectral matches for monotone kernels, reconstructs the third
//! cumulant density by transform inversion, computes odd orientation
//! contrasts on event data, and checks all of it against seeded Monte-Carlo
//! oracles. Angular frequencies follow `ĥ(ω) = ∫ e^{-iωt} h(t) dt`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod contrasts;
pub mod cumulant3;
pub mod error;
pub mod kernels;
pub mod matching;
pub mod montecarlo;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod spectra;

pub use error::{Error, Result};
pub use kernels::{Kernel, KernelTailClass};
pub use simulate::{EventSeries, ModelParams};
