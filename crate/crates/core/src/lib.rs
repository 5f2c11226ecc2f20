//! Numerical laboratory for Markov chains driven by iterated function systems
//! on `[0, 1]` with place-dependent probabilities.
//!
//! The central object is the Diaconis–Friedman chain: from `x` the chain jumps
//! uniformly into `[0, x]` with probability `p(x)` and uniformly into `[x, 1]`
//! with probability `q(x) = 1 - p(x)`. The crate provides
//!
//! * [`ifs`]: the map families `H_t`, `A_t`, place-dependent kernels and
//!   executable contraction / regularity / minorization checks,
//! * [`df`]: the transition operator `Q`, its adjoint, the closed-form
//!   invariant density, regime classification and harmonic functions,
//! * [`numerics`]: grid functions, quadrature, Ulam matrices and spectral
//!   estimates,
//! * [`mc`]: seeded, reproducible Monte Carlo over many chains.
//!
//! Data-parallel loops go through [`par::Execution`]; with the `parallel`
//! feature (default) they run on rayon, otherwise sequentially. Results are
//! identical either way.

pub mod df;
pub mod error;
pub mod ifs;
pub mod mc;
pub mod numerics;
pub mod par;
pub mod weight;

pub use error::{Error, Result};
pub use numerics::grid::GridFunction;
pub use par::Execution;
pub use weight::WeightFunction;
