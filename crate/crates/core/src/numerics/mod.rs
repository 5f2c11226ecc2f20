//! Grid-function arithmetic, quadrature, Ulam discretization and spectral
//! estimates.

pub mod convergence;
pub mod grid;
pub mod quad;
pub mod spectrum;
pub mod ulam;

pub use convergence::convergence_curve;
pub use grid::{cumulative_integral, cumulative_integral_singular, holder_seminorm, GridFunction};
pub use spectrum::{power_iteration, second_eigenvalue, SecondEigenvalue, SpectrumEstimate};
pub use ulam::{build_ulam, UlamMatrix};
