//! Numerical machinery for positive solutions of Lane-Emden and Henon
//! equations on infinite cones with inhomogeneous Dirichlet data.
//!
//! The crate builds verified bifurcation diagrams at desk scale:
//!
//! * [`cone`]: cross-section eigenvalue and angular comparison profiles;
//! * [`exponents`]: critical exponents, the classifying cubic, admissible
//!   ranges of the nonlinearity exponent, decay windows;
//! * [`barrier`]: weighted profiles, weighted sup norms, supersolution
//!   barriers and small-amplitude existence certificates;
//! * [`poisson`]: log-radial finite-difference Laplacian, direct solves,
//!   Green operator, quadrature functionals, Hardy ratio;
//! * [`solver`]: monotone iteration for minimal solutions, extremal
//!   parameter bisection, decay diagnostics;
//! * [`eigen`]: first eigenpair of the linearized operator along a branch;
//! * [`continuation`]: Newton solves and pseudo-arclength continuation
//!   through the fold;
//! * [`config`] and [`pipeline`]: run configuration and the command-line
//!   entry points.

pub mod barrier;
pub mod banded;
pub mod cone;
pub mod config;
pub mod continuation;
pub mod eigen;
pub mod error;
pub mod exponents;
pub mod grid;

pub mod pipeline;
pub mod poisson;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
