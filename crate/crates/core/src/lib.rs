//! Numerical laboratory for the incompressible surface Navier-Stokes
//! equations with Navier slip boundary conditions on compact 2-D
//! Riemannian manifolds with boundary (disk, spherical cap, finite
//! cylinder, or a user-supplied chart).
//!
//! The crate provides chart-based analytic geometry, discrete intrinsic
//! tensor calculus, a variational Helmholtz projection, the weak surface
//! Stokes operator with Navier or perfect-slip boundary conditions
//! (resolvents, eigenpairs, a linearization about Killing fields), the
//! equilibrium (Killing) space machinery, and an IMEX projection time
//! integrator with energy/conservation diagnostics.

pub mod battery;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod fourier;
pub mod geometry;
pub mod grid;
pub mod helmholtz;
pub mod io;
pub mod killing;
pub mod ops;
pub mod spectral;
pub mod stencil;
pub mod stokes;
pub mod synth;

pub use error::{Error, Result};
pub use field::{ScalarField, TensorField11, TensorField20, VectorField};
pub use geometry::{build_geometry, ChartGeometry, GeometryKind, GeometrySpec};
pub use stokes::{BoundaryCondition, StokesOperator};
