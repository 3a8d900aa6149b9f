//! Numerical laboratory for quasilinear Dirichlet problems driven by the
//! p-Laplacian with convection and exponential reaction terms.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod banded;
pub mod analysis;
pub mod asymptotics;
pub mod error;
pub mod fixed_point;
pub mod geometry;
pub mod kv;
pub mod plap;
pub mod selftest;
pub mod spectral;
pub mod thresholds;

pub use error::{Error, Result};
pub use geometry::{distance_function, Domain, DomainSpec, Field, Shape};
pub use plap::{solve_p_poisson, torsion_function, PoissonSolution, SolverConfig};
pub use spectral::{principal_eigenpair, EigenPair};

/// Version of this crate, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
