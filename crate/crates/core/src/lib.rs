//! Exponent engines, closed-orbit detection and attractiveness portraits for
//! a fixed registry of low-dimensional ODE systems.

// Input checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod exponents;
pub mod format;
pub mod integrator;
pub mod linalg;
pub mod orbit;
pub mod portrait;
pub mod quadrature;
pub mod smalleig;
pub mod systems;

pub use error::{Error, Result};
pub use exec::Execution;
pub use integrator::{FundamentalMatrix, Tolerances, Trajectory};
pub use linalg::{Matrix, StateVector};
pub use smalleig::{eigen, floquet_from_monodromy, EigenStructure, FloquetExponents, Spectrum};
pub use systems::{lookup_system, SystemDefinition};
