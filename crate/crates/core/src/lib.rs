//! Finite-element solver for a clamped elliptic membrane shell confined to a
//! half-space, in the doubly penalised mixed formulation where both the
//! obstacle constraint and the rotation constraint are enforced by penalties.

pub mod assembly;
pub mod error;
pub mod experiments;
pub mod forms;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod vtk;

pub use error::{Error, Result};
