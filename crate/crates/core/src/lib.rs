//! Multiconductor optimal power flow with an explicit neutral.
//!
//! The crate compiles a [`Network`] into one of five formulations
//! (current-voltage, two power-voltage variants and two lifted semidefinite
//! relaxations), solves them with embedded interior-point methods and
//! measures relaxation gaps and feasible-set geometry.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod formulations;
pub mod linalg;
pub mod netmodel;
pub mod solvers;

pub use error::{Error, Result};
pub use formulations::{build_formulation, FormulationKind, IvrPoint, LiftedPoint, ProblemInstance};
pub use linalg::ComplexMatrix;
pub use netmodel::{Branch, Bus, Generator, Load, Network};
