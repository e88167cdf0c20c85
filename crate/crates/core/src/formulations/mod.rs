//! Compilation of a network into real-valued optimization problems.

mod builder;
pub mod expr;
mod instance;
mod point;
pub mod registry;

pub use builder::{build_formulation, build_swr_variant};
pub use expr::{realify, ComplexExpr, Constraint, QuadExpr, Relation};
pub use instance::{FormulationKind, ProblemInstance, PsdBlock, PsdEntry, ResidualEntry, ResidualReport, SwrFeatures};
pub use point::{
    dispatch_of, embed, embed_lifted, ivr_point_of, lift_point, load_voltage_magnitudes, voltage_magnitudes,
    voltages_of, IvrPoint, LiftedPoint,
};
pub use registry::{Coord, Part, Symbol, VarTag, VariableRegistry};
