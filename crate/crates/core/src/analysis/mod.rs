//! Objective sweeps, relaxation gaps, feasibility cross-checks and a circuit
//! enumeration oracle for the relaxed circuits.

mod csv;
mod feasibility;
pub mod geometry;
mod oracle;
pub mod regression;
mod sweep;

use crate::error::{Error, Result};

pub use csv::{cloud_csv, format_sig9, sweep_csv};
pub use feasibility::{feasibility_matrix, Candidate, FeasibilityMatrix};
pub use oracle::{brute_force_set, kron_grounded_point, CircuitMode, CloudPoint, SlackGrid, SlackSourceSpec};
pub use sweep::{sweep_objective, SweepRecord, SweepReport, MIN_SAMPLES};

/// Relative active-power gap in percent.
pub fn relaxation_gap(p_exact: f64, p_relaxed: f64) -> Result<f64> {
    if !(p_exact > 0.0) {
        return Err(Error::Contract(format!("exact objective must be positive, got {p_exact}")));
    }
    Ok(100.0 * (p_exact - p_relaxed) / p_exact)
}
