//! Solvers for compiled problems: a circuit Newton oracle, a primal-dual
//! interior-point method for the nonconvex kinds and a conic interior-point
//! method for the lifted kinds.

mod export;
mod newton;
mod nlp;
mod sdp;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::ResidualReport;

pub use export::{export_problem, import_qcqp_json, ExportFormat};
pub use newton::{solve_power_flow_newton, solve_power_flow_newton_with, NewtonOptions};
pub use nlp::solve_nlp;
pub use sdp::solve_sdp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    InfeasibleDetected,
    MaxIterations,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::InfeasibleDetected => "infeasible-detected",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::NumericalFailure => "numerical-failure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the first NLP start is chosen; further starts are random perturbations of it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initialization {
    Flat,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_iter: usize,
    pub multistart: usize,
    pub initialization: Initialization,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-8,
            opt_tol: 1e-8,
            max_iter: 200,
            multistart: 8,
            initialization: Initialization::Flat,
            seed: 42,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0 && self.opt_tol > 0.0) {
            return Err(Error::Contract("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 || self.multistart == 0 {
            return Err(Error::Contract("max_iter and multistart must be at least 1".into()));
        }
        Ok(())
    }
}

/// A distinct local optimum found by multistart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSolution {
    pub point: Vec<f64>,
    pub objective: f64,
    pub dispatch: Vec<Complex64>,
    /// Indices of the starts that converged here.
    pub starts: Vec<usize>,
}

/// Outcome of one start of the NLP method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartDiagnostic {
    pub start: usize,
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub equality_inf: f64,
}

/// Lagrange multipliers. For the NLP, `equality` and `inequality` follow the
/// order of equality and inequality constraints in `ProblemInstance::constraints`.
/// For the SDP, `equality` holds the equality multipliers, `inequality` the
/// nonnegative-cone multipliers and `psd` one dual matrix per block (dense, row-major).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    pub equality: Vec<f64>,
    pub inequality: Vec<f64>,
    pub psd: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub point: Vec<f64>,
    pub objective: f64,
    pub dispatch: Vec<Complex64>,
    pub iterations: usize,
    pub residuals: ResidualReport,
    pub duals: Duals,
    pub local_solutions: Vec<LocalSolution>,
    pub starts: Vec<StartDiagnostic>,
    /// Infeasibility certificate (dual ray over equality and cone rows) when detected.
    pub certificate: Option<Vec<f64>>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solve with the method matching the instance's kind.
pub fn solve(
    inst: &crate::formulations::ProblemInstance,
    net: &crate::netmodel::Network,
    theta: f64,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    if inst.kind.is_nonlinear() {
        solve_nlp(inst, net, theta, opts)
    } else {
        solve_sdp(inst, net, theta, opts)
    }
}
