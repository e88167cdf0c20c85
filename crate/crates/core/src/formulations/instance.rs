use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::expr::{Constraint, QuadExpr, Relation};
use super::registry::VariableRegistry;
use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormulationKind {
    Ivr,
    Svr1,
    Svr2,
    Swr1,
    Swr2,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 5] = [
        FormulationKind::Ivr,
        FormulationKind::Svr1,
        FormulationKind::Svr2,
        FormulationKind::Swr1,
        FormulationKind::Swr2,
    ];

    /// Nonconvex QCQP kinds, solved by the NLP interior-point method.
    pub fn is_nonlinear(self) -> bool {
        matches!(self, FormulationKind::Ivr | FormulationKind::Svr1 | FormulationKind::Svr2)
    }

    /// Lifted semidefinite kinds.
    pub fn is_conic(self) -> bool {
        !self.is_nonlinear()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FormulationKind::Ivr => "ivr",
            FormulationKind::Svr1 => "svr1",
            FormulationKind::Svr2 => "svr2",
            FormulationKind::Swr1 => "swr1",
            FormulationKind::Swr2 => "swr2",
        }
    }
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormulationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "ivr" => Ok(FormulationKind::Ivr),
            "svr1" => Ok(FormulationKind::Svr1),
            "svr2" => Ok(FormulationKind::Svr2),
            "swr1" => Ok(FormulationKind::Swr1),
            "swr2" => Ok(FormulationKind::Swr2),
            _ => Err(Error::Contract(format!("unknown formulation {s:?}"))),
        }
    }
}

/// Which device-level strengthening the lifted formulation carries.
/// SWR-1 has neither, SWR-2 both; the mixed settings exist for ablation studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwrFeatures {
    pub matrix_kcl: bool,
    pub row_sums: bool,
}

impl SwrFeatures {
    pub const SWR1: SwrFeatures = SwrFeatures { matrix_kcl: false, row_sums: false };
    pub const SWR2: SwrFeatures = SwrFeatures { matrix_kcl: true, row_sums: true };

    /// Whether load and generator powers are matrix variables.
    pub fn matrix_devices(self) -> bool {
        self.matrix_kcl || self.row_sums
    }
}

/// One nonzero of a PSD block: `M[row, col] = M[col, row] += coeff * x[var]`, `row >= col`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdEntry {
    pub row: usize,
    pub col: usize,
    pub var: usize,
    pub coeff: f64,
}

/// Real symmetric matrix, linear in the registry variables, constrained to be PSD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdBlock {
    pub label: String,
    pub side: usize,
    pub entries: Vec<PsdEntry>,
}

impl PsdBlock {
    pub fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.side, self.side);
        for e in &self.entries {
            m[(e.row, e.col)] += e.coeff * x[e.var];
            if e.row != e.col {
                m[(e.col, e.row)] += e.coeff * x[e.var];
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub kind: FormulationKind,
    pub swr_features: Option<SwrFeatures>,
    pub registry: VariableRegistry,
    pub linear: Vec<Constraint>,
    pub quadratic: Vec<Constraint>,
    pub psd: Vec<PsdBlock>,
    /// Active-power part of the objective, `sum P_g_disp`.
    pub objective_p: QuadExpr,
    /// Reactive-power part of the objective, `sum Q_g_disp`.
    pub objective_q: QuadExpr,
}

impl ProblemInstance {
    pub fn n_vars(&self) -> usize {
        self.registry.len()
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.linear.iter().chain(self.quadratic.iter())
    }

    /// `cos(theta) * P + sin(theta) * Q`.
    pub fn objective(&self, theta: f64) -> QuadExpr {
        self.objective_p.scale(theta.cos()).add_scaled(&self.objective_q, theta.sin())
    }

    pub fn residuals(&self, x: &[f64]) -> Result<ResidualReport> {
        if x.len() != self.n_vars() {
            return Err(Error::Contract(format!("point has {} entries, registry has {}", x.len(), self.n_vars())));
        }
        let mut report = ResidualReport::default();
        for c in self.constraints() {
            let r = c.residual(x);
            match c.relation {
                Relation::Eq => report.equality_inf = report.equality_inf.max(r.abs()),
                Relation::Le => report.inequality_violation = report.inequality_violation.max(r),
            }
            report.entries.push(ResidualEntry { label: c.label.clone(), relation: c.relation, value: r });
        }
        report.psd_min_eigenvalues = self.psd.iter().map(|b| min_eigenvalue(&b.matrix(x))).collect();
        Ok(report)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub label: String,
    pub relation: Relation,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    /// Infinity norm over equality residuals.
    pub equality_inf: f64,
    /// Largest positive inequality residual (0 when all hold).
    pub inequality_violation: f64,
    pub psd_min_eigenvalues: Vec<f64>,
}

impl ResidualReport {
    pub fn psd_min(&self) -> f64 {
        self.psd_min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn feasible(&self, tol: f64) -> bool {
        self.equality_inf <= tol
            && self.inequality_violation <= tol
            && self.psd_min_eigenvalues.iter().all(|&e| e >= -tol)
    }

    /// Largest residual entry, for diagnostics.
    pub fn worst(&self) -> Option<&ResidualEntry> {
        self.entries.iter().max_by(|a, b| {
            let va = if a.relation == Relation::Eq { a.value.abs() } else { a.value };
            let vb = if b.relation == Relation::Eq { b.value.abs() } else { b.value };
            va.total_cmp(&vb)
        })
    }
}
