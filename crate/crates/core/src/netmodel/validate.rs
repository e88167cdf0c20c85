use std::fmt;

use nalgebra::DMatrix;

use super::Network;
use crate::linalg::{is_positive_definite_real, is_symmetric_real, PD_PIVOT_TOL};

const SYMMETRY_TOL: f64 = 1e-12;
const INVERSE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Finding {
    NotSquare { branch: String, matrix: &'static str },
    Asymmetric { branch: String, matrix: &'static str },
    NotPositiveDefinite { branch: String, matrix: &'static str },
    InaccurateInverse { branch: String, residual: f64 },
    SelfLoop { branch: String },
    ConductorMismatch { branch: String },
    BoundLength { bus: String },
    BoundOrder { bus: String, conductor: usize },
    NegativeBound { bus: String, conductor: usize },
    FixedVoltageLength { bus: String },
    SlackCount { count: usize },
    BadTerminals { load: String },
    BadConductors { generator: String },
    DuplicateId { id: String },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::NotSquare { branch, matrix } => {
                write!(f, "branch {branch}: {matrix} is not square with the conductor count")
            }
            Finding::Asymmetric { branch, matrix } => write!(f, "branch {branch}: {matrix} is not symmetric"),
            Finding::NotPositiveDefinite { branch, matrix } => {
                write!(f, "branch {branch}: {matrix} is not positive definite")
            }
            Finding::InaccurateInverse { branch, residual } => {
                write!(f, "branch {branch}: |Z*Y - I| = {residual:e}")
            }
            Finding::SelfLoop { branch } => write!(f, "branch {branch} connects a bus to itself"),
            Finding::ConductorMismatch { branch } => {
                write!(f, "branch {branch}: terminal buses disagree on conductor count")
            }
            Finding::BoundLength { bus } => write!(f, "bus {bus}: bound vectors do not match n_conductors"),
            Finding::BoundOrder { bus, conductor } => {
                write!(f, "bus {bus}: u_min > u_max on conductor {conductor}")
            }
            Finding::NegativeBound { bus, conductor } => {
                write!(f, "bus {bus}: negative voltage bound on conductor {conductor}")
            }
            Finding::FixedVoltageLength { bus } => {
                write!(f, "bus {bus}: fixed_voltage does not match n_conductors")
            }
            Finding::SlackCount { count } => write!(f, "expected exactly one voltage source, found {count}"),
            Finding::BadTerminals { load } => write!(f, "load {load}: invalid terminals"),
            Finding::BadConductors { generator } => write!(f, "generator {generator}: invalid conductors"),
            Finding::DuplicateId { id } => write!(f, "duplicate id {id:?}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.findings.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

fn check_matrix(findings: &mut Vec<Finding>, branch: &str, name: &'static str, m: &DMatrix<f64>, n: usize) -> bool {
    if !m.is_square() || m.nrows() != n {
        findings.push(Finding::NotSquare { branch: branch.into(), matrix: name });
        return false;
    }
    if !is_symmetric_real(m, SYMMETRY_TOL) {
        findings.push(Finding::Asymmetric { branch: branch.into(), matrix: name });
    }
    if !is_positive_definite_real(m, PD_PIVOT_TOL) {
        findings.push(Finding::NotPositiveDefinite { branch: branch.into(), matrix: name });
    }
    true
}

/// Every violated invariant of `net`; an empty report means the network is valid.
pub fn validate_network(net: &Network) -> ValidationReport {
    let mut findings = Vec::new();

    let mut ids: Vec<&str> = net.buses.iter().map(|b| b.id.as_str()).collect();
    ids.extend(net.branches.iter().map(|b| b.id.as_str()));
    ids.extend(net.loads.iter().map(|d| d.id.as_str()));
    ids.extend(net.generators.iter().map(|g| g.id.as_str()));
    ids.sort_unstable();
    for w in ids.windows(2) {
        if w[0] == w[1] {
            findings.push(Finding::DuplicateId { id: w[0].to_string() });
        }
    }

    for bus in &net.buses {
        let n = bus.n_conductors;
        if bus.u_min.len() != n || bus.u_max.len() != n {
            findings.push(Finding::BoundLength { bus: bus.id.clone() });
        } else {
            for k in 0..n {
                if bus.u_min[k] < 0.0 || bus.u_max[k] < 0.0 {
                    findings.push(Finding::NegativeBound { bus: bus.id.clone(), conductor: k });
                }
                if bus.u_min[k] > bus.u_max[k] {
                    findings.push(Finding::BoundOrder { bus: bus.id.clone(), conductor: k });
                }
            }
        }
        if let Some(v) = &bus.fixed_voltage {
            if v.len() != n {
                findings.push(Finding::FixedVoltageLength { bus: bus.id.clone() });
            }
        }
    }

    let slack = net.buses.iter().filter(|b| b.is_slack()).count();
    if slack != 1 {
        findings.push(Finding::SlackCount { count: slack });
    }

    for br in &net.branches {
        if br.from_bus == br.to_bus {
            findings.push(Finding::SelfLoop { branch: br.id.clone() });
        }
        let (Some(from), Some(to)) = (net.bus(&br.from_bus), net.bus(&br.to_bus)) else {
            continue;
        };
        if from.n_conductors != to.n_conductors {
            findings.push(Finding::ConductorMismatch { branch: br.id.clone() });
        }
        let n = from.n_conductors;
        let r_ok = check_matrix(&mut findings, &br.id, "R", &br.r, n);
        let x_ok = check_matrix(&mut findings, &br.id, "X", &br.x, n);
        if r_ok && x_ok {
            let z = br.impedance();
            let residual = match z.inverse() {
                Ok(y) => (&z.0 * &y.0 - nalgebra::DMatrix::identity(n, n))
                    .row_iter()
                    .map(|r| r.iter().map(|v| v.norm()).sum::<f64>())
                    .fold(0.0, f64::max),
                Err(_) => f64::INFINITY,
            };
            if !(residual < INVERSE_TOL) {
                findings.push(Finding::InaccurateInverse { branch: br.id.clone(), residual });
            }
        }
    }

    for d in &net.loads {
        let n = net.bus(&d.bus).map_or(0, |b| b.n_conductors);
        let [a, b] = d.terminals;
        if a == b || a >= n || b >= n {
            findings.push(Finding::BadTerminals { load: d.id.clone() });
        }
    }

    for g in &net.generators {
        let n = net.bus(&g.bus).map_or(0, |b| b.n_conductors);
        let mut seen = g.conductors.clone();
        seen.sort_unstable();
        seen.dedup();
        if g.conductors.is_empty() || seen.len() != g.conductors.len() || g.conductors.iter().any(|&k| k >= n) {
            findings.push(Finding::BadConductors { generator: g.id.clone() });
        }
    }

    ValidationReport { findings }
}
