//! Text artifacts for cross-checking with external solvers.
//!
//! `conic-text` layout (variables 1-based):
//!
//! ```text
//! nvar nblocks neq
//! psd <side> <idx> <idx> ...      one per block, lower triangle in column-major order;
//!                                 each idx is a signed variable index or 0 for an empty cell
//! <row>: <coeff>@<var> ... = <rhs>    one per equality row
//! ineq: <coeff>@<var> ... <= <rhs>    one per inequality row
//! obj: <coeff>@<var> ...
//! ```

use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::{ProblemInstance, QuadExpr, Relation};
use crate::linalg::{svec_index, svec_len};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    QcqpJson,
    ConicText,
}

impl FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qcqp-json" => Ok(ExportFormat::QcqpJson),
            "conic-text" => Ok(ExportFormat::ConicText),
            _ => Err(Error::Contract(format!("unknown export format {s:?}"))),
        }
    }
}

/// Serialize `inst`; the conic text carries the objective for direction `theta`.
pub fn export_problem(inst: &ProblemInstance, format: ExportFormat, theta: f64) -> Result<Vec<u8>> {
    match format {
        ExportFormat::QcqpJson => serde_json::to_vec_pretty(inst).map_err(Error::from_json),
        ExportFormat::ConicText => conic_text(inst, theta).map(String::into_bytes),
    }
}

pub fn import_qcqp_json(bytes: &[u8]) -> Result<ProblemInstance> {
    serde_json::from_slice(bytes).map_err(Error::from_json)
}

fn terms(e: &QuadExpr) -> String {
    let mut out = String::new();
    for (i, &(v, c)) in e.lin.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{c:e}@{}", v + 1);
    }
    out
}

fn conic_text(inst: &ProblemInstance, theta: f64) -> Result<String> {
    if !inst.kind.is_conic() || !inst.quadratic.is_empty() {
        return Err(Error::Contract(format!("conic-text export requires a conic instance, got {}", inst.kind)));
    }
    let eqs: Vec<_> = inst.linear.iter().filter(|c| c.relation == Relation::Eq).collect();
    let mut out = format!("{} {} {}\n", inst.n_vars(), inst.psd.len(), eqs.len());
    for block in &inst.psd {
        let mut cells = vec![0i64; svec_len(block.side)];
        for e in &block.entries {
            let signed = match e.coeff {
                1.0 => (e.var + 1) as i64,
                -1.0 => -((e.var + 1) as i64),
                c => return Err(Error::Contract(format!("psd coefficient {c} is not +-1"))),
            };
            cells[svec_index(block.side, e.row, e.col)] = signed;
        }
        let _ = write!(out, "psd {}", block.side);
        for c in cells {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
    }
    for (i, c) in eqs.iter().enumerate() {
        let _ = writeln!(out, "{}: {} = {:e}", i + 1, terms(&c.expr), -c.expr.constant);
    }
    for c in inst.linear.iter().filter(|c| c.relation == Relation::Le) {
        let _ = writeln!(out, "ineq: {} <= {:e}", terms(&c.expr), -c.expr.constant);
    }
    let _ = writeln!(out, "obj: {}", terms(&inst.objective(theta)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::{build_formulation, FormulationKind};
    use crate::netmodel::two_bus_two_wire;

    #[test]
    fn swr2_declares_one_block_of_side_eight() {
        let inst = build_formulation(&two_bus_two_wire(), FormulationKind::Swr2).unwrap();
        let text = String::from_utf8(export_problem(&inst, ExportFormat::ConicText, 0.0).unwrap()).unwrap();
        let header: Vec<usize> = text.lines().next().unwrap().split(' ').map(|t| t.parse().unwrap()).collect();
        assert_eq!(header[0], inst.n_vars());
        assert_eq!(header[1], 1);
        let psd: Vec<_> = text.lines().filter(|l| l.starts_with("psd ")).collect();
        assert_eq!(psd.len(), 1);
        assert!(psd[0].starts_with("psd 8 "));
        assert_eq!(psd[0].split(' ').count(), 2 + 36);
        let rows = text.lines().filter(|l| l.contains(" = ")).count();
        assert_eq!(rows, header[2]);
    }

    #[test]
    fn json_round_trip_for_every_kind() {
        let net = two_bus_two_wire();
        for kind in FormulationKind::ALL {
            let inst = build_formulation(&net, kind).unwrap();
            let bytes = export_problem(&inst, ExportFormat::QcqpJson, 0.0).unwrap();
            assert_eq!(import_qcqp_json(&bytes).unwrap(), inst);
        }
    }

    #[test]
    fn conic_text_of_nonlinear_kind_is_rejected() {
        let inst = build_formulation(&two_bus_two_wire(), FormulationKind::Ivr).unwrap();
        assert!(matches!(export_problem(&inst, ExportFormat::ConicText, 0.0), Err(Error::Contract(_))));
    }
}
