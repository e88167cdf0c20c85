use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::{build_formulation, embed, embed_lifted, FormulationKind, IvrPoint, LiftedPoint};
use crate::netmodel::Network;

#[derive(Clone, Debug, PartialEq)]
pub enum Candidate {
    Physical(IvrPoint),
    Lifted(LiftedPoint),
}

/// `entries[p][k]` is `Some(feasible)` or `None` when point `p` cannot be
/// embedded into kind `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityMatrix {
    pub names: Vec<String>,
    pub kinds: Vec<FormulationKind>,
    pub tol: f64,
    pub entries: Vec<Vec<Option<bool>>>,
}

impl FeasibilityMatrix {
    pub fn get(&self, name: &str, kind: FormulationKind) -> Option<bool> {
        let p = self.names.iter().position(|n| n == name)?;
        let k = self.kinds.iter().position(|&k| k == kind)?;
        self.entries[p][k]
    }
}

impl fmt::Display for FeasibilityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, row) in self.names.iter().zip(&self.entries) {
            write!(f, "{name}")?;
            for (k, e) in self.kinds.iter().zip(row) {
                match e {
                    Some(v) => write!(f, " {k}:{v}")?,
                    None => write!(f, " {k}:n/a")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn feasibility_matrix(
    points: &[(String, Candidate)],
    net: &Network,
    kinds: &[FormulationKind],
    tol: f64,
) -> Result<FeasibilityMatrix> {
    if !(tol > 0.0) {
        return Err(Error::Contract("tolerance must be positive".into()));
    }
    let instances = kinds.iter().map(|&k| build_formulation(net, k)).collect::<Result<Vec<_>>>()?;
    let entries = points
        .iter()
        .map(|(_, cand)| {
            instances
                .iter()
                .map(|inst| {
                    let x = match cand {
                        Candidate::Physical(p) => embed(inst, net, p),
                        Candidate::Lifted(lp) => embed_lifted(inst, lp),
                    }
                    .ok()?;
                    Some(inst.residuals(&x).ok()?.feasible(tol))
                })
                .collect()
        })
        .collect();
    Ok(FeasibilityMatrix {
        names: points.iter().map(|(n, _)| n.clone()).collect(),
        kinds: kinds.to_vec(),
        tol,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::lift_point;
    use crate::netmodel::two_bus_two_wire;
    use crate::solvers::solve_power_flow_newton;

    #[test]
    fn exact_point_is_feasible_everywhere_and_zero_point_nowhere() {
        let net = two_bus_two_wire();
        let exact = solve_power_flow_newton(&net).unwrap();
        let lifted = lift_point(&exact, &net).unwrap();
        let points = vec![
            ("exact".to_string(), Candidate::Physical(exact)),
            ("zero".to_string(), Candidate::Physical(IvrPoint::zero(&net))),
            ("lifted".to_string(), Candidate::Lifted(lifted)),
        ];
        let m = feasibility_matrix(&points, &net, &FormulationKind::ALL, 1e-6).unwrap();
        for k in FormulationKind::ALL {
            assert_eq!(m.get("exact", k), Some(true), "{k}");
            assert_eq!(m.get("zero", k), Some(false), "{k}");
        }
        assert_eq!(m.get("lifted", FormulationKind::Ivr), None);
        assert_eq!(m.get("lifted", FormulationKind::Swr2), Some(true));
        assert!(m.to_string().contains("exact ivr:true"));
    }
}
