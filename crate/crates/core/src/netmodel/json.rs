use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{BaseQuantities, Branch, Bus, Generator, Load, Network};
use crate::error::{Error, Result};

type Pair = [f64; 2];

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    buses: Vec<RawBus>,
    branches: Vec<RawBranch>,
    loads: Vec<RawLoad>,
    generators: Vec<RawGenerator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<RawBase>,
}

#[derive(Serialize, Deserialize)]
struct RawBus {
    id: String,
    n_conductors: usize,
    u_min: Vec<f64>,
    u_max: Vec<f64>,
    #[serde(default)]
    fixed_voltage: Option<Vec<Pair>>,
}

#[derive(Serialize, Deserialize)]
struct RawBranch {
    id: String,
    from: String,
    to: String,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    #[serde(rename = "X")]
    x: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawLoad {
    id: String,
    bus: String,
    terminals: [usize; 2],
    s_ref: Pair,
}

#[derive(Serialize, Deserialize)]
struct RawGenerator {
    id: String,
    bus: String,
    conductors: Vec<usize>,
    in_objective: bool,
}

#[derive(Serialize, Deserialize)]
struct RawBase {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    power_va: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voltage_v: Option<f64>,
}

fn c(p: Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn pair(z: Complex64) -> Pair {
    [z.re, z.im]
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Schema(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(n, m, |r, c| rows[r][c]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Decode a network from JSON text. Only structure and cross references are checked;
/// electrical invariants are the job of [`super::validate_network`].
pub fn parse_network(bytes: &[u8]) -> Result<Network> {
    let raw: RawNetwork = serde_json::from_slice(bytes).map_err(Error::from_json)?;

    let buses: Vec<Bus> = raw
        .buses
        .into_iter()
        .map(|b| Bus {
            id: b.id,
            n_conductors: b.n_conductors,
            u_min: b.u_min,
            u_max: b.u_max,
            fixed_voltage: b.fixed_voltage.map(|v| v.into_iter().map(c).collect()),
        })
        .collect();

    let known = |id: &str| buses.iter().any(|b| b.id == id);
    let dangling =
        |kind: &str, owner: &str, id: &str| Error::Reference(format!("{kind} {owner} references unknown bus {id:?}"));

    let mut branches = Vec::with_capacity(raw.branches.len());
    for br in raw.branches {
        for end in [&br.from, &br.to] {
            if !known(end) {
                return Err(dangling("branch", &br.id, end));
            }
        }
        branches.push(Branch {
            r: matrix(&br.r, &format!("R of branch {}", br.id))?,
            x: matrix(&br.x, &format!("X of branch {}", br.id))?,
            id: br.id,
            from_bus: br.from,
            to_bus: br.to,
        });
    }

    let mut loads = Vec::with_capacity(raw.loads.len());
    for d in raw.loads {
        if !known(&d.bus) {
            return Err(dangling("load", &d.id, &d.bus));
        }
        loads.push(Load { id: d.id, bus: d.bus, terminals: d.terminals, s_ref: c(d.s_ref) });
    }

    let mut generators = Vec::with_capacity(raw.generators.len());
    for g in raw.generators {
        if !known(&g.bus) {
            return Err(dangling("generator", &g.id, &g.bus));
        }
        generators.push(Generator { id: g.id, bus: g.bus, conductors: g.conductors, in_objective: g.in_objective });
    }

    Ok(Network {
        buses,
        branches,
        loads,
        generators,
        base: raw.base.map(|b| BaseQuantities { power_va: b.power_va, voltage_v: b.voltage_v }),
    })
}

pub fn to_json(net: &Network) -> String {
    let raw = RawNetwork {
        buses: net
            .buses
            .iter()
            .map(|b| RawBus {
                id: b.id.clone(),
                n_conductors: b.n_conductors,
                u_min: b.u_min.clone(),
                u_max: b.u_max.clone(),
                fixed_voltage: b.fixed_voltage.as_ref().map(|v| v.iter().copied().map(pair).collect()),
            })
            .collect(),
        branches: net
            .branches
            .iter()
            .map(|br| RawBranch {
                id: br.id.clone(),
                from: br.from_bus.clone(),
                to: br.to_bus.clone(),
                r: rows_of(&br.r),
                x: rows_of(&br.x),
            })
            .collect(),
        loads: net
            .loads
            .iter()
            .map(|d| RawLoad { id: d.id.clone(), bus: d.bus.clone(), terminals: d.terminals, s_ref: pair(d.s_ref) })
            .collect(),
        generators: net
            .generators
            .iter()
            .map(|g| RawGenerator {
                id: g.id.clone(),
                bus: g.bus.clone(),
                conductors: g.conductors.clone(),
                in_objective: g.in_objective,
            })
            .collect(),
        base: net.base.as_ref().map(|b| RawBase { power_va: b.power_va, voltage_v: b.voltage_v }),
    };
    serde_json::to_string_pretty(&raw).expect("network serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::TWO_BUS_TWO_WIRE_JSON;

    #[test]
    fn bundled_case_impedances() {
        let net = parse_network(TWO_BUS_TWO_WIRE_JSON.as_bytes()).unwrap();
        let z = net.branches[0].impedance();
        assert!((z[(0, 0)] - Complex64::new(0.05, 0.04)).norm() < 1e-15);
        assert!((z[(0, 1)] - Complex64::new(0.005, 0.02)).norm() < 1e-15);
        assert!((z[(1, 0)] - Complex64::new(0.005, 0.02)).norm() < 1e-15);
        assert_eq!(net.loads[0].s_ref, Complex64::new(1.0, 0.5));
        assert_eq!(net.buses[1].u_min, vec![0.9, 0.0]);
    }

    #[test]
    fn empty_branch_list_is_structurally_valid() {
        let json = r#"{"buses":[{"id":"a","n_conductors":1,"u_min":[0],"u_max":[1.1],
            "fixed_voltage":[[1,0]]}],"branches":[],"loads":[],"generators":[]}"#;
        let net = parse_network(json.as_bytes()).unwrap();
        assert!(net.branches.is_empty());
        assert_eq!(net.buses.len(), 1);
    }

    #[test]
    fn dangling_load_bus() {
        let json = TWO_BUS_TWO_WIRE_JSON.replace(r#""bus": "j""#, r#""bus": "zz""#);
        assert!(matches!(parse_network(json.as_bytes()), Err(Error::Reference(_))));
    }

    #[test]
    fn malformed_json_reports_position() {
        match parse_network(b"{\n  \"buses\": [,]\n}") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_names_it() {
        let json = TWO_BUS_TWO_WIRE_JSON.replace("\"n_conductors\"", "\"n_cond\"");
        match parse_network(json.as_bytes()) {
            Err(Error::Schema(msg)) => assert!(msg.contains("n_conductors"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_matrix_is_schema_error() {
        let json = r#"{"buses":[{"id":"a","n_conductors":2,"u_min":[0,0],"u_max":[1,1]},
            {"id":"b","n_conductors":2,"u_min":[0,0],"u_max":[1,1]}],
            "branches":[{"id":"l","from":"a","to":"b","R":[[1,0],[0]],"X":[[1,0],[0,1]]}],
            "loads":[],"generators":[]}"#;
        assert!(matches!(parse_network(json.as_bytes()), Err(Error::Schema(_))));
    }
}
