//! Physical and lifted operating points, and their embedding into a problem's variable space.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::instance::ProblemInstance;
use super::registry::{Coord, Part, Symbol, VarTag};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::netmodel::Network;

/// Complex operating point of the circuit. Load currents are indexed by load terminal,
/// generator currents by the generator's conductor list.
#[derive(Clone, Debug, PartialEq)]
pub struct IvrPoint {
    pub voltages: Vec<Vec<Complex64>>,
    pub branch_currents: Vec<Vec<Complex64>>,
    pub load_currents: Vec<Vec<Complex64>>,
    pub gen_currents: Vec<Vec<Complex64>>,
}

impl IvrPoint {
    /// All voltages copied from the voltage source, all currents zero.
    pub fn flat(net: &Network) -> Self {
        let source = net.slack_buses().next().and_then(|(_, b)| b.fixed_voltage.clone()).unwrap_or_default();
        IvrPoint {
            voltages: net
                .buses
                .iter()
                .map(|b| {
                    b.fixed_voltage.clone().unwrap_or_else(|| {
                        (0..b.n_conductors).map(|k| source.get(k).copied().unwrap_or_default()).collect()
                    })
                })
                .collect(),
            branch_currents: net.branches.iter().map(|br| vec![Complex64::default(); br.n_conductors()]).collect(),
            load_currents: net.loads.iter().map(|_| vec![Complex64::default(); 2]).collect(),
            gen_currents: net.generators.iter().map(|g| vec![Complex64::default(); g.conductors.len()]).collect(),
        }
    }

    pub fn zero(net: &Network) -> Self {
        let mut p = Self::flat(net);
        p.voltages.iter_mut().flatten().for_each(|v| *v = Complex64::default());
        p
    }

    pub fn check_dimensions(&self, net: &Network) -> Result<()> {
        let bad = |what: &str| Err(Error::Contract(format!("operating point: {what} do not match the network")));
        if self.voltages.len() != net.buses.len()
            || self.voltages.iter().zip(&net.buses).any(|(v, b)| v.len() != b.n_conductors)
        {
            return bad("voltages");
        }
        if self.branch_currents.len() != net.branches.len()
            || self.branch_currents.iter().zip(&net.branches).any(|(i, br)| i.len() != br.n_conductors())
        {
            return bad("branch currents");
        }
        if self.load_currents.len() != net.loads.len() || self.load_currents.iter().any(|i| i.len() != 2) {
            return bad("load currents");
        }
        if self.gen_currents.len() != net.generators.len()
            || self.gen_currents.iter().zip(&net.generators).any(|(i, g)| i.len() != g.conductors.len())
        {
            return bad("generator currents");
        }
        Ok(())
    }

    /// Generator dispatch `sum_k U[c_k] conj(I_g[k])`.
    pub fn dispatch(&self, net: &Network) -> Vec<Complex64> {
        net.generators
            .iter()
            .zip(&self.gen_currents)
            .map(|(g, i)| {
                let u = &self.voltages[net.bus_idx(&g.bus)];
                g.conductors.iter().zip(i).map(|(&c, i)| u[c] * i.conj()).sum()
            })
            .collect()
    }

    /// Voltage across each load, first terminal minus second.
    pub fn load_voltages(&self, net: &Network) -> Vec<Complex64> {
        net.loads
            .iter()
            .map(|d| {
                let u = &self.voltages[net.bus_idx(&d.bus)];
                u[d.terminals[0]] - u[d.terminals[1]]
            })
            .collect()
    }

    pub fn to_json(&self, net: &Network) -> String {
        let pairs = |v: &[Complex64]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
        let map = |ids: Vec<&String>, vals: &[Vec<Complex64>]| -> BTreeMap<String, Vec<[f64; 2]>> {
            ids.into_iter().zip(vals).map(|(id, v)| (id.clone(), pairs(v))).collect()
        };
        let raw = RawPoint {
            voltages: map(net.buses.iter().map(|b| &b.id).collect(), &self.voltages),
            branch_currents: map(net.branches.iter().map(|b| &b.id).collect(), &self.branch_currents),
            load_currents: map(net.loads.iter().map(|d| &d.id).collect(), &self.load_currents),
            gen_currents: map(net.generators.iter().map(|g| &g.id).collect(), &self.gen_currents),
        };
        serde_json::to_string_pretty(&raw).expect("point serializes")
    }

    /// Decode a point keyed by element ids; missing entries are an error.
    pub fn from_json(bytes: &[u8], net: &Network) -> Result<Self> {
        let raw: RawPoint = serde_json::from_slice(bytes).map_err(Error::from_json)?;
        let take =
            |map: &BTreeMap<String, Vec<[f64; 2]>>, ids: Vec<&String>, what: &str| -> Result<Vec<Vec<Complex64>>> {
                ids.into_iter()
                    .map(|id| {
                        map.get(id)
                            .map(|v| v.iter().map(|p| Complex64::new(p[0], p[1])).collect())
                            .ok_or_else(|| Error::Schema(format!("point lacks {what} for {id:?}")))
                    })
                    .collect()
            };
        let p = IvrPoint {
            voltages: take(&raw.voltages, net.buses.iter().map(|b| &b.id).collect(), "voltages")?,
            branch_currents: take(
                &raw.branch_currents,
                net.branches.iter().map(|b| &b.id).collect(),
                "branch_currents",
            )?,
            load_currents: take(&raw.load_currents, net.loads.iter().map(|d| &d.id).collect(), "load_currents")?,
            gen_currents: take(&raw.gen_currents, net.generators.iter().map(|g| &g.id).collect(), "gen_currents")?,
        };
        p.check_dimensions(net)?;
        Ok(p)
    }
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    voltages: BTreeMap<String, Vec<[f64; 2]>>,
    branch_currents: BTreeMap<String, Vec<[f64; 2]>>,
    load_currents: BTreeMap<String, Vec<[f64; 2]>>,
    gen_currents: BTreeMap<String, Vec<[f64; 2]>>,
}

/// Matrix-valued operating point built from outer products.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPoint {
    pub w: Vec<ComplexMatrix>,
    pub l: Vec<ComplexMatrix>,
    pub sbar_from: Vec<ComplexMatrix>,
    pub sbar_to: Vec<ComplexMatrix>,
    /// `U_i I_d^H`, bus conductors by load terminals.
    pub sbar_load: Vec<ComplexMatrix>,
    pub sbar_gen: Vec<ComplexMatrix>,
    /// Per-terminal load power, the generalized diagonal of `sbar_load`.
    pub s_load: Vec<Vec<Complex64>>,
    pub s_gen: Vec<Vec<Complex64>>,
    pub dispatch: Vec<Complex64>,
}

impl LiftedPoint {
    /// `[[W_i, Sbar_lij], [Sbar_lij^H, L_l]]` for branch `l`.
    pub fn branch_block(&self, net: &Network, l: usize) -> ComplexMatrix {
        let from = net.bus_idx(&net.branches[l].from_bus);
        let w = &self.w[from];
        let s = &self.sbar_from[l];
        let n = w.nrows();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&w.0);
        m.view_mut((0, n), (n, n)).copy_from(&s.0);
        m.view_mut((n, 0), (n, n)).copy_from(&s.0.adjoint());
        m.view_mut((n, n), (n, n)).copy_from(&self.l[l].0);
        ComplexMatrix(m)
    }
}

fn outer(a: &[Complex64], b: &[Complex64]) -> ComplexMatrix {
    ComplexMatrix(DMatrix::from_fn(a.len(), b.len(), |r, c| a[r] * b[c].conj()))
}

pub fn lift_point(p: &IvrPoint, net: &Network) -> Result<LiftedPoint> {
    p.check_dimensions(net)?;
    let w = p.voltages.iter().map(|u| outer(u, u)).collect();
    let l = p.branch_currents.iter().map(|i| outer(i, i)).collect();
    let sbar_from = net
        .branches
        .iter()
        .zip(&p.branch_currents)
        .map(|(br, i)| outer(&p.voltages[net.bus_idx(&br.from_bus)], i))
        .collect();
    let sbar_to = net
        .branches
        .iter()
        .zip(&p.branch_currents)
        .map(|(br, i)| {
            let back: Vec<Complex64> = i.iter().map(|v| -v).collect();
            outer(&p.voltages[net.bus_idx(&br.to_bus)], &back)
        })
        .collect();
    let sbar_load: Vec<ComplexMatrix> =
        net.loads.iter().zip(&p.load_currents).map(|(d, i)| outer(&p.voltages[net.bus_idx(&d.bus)], i)).collect();
    let sbar_gen: Vec<ComplexMatrix> =
        net.generators.iter().zip(&p.gen_currents).map(|(g, i)| outer(&p.voltages[net.bus_idx(&g.bus)], i)).collect();
    let s_load = net
        .loads
        .iter()
        .zip(&sbar_load)
        .map(|(d, m)| d.terminals.iter().enumerate().map(|(t, &c)| m[(c, t)]).collect())
        .collect();
    let s_gen: Vec<Vec<Complex64>> = net
        .generators
        .iter()
        .zip(&sbar_gen)
        .map(|(g, m)| g.conductors.iter().enumerate().map(|(t, &c)| m[(c, t)]).collect())
        .collect();
    let dispatch = s_gen.iter().map(|s| s.iter().sum()).collect();
    Ok(LiftedPoint { w, l, sbar_from, sbar_to, sbar_load, sbar_gen, s_load, s_gen, dispatch })
}

/// Natural image of a physical point in the variable space of `inst`.
pub fn embed(inst: &ProblemInstance, net: &Network, p: &IvrPoint) -> Result<Vec<f64>> {
    let lifted = lift_point(p, net)?;
    fill(inst, Some(p), &lifted)
}

/// Image of a lifted point; only lifted kinds can be reached without physical voltages and currents.
pub fn embed_lifted(inst: &ProblemInstance, lp: &LiftedPoint) -> Result<Vec<f64>> {
    fill(inst, None, lp)
}

fn fill(inst: &ProblemInstance, p: Option<&IvrPoint>, lp: &LiftedPoint) -> Result<Vec<f64>> {
    let mut x = vec![0.0; inst.n_vars()];
    for (slot, tag) in x.iter_mut().zip(inst.registry.tags()) {
        let z = value_of(tag, p, lp).ok_or_else(|| Error::Contract(format!("point carries no value for {tag}")))?;
        *slot = match tag.part {
            Part::Re => z.re,
            Part::Im => z.im,
        };
    }
    Ok(x)
}

fn value_of(tag: &VarTag, p: Option<&IvrPoint>, lp: &LiftedPoint) -> Option<Complex64> {
    let o = tag.owner;
    let z = match (tag.symbol, tag.coord) {
        (Symbol::Voltage, Coord::Entry(k)) => p?.voltages[o][k],
        (Symbol::BranchCurrent, Coord::Entry(k)) => p?.branch_currents[o][k],
        (Symbol::LoadCurrent, Coord::Entry(k)) => p?.load_currents[o][k],
        (Symbol::GenCurrent, Coord::Entry(k)) => p?.gen_currents[o][k],
        (Symbol::BranchPowerFrom, Coord::Entry(k)) => lp.sbar_from[o][(k, k)],
        (Symbol::BranchPowerTo, Coord::Entry(k)) => lp.sbar_to[o][(k, k)],
        (Symbol::LoadPower, Coord::Entry(k)) => lp.s_load[o][k],
        (Symbol::GenPower, Coord::Entry(k)) => lp.s_gen[o][k],
        (Symbol::Dispatch, Coord::Scalar) => lp.dispatch[o],
        (Symbol::VoltageProduct, Coord::Matrix(r, c)) => lp.w[o][(r, c)],
        (Symbol::CurrentProduct, Coord::Matrix(r, c)) => lp.l[o][(r, c)],
        (Symbol::BranchMatrixFrom, Coord::Matrix(r, c)) => lp.sbar_from[o][(r, c)],
        (Symbol::BranchMatrixTo, Coord::Matrix(r, c)) => lp.sbar_to[o][(r, c)],
        (Symbol::LoadMatrix, Coord::Matrix(r, c)) => lp.sbar_load[o][(r, c)],
        (Symbol::GenMatrix, Coord::Matrix(r, c)) => lp.sbar_gen[o][(r, c)],
        _ => return None,
    };
    Some(z)
}

fn lookup(inst: &ProblemInstance, x: &[f64], symbol: Symbol, owner: usize, coord: Coord) -> Option<Complex64> {
    let re = inst.registry.get(&VarTag { symbol, owner, coord, part: Part::Re })?;
    let im = inst.registry.get(&VarTag { symbol, owner, coord, part: Part::Im });
    Some(Complex64::new(x[re], im.map_or(0.0, |i| x[i])))
}

/// Generator dispatch values read from a solution vector.
pub fn dispatch_of(inst: &ProblemInstance, net: &Network, x: &[f64]) -> Vec<Complex64> {
    (0..net.generators.len()).map(|g| lookup(inst, x, Symbol::Dispatch, g, Coord::Scalar).unwrap_or_default()).collect()
}

/// Complex bus voltages for the nonlinear kinds (slack values taken from the network).
pub fn voltages_of(inst: &ProblemInstance, net: &Network, x: &[f64]) -> Option<Vec<Vec<Complex64>>> {
    if !inst.kind.is_nonlinear() {
        return None;
    }
    net.buses
        .iter()
        .enumerate()
        .map(|(b, bus)| match &bus.fixed_voltage {
            Some(v) => Some(v.clone()),
            None => (0..bus.n_conductors).map(|k| lookup(inst, x, Symbol::Voltage, b, Coord::Entry(k))).collect(),
        })
        .collect()
}

/// Voltage magnitude per bus and conductor; for lifted kinds `sqrt(diag W)`.
pub fn voltage_magnitudes(inst: &ProblemInstance, net: &Network, x: &[f64]) -> Vec<Vec<f64>> {
    if let Some(u) = voltages_of(inst, net, x) {
        return u.iter().map(|v| v.iter().map(|z| z.norm()).collect()).collect();
    }
    net.buses
        .iter()
        .enumerate()
        .map(|(b, bus)| {
            (0..bus.n_conductors)
                .map(|k| {
                    let w = lookup(inst, x, Symbol::VoltageProduct, b, Coord::Matrix(k, k)).unwrap_or_default();
                    w.re.max(0.0).sqrt()
                })
                .collect()
        })
        .collect()
}

/// Magnitude of the voltage across each load; lifted kinds use
/// `sqrt(W_aa + W_nn - 2 Re W_an)`.
pub fn load_voltage_magnitudes(inst: &ProblemInstance, net: &Network, x: &[f64]) -> Vec<f64> {
    if let Some(u) = voltages_of(inst, net, x) {
        return net
            .loads
            .iter()
            .map(|d| {
                let v = &u[net.bus_idx(&d.bus)];
                (v[d.terminals[0]] - v[d.terminals[1]]).norm()
            })
            .collect();
    }
    net.loads
        .iter()
        .map(|d| {
            let b = net.bus_idx(&d.bus);
            let [a, n] = d.terminals;
            let get = |r: usize, c: usize| {
                let (r, c) = if r <= c { (r, c) } else { (c, r) };
                lookup(inst, x, Symbol::VoltageProduct, b, Coord::Matrix(r, c)).unwrap_or_default()
            };
            (get(a, a).re + get(n, n).re - 2.0 * get(a, n).re).max(0.0).sqrt()
        })
        .collect()
}

/// Physical point recovered from a solution of a nonlinear kind. Quantities that are not
/// variables of the kind are reconstructed: branch currents from Ohm's law, and device
/// currents (SVR-1) as `conj(S / U)` per terminal, zero where the terminal voltage vanishes.
pub fn ivr_point_of(inst: &ProblemInstance, net: &Network, x: &[f64]) -> Option<IvrPoint> {
    let voltages = voltages_of(inst, net, x)?;
    let read = |symbol: Symbol, owner: usize, len: usize| -> Option<Vec<Complex64>> {
        (0..len).map(|k| lookup(inst, x, symbol, owner, Coord::Entry(k))).collect()
    };
    let branch_currents = net
        .branches
        .iter()
        .enumerate()
        .map(|(l, br)| {
            read(Symbol::BranchCurrent, l, br.n_conductors()).or_else(|| {
                let y = br.admittance().ok()?;
                let (i, j) = (net.bus_idx(&br.from_bus), net.bus_idx(&br.to_bus));
                let n = br.n_conductors();
                Some((0..n).map(|r| (0..n).map(|c| y[(r, c)] * (voltages[i][c] - voltages[j][c])).sum()).collect())
            })
        })
        .collect::<Option<Vec<_>>>()?;
    let from_power = |power: Symbol, owner: usize, bus: usize, conductors: &[usize]| -> Option<Vec<Complex64>> {
        conductors
            .iter()
            .enumerate()
            .map(|(t, &c)| {
                let s = lookup(inst, x, power, owner, Coord::Entry(t))?;
                let u = voltages[bus][c];
                Some(if u.norm() > 1e-9 { (s / u).conj() } else { Complex64::default() })
            })
            .collect()
    };
    let load_currents = net
        .loads
        .iter()
        .enumerate()
        .map(|(d, load)| {
            read(Symbol::LoadCurrent, d, 2)
                .or_else(|| from_power(Symbol::LoadPower, d, net.bus_idx(&load.bus), &load.terminals))
        })
        .collect::<Option<Vec<_>>>()?;
    let gen_currents = net
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            read(Symbol::GenCurrent, g, gen.conductors.len())
                .or_else(|| from_power(Symbol::GenPower, g, net.bus_idx(&gen.bus), &gen.conductors))
        })
        .collect::<Option<Vec<_>>>()?;
    Some(IvrPoint { voltages, branch_currents, load_currents, gen_currents })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::two_bus_two_wire;

    #[test]
    fn simple_outer_products() {
        let net = two_bus_two_wire();
        let mut p = IvrPoint::flat(&net);
        p.voltages[1] = vec![Complex64::new(1.0, 0.0), Complex64::default()];
        let lp = lift_point(&p, &net).unwrap();
        let w = &lp.w[1];
        assert_eq!(w[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(w[(0, 1)], Complex64::default());
        assert_eq!(w[(1, 1)], Complex64::default());
        assert!(lp.l[0].iter().all(|v| v.norm() == 0.0));
        assert!(lp.sbar_from[0].iter().all(|v| v.norm() == 0.0));
        let m = lp.branch_block(&net, 0);
        let eig = m.0.clone().symmetric_eigen().eigenvalues;
        let positive = eig.iter().filter(|&&e| e > 1e-12).count();
        assert_eq!(positive, 1);
        assert!(eig.iter().all(|&e| e > -1e-12));
    }

    #[test]
    fn diag_w_is_squared_magnitude() {
        let net = two_bus_two_wire();
        let mut p = IvrPoint::flat(&net);
        p.voltages[1] = vec![Complex64::new(0.3, -0.8), Complex64::new(-0.01, 0.02)];
        let lp = lift_point(&p, &net).unwrap();
        for k in 0..2 {
            assert_eq!(lp.w[1][(k, k)].re, p.voltages[1][k].norm_sqr());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let net = two_bus_two_wire();
        let mut p = IvrPoint::flat(&net);
        p.voltages[1].pop();
        assert!(matches!(lift_point(&p, &net), Err(Error::Contract(_))));
    }

    #[test]
    fn json_roundtrip() {
        let net = two_bus_two_wire();
        let mut p = IvrPoint::flat(&net);
        p.load_currents[0] = vec![Complex64::new(1.1, -0.6), Complex64::new(-1.1, 0.6)];
        let back = IvrPoint::from_json(p.to_json(&net).as_bytes(), &net).unwrap();
        assert_eq!(back, p);
    }
}
