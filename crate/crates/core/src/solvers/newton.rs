use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::formulations::IvrPoint;
use crate::netmodel::{validate_network, Network};

const SINGULAR_DROP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-12, max_iter: 50 }
    }
}

/// Circuit solution with constant-power loads, unknowns being the voltages of all non-source buses.
pub fn solve_power_flow_newton(net: &Network) -> Result<IvrPoint> {
    solve_power_flow_newton_with(net, NewtonOptions::default(), None)
}

/// As [`solve_power_flow_newton`], with explicit options and an optional starting point.
pub fn solve_power_flow_newton_with(net: &Network, opts: NewtonOptions, start: Option<&IvrPoint>) -> Result<IvrPoint> {
    let report = validate_network(net);
    if !report.is_empty() {
        return Err(Error::Contract(format!("network is invalid: {report}")));
    }
    if net.slack_buses().next().is_none() {
        return Err(Error::Model("no voltage source".into()));
    }
    for g in &net.generators {
        if !net.bus(&g.bus).is_some_and(|b| b.is_slack()) {
            return Err(Error::Unsupported(format!("generator {} is not at a voltage source", g.id)));
        }
    }
    let circuit = Circuit::new(net)?;
    let mut u = match start {
        Some(p) => {
            p.check_dimensions(net)?;
            circuit.unknowns.iter().map(|&(b, k)| p.voltages[b][k]).collect()
        }
        None => {
            let flat = IvrPoint::flat(net);
            circuit.unknowns.iter().map(|&(b, k)| flat.voltages[b][k]).collect::<Vec<_>>()
        }
    };
    let n = u.len();
    for _ in 0..opts.max_iter {
        let (f, jac) = circuit.residual(net, &u)?;
        let norm = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !norm.is_finite() {
            break;
        }
        if norm < opts.tol {
            return Ok(circuit.point(net, &u));
        }
        let rhs = DVector::from_fn(2 * n, |i, _| if i < n { -f[i].re } else { -f[i - n].im });
        let Some(step) = jac.lu().solve(&rhs) else { break };
        for (k, v) in u.iter_mut().enumerate() {
            *v += Complex64::new(step[k], step[n + k]);
        }
    }
    Err(Error::NoSolution(format!("Newton iteration did not converge in {} steps", opts.max_iter)))
}

struct Circuit {
    /// (bus, conductor) per unknown voltage.
    unknowns: Vec<(usize, usize)>,
    /// Position of each (bus, conductor) in `unknowns`, if not fixed.
    slot: Vec<Vec<Option<usize>>>,
    /// Nodal admittance over all (bus, conductor) nodes, flattened by `node`.
    ybus: DMatrix<Complex64>,
    node: Vec<Vec<usize>>,
}

impl Circuit {
    fn new(net: &Network) -> Result<Self> {
        let mut node = Vec::new();
        let mut count = 0;
        for b in &net.buses {
            node.push((count..count + b.n_conductors).collect::<Vec<_>>());
            count += b.n_conductors;
        }
        let mut ybus = DMatrix::zeros(count, count);
        for br in &net.branches {
            let y = br.admittance()?;
            let (i, j) = (net.bus_idx(&br.from_bus), net.bus_idx(&br.to_bus));
            for r in 0..br.n_conductors() {
                for c in 0..br.n_conductors() {
                    ybus[(node[i][r], node[i][c])] += y[(r, c)];
                    ybus[(node[j][r], node[j][c])] += y[(r, c)];
                    ybus[(node[i][r], node[j][c])] -= y[(r, c)];
                    ybus[(node[j][r], node[i][c])] -= y[(r, c)];
                }
            }
        }
        let mut unknowns = Vec::new();
        let mut slot = Vec::new();
        for (b, bus) in net.buses.iter().enumerate() {
            slot.push(
                (0..bus.n_conductors)
                    .map(|k| {
                        (!bus.is_slack()).then(|| {
                            unknowns.push((b, k));
                            unknowns.len() - 1
                        })
                    })
                    .collect(),
            );
        }
        Ok(Circuit { unknowns, slot, ybus, node })
    }

    fn voltages(&self, net: &Network, u: &[Complex64]) -> Vec<Vec<Complex64>> {
        net.buses
            .iter()
            .enumerate()
            .map(|(b, bus)| match &bus.fixed_voltage {
                Some(v) => v.clone(),
                None => (0..bus.n_conductors).map(|k| u[self.slot[b][k].unwrap()]).collect(),
            })
            .collect()
    }

    fn load_current(net: &Network, v: &[Vec<Complex64>], d: usize) -> Result<(Complex64, Complex64)> {
        let load = &net.loads[d];
        let b = net.bus_idx(&load.bus);
        let drop = v[b][load.terminals[0]] - v[b][load.terminals[1]];
        if drop.norm() < SINGULAR_DROP {
            return Err(Error::SingularLoad(format!("voltage across load {} vanished", load.id)));
        }
        Ok((drop, (load.s_ref / drop).conj()))
    }

    /// Current mismatch at every unknown node and its real Jacobian `[d/dRe, d/dIm]`.
    fn residual(&self, net: &Network, u: &[Complex64]) -> Result<(Vec<Complex64>, DMatrix<f64>)> {
        let n = u.len();
        let v = self.voltages(net, u);
        let flat: Vec<Complex64> = v.iter().flatten().copied().collect();
        let mut f = vec![Complex64::default(); n];
        // d f / d Re(u_k) and d f / d Im(u_k)
        let mut dre = DMatrix::<Complex64>::zeros(n, n);
        let mut dim = DMatrix::<Complex64>::zeros(n, n);
        for (row, &(b, k)) in self.unknowns.iter().enumerate() {
            let r = self.node[b][k];
            f[row] = (0..flat.len()).map(|c| self.ybus[(r, c)] * flat[c]).sum();
            for (col, &(bc, kc)) in self.unknowns.iter().enumerate() {
                let y = self.ybus[(r, self.node[bc][kc])];
                dre[(row, col)] += y;
                dim[(row, col)] += y * Complex64::i();
            }
        }
        for (d, load) in net.loads.iter().enumerate() {
            let (drop, ia) = Self::load_current(net, &v, d)?;
            let b = net.bus_idx(&load.bus);
            // I_a = conj(S) / conj(drop); dI_a/dconj(drop) = -conj(S)/conj(drop)^2
            let g = -load.s_ref.conj() / (drop.conj() * drop.conj());
            for (t, sign) in [(0usize, 1.0), (1, -1.0)] {
                let Some(row) = self.slot[b][load.terminals[t]] else { continue };
                f[row] += ia * sign;
                for (t2, sign2) in [(0usize, 1.0), (1, -1.0)] {
                    let Some(col) = self.slot[b][load.terminals[t2]] else { continue };
                    // d conj(drop) = sign2 (dx - i dy)
                    dre[(row, col)] += g * sign * sign2;
                    dim[(row, col)] += g * sign * sign2 * -Complex64::i();
                }
            }
        }
        let jac = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let z = if c < n { dre[(r % n, c)] } else { dim[(r % n, c - n)] };
            if r < n {
                z.re
            } else {
                z.im
            }
        });
        Ok((f, jac))
    }

    fn point(&self, net: &Network, u: &[Complex64]) -> IvrPoint {
        let v = self.voltages(net, u);
        let branch_currents: Vec<Vec<Complex64>> = net
            .branches
            .iter()
            .map(|br| {
                let y = br.admittance().expect("validated");
                let (i, j) = (net.bus_idx(&br.from_bus), net.bus_idx(&br.to_bus));
                let n = br.n_conductors();
                (0..n).map(|r| (0..n).map(|c| y[(r, c)] * (v[i][c] - v[j][c])).sum()).collect()
            })
            .collect();
        let load_currents: Vec<Vec<Complex64>> = (0..net.loads.len())
            .map(|d| {
                let ia = Self::load_current(net, &v, d).map(|(_, i)| i).unwrap_or_default();
                vec![ia, -ia]
            })
            .collect();
        // net current leaving each node through branches and loads
        let mut outflow: Vec<Vec<Complex64>> =
            net.buses.iter().map(|b| vec![Complex64::default(); b.n_conductors]).collect();
        for (l, br) in net.branches.iter().enumerate() {
            let (i, j) = (net.bus_idx(&br.from_bus), net.bus_idx(&br.to_bus));
            for (k, &c) in branch_currents[l].iter().enumerate() {
                outflow[i][k] += c;
                outflow[j][k] -= c;
            }
        }
        for (d, load) in net.loads.iter().enumerate() {
            let b = net.bus_idx(&load.bus);
            for (t, &c) in load.terminals.iter().enumerate() {
                outflow[b][c] += load_currents[d][t];
            }
        }
        let mut claimed: Vec<Vec<bool>> = net.buses.iter().map(|b| vec![false; b.n_conductors]).collect();
        let gen_currents =
            net.generators
                .iter()
                .map(|g| {
                    let b = net.bus_idx(&g.bus);
                    g.conductors
                        .iter()
                        .map(|&c| {
                            if std::mem::replace(&mut claimed[b][c], true) {
                                Complex64::default()
                            } else {
                                outflow[b][c]
                            }
                        })
                        .collect()
                })
                .collect();
        IvrPoint { voltages: v, branch_currents, load_currents, gen_currents }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::two_bus_two_wire;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_bus_high_voltage_solution() {
        let net = two_bus_two_wire();
        let p = solve_power_flow_newton(&net).unwrap();
        let u = &p.voltages[1];
        assert!((u[0] - c(0.937066, 0.0025)).norm() < 1e-5);
        assert!((u[1] - c(0.062934, -0.0025)).norm() < 1e-5);
        assert!(((u[0] - u[1]).norm() - 0.874146).abs() < 1e-5);
        assert!((p.dispatch(&net)[0] - c(1.147226, 0.565434)).norm() < 1e-5);
        // load draws exactly its set point
        let s = (u[0] - u[1]) * p.load_currents[0][0].conj();
        assert!((s - c(1.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn no_load_gives_source_voltage() {
        let net = two_bus_two_wire().with_load_set_point(c(0.0, 0.0));
        let p = solve_power_flow_newton(&net).unwrap();
        assert_eq!(p.voltages[1], p.voltages[0]);
        assert!(p.branch_currents.iter().flatten().all(|z| z.norm() == 0.0));
        assert_eq!(p.dispatch(&net)[0], c(0.0, 0.0));
    }

    #[test]
    fn heavy_load_has_no_solution() {
        let net = two_bus_two_wire().with_load_set_point(c(100.0, 50.0));
        assert!(matches!(solve_power_flow_newton(&net), Err(Error::NoSolution(_) | Error::SingularLoad(_))));
    }

    #[test]
    fn collapsed_load_voltage_is_singular() {
        let net = two_bus_two_wire();
        let mut start = IvrPoint::flat(&net);
        start.voltages[1] = vec![c(0.3, 0.0), c(0.3, 0.0)];
        let r = solve_power_flow_newton_with(&net, NewtonOptions::default(), Some(&start));
        assert!(matches!(r, Err(Error::SingularLoad(_))));
    }
}
