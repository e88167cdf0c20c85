//! Enumeration of the relaxed circuits on a single-branch, single-load,
//! two-conductor network: a current source at a load-bus conductor, or the
//! load-bus neutral grounded.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::IvrPoint;
use crate::netmodel::{validate_network, Network};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackSourceSpec {
    pub bus: String,
    pub conductor: usize,
    pub current: Complex64,
}

/// Injected currents at one bus conductor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackGrid {
    pub bus: String,
    pub conductor: usize,
    pub values: Vec<Complex64>,
}

impl SlackGrid {
    /// `n x n` grid over `[-half_width, half_width]^2`, real part outer.
    pub fn square(bus: &str, conductor: usize, half_width: f64, n: usize) -> Self {
        let axis: Vec<f64> = if n == 1 {
            vec![0.0]
        } else {
            (0..n).map(|k| -half_width + 2.0 * half_width * k as f64 / (n - 1) as f64).collect()
        };
        let values = axis.iter().flat_map(|&re| axis.iter().map(move |&im| Complex64::new(re, im))).collect();
        SlackGrid { bus: bus.to_string(), conductor, values }
    }

    pub fn specs(&self) -> impl Iterator<Item = SlackSourceSpec> + '_ {
        self.values.iter().map(|&current| SlackSourceSpec { bus: self.bus.clone(), conductor: self.conductor, current })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitMode {
    /// Load plus a current source, with total device power fixed.
    Svr1Circuit,
    /// Load-bus neutral grounded.
    Svr2Circuit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CloudPoint {
    pub slack: Complex64,
    pub p: f64,
    pub q: f64,
    pub un_mag: f64,
    pub point: IvrPoint,
}

struct Layout {
    to: usize,
    a: usize,
    n: usize,
    z: DMatrix<Complex64>,
    source: Vec<Complex64>,
    s_ref: Complex64,
}

fn layout(net: &Network) -> Result<Layout> {
    let report = validate_network(net);
    if !report.is_empty() {
        return Err(Error::Contract(format!("network is invalid: {report}")));
    }
    if net.branches.len() != 1 || net.loads.len() != 1 || net.generators.len() != 1 {
        return Err(Error::Unsupported("circuit oracle needs one branch, one load and one generator".into()));
    }
    let br = &net.branches[0];
    let load = &net.loads[0];
    let from = net.bus_idx(&br.from_bus);
    let to = net.bus_idx(&br.to_bus);
    let source = net.buses[from]
        .fixed_voltage
        .clone()
        .ok_or_else(|| Error::Unsupported("branch must start at the voltage source".into()))?;
    if net.bus_idx(&load.bus) != to || net.bus_idx(&net.generators[0].bus) != from || br.n_conductors() != 2 {
        return Err(Error::Unsupported("circuit oracle needs a two-conductor source-to-load feeder".into()));
    }
    Ok(Layout { to, a: load.terminals[0], n: load.terminals[1], z: br.impedance().0, source, s_ref: load.s_ref })
}

/// Newton on `f: R^m -> R^m` with a central-difference Jacobian.
fn newton(f: impl Fn(&[f64]) -> Option<Vec<f64>>, x0: Vec<f64>) -> Option<Vec<f64>> {
    const H: f64 = 1e-7;
    let m = x0.len();
    let mut x = x0;
    for _ in 0..50 {
        let r = f(&x)?;
        if r.iter().fold(0.0f64, |a, v| a.max(v.abs())) < 1e-13 {
            return Some(x);
        }
        let mut jac = DMatrix::zeros(m, m);
        for c in 0..m {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += H;
            xm[c] -= H;
            let (fp, fm) = (f(&xp)?, f(&xm)?);
            for r in 0..m {
                jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * H);
            }
        }
        let step = jac.lu().solve(&DVector::from_iterator(m, r.iter().map(|v| -v)))?;
        x.iter_mut().zip(step.iter()).for_each(|(xi, d)| *xi += d);
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    None
}

fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

fn to_real(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Branch current of the load-plus-source device at load-bus voltage `u`.
fn svr1_current(lay: &Layout, u: &[Complex64], conductor: usize, slack: Complex64) -> Option<Vec<Complex64>> {
    let drop = u[lay.a] - u[lay.n];
    if drop.norm() < 1e-9 {
        return None;
    }
    let ia = ((lay.s_ref - u[conductor] * slack.conj()) / drop).conj();
    let mut i = vec![Complex64::default(); 2];
    i[lay.a] += ia;
    i[lay.n] -= ia;
    i[conductor] += slack;
    Some(i)
}

fn svr1_point(net: &Network, lay: &Layout, spec: &SlackSourceSpec) -> Option<CloudPoint> {
    let residual = |x: &[f64]| {
        let u = to_complex(x);
        let i = svr1_current(lay, &u, spec.conductor, spec.current)?;
        let r: Vec<Complex64> =
            (0..2).map(|k| u[k] - lay.source[k] + lay.z[(k, 0)] * i[0] + lay.z[(k, 1)] * i[1]).collect();
        Some(to_real(&r))
    };
    let u = to_complex(&newton(residual, to_real(&lay.source))?);
    let i = svr1_current(lay, &u, spec.conductor, spec.current)?;
    let s: Complex64 = (0..2).map(|k| lay.source[k] * i[k].conj()).sum();
    let mut point = IvrPoint::flat(net);
    point.voltages[lay.to] = u.clone();
    point.branch_currents[0] = i.clone();
    point.load_currents[0] = vec![i[lay.a], i[lay.n]];
    point.gen_currents[0] = net.generators[0].conductors.iter().map(|&c| i[c]).collect();
    Some(CloudPoint { slack: spec.current, p: s.re, q: s.im, un_mag: u[lay.n].norm(), point })
}

/// The circuit with the load-bus neutral tied to ground. The generator current
/// mirrors the phase current, which the power-voltage formulations permit
/// when the source neutral is at zero potential.
pub fn kron_grounded_point(net: &Network) -> Result<CloudPoint> {
    let lay = layout(net)?;
    if lay.source[lay.n].norm() != 0.0 {
        return Err(Error::Unsupported("source neutral must be at zero potential".into()));
    }
    let (a, n, z) = (lay.a, lay.n, &lay.z);
    // neutral row with U_j,n = 0 gives I_n in terms of I_a
    let currents = |ua: Complex64| -> Option<(Complex64, Complex64)> {
        if ua.norm() < 1e-9 {
            return None;
        }
        let ia = (lay.s_ref / ua).conj();
        let in_ = (lay.source[n] - z[(n, a)] * ia) / z[(n, n)];
        Some((ia, in_))
    };
    let residual = |x: &[f64]| {
        let ua = Complex64::new(x[0], x[1]);
        let (ia, in_) = currents(ua)?;
        let r = ua - lay.source[a] + z[(a, a)] * ia + z[(a, n)] * in_;
        Some(vec![r.re, r.im])
    };
    let x = newton(residual, vec![lay.source[a].re, lay.source[a].im])
        .ok_or_else(|| Error::NoSolution("grounded-neutral circuit did not converge".into()))?;
    let ua = Complex64::new(x[0], x[1]);
    let (ia, in_) = currents(ua).expect("converged away from zero");
    let mut point = IvrPoint::flat(net);
    let mut u = vec![Complex64::default(); 2];
    u[a] = ua;
    point.voltages[lay.to] = u;
    let mut branch = vec![Complex64::default(); 2];
    branch[a] = ia;
    branch[n] = in_;
    point.branch_currents[0] = branch;
    point.load_currents[0] = vec![ia, -ia];
    let mut gen = [Complex64::default(); 2];
    gen[a] = ia;
    gen[n] = -ia;
    point.gen_currents[0] = net.generators[0].conductors.iter().map(|&c| gen[c]).collect();
    let s: Complex64 = (0..2).map(|k| lay.source[k] * gen[k].conj()).sum();
    Ok(CloudPoint { slack: Complex64::default(), p: s.re, q: s.im, un_mag: 0.0, point })
}

/// Solve the relaxed circuit for every grid value (in grid order); points whose
/// Newton iteration fails are skipped.
pub fn brute_force_set(net: &Network, grid: &SlackGrid, mode: CircuitMode) -> Result<Vec<CloudPoint>> {
    match mode {
        CircuitMode::Svr2Circuit => Ok(vec![kron_grounded_point(net)?]),
        CircuitMode::Svr1Circuit => {
            let lay = layout(net)?;
            if net.bus_idx(&grid.bus) != lay.to || grid.conductor >= 2 {
                return Err(Error::Contract("slack source must sit on a load-bus conductor".into()));
            }
            let specs: Vec<SlackSourceSpec> = grid.specs().collect();
            Ok(specs.par_iter().map(|s| svr1_point(net, &lay, s)).collect::<Vec<_>>().into_iter().flatten().collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::two_bus_two_wire;

    #[test]
    fn grounded_neutral_circuit() {
        let p = kron_grounded_point(&two_bus_two_wire()).unwrap();
        assert!((p.p - 1.076921).abs() < 1e-5 && (p.q - 0.549558).abs() < 1e-5);
        assert!((p.point.voltages[1][0].norm() - 0.924730).abs() < 1e-5);
    }

    #[test]
    fn zero_injection_is_the_exact_circuit() {
        let net = two_bus_two_wire();
        let grid = SlackGrid { bus: "j".into(), conductor: 1, values: vec![Complex64::default()] };
        let cloud = brute_force_set(&net, &grid, CircuitMode::Svr1Circuit).unwrap();
        assert_eq!(cloud.len(), 1);
        assert!((cloud[0].p - 1.147226).abs() < 1e-6 && (cloud[0].q - 0.565434).abs() < 1e-6);
        assert!((cloud[0].un_mag - 0.062983).abs() < 1e-5);
    }

    #[test]
    fn grid_shape() {
        let g = SlackGrid::square("j", 1, 0.2, 41);
        assert_eq!(g.values.len(), 41 * 41);
        assert_eq!(g.values[0], Complex64::new(-0.2, -0.2));
        assert!((g.values[20 * 41 + 20]).norm() < 1e-15);
    }

    #[test]
    fn larger_networks_are_unsupported() {
        let mut net = two_bus_two_wire();
        net.loads.push(net.loads[0].clone());
        net.loads[1].id = "d2".into();
        assert!(matches!(kron_grounded_point(&net), Err(Error::Unsupported(_))));
    }
}
