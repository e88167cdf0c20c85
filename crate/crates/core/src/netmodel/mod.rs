//! Network data model: buses with explicit conductors, coupled-impedance branches,
//! two-terminal constant-power loads and generators.

mod json;
mod kron;
mod validate;

pub use json::{parse_network, to_json};
pub use kron::kron_reduce;
pub use validate::{validate_network, Finding, ValidationReport};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: String,
    pub n_conductors: usize,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    /// Fixed complex voltage; present only on the voltage-source (slack) bus.
    pub fixed_voltage: Option<Vec<Complex64>>,
}

impl Bus {
    pub fn is_slack(&self) -> bool {
        self.fixed_voltage.is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub r: DMatrix<f64>,
    pub x: DMatrix<f64>,
}

impl Branch {
    pub fn n_conductors(&self) -> usize {
        self.r.nrows()
    }

    /// Series impedance `R + jX`.
    pub fn impedance(&self) -> ComplexMatrix {
        ComplexMatrix::from_parts(&self.r, &self.x)
    }

    pub fn admittance(&self) -> Result<ComplexMatrix> {
        self.impedance().inverse().map_err(|_| Error::Singular(format!("impedance of branch {} is singular", self.id)))
    }
}

/// Constant-power load between two conductors; current enters the first
/// terminal and returns through the second.
#[derive(Clone, Debug, PartialEq)]
pub struct Load {
    pub id: String,
    pub bus: String,
    pub terminals: [usize; 2],
    pub s_ref: Complex64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub conductors: Vec<usize>,
    pub in_objective: bool,
}

/// Informational per-unit bases.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BaseQuantities {
    pub power_va: Option<f64>,
    pub voltage_v: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub loads: Vec<Load>,
    pub generators: Vec<Generator>,
    pub base: Option<BaseQuantities>,
}

impl Network {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub(crate) fn bus_idx(&self, id: &str) -> usize {
        self.bus_index(id).expect("bus references are checked at parse time")
    }

    pub fn bus(&self, id: &str) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn slack_buses(&self) -> impl Iterator<Item = (usize, &Bus)> {
        self.buses.iter().enumerate().filter(|(_, b)| b.is_slack())
    }

    /// Rebuild with every branch impedance scaled by `factor`.
    pub fn with_scaled_impedance(&self, factor: f64) -> Network {
        let mut net = self.clone();
        for br in &mut net.branches {
            br.r *= factor;
            br.x *= factor;
        }
        net
    }

    /// Rebuild with every load set point replaced by `s_ref`.
    pub fn with_load_set_point(&self, s_ref: Complex64) -> Network {
        let mut net = self.clone();
        for load in &mut net.loads {
            load.s_ref = s_ref;
        }
        net
    }

    /// Rebuild with a new upper voltage bound at one bus; lower bounds above
    /// the new upper bound are relaxed to zero.
    pub fn with_voltage_max(&self, bus: &str, u_max: &[f64]) -> Network {
        let mut net = self.clone();
        if let Some(b) = net.buses.iter_mut().find(|b| b.id == bus) {
            b.u_max = u_max.to_vec();
            for (lo, hi) in b.u_min.iter_mut().zip(u_max) {
                if *lo > *hi {
                    *lo = 0.0;
                }
            }
        }
        net
    }
}

/// A network that passed [`validate_network`].
#[derive(Clone, Debug)]
pub struct ValidNetwork(Network);

impl ValidNetwork {
    pub fn new(net: Network) -> Result<Self> {
        let report = validate_network(&net);
        if report.is_empty() {
            Ok(ValidNetwork(net))
        } else {
            Err(Error::Contract(format!("network is invalid: {report}")))
        }
    }
}

impl std::ops::Deref for ValidNetwork {
    type Target = Network;
    fn deref(&self) -> &Network {
        &self.0
    }
}

/// The bundled two-bus, two-wire test case.
pub const TWO_BUS_TWO_WIRE_JSON: &str = include_str!("../../../../cases/two_bus_two_wire.json");

pub fn two_bus_two_wire() -> Network {
    parse_network(TWO_BUS_TWO_WIRE_JSON.as_bytes()).expect("bundled case parses")
}
