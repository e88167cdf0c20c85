use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::{build_formulation, FormulationKind};
use crate::netmodel::Network;
use crate::solvers::{solve, SolveStatus, SolverOptions};

pub const MIN_SAMPLES: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub theta: f64,
    pub status: SolveStatus,
    pub p: f64,
    pub q: f64,
    pub point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: FormulationKind,
    pub samples: usize,
    pub records: Vec<SweepRecord>,
}

impl SweepReport {
    pub fn optimal(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(|r| r.status == SolveStatus::Optimal)
    }

    /// `(P, Q)` of every optimal sample.
    pub fn pq(&self) -> Vec<(f64, f64)> {
        self.optimal().map(|r| (r.p, r.q)).collect()
    }

    pub fn min_p(&self) -> Option<&SweepRecord> {
        self.optimal().min_by(|a, b| a.p.total_cmp(&b.p))
    }
}

/// Solve `min cos(theta) P + sin(theta) Q` at `samples` evenly spaced directions.
/// Samples run in parallel; records are ordered by `theta`.
pub fn sweep_objective(
    net: &Network,
    kind: FormulationKind,
    samples: usize,
    opts: &SolverOptions,
) -> Result<SweepReport> {
    if samples < MIN_SAMPLES {
        return Err(Error::Contract(format!("at least {MIN_SAMPLES} samples are required, got {samples}")));
    }
    let inst = build_formulation(net, kind)?;
    let records = (0..samples)
        .into_par_iter()
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / samples as f64;
            let r = solve(&inst, net, theta, opts)?;
            let total = r.dispatch.iter().copied().sum::<num_complex::Complex64>();
            Ok(SweepRecord { theta, status: r.status, p: total.re, q: total.im, point: r.point })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { kind, samples, records })
}
