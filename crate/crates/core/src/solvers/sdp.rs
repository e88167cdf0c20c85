//! Homogeneous self-dual interior-point method for
//! `min c'x  s.t.  Gx + s = h, Ax = b, s in R+^l x S+^k1 x ...`
//! with Nesterov-Todd scaling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{Duals, SolveResult, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::formulations::{dispatch_of, ProblemInstance, Relation};
use crate::linalg::{independent_rows, smat, svec, svec_index, svec_len};
use crate::netmodel::Network;

const STEP_FRACTION: f64 = 0.99;
const REFINEMENT_STEPS: usize = 3;

/// Solve a lifted kind. The problem is convex, so a single run from the
/// standard starting point suffices.
pub fn solve_sdp(inst: &ProblemInstance, net: &Network, theta: f64, opts: &SolverOptions) -> Result<SolveResult> {
    if !inst.kind.is_conic() {
        return Err(Error::Contract(format!("{} is not a conic formulation", inst.kind)));
    }
    if !inst.quadratic.is_empty() {
        return Err(Error::Contract("conic solver requires linear constraints".into()));
    }
    opts.validate()?;
    let data = ConicData::new(inst, theta);
    let out = hsde(&data, opts);

    let x = out.x.as_slice().to_vec();
    let residuals = inst.residuals(&x)?;
    let status = match out.status {
        SolveStatus::Optimal if !residuals.feasible(opts.feas_tol) => SolveStatus::NumericalFailure,
        s => s,
    };
    let objective = inst.objective(theta).eval(&x);
    let duals = data.duals(&out.y, &out.z);
    let certificate =
        (status == SolveStatus::InfeasibleDetected).then(|| out.y.iter().chain(out.z.iter()).copied().collect());
    Ok(SolveResult {
        status,
        dispatch: dispatch_of(inst, net, &x),
        point: x,
        objective,
        iterations: out.iterations,
        residuals,
        duals,
        local_solutions: Vec::new(),
        starts: Vec::new(),
        certificate,
    })
}

/// Product of a nonnegative orthant and PSD cones, vectors laid out as
/// `[nonneg; svec(block 1); svec(block 2); ...]`.
#[derive(Clone, Debug)]
pub(crate) struct Cone {
    pub nonneg: usize,
    pub sides: Vec<usize>,
    offsets: Vec<usize>,
    pub dim: usize,
}

impl Cone {
    pub fn new(nonneg: usize, sides: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sides.len());
        let mut at = nonneg;
        for &k in &sides {
            offsets.push(at);
            at += svec_len(k);
        }
        Cone { nonneg, sides, offsets, dim: at }
    }

    /// Barrier degree.
    fn degree(&self) -> usize {
        self.nonneg + self.sides.iter().sum::<usize>()
    }

    fn block<'v>(&self, v: &'v DVector<f64>, b: usize) -> &'v [f64] {
        &v.as_slice()[self.offsets[b]..self.offsets[b] + svec_len(self.sides[b])]
    }

    fn set_block(&self, v: &mut DVector<f64>, b: usize, m: &DMatrix<f64>) {
        let off = self.offsets[b];
        for (i, x) in svec(m).into_iter().enumerate() {
            v[off + i] = x;
        }
    }

    fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim);
        e.rows_mut(0, self.nonneg).fill(1.0);
        for (b, &k) in self.sides.iter().enumerate() {
            self.set_block(&mut e, b, &DMatrix::identity(k, k));
        }
        e
    }

    /// Symmetrized product `(XY + YX) / 2` blockwise.
    fn circ(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for i in 0..self.nonneg {
            out[i] = a[i] * b[i];
        }
        for (blk, &k) in self.sides.iter().enumerate() {
            let x = smat(self.block(a, blk), k);
            let y = smat(self.block(b, blk), k);
            self.set_block(&mut out, blk, &((&x * &y + &y * &x) * 0.5));
        }
        out
    }
}

struct BlockScaling {
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    lambda: DVector<f64>,
}

/// Nesterov-Todd scaling `W` with `W z = W^{-T} s = lambda`.
struct Scaling {
    w: DVector<f64>,
    lambda_nonneg: DVector<f64>,
    blocks: Vec<BlockScaling>,
}

impl Scaling {
    fn new(cone: &Cone, s: &DVector<f64>, z: &DVector<f64>) -> Option<Self> {
        let l = cone.nonneg;
        let w = DVector::from_fn(l, |i, _| (s[i] / z[i]).sqrt());
        let lambda_nonneg = DVector::from_fn(l, |i, _| (s[i] * z[i]).sqrt());
        let mut blocks = Vec::new();
        for (b, &k) in cone.sides.iter().enumerate() {
            let ls = smat(cone.block(s, b), k).cholesky()?.l();
            let lz = smat(cone.block(z, b), k).cholesky()?.l();
            let svd = (lz.transpose() * &ls).svd(true, true);
            let (u, vt) = (svd.u?, svd.v_t?);
            let lambda = svd.singular_values;
            if lambda.iter().any(|&v| !(v > 0.0)) {
                return None;
            }
            let inv_sqrt = DMatrix::from_diagonal(&lambda.map(|v| 1.0 / v.sqrt()));
            let r = &ls * vt.transpose() * &inv_sqrt;
            let r_inv = &inv_sqrt * u.transpose() * lz.transpose();
            blocks.push(BlockScaling { r, r_inv, lambda });
        }
        Some(Scaling { w, lambda_nonneg, blocks })
    }

    fn map_blocks(
        &self,
        cone: &Cone,
        v: &DVector<f64>,
        nonneg: impl Fn(usize, f64) -> f64,
        f: impl Fn(&BlockScaling, DMatrix<f64>) -> DMatrix<f64>,
    ) -> DVector<f64> {
        let mut out = DVector::zeros(cone.dim);
        for i in 0..cone.nonneg {
            out[i] = nonneg(i, v[i]);
        }
        for (b, &k) in cone.sides.iter().enumerate() {
            let m = smat(cone.block(v, b), k);
            cone.set_block(&mut out, b, &f(&self.blocks[b], m));
        }
        out
    }

    /// `W v`
    #[cfg(test)]
    fn apply(&self, cone: &Cone, v: &DVector<f64>) -> DVector<f64> {
        self.map_blocks(cone, v, |i, x| self.w[i] * x, |s, m| s.r.transpose() * m * &s.r)
    }

    /// `W^{-1} v`
    fn apply_inv(&self, cone: &Cone, v: &DVector<f64>) -> DVector<f64> {
        self.map_blocks(cone, v, |i, x| x / self.w[i], |s, m| s.r_inv.transpose() * m * &s.r_inv)
    }

    /// `W^T v`
    fn apply_t(&self, cone: &Cone, v: &DVector<f64>) -> DVector<f64> {
        self.map_blocks(cone, v, |i, x| self.w[i] * x, |s, m| &s.r * m * s.r.transpose())
    }

    /// `W^{-T} v`
    fn apply_inv_t(&self, cone: &Cone, v: &DVector<f64>) -> DVector<f64> {
        self.map_blocks(cone, v, |i, x| x / self.w[i], |s, m| &s.r_inv * m * s.r_inv.transpose())
    }

    fn lambda(&self, cone: &Cone) -> DVector<f64> {
        let mut out = DVector::zeros(cone.dim);
        out.rows_mut(0, cone.nonneg).copy_from(&self.lambda_nonneg);
        for (b, s) in self.blocks.iter().enumerate() {
            cone.set_block(&mut out, b, &DMatrix::from_diagonal(&s.lambda));
        }
        out
    }

    /// Solve `lambda o u = d` for `u`.
    fn lambda_div(&self, cone: &Cone, d: &DVector<f64>) -> DVector<f64> {
        self.map_blocks(
            cone,
            d,
            |i, x| x / self.lambda_nonneg[i],
            |s, m| DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| 2.0 * m[(i, j)] / (s.lambda[i] + s.lambda[j])),
        )
    }

    /// Largest `a` with `lambda + a v` in the cone.
    fn max_step(&self, cone: &Cone, v: &DVector<f64>) -> f64 {
        let mut a = f64::INFINITY;
        for i in 0..cone.nonneg {
            if v[i] < 0.0 {
                a = a.min(-self.lambda_nonneg[i] / v[i]);
            }
        }
        for (b, &k) in cone.sides.iter().enumerate() {
            let s = &self.blocks[b];
            let m = smat(cone.block(v, b), k);
            let isq = s.lambda.map(|x| 1.0 / x.sqrt());
            let scaled = DMatrix::from_fn(k, k, |i, j| isq[i] * m[(i, j)] * isq[j]);
            let min = SymmetricEigen::new(scaled).eigenvalues.min();
            if min < 0.0 {
                a = a.min(-1.0 / min);
            }
        }
        a
    }
}

/// Dense conic data compiled from an instance.
pub(crate) struct ConicData {
    pub n: usize,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub cone: Cone,
    /// Instance equality behind each row of `a`; `None` for rows added by presolve.
    eq_position: Vec<Option<usize>>,
    n_eq_total: usize,
    /// Original side and surviving indices of each psd block.
    block_keep: Vec<(usize, Vec<usize>)>,
}

type Cell = Vec<(usize, f64)>;

/// Symmetric matrix of linear forms, lower triangle stored.
struct FormBlock {
    side: usize,
    cells: Vec<Vec<Cell>>,
}

impl FormBlock {
    fn cell(&self, r: usize, c: usize) -> &Cell {
        if r >= c {
            &self.cells[r][c]
        } else {
            &self.cells[c][r]
        }
    }
}

impl ConicData {
    pub fn new(inst: &ProblemInstance, theta: f64) -> Self {
        let n = inst.n_vars();
        let lin_row = |e: &crate::formulations::QuadExpr| {
            let mut row = DVector::zeros(n);
            for &(v, c) in &e.lin {
                row[v] += c;
            }
            row
        };
        let eqs: Vec<_> = inst.constraints().filter(|c| c.relation == Relation::Eq).collect();
        let ineqs: Vec<_> = inst.constraints().filter(|c| c.relation == Relation::Le).collect();

        let mut rows: Vec<(DVector<f64>, f64, Option<usize>)> =
            eqs.iter().enumerate().map(|(i, c)| (lin_row(&c.expr), -c.expr.constant, Some(i))).collect();
        let mut blocks: Vec<FormBlock> = inst
            .psd
            .iter()
            .map(|p| {
                let mut cells = (0..p.side).map(|r| vec![Vec::new(); r + 1]).collect::<Vec<Vec<Cell>>>();
                for e in &p.entries {
                    cells[e.row][e.col].push((e.var, e.coeff));
                }
                FormBlock { side: p.side, cells }
            })
            .collect();
        let block_keep = facial_reduction(n, &mut rows, &mut blocks);

        let a_full = DMatrix::from_fn(rows.len(), n, |r, c| rows[r].0[c]);
        let keep = independent_rows(&a_full);
        let a = a_full.select_rows(keep.iter());
        let b = DVector::from_iterator(keep.len(), keep.iter().map(|&i| rows[i].1));

        let sides: Vec<usize> = block_keep.iter().map(|(_, k)| k.len()).collect();
        let cone = Cone::new(ineqs.len(), sides);
        let mut g = DMatrix::zeros(cone.dim, n);
        let mut h = DVector::zeros(cone.dim);
        for (i, c) in ineqs.iter().enumerate() {
            g.set_row(i, &lin_row(&c.expr).transpose());
            h[i] = -c.expr.constant;
        }
        for (blk, (fb, (_, idx))) in blocks.iter().zip(&block_keep).enumerate() {
            let off = cone.offsets[blk];
            let side = idx.len();
            for c in 0..side {
                for r in c..side {
                    let weight = if r == c { 1.0 } else { std::f64::consts::SQRT_2 };
                    for &(var, coeff) in fb.cell(idx[r], idx[c]) {
                        g[(off + svec_index(side, r, c), var)] -= weight * coeff;
                    }
                }
            }
        }
        ConicData {
            n,
            c: lin_row(&inst.objective(theta)),
            a,
            b,
            g,
            h,
            cone,
            eq_position: keep.iter().map(|&i| rows[i].2).collect(),
            n_eq_total: eqs.len(),
            block_keep,
        }
    }

    fn duals(&self, y: &DVector<f64>, z: &DVector<f64>) -> Duals {
        let mut equality = vec![0.0; self.n_eq_total];
        for (k, pos) in self.eq_position.iter().enumerate() {
            if let Some(pos) = pos {
                equality[*pos] = y[k];
            }
        }
        let psd = self
            .block_keep
            .iter()
            .enumerate()
            .map(|(b, (side, idx))| {
                let reduced = smat(self.cone.block(z, b), idx.len());
                let mut full = DMatrix::zeros(*side, *side);
                for (i, &r) in idx.iter().enumerate() {
                    for (j, &c) in idx.iter().enumerate() {
                        full[(r, c)] = reduced[(i, j)];
                    }
                }
                full.transpose().as_slice().to_vec()
            })
            .collect();
        Duals { equality, inequality: z.rows(0, self.cone.nonneg).iter().copied().collect(), psd }
    }
}

/// Remove psd rows whose diagonal is forced to zero. A psd matrix with a zero
/// diagonal entry has a zero row, so every form in that row becomes an equality
/// and the row and column leave the block. Repeats until nothing changes.
fn facial_reduction(
    n: usize,
    rows: &mut Vec<(DVector<f64>, f64, Option<usize>)>,
    blocks: &mut [FormBlock],
) -> Vec<(usize, Vec<usize>)> {
    let mut keep: Vec<Vec<usize>> = blocks.iter().map(|b| (0..b.side).collect()).collect();
    loop {
        let zero_vars: Vec<bool> = {
            let mut z = vec![false; n];
            for (row, rhs, _) in rows.iter() {
                let nz: Vec<usize> = (0..n).filter(|&i| row[i] != 0.0).collect();
                if nz.len() == 1 && *rhs == 0.0 {
                    z[nz[0]] = true;
                }
            }
            z
        };
        let mut changed = false;
        for (fb, idx) in blocks.iter().zip(keep.iter_mut()) {
            let Some(pos) = idx.iter().position(|&k| fb.cell(k, k).iter().all(|&(v, _)| zero_vars[v])) else {
                continue;
            };
            let k = idx.remove(pos);
            for &j in idx.iter() {
                let cell = fb.cell(j, k);
                if cell.iter().all(|&(v, _)| zero_vars[v]) {
                    continue;
                }
                let mut row = DVector::zeros(n);
                for &(v, c) in cell {
                    row[v] += c;
                }
                rows.push((row, 0.0, None));
            }
            changed = true;
        }
        if !changed {
            break;
        }
    }
    blocks.iter().zip(keep).map(|(b, k)| (b.side, k)).collect()
}

/// Best iterate so far: merit, x, y, z.
type Iterate = (f64, DVector<f64>, DVector<f64>, DVector<f64>);

pub(crate) struct HsdeOutcome {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub iterations: usize,
}

pub(crate) fn hsde(d: &ConicData, opts: &SolverOptions) -> HsdeOutcome {
    let (n, p, m) = (d.n, d.a.nrows(), d.cone.dim);
    let cone = &d.cone;
    let nu = cone.degree() as f64;
    let tol = opts.feas_tol / 10.0;
    let gap_tol = opts.opt_tol / 10.0;

    let mut x = DVector::zeros(n);
    let mut y = DVector::zeros(p);
    let mut s = cone.identity();
    let mut z = cone.identity();
    let (mut tau, mut kappa) = (1.0, 1.0);
    let e = cone.identity();

    let at = d.a.transpose();
    let gt = d.g.transpose();
    let size = n + p + m + 1;
    let mut best: Option<Iterate> = None;

    let outcome = |status, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, tau: f64, it| HsdeOutcome {
        status,
        x: x / tau,
        y: y / tau,
        z: z / tau,
        iterations: it,
    };

    for it in 0..opts.max_iter {
        let r1 = &at * &y + &gt * &z + &d.c * tau;
        let r2 = -(&d.a * &x) + &d.b * tau;
        let r3 = &s + &d.g * &x - &d.h * tau;
        let r4 = kappa + d.c.dot(&x) + d.b.dot(&y) + d.h.dot(&z);
        let mu = (s.dot(&z) + tau * kappa) / (nu + 1.0);

        // termination on the de-homogenized iterate
        let pres = (&d.a * &x / tau - &d.b).amax().max((&d.g * &x / tau + &s / tau - &d.h).amax());
        let dres = ((&at * &y + &gt * &z) / tau + &d.c).amax();
        let pcost = d.c.dot(&x) / tau;
        let dcost = -(d.b.dot(&y) + d.h.dot(&z)) / tau;
        let gap = s.dot(&z) / (tau * tau);
        let rel_gap = (pcost - dcost).abs() / pcost.abs().max(1.0);
        if pres <= tol && dres <= tol && (gap <= gap_tol || rel_gap <= gap_tol) {
            return outcome(SolveStatus::Optimal, &x, &y, &z, tau, it);
        }
        let worst = pres.max(dres).max(gap.min(rel_gap));
        if best.as_ref().is_none_or(|b| worst < b.0) {
            best = Some((worst, &x / tau, &y / tau, &z / tau));
        }
        let hz_by = d.h.dot(&z) + d.b.dot(&y);
        if hz_by < 0.0 {
            let scale = -1.0 / hz_by;
            if ((&at * &y + &gt * &z) * scale).amax() <= tol {
                return HsdeOutcome {
                    status: SolveStatus::InfeasibleDetected,
                    x: DVector::zeros(n),
                    y: &y * scale,
                    z: &z * scale,
                    iterations: it,
                };
            }
        }
        let cx = d.c.dot(&x);
        if cx < 0.0 {
            let scale = -1.0 / cx;
            if ((&d.a * &x) * scale).amax().max(((&d.g * &x + &s) * scale).amax()) <= tol {
                return HsdeOutcome {
                    status: SolveStatus::InfeasibleDetected,
                    x: &x * scale,
                    y: DVector::zeros(p),
                    z: DVector::zeros(m),
                    iterations: it,
                };
            }
        }

        let Some(w) = Scaling::new(cone, &s, &z) else {
            return numerical_failure(best, n, p, m, it);
        };
        let lambda = w.lambda(cone);
        let mut g_hat = DMatrix::zeros(m, n);
        for j in 0..n {
            g_hat.set_column(j, &w.apply_inv_t(cone, &d.g.column(j).into_owned()));
        }
        let h_hat = w.apply_inv_t(cone, &d.h);

        let mut k = DMatrix::zeros(size, size);
        let (oy, oz, ot) = (n, n + p, n + p + m);
        k.view_mut((0, oy), (n, p)).copy_from(&at);
        k.view_mut((0, oz), (n, m)).copy_from(&g_hat.transpose());
        k.view_mut((0, ot), (n, 1)).copy_from(&d.c);
        k.view_mut((oy, 0), (p, n)).copy_from(&(-&d.a));
        k.view_mut((oy, ot), (p, 1)).copy_from(&d.b);
        k.view_mut((oz, 0), (m, n)).copy_from(&(-&g_hat));
        k.view_mut((oz, oz), (m, m)).fill_with_identity();
        k.view_mut((oz, ot), (m, 1)).copy_from(&h_hat);
        k.view_mut((ot, 0), (1, n)).copy_from(&(-d.c.transpose()));
        k.view_mut((ot, oy), (1, p)).copy_from(&(-d.b.transpose()));
        k.view_mut((ot, oz), (1, m)).copy_from(&(-h_hat.transpose()));
        k[(ot, ot)] = kappa / tau;
        let lu = k.clone().lu();
        let w_r3 = w.apply_inv_t(cone, &r3);

        // returns (dx, dy, dz, ds, dtau, dkappa, scaled ds, scaled dz)
        let direction = |eta: f64, ds_target: &DVector<f64>, dk_target: f64| {
            let u = w.lambda_div(cone, ds_target);
            let mut rhs = DVector::zeros(size);
            rhs.rows_mut(0, n).copy_from(&(-&r1 * eta));
            rhs.rows_mut(oy, p).copy_from(&(-&r2 * eta));
            rhs.rows_mut(oz, m).copy_from(&(&w_r3 * eta + &u));
            rhs[ot] = eta * r4 + dk_target / tau;
            let mut sol = lu.solve(&rhs)?;
            for _ in 0..REFINEMENT_STEPS {
                let res = &rhs - &k * &sol;
                sol += lu.solve(&res)?;
            }
            if sol.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let dx = sol.rows(0, n).into_owned();
            let dy = sol.rows(oy, p).into_owned();
            let dz_tilde = sol.rows(oz, m).into_owned();
            let dtau = sol[ot];
            let ds_tilde = &u - &dz_tilde;
            let dz = w.apply_inv(cone, &dz_tilde);
            let ds = w.apply_t(cone, &ds_tilde);
            let dkappa = (dk_target - kappa * dtau) / tau;
            Some((dx, dy, dz, ds, dtau, dkappa, ds_tilde, dz_tilde))
        };
        let step = |ds_t: &DVector<f64>, dz_t: &DVector<f64>, dtau: f64, dkappa: f64| {
            let mut a = w.max_step(cone, ds_t).min(w.max_step(cone, dz_t));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        let lam_sq = cone.circ(&lambda, &lambda);
        let Some(aff) = direction(1.0, &(-&lam_sq), -tau * kappa) else {
            return numerical_failure(best, n, p, m, it);
        };
        let alpha_aff = step(&aff.6, &aff.7, aff.4, aff.5).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);
        let eta = 1.0 - sigma;
        let ds_target = -&lam_sq + &e * (sigma * mu) - cone.circ(&aff.6, &aff.7);
        let dk_target = -tau * kappa + sigma * mu - aff.4 * aff.5;
        let Some((dx, dy, dz, ds, dtau, dkappa, ds_t, dz_t)) = direction(eta, &ds_target, dk_target) else {
            return numerical_failure(best, n, p, m, it);
        };
        let alpha = (STEP_FRACTION * step(&ds_t, &dz_t, dtau, dkappa)).min(1.0);
        x += &dx * alpha;
        y += &dy * alpha;
        z += &dz * alpha;
        s += &ds * alpha;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        if !(tau > 0.0 && kappa > 0.0) {
            return numerical_failure(best, n, p, m, it + 1);
        }
    }
    match best {
        Some((_, x, y, z)) => HsdeOutcome { status: SolveStatus::MaxIterations, x, y, z, iterations: opts.max_iter },
        None => HsdeOutcome {
            status: SolveStatus::MaxIterations,
            x: DVector::zeros(n),
            y: DVector::zeros(p),
            z: DVector::zeros(m),
            iterations: opts.max_iter,
        },
    }
}

fn numerical_failure(best: Option<Iterate>, n: usize, p: usize, m: usize, it: usize) -> HsdeOutcome {
    let (x, y, z) = match best {
        Some((_, x, y, z)) => (x, y, z),
        None => (DVector::zeros(n), DVector::zeros(p), DVector::zeros(m)),
    };
    HsdeOutcome { status: SolveStatus::NumericalFailure, x, y, z, iterations: it }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(c: &[f64], a: DMatrix<f64>, b: &[f64], g: DMatrix<f64>, h: &[f64], cone: Cone) -> ConicData {
        ConicData {
            n: c.len(),
            c: DVector::from_column_slice(c),
            eq_position: (0..a.nrows()).map(Some).collect(),
            n_eq_total: a.nrows(),
            block_keep: cone.sides.iter().map(|&k| (k, (0..k).collect())).collect(),
            a,
            b: DVector::from_column_slice(b),
            g,
            h: DVector::from_column_slice(h),
            cone,
        }
    }

    #[test]
    fn scaling_maps_both_points_to_lambda() {
        let cone = Cone::new(2, vec![3]);
        let s_mat = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let z_mat = DMatrix::from_row_slice(3, 3, &[1.0, -0.3, 0.1, -0.3, 2.0, 0.4, 0.1, 0.4, 1.5]);
        let mut s = DVector::from_column_slice(&[2.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut z = DVector::from_column_slice(&[0.5, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        cone.set_block(&mut s, 0, &s_mat);
        cone.set_block(&mut z, 0, &z_mat);
        let w = Scaling::new(&cone, &s, &z).unwrap();
        let lambda = w.lambda(&cone);
        assert!((w.apply(&cone, &z) - &lambda).amax() < 1e-12);
        assert!((w.apply_inv_t(&cone, &s) - &lambda).amax() < 1e-12);
        assert!((w.apply_inv(&cone, &w.apply(&cone, &z)) - &z).amax() < 1e-12);
        let v = DVector::from_fn(8, |i, _| (i as f64 * 0.7).sin());
        // <W a, b> = <a, W^T b>
        assert!((w.apply(&cone, &v).dot(&z) - v.dot(&w.apply_t(&cone, &z))).abs() < 1e-12);
        let u = w.lambda_div(&cone, &v);
        assert!((cone.circ(&lambda, &u) - v).amax() < 1e-12);
    }

    #[test]
    fn linear_program() {
        // min -x0 - x1 s.t. x0 + x1 <= 1 (as x0 + 2 x1 = 1 and x >= 0)
        let d = data(
            &[-1.0, -1.0],
            DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            &[1.0],
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            &[0.0, 0.0],
            Cone::new(2, vec![]),
        );
        let out = hsde(&d, &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.x[0] - 1.0).abs() < 1e-7 && out.x[1].abs() < 1e-7);
    }

    #[test]
    fn smallest_eigenvalue_by_sdp() {
        // max t s.t. C - t I >= 0 for C = [[2, 1], [1, 2]] -> t = 1
        let sq2 = std::f64::consts::SQRT_2;
        let c_svec = [2.0, sq2 * 1.0, 2.0];
        // s = C - t I = h - G t with G = svec(I)
        let g = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 1.0]);
        let d = data(&[-1.0], DMatrix::zeros(0, 1), &[], g, &c_svec, Cone::new(0, vec![2]));
        let out = hsde(&d, &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.x[0] - 1.0).abs() < 1e-7, "{}", out.x[0]);
    }

    #[test]
    fn infeasible_program_gives_certificate() {
        // x >= 1 and x <= 0
        let d = data(
            &[1.0],
            DMatrix::zeros(0, 1),
            &[],
            DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]),
            &[-1.0, 0.0],
            Cone::new(2, vec![]),
        );
        let out = hsde(&d, &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::InfeasibleDetected);
        assert!(out.z.iter().all(|&v| v >= -1e-12));
        assert!((d.h.dot(&out.z) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_program_is_detected() {
        // min -x s.t. x >= 0
        let d = data(
            &[-1.0],
            DMatrix::zeros(0, 1),
            &[],
            DMatrix::from_column_slice(1, 1, &[-1.0]),
            &[0.0],
            Cone::new(1, vec![]),
        );
        assert_eq!(hsde(&d, &SolverOptions::default()).status, SolveStatus::InfeasibleDetected);
    }

    #[test]
    fn source_bus_neutral_row_is_reduced() {
        use crate::formulations::{build_formulation, FormulationKind};
        use crate::netmodel::two_bus_two_wire;
        let inst = build_formulation(&two_bus_two_wire(), FormulationKind::Swr2).unwrap();
        let d = ConicData::new(&inst, 0.0);
        // the zero neutral voltage removes one row from each copy of the Hermitian block
        assert_eq!(d.cone.sides, vec![6]);
        assert_eq!(d.block_keep[0].0, 8);
    }

    #[test]
    fn swr2_extremes_and_infeasibility() {
        use crate::formulations::{build_formulation, FormulationKind};
        use crate::netmodel::two_bus_two_wire;
        let net = two_bus_two_wire();
        let opts = SolverOptions::default();
        let inst = build_formulation(&net, FormulationKind::Swr2).unwrap();
        let low = solve_sdp(&inst, &net, 0.0, &opts).unwrap();
        assert_eq!(low.status, SolveStatus::Optimal);
        assert!((low.objective - 1.147226).abs() < 1e-5);
        let high = solve_sdp(&inst, &net, std::f64::consts::PI, &opts).unwrap();
        assert_eq!(high.status, SolveStatus::Optimal);
        assert!(high.residuals.feasible(opts.feas_tol));

        let tight = net.with_voltage_max("j", &[0.1, 0.1]);
        let inst = build_formulation(&tight, FormulationKind::Swr2).unwrap();
        let r = solve_sdp(&inst, &tight, 0.0, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::InfeasibleDetected);
        assert!(r.certificate.is_some());
    }
}
