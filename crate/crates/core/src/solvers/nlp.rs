//! Primal-dual interior-point method for small dense QCQPs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Duals, Initialization, LocalSolution, SolveResult, SolveStatus, SolverOptions, StartDiagnostic};
use crate::error::{Error, Result};
use crate::formulations::{dispatch_of, embed, IvrPoint, ProblemInstance, QuadExpr, Relation};
use crate::linalg::independent_rows;
use crate::netmodel::Network;

const XI: f64 = 0.99995;
const SIGMA: f64 = 0.1;
const PERTURBATION: f64 = 0.1;
const CLUSTER_RADIUS: f64 = 1e-4;
/// Constraint violation above which a failed start counts as stuck infeasible.
const INFEASIBLE_FLOOR: f64 = 1e-4;

/// Solve a nonconvex kind from `opts.multistart` starting points and keep the best.
pub fn solve_nlp(inst: &ProblemInstance, net: &Network, theta: f64, opts: &SolverOptions) -> Result<SolveResult> {
    if !inst.kind.is_nonlinear() {
        return Err(Error::Contract(format!("{} is not a nonlinear formulation", inst.kind)));
    }
    if !inst.psd.is_empty() {
        return Err(Error::Contract("nonlinear solver does not handle psd blocks".into()));
    }
    opts.validate()?;
    let problem = Qcqp::new(inst, theta);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let normal = Normal::new(0.0, PERTURBATION).expect("valid deviation");

    let base = IvrPoint::flat(net);
    let mut runs = Vec::with_capacity(opts.multistart);
    for start in 0..opts.multistart {
        let mut p = base.clone();
        if start > 0 || opts.initialization == Initialization::Random {
            perturb(&mut p, net, &normal, &mut rng);
        }
        let x0 = embed(inst, net, &p)?;
        runs.push(problem.run(&x0, opts));
    }

    let starts: Vec<StartDiagnostic> = runs
        .iter()
        .enumerate()
        .map(|(start, r)| StartDiagnostic {
            start,
            status: r.status,
            iterations: r.iterations,
            objective: r.objective,
            equality_inf: r.violation,
        })
        .collect();

    let mut local: Vec<LocalSolution> = Vec::new();
    for (start, r) in runs.iter().enumerate().filter(|(_, r)| r.status == SolveStatus::Optimal) {
        match local.iter_mut().find(|s| distance(&s.point, &r.x) <= CLUSTER_RADIUS) {
            Some(s) => s.starts.push(start),
            None => local.push(LocalSolution {
                point: r.x.clone(),
                objective: r.objective,
                dispatch: dispatch_of(inst, net, &r.x),
                starts: vec![start],
            }),
        }
    }
    local.sort_by(|a, b| a.objective.total_cmp(&b.objective));

    let chosen = match local.first() {
        Some(best) => &runs[best.starts[0]],
        None => runs.iter().min_by(|a, b| a.violation.total_cmp(&b.violation)).expect("at least one start"),
    };
    let status = if !local.is_empty() {
        SolveStatus::Optimal
    } else if runs.iter().all(|r| r.violation > INFEASIBLE_FLOOR) {
        SolveStatus::InfeasibleDetected
    } else if runs.iter().any(|r| r.status == SolveStatus::MaxIterations) {
        SolveStatus::MaxIterations
    } else {
        SolveStatus::NumericalFailure
    };
    Ok(SolveResult {
        status,
        point: chosen.x.clone(),
        objective: chosen.objective,
        dispatch: dispatch_of(inst, net, &chosen.x),
        iterations: runs.iter().map(|r| r.iterations).sum(),
        residuals: inst.residuals(&chosen.x)?,
        duals: problem.duals(chosen),
        local_solutions: local,
        starts,
        certificate: None,
    })
}

fn perturb(p: &mut IvrPoint, net: &Network, normal: &Normal<f64>, rng: &mut ChaCha8Rng) {
    let mut jitter = |v: &mut num_complex::Complex64| {
        v.re += normal.sample(rng);
        v.im += normal.sample(rng);
    };
    for (b, bus) in net.buses.iter().enumerate() {
        if !bus.is_slack() {
            p.voltages[b].iter_mut().for_each(&mut jitter);
        }
    }
    p.branch_currents.iter_mut().flatten().for_each(&mut jitter);
    p.load_currents.iter_mut().flatten().for_each(&mut jitter);
    p.gen_currents.iter_mut().flatten().for_each(&mut jitter);
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

struct Run {
    status: SolveStatus,
    x: Vec<f64>,
    lam: DVector<f64>,
    mu: DVector<f64>,
    objective: f64,
    violation: f64,
    iterations: usize,
}

/// Constraint data with constant Hessians, split into equalities and inequalities.
struct Qcqp<'a> {
    n: usize,
    objective: QuadExpr,
    objective_hessian: DMatrix<f64>,
    eq: Vec<&'a QuadExpr>,
    eq_hessian: Vec<DMatrix<f64>>,
    ineq: Vec<&'a QuadExpr>,
    ineq_hessian: Vec<DMatrix<f64>>,
    /// Position of each kept equality within all equalities of the instance.
    eq_position: Vec<usize>,
    n_eq_total: usize,
}

impl<'a> Qcqp<'a> {
    fn new(inst: &'a ProblemInstance, theta: f64) -> Self {
        let n = inst.n_vars();
        let hessian = |e: &QuadExpr| {
            let mut h = DMatrix::zeros(n, n);
            e.add_hessian(1.0, &mut h);
            h
        };
        let equalities: Vec<&QuadExpr> =
            inst.constraints().filter(|c| c.relation == Relation::Eq).map(|c| &c.expr).collect();

        // drop linear equalities that are consistent combinations of others
        let linear: Vec<usize> = (0..equalities.len()).filter(|&i| equalities[i].degree() <= 1).collect();
        let a = DMatrix::from_fn(linear.len(), n, |r, c| coefficient(equalities[linear[r]], c));
        let keep_linear = independent_rows(&a);
        let mut eq_position: Vec<usize> = (0..equalities.len())
            .filter(|i| equalities[*i].degree() == 2 || keep_linear.iter().any(|&k| linear[k] == *i))
            .collect();
        eq_position.sort_unstable();

        let objective = inst.objective(theta);
        let ineq: Vec<&QuadExpr> = inst.constraints().filter(|c| c.relation == Relation::Le).map(|c| &c.expr).collect();
        Qcqp {
            n,
            objective_hessian: hessian(&objective),
            objective,
            eq: eq_position.iter().map(|&i| equalities[i]).collect(),
            eq_hessian: eq_position.iter().map(|&i| hessian(equalities[i])).collect(),
            ineq_hessian: ineq.iter().map(|e| hessian(e)).collect(),
            ineq,
            eq_position,
            n_eq_total: equalities.len(),
        }
    }

    fn values(exprs: &[&QuadExpr], x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(exprs.len(), exprs.iter().map(|e| e.eval(x)))
    }

    fn jacobian(&self, exprs: &[&QuadExpr], x: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(exprs.len(), self.n);
        let mut row = vec![0.0; self.n];
        for (i, e) in exprs.iter().enumerate() {
            row.iter_mut().for_each(|v| *v = 0.0);
            e.add_gradient(x, 1.0, &mut row);
            j.row_mut(i).copy_from_slice(&row);
        }
        j
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = vec![0.0; self.n];
        self.objective.add_gradient(x, 1.0, &mut g);
        DVector::from_vec(g)
    }

    fn lagrangian_hessian(&self, lam: &DVector<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
        let mut h = self.objective_hessian.clone();
        for (l, hi) in lam.iter().zip(&self.eq_hessian) {
            if *l != 0.0 {
                h += hi * *l;
            }
        }
        for (m, hi) in mu.iter().zip(&self.ineq_hessian) {
            if *m != 0.0 {
                h += hi * *m;
            }
        }
        h
    }

    fn duals(&self, run: &Run) -> Duals {
        let mut equality = vec![0.0; self.n_eq_total];
        for (k, &pos) in self.eq_position.iter().enumerate() {
            equality[pos] = run.lam[k];
        }
        Duals { equality, inequality: run.mu.iter().copied().collect(), psd: Vec::new() }
    }

    fn run(&self, x0: &[f64], opts: &SolverOptions) -> Run {
        let (n, neq, niq) = (self.n, self.eq.len(), self.ineq.len());
        let mut x = x0.to_vec();
        let h0 = Self::values(&self.ineq, &x);
        let mut z = h0.map(|h| if h < -1.0 { -h } else { 1.0 });
        let mut gamma = 1.0;
        let mut mu = z.map(|zi| gamma / zi);
        let mut lam = DVector::zeros(neq);
        let mut delta_w_last = 0.0;

        let finish = |status: SolveStatus, x: Vec<f64>, lam: DVector<f64>, mu: DVector<f64>, it: usize| {
            let g = Self::values(&self.eq, &x);
            let h = Self::values(&self.ineq, &x);
            let violation = inf_norm(&g).max(h.iter().copied().fold(0.0, f64::max));
            Run { status, objective: self.objective.eval(&x), x, lam, mu, violation, iterations: it }
        };

        for it in 0..opts.max_iter {
            let g = Self::values(&self.eq, &x);
            let h = Self::values(&self.ineq, &x);
            let jg = self.jacobian(&self.eq, &x);
            let jh = self.jacobian(&self.ineq, &x);
            let lx = self.gradient(&x) + jg.transpose() * &lam + jh.transpose() * &mu;

            let feas = if neq > 0 { inf_norm(&g) } else { 0.0 }.max(h.iter().copied().fold(0.0, f64::max));
            let xnorm = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let grad = inf_norm(&lx) / (1.0 + lam.amax().max(mu.amax()));
            let comp = z.dot(&mu) / (1.0 + xnorm);
            if !(feas.is_finite() && grad.is_finite()) {
                return finish(SolveStatus::NumericalFailure, x, lam, mu, it);
            }
            if feas <= opts.feas_tol && grad <= opts.opt_tol && comp <= opts.opt_tol {
                return finish(SolveStatus::Optimal, x, lam, mu, it);
            }

            let zinv = z.map(|v| 1.0 / v);
            let lxx = self.lagrangian_hessian(&lam, &mu);
            let scaled_jh = DMatrix::from_fn(niq, n, |r, c| jh[(r, c)] * mu[r] * zinv[r]);
            let m = lxx + jh.transpose() * scaled_jh;
            let w = DVector::from_fn(niq, |i, _| zinv[i] * (gamma + mu[i] * h[i]));
            let nvec = &lx + jh.transpose() * w;

            let mut rhs = DVector::zeros(n + neq);
            rhs.rows_mut(0, n).copy_from(&(-&nvec));
            rhs.rows_mut(n, neq).copy_from(&(-&g));
            let Some(sol) = solve_kkt(&m, &jg, &rhs, &mut delta_w_last) else {
                return finish(SolveStatus::NumericalFailure, x, lam, mu, it);
            };
            let dx = sol.rows(0, n).into_owned();
            let dlam = sol.rows(n, neq).into_owned();
            let dz = -&h - &z - &jh * &dx;
            let dmu = DVector::from_fn(niq, |i, _| -mu[i] + zinv[i] * (gamma - mu[i] * dz[i]));

            let alpha_p = step_to_boundary(&z, &dz);
            let alpha_d = step_to_boundary(&mu, &dmu);
            for (xi, d) in x.iter_mut().zip(dx.iter()) {
                *xi += alpha_p * d;
            }
            z += alpha_p * &dz;
            lam += alpha_d * &dlam;
            mu += alpha_d * &dmu;
            if niq > 0 {
                gamma = SIGMA * z.dot(&mu) / niq as f64;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return finish(SolveStatus::NumericalFailure, x, lam, mu, it + 1);
            }
        }
        finish(SolveStatus::MaxIterations, x, lam, mu, opts.max_iter)
    }
}

fn coefficient(e: &QuadExpr, var: usize) -> f64 {
    e.lin.iter().filter(|(v, _)| *v == var).map(|(_, c)| c).sum()
}

fn step_to_boundary(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let limit = v.iter().zip(dv.iter()).filter(|(_, d)| **d < 0.0).map(|(a, d)| -a / d).fold(f64::INFINITY, f64::min);
    (XI * limit).min(1.0)
}

/// Solve `[[M + dw I, J^T], [J, -dc I]] s = rhs`, raising `dw` until the matrix has
/// inertia `(n, m, 0)`.
fn solve_kkt(m: &DMatrix<f64>, j: &DMatrix<f64>, rhs: &DVector<f64>, delta_w_last: &mut f64) -> Option<DVector<f64>> {
    let (n, neq) = (m.nrows(), j.nrows());
    let size = n + neq;
    let scale = m.amax().max(j.amax()).max(1.0);
    let zero_tol = 1e-13 * scale;
    let assemble = |dw: f64, dc: f64| {
        let mut k = DMatrix::zeros(size, size);
        k.view_mut((0, 0), (n, n)).copy_from(m);
        for i in 0..n {
            k[(i, i)] += dw;
        }
        k.view_mut((n, 0), (neq, n)).copy_from(j);
        k.view_mut((0, n), (n, neq)).copy_from(&j.transpose());
        for i in 0..neq {
            k[(n + i, n + i)] -= dc;
        }
        SymmetricEigen::new(k)
    };
    let inertia = |e: &SymmetricEigen<f64, nalgebra::Dyn>| {
        let pos = e.eigenvalues.iter().filter(|&&v| v > zero_tol).count();
        let neg = e.eigenvalues.iter().filter(|&&v| v < -zero_tol).count();
        (pos, neg)
    };

    let mut dw = 0.0;
    let mut dc = 0.0;
    let mut eig = assemble(dw, dc);
    for attempt in 0..60 {
        let (pos, neg) = inertia(&eig);
        if pos == n && neg == neq {
            break;
        }
        if attempt == 59 {
            return None;
        }
        if pos + neg < size && dc == 0.0 {
            dc = 1e-8 * scale;
        }
        if pos != n {
            dw = if dw == 0.0 {
                if *delta_w_last == 0.0 {
                    1e-4
                } else {
                    (*delta_w_last / 3.0).max(1e-20)
                }
            } else if *delta_w_last == 0.0 {
                dw * 100.0
            } else {
                dw * 8.0
            };
        }
        eig = assemble(dw, dc);
    }
    if dw > 0.0 {
        *delta_w_last = dw;
    }
    let qt_rhs = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_fn(size, |i, _| qt_rhs[i] / eig.eigenvalues[i]);
    let sol = &eig.eigenvectors * scaled;
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::{build_formulation, FormulationKind};
    use crate::netmodel::two_bus_two_wire;

    #[test]
    fn wrong_kind_is_contract_error() {
        let net = two_bus_two_wire();
        let inst = build_formulation(&net, FormulationKind::Swr2).unwrap();
        assert!(matches!(solve_nlp(&inst, &net, 0.0, &SolverOptions::default()), Err(Error::Contract(_))));
    }

    #[test]
    fn ivr_min_p() {
        let net = two_bus_two_wire();
        let inst = build_formulation(&net, FormulationKind::Ivr).unwrap();
        let r = solve_nlp(&inst, &net, 0.0, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 1.147226).abs() < 1e-5, "{}", r.objective);
        assert_eq!(r.local_solutions.len(), 1);
        assert!(r.residuals.feasible(1e-8));
    }

    #[test]
    fn tiny_qcqp_on_circle() {
        // min x0 s.t. x0^2 + x1^2 - 1 = 0, x1 <= 0.5 -> x0 = -1
        use crate::formulations::registry::Symbol;
        use crate::formulations::{Constraint, VariableRegistry};
        let mut registry = VariableRegistry::default();
        registry.add_scalar(Symbol::Dispatch, 0);
        let circle = QuadExpr::var(0)
            .mul(&QuadExpr::var(0))
            .unwrap()
            .add_scaled(&QuadExpr::var(1).mul(&QuadExpr::var(1)).unwrap(), 1.0)
            .add_scaled(&QuadExpr::constant(1.0), -1.0);
        let inst = ProblemInstance {
            kind: crate::formulations::FormulationKind::Ivr,
            swr_features: None,
            registry,
            linear: vec![Constraint::le("cap", QuadExpr::var(1).add_scaled(&QuadExpr::constant(0.5), -1.0))],
            quadratic: vec![Constraint::eq("circle", circle)],
            psd: vec![],
            objective_p: QuadExpr::var(0),
            objective_q: QuadExpr::var(1),
        };
        let problem = Qcqp::new(&inst, 0.0);
        let run = problem.run(&[0.3, -0.2], &SolverOptions::default());
        assert_eq!(run.status, SolveStatus::Optimal);
        assert!((run.x[0] + 1.0).abs() < 1e-7 && run.x[1].abs() < 1e-6);
    }
}
