//! Acceptance criteria on the bundled two-bus case. Runs as a plain binary so
//! that every criterion prints one PASS/FAIL line.

use std::panic::{catch_unwind, AssertUnwindSafe};

use mcopf::analysis::{brute_force_set, sweep_objective, CircuitMode, SlackGrid};
use mcopf::formulations::{
    build_swr_variant, embed, ivr_point_of, load_voltage_magnitudes, voltage_magnitudes, Relation, SwrFeatures,
};
use mcopf::netmodel::{kron_reduce, two_bus_two_wire};
use mcopf::solvers::{solve, solve_power_flow_newton, SolveResult, SolverOptions};
use mcopf::{build_formulation, FormulationKind, IvrPoint, Network, ProblemInstance};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(&Network) -> Outcome);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn check(ok: bool, what: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what)
    }
}

fn close(name: &str, expected: f64, observed: f64, tol: f64) -> Result<(), String> {
    check((expected - observed).abs() <= tol, format!("{name}: expected {expected}, got {observed} (tol {tol})"))
}

fn close_c(name: &str, expected: Complex64, observed: Complex64, tol: f64) -> Result<(), String> {
    close(&format!("{name} re"), expected.re, observed.re, tol)?;
    close(&format!("{name} im"), expected.im, observed.im, tol)
}

/// Branch impedance entries taken straight from the case file.
struct CaseZ {
    aa: Complex64,
    an: Complex64,
    nn: Complex64,
    s: Complex64,
}

fn case_z() -> CaseZ {
    let raw: serde_json::Value =
        serde_json::from_str(include_str!("../../../cases/two_bus_two_wire.json")).expect("case parses");
    let br = &raw["branches"][0];
    let z = |r: usize, k: usize| c(br["R"][r][k].as_f64().unwrap(), br["X"][r][k].as_f64().unwrap());
    let s = &raw["loads"][0]["s_ref"];
    CaseZ { aa: z(0, 0), an: z(0, 1), nn: z(1, 1), s: c(s[0].as_f64().unwrap(), s[1].as_f64().unwrap()) }
}

/// High-voltage root of `v = 1 - z conj(s / v)` by fixed-point iteration.
fn scalar_flow(z: Complex64, s: Complex64) -> Complex64 {
    let mut v = c(1.0, 0.0);
    for _ in 0..500 {
        v = c(1.0, 0.0) - z * (s / v).conj();
    }
    v
}

/// The physical circuit solved by hand: loop impedance for the load voltage,
/// then each conductor's drop.
fn circuit_oracle(z: &CaseZ) -> (Complex64, Complex64, Complex64) {
    let v = scalar_flow(z.aa - 2.0 * z.an + z.nn, z.s);
    let i = (z.s / v).conj();
    (c(1.0, 0.0) - (z.aa - z.an) * i, (z.nn - z.an) * i, i.conj())
}

/// The neutral-grounded-at-load circuit: Kron-reduced impedance feeding the load.
fn grounded_oracle(z: &CaseZ) -> (Complex64, Complex64) {
    let v = scalar_flow(z.aa - z.an * z.an / z.nn, z.s);
    (v, (z.s / v).conj().conj())
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn min_p(net: &Network, kind: FormulationKind) -> (ProblemInstance, SolveResult) {
    let inst = build_formulation(net, kind).expect("builds");
    let r = solve(&inst, net, 0.0, &opts()).expect("solves");
    (inst, r)
}

fn criterion_1(net: &Network) -> Outcome {
    let (ua, un, sg) = circuit_oracle(&case_z());
    let p = solve_power_flow_newton(net).map_err(|e| e.to_string())?;
    let u = &p.voltages[1];
    close_c("newton U_a vs oracle", ua, u[0], 1e-9)?;
    close_c("newton U_n vs oracle", un, u[1], 1e-9)?;
    close_c("U_a", c(0.937066, 0.0025), u[0], 1e-4)?;
    close_c("U_n", c(0.062934, -0.0025), u[1], 1e-4)?;
    close("|U_a|", 0.937069, u[0].norm(), 1e-4)?;
    close("|U_n|", 0.062983, u[1].norm(), 1e-4)?;
    close("phase-to-neutral", 0.874146, (u[0] - u[1]).norm(), 1e-4)?;
    close_c("S_g oracle", c(1.147226, 0.565434), sg, 1e-4)?;
    close_c("S_g", c(1.147226, 0.565434), p.dispatch(net)[0], 1e-4)?;

    let (inst, r) = min_p(net, FormulationKind::Ivr);
    check(r.is_optimal(), format!("ivr status {}", r.status))?;
    close_c("ivr S_g", c(1.147226, 0.565434), r.dispatch[0], 1e-4)?;
    close("ivr phase-to-neutral", 0.874146, load_voltage_magnitudes(&inst, net, &r.point)[0], 1e-4)?;
    Ok(format!("U_j = ({:.6}, {:.6}), P = {:.6}", u[0], u[1], p.dispatch(net)[0].re))
}

fn criterion_2(net: &Network) -> Outcome {
    let z = case_z();
    let hand = z.aa - z.an * z.an / z.nn;
    let lib = kron_reduce(&net.branches[0].impedance(), &[1]).map_err(|e| e.to_string())?[(0, 0)];
    close_c("library vs hand", hand, lib, 1e-12)?;
    close_c("Kron impedance", c(0.052622, 0.033902), lib, 1e-5)?;
    Ok(format!("Z = {lib:.6}"))
}

fn spurious(net: &Network) -> Result<(ProblemInstance, Vec<f64>, Complex64), String> {
    let (inst, r) = min_p(net, FormulationKind::Svr2);
    let found = r
        .local_solutions
        .iter()
        .find(|s| voltage_magnitudes(&inst, net, &s.point)[1][1] < 1e-6)
        .ok_or_else(|| format!("no local solution with |U_n| = 0 among {}", r.local_solutions.len()))?;
    Ok((inst.clone(), found.point.clone(), found.dispatch[0]))
}

fn criterion_3(net: &Network) -> Outcome {
    let (inst, x, sg) = spurious(net)?;
    let (ua, sg_oracle) = grounded_oracle(&case_z());
    let mags = voltage_magnitudes(&inst, net, &x);
    close("|U_a| vs oracle", ua.norm(), mags[1][0], 1e-6)?;
    close_c("S_g vs oracle", sg_oracle, sg, 1e-6)?;
    close("|U_a|", 0.924730, mags[1][0], 1e-3)?;
    close_c("S_g", c(1.076921, 0.549558), sg, 1e-3)?;
    let gap = 100.0 * (1.147226 - sg.re) / 1.147226;
    close("gap %", 6.1282, gap, 0.01)?;
    Ok(format!("|U_n| = {:.1e}, S_g = {sg:.6}, gap {gap:.4} %", mags[1][1]))
}

fn criterion_4(net: &Network) -> Outcome {
    let (inst, r) = min_p(net, FormulationKind::Svr1);
    check(r.is_optimal(), format!("svr1 status {}", r.status))?;
    let mags = voltage_magnitudes(&inst, net, &r.point);
    close("P", 1.071996, r.dispatch[0].re, 1e-3)?;
    close("Q", 0.552133, r.dispatch[0].im, 1e-3)?;
    close("|U_a|", 0.926333, mags[1][0], 1e-3)?;
    close("|U_n|", 0.018483, mags[1][1], 1e-3)?;
    close("phase-to-neutral", 0.933764, load_voltage_magnitudes(&inst, net, &r.point)[0], 1e-3)?;
    let gap = 100.0 * (1.147226 - r.dispatch[0].re) / 1.147226;
    close("gap %", 6.5575, gap, 0.01)?;
    Ok(format!("S_g = {:.6}, gap {gap:.4} %", r.dispatch[0]))
}

fn criterion_5(net: &Network) -> Outcome {
    let (inst, r) = min_p(net, FormulationKind::Swr2);
    check(r.is_optimal(), format!("swr2 status {}", r.status))?;
    let rel = (r.objective - 1.147226).abs() / 1.147226;
    check(rel <= 1e-3, format!("swr2 objective {} off by {rel}", r.objective))?;

    let (svr2, x, _) = spurious(net)?;
    let p = ivr_point_of(&svr2, net, &x).ok_or("spurious point has no physical form")?;
    let rep = inst.residuals(&embed(&inst, net, &p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check(!rep.feasible(1e-6), "spurious point accepted by swr2".into())?;

    // the hand-built grounded point is rejected too
    let z = case_z();
    let (ua, _) = grounded_oracle(&z);
    let ia = (z.s / ua).conj();
    let i_n = -z.an * ia / z.nn;
    let mut q = IvrPoint::flat(net);
    q.voltages[1] = vec![ua, c(0.0, 0.0)];
    q.branch_currents[0] = vec![ia, i_n];
    q.gen_currents[0] = vec![ia, i_n];
    q.load_currents[0] = vec![ia, -ia];
    let rep_q = inst.residuals(&embed(&inst, net, &q).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check(!rep_q.feasible(1e-6), "grounded oracle point accepted by swr2".into())?;
    Ok(format!("P = {:.6}, spurious point violation {:.2e}", r.objective, rep.equality_inf))
}

fn criterion_6(net: &Network) -> Outcome {
    let (_, a) = min_p(net, FormulationKind::Svr1);
    let (_, b) = min_p(net, FormulationKind::Swr1);
    check(a.is_optimal() && b.is_optimal(), format!("statuses {} / {}", a.status, b.status))?;
    close("swr1 vs svr1", a.objective, b.objective, 1e-3)?;
    Ok(format!("svr1 {:.6}, swr1 {:.6}", a.objective, b.objective))
}

/// Area enclosed by the support points taken in direction order.
fn shoelace(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    0.5 * (0..n).map(|k| pts[k].0 * pts[(k + 1) % n].1 - pts[(k + 1) % n].0 * pts[k].1).sum::<f64>().abs()
}

/// Largest distance from the least-squares line through the points.
fn line_spread(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let (sxx, syy, sxy) = pts.iter().fold((0.0, 0.0, 0.0), |(a, b, d), p| {
        let (dx, dy) = (p.0 - mx, p.1 - my);
        (a + dx * dx, b + dy * dy, d + dx * dy)
    });
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (nx, ny) = (-angle.sin(), angle.cos());
    pts.iter().map(|p| ((p.0 - mx) * nx + (p.1 - my) * ny).abs()).fold(0.0, f64::max)
}

fn criterion_7(net: &Network) -> Outcome {
    let sweep = |kind| {
        let r = sweep_objective(net, kind, 64, &opts()).expect("sweep runs");
        let pq = r.pq();
        (pq.len(), pq)
    };
    let exact = (1.147226, 0.565434);
    let (n2, swr2) = sweep(FormulationKind::Swr2);
    check(n2 == 64, format!("swr2 optimal samples {n2}"))?;
    let spread = line_spread(&swr2);
    check(spread <= 1e-4, format!("swr2 spread from line {spread}"))?;
    let lowest = swr2.iter().copied().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
    let d = ((lowest.0 - exact.0).powi(2) + (lowest.1 - exact.1).powi(2)).sqrt();
    check(d <= 1e-4, format!("swr2 min-P end {lowest:?} is {d} from the exact point"))?;

    let mut areas = Vec::new();
    for kind in [FormulationKind::Svr1, FormulationKind::Swr1] {
        let (n, pq) = sweep(kind);
        check(n == 64, format!("{kind} optimal samples {n}"))?;
        let area = shoelace(&pq);
        check(area > 1e-4, format!("{kind} area {area}"))?;
        areas.push(area);
    }
    let (ni, ivr) = sweep(FormulationKind::Ivr);
    check(ni == 64, format!("ivr optimal samples {ni}"))?;
    let far = ivr.iter().map(|p| ((p.0 - exact.0).powi(2) + (p.1 - exact.1).powi(2)).sqrt()).fold(0.0, f64::max);
    check(far <= 1e-4, format!("ivr sample {far} from the exact point"))?;
    Ok(format!("swr2 line spread {spread:.1e}, areas svr1 {:.3} swr1 {:.3}, ivr spread {far:.1e}", areas[0], areas[1]))
}

fn criterion_8(net: &Network) -> Outcome {
    let mut gaps = Vec::new();
    for features in
        [SwrFeatures { matrix_kcl: true, row_sums: false }, SwrFeatures { matrix_kcl: false, row_sums: true }]
    {
        let inst = build_swr_variant(net, features).map_err(|e| e.to_string())?;
        let r = solve(&inst, net, 0.0, &opts()).map_err(|e| e.to_string())?;
        check(r.is_optimal(), format!("{features:?} status {}", r.status))?;
        let gap = 100.0 * (1.147226 - r.objective) / 1.147226;
        check(gap > 1.0, format!("{features:?} gap {gap}"))?;
        gaps.push(gap);
    }
    Ok(format!("gaps {:.3} % / {:.3} %", gaps[0], gaps[1]))
}

fn worst(inst: &ProblemInstance, x: &[f64], prefix: &str) -> Result<f64, String> {
    let rep = inst.residuals(x).map_err(|e| e.to_string())?;
    rep.entries
        .iter()
        .filter(|e| e.label.starts_with(prefix))
        .map(|e| e.value.abs())
        .reduce(f64::max)
        .ok_or_else(|| format!("no {prefix} rows"))
}

fn stationarity(inst: &ProblemInstance, r: &SolveResult) -> f64 {
    let h = 1e-6;
    let x = &r.point;
    let obj = inst.objective(0.0);
    let (mut e, mut i) = (0, 0);
    let terms: Vec<(f64, _)> = inst
        .constraints()
        .map(|con| {
            let m = if con.relation == Relation::Eq {
                e += 1;
                r.duals.equality[e - 1]
            } else {
                i += 1;
                r.duals.inequality[i - 1]
            };
            (m, &con.expr)
        })
        .collect();
    (0..x.len())
        .map(|k| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let mut g = (obj.eval(&xp) - obj.eval(&xm)) / (2.0 * h);
            for (m, ex) in &terms {
                g += m * (ex.eval(&xp) - ex.eval(&xm)) / (2.0 * h);
            }
            g.abs()
        })
        .fold(0.0, f64::max)
}

fn criterion_9(net: &Network) -> Outcome {
    let exact = solve_power_flow_newton(net).map_err(|e| e.to_string())?;
    for kind in FormulationKind::ALL {
        let inst = build_formulation(net, kind).map_err(|e| e.to_string())?;
        let x = embed(&inst, net, &exact).map_err(|e| e.to_string())?;
        check(
            inst.residuals(&x).map_err(|e| e.to_string())?.feasible(1e-6),
            format!("exact point rejected by {kind}"),
        )?;
    }

    let swr2 = build_formulation(net, FormulationKind::Swr2).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut z = || c(normal.sample(&mut rng), normal.sample(&mut rng));
    let (mut kcl, mut rows) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let mut p = IvrPoint::flat(net);
        p.voltages[1] = vec![z(), z()];
        let i = vec![z(), z()];
        p.branch_currents[0] = i.clone();
        p.gen_currents[0] = i.clone();
        p.load_currents[0] = i;
        kcl = kcl.max(worst(&swr2, &embed(&swr2, net, &p).map_err(|e| e.to_string())?, "kcl")?);
        let ia = z();
        p.load_currents[0] = vec![ia, -ia];
        rows = rows.max(worst(&swr2, &embed(&swr2, net, &p).map_err(|e| e.to_string())?, "load_rowsum")?);
    }
    check(kcl <= 1e-10, format!("lifted KCL residual {kcl}"))?;
    check(rows <= 1e-12, format!("row-sum residual {rows}"))?;

    let mut kkt: f64 = 0.0;
    for kind in [FormulationKind::Ivr, FormulationKind::Svr1, FormulationKind::Svr2] {
        let (inst, r) = min_p(net, kind);
        check(r.is_optimal(), format!("{kind} status {}", r.status))?;
        kkt = kkt.max(stationarity(&inst, &r));
    }
    check(kkt <= 1e-4, format!("stationarity {kkt}"))?;

    let mut comp: f64 = 0.0;
    for kind in [FormulationKind::Swr1, FormulationKind::Swr2] {
        let (inst, r) = min_p(net, kind);
        check(r.is_optimal(), format!("{kind} status {}", r.status))?;
        for (b, zd) in inst.psd.iter().zip(&r.duals.psd) {
            let zm = DMatrix::from_row_slice(b.side, b.side, zd);
            check(zm.clone().symmetric_eigenvalues().min() >= -1e-8, format!("{kind} dual block not psd"))?;
            comp = comp.max((b.matrix(&r.point) * zm).trace().abs());
        }
    }
    check(comp <= 1e-6, format!("complementarity {comp}"))?;
    Ok(format!("kcl {kcl:.1e}, row sums {rows:.1e}, stationarity {kkt:.1e}, complementarity {comp:.1e}"))
}

fn criterion_10(net: &Network) -> Outcome {
    let swr1 = build_formulation(net, FormulationKind::Swr1).map_err(|e| e.to_string())?;
    let grid = SlackGrid::square("j", 1, 0.2, 41);
    let cloud = brute_force_set(net, &grid, CircuitMode::Svr1Circuit).map_err(|e| e.to_string())?;
    check(cloud.len() == 41 * 41, format!("cloud has {} of {} points", cloud.len(), 41 * 41))?;
    let mut worst_violation: f64 = 0.0;
    for pt in &cloud {
        let rep =
            swr1.residuals(&embed(&swr1, net, &pt.point).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        check(rep.feasible(1e-5), format!("cloud point {:?} rejected", pt.slack))?;
        worst_violation = worst_violation.max(rep.equality_inf);
    }

    let exact = solve_power_flow_newton(net).map_err(|e| e.to_string())?;
    let (inst, r) = min_p(net, FormulationKind::Ivr);
    let nlp = ivr_point_of(&inst, net, &r.point).ok_or("ivr point")?;
    let dev = exact.voltages[1]
        .iter()
        .zip(&nlp.voltages[1])
        .map(|(a, b)| (a.re - b.re).abs().max((a.im - b.im).abs()))
        .fold(0.0, f64::max);
    check(dev <= 1e-5, format!("newton vs ivr deviation {dev}"))?;
    Ok(format!("{} cloud points, worst residual {worst_violation:.1e}, newton vs ivr {dev:.1e}", cloud.len()))
}

fn main() {
    let net = two_bus_two_wire();
    let criteria: [Criterion; 10] = [
        ("exact circuit solution", criterion_1),
        ("Kron reduction", criterion_2),
        ("svr2 spurious local solution", criterion_3),
        ("svr1 minimum loss point", criterion_4),
        ("swr2 zero gap", criterion_5),
        ("swr1 equals svr1", criterion_6),
        ("sweep geometry", criterion_7),
        ("ablation", criterion_8),
        ("invariant suites", criterion_9),
        ("oracle equivalence", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&net))).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
