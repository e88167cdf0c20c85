//! `mcopf` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use mcopf::analysis::regression::{run_paper_checks, RegressionConfig};
use mcopf::analysis::{
    feasibility_matrix, format_sig9, relaxation_gap, sweep_csv, sweep_objective, Candidate, SweepReport,
};
use mcopf::formulations::{ivr_point_of, load_voltage_magnitudes, voltage_magnitudes};
use mcopf::netmodel::{parse_network, two_bus_two_wire};
use mcopf::solvers::{
    export_problem, solve, solve_power_flow_newton, ExportFormat, Initialization, SolveResult, SolverOptions,
};
use mcopf::{build_formulation, Error, FormulationKind, IvrPoint, Network};

#[derive(Parser, Debug)]
#[command(name = "mcopf", version, about = "Multiconductor optimal power flow formulations and relaxation gaps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args, Debug)]
struct Shared {
    /// Network JSON file; the bundled two-bus case when omitted.
    #[arg(long, global = true)]
    network: Option<PathBuf>,
    #[arg(long, global = true, value_enum, ignore_case = true)]
    formulation: Option<Kind>,
    /// Objective direction: minimize cos(theta) P + sin(theta) Q.
    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Feasibility tolerance for `check`.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    svg: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1e-8)]
    feas_tol: f64,
    #[arg(long, global = true, default_value_t = 1e-8)]
    opt_tol: f64,
    #[arg(long, global = true, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, global = true, default_value_t = 8)]
    multistart: usize,
    #[arg(long, global = true, value_enum, default_value_t = Init::Flat)]
    init: Init,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one formulation for one objective direction.
    Solve,
    /// Sweep the objective direction around the circle and report (P, Q).
    Sweep,
    /// Test a stored operating point against every formulation.
    Check {
        /// Point file (JSON keyed by element ids).
        solution: PathBuf,
    },
    /// Write a formulation in a solver-neutral format.
    Export {
        #[arg(long, value_enum, default_value_t = Format::QcqpJson)]
        format: Format,
    },
    /// Run the regression suite on the bundled case.
    Paper {
        /// Relative change applied to every branch impedance.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        perturb_z: f64,
        #[arg(long, default_value_t = 41)]
        grid: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Ivr,
    Svr1,
    Svr2,
    Swr1,
    Swr2,
}

impl From<Kind> for FormulationKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Ivr => FormulationKind::Ivr,
            Kind::Svr1 => FormulationKind::Svr1,
            Kind::Svr2 => FormulationKind::Svr2,
            Kind::Swr1 => FormulationKind::Swr1,
            Kind::Swr2 => FormulationKind::Swr2,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Init {
    Flat,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    QcqpJson,
    ConicText,
}

/// Stdout writes that tolerate a closed pipe.
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

/// Exit status 1: the computation ran but did not succeed.
const FAILED: u8 = 1;
/// Exit status 2: the input was rejected.
const BAD_INPUT: u8 = 2;

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn bad_input(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: BAD_INPUT, error: error.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoSolution(_) | Error::SingularLoad(_) => FAILED,
            _ => BAD_INPUT,
        };
        Failure { code, error: e.into() }
    }
}

type Outcome = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve => cmd_solve(&cli.shared),
        Command::Sweep => cmd_sweep(&cli.shared),
        Command::Check { solution } => cmd_check(&cli.shared, solution),
        Command::Export { format } => cmd_export(&cli.shared, *format),
        Command::Paper { perturb_z, grid } => cmd_paper(&cli.shared, *perturb_z, *grid),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn solver_options(s: &Shared) -> Result<SolverOptions, Failure> {
    let opts = SolverOptions {
        feas_tol: s.feas_tol,
        opt_tol: s.opt_tol,
        max_iter: s.max_iter,
        multistart: s.multistart,
        initialization: match s.init {
            Init::Flat => Initialization::Flat,
            Init::Random => Initialization::Random,
        },
        seed: s.seed,
    };
    opts.validate()?;
    Ok(opts)
}

fn load_network(s: &Shared) -> Result<Network, Failure> {
    match &s.network {
        None => Ok(two_bus_two_wire()),
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display())).map_err(bad_input)?;
            Ok(parse_network(&bytes)?)
        }
    }
}

fn require_kind(s: &Shared) -> Result<FormulationKind, Failure> {
    s.formulation.map(Into::into).ok_or_else(|| bad_input(anyhow::anyhow!("--formulation is required")))
}

fn write_output(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display())).map_err(bad_input)
}

fn fmt_c(z: Complex64) -> String {
    format!("{:.6} {} j{:.6}", z.re, if z.im < 0.0 { '-' } else { '+' }, z.im.abs())
}

fn cmd_solve(s: &Shared) -> Outcome {
    let net = load_network(s)?;
    let kind = require_kind(s)?;
    let opts = solver_options(s)?;
    let inst = build_formulation(&net, kind)?;
    let res = solve(&inst, &net, s.theta, &opts)?;

    let exact_p = solve_power_flow_newton(&net).ok().map(|p| p.dispatch(&net).iter().map(|z| z.re).sum::<f64>());
    let total: Complex64 = res.dispatch.iter().sum();
    let gap = exact_p.and_then(|pe| relaxation_gap(pe, total.re).ok());
    let mags = voltage_magnitudes(&inst, &net, &res.point);
    let ptn = load_voltage_magnitudes(&inst, &net, &res.point);

    if let Some(path) = &s.out {
        let point = ivr_point_of(&inst, &net, &res.point)
            .ok_or_else(|| Failure { code: FAILED, error: anyhow::anyhow!("{kind} solution has no physical point") })?;
        write_output(path, point.to_json(&net).as_bytes())?;
    }

    if s.json {
        let doc = json!({
            "formulation": kind.as_str(),
            "theta": s.theta,
            "status": res.status.as_str(),
            "objective": res.objective,
            "iterations": res.iterations,
            "dispatch": net.generators.iter().zip(&res.dispatch)
                .map(|(g, z)| json!({ "generator": g.id, "p": z.re, "q": z.im })).collect::<Vec<_>>(),
            "voltage_magnitudes": net.buses.iter().zip(&mags)
                .map(|(b, m)| json!({ "bus": b.id, "magnitudes": m })).collect::<Vec<_>>(),
            "phase_to_neutral": net.loads.iter().zip(&ptn)
                .map(|(d, m)| json!({ "load": d.id, "magnitude": m })).collect::<Vec<_>>(),
            "residuals": {
                "equality_inf": res.residuals.equality_inf,
                "inequality_violation": res.residuals.inequality_violation,
                "psd_min_eigenvalues": res.residuals.psd_min_eigenvalues,
            },
            "local_solutions": res.local_solutions.iter()
                .map(|l| json!({ "objective": l.objective, "starts": l.starts })).collect::<Vec<_>>(),
            "gap_vs_ivr": gap,
        });
        outln!("{}", serde_json::to_string_pretty(&doc).expect("json value serializes"));
    } else {
        print_solve(&net, kind, s.theta, &res, &mags, &ptn, gap);
    }
    Ok(if res.is_optimal() { 0 } else { FAILED })
}

fn print_solve(
    net: &Network,
    kind: FormulationKind,
    theta: f64,
    res: &SolveResult,
    mags: &[Vec<f64>],
    ptn: &[f64],
    gap: Option<f64>,
) {
    outln!("formulation  {kind}");
    outln!("theta        {theta}");
    outln!("status       {}", res.status);
    outln!("objective    {}", format_sig9(res.objective));
    outln!("iterations   {}", res.iterations);
    for (g, z) in net.generators.iter().zip(&res.dispatch) {
        outln!("dispatch     {}: {}", g.id, fmt_c(*z));
    }
    for (b, m) in net.buses.iter().zip(mags) {
        let list: Vec<String> = m.iter().map(|&v| format_sig9(v)).collect();
        outln!("|U| bus      {}: {}", b.id, list.join(" "));
    }
    for (d, m) in net.loads.iter().zip(ptn) {
        outln!("|U| load     {}: {} (phase-to-neutral)", d.id, format_sig9(*m));
    }
    let r = &res.residuals;
    let psd = if r.psd_min_eigenvalues.is_empty() { "n/a".to_string() } else { format!("{:.2e}", r.psd_min()) };
    outln!(
        "residuals    equality {:.2e}, inequality {:.2e}, psd min eigenvalue {psd}",
        r.equality_inf,
        r.inequality_violation
    );
    if res.local_solutions.len() > 1 {
        for l in &res.local_solutions {
            outln!("local        objective {} from starts {:?}", format_sig9(l.objective), l.starts);
        }
    }
    if let Some(g) = gap {
        outln!("gap vs ivr   {} %", format_sig9(g));
    }
}

fn cmd_sweep(s: &Shared) -> Outcome {
    let net = load_network(s)?;
    let opts = solver_options(s)?;
    let samples = s.samples.unwrap_or(64);
    let kinds: Vec<FormulationKind> = match s.formulation {
        Some(k) => vec![k.into()],
        None => FormulationKind::ALL.to_vec(),
    };
    let reports = kinds.iter().map(|&k| sweep_objective(&net, k, samples, &opts)).collect::<mcopf::Result<Vec<_>>>()?;

    let text = if s.json {
        let doc: Vec<_> = reports
            .iter()
            .map(|r| {
                json!({
                    "formulation": r.kind.as_str(),
                    "samples": r.samples,
                    "records": r.records.iter()
                        .map(|x| json!({ "theta": x.theta, "status": x.status.as_str(), "p": x.p, "q": x.q }))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::to_string_pretty(&doc).expect("json value serializes") + "\n"
    } else {
        csv(&reports)
    };
    match &s.out {
        Some(path) => write_output(path, text.as_bytes())?,
        None => out!("{text}"),
    }
    if let Some(path) = &s.svg {
        write_output(path, svg::scatter(&reports).as_bytes())?;
    }
    let all_optimal = reports.iter().all(|r| r.optimal().count() == r.records.len());
    Ok(if all_optimal { 0 } else { FAILED })
}

/// A single sweep uses the plain layout; several get a leading `kind` column.
fn csv(reports: &[SweepReport]) -> String {
    if let [single] = reports {
        return sweep_csv(single);
    }
    let mut out = String::from("kind,theta,status,P,Q\n");
    for r in reports {
        for line in sweep_csv(r).lines().skip(1) {
            out.push_str(&format!("{},{line}\n", r.kind));
        }
    }
    out
}

fn cmd_check(s: &Shared, solution: &Path) -> Outcome {
    let net = load_network(s)?;
    let bytes = fs::read(solution).with_context(|| format!("reading {}", solution.display())).map_err(bad_input)?;
    let point = IvrPoint::from_json(&bytes, &net).map_err(bad_input)?;
    let name = solution.file_stem().map_or("point".into(), |n| n.to_string_lossy().into_owned());
    let m = feasibility_matrix(&[(name, Candidate::Physical(point))], &net, &FormulationKind::ALL, s.tol)?;
    if s.json {
        let row: serde_json::Map<String, serde_json::Value> =
            m.kinds.iter().zip(&m.entries[0]).map(|(k, e)| (k.as_str().to_string(), json!(e))).collect();
        let doc = json!({ "point": m.names[0], "tol": m.tol, "feasible": row });
        outln!("{}", serde_json::to_string_pretty(&doc).expect("json value serializes"));
    } else {
        out!("{m}");
    }
    Ok(0)
}

fn cmd_export(s: &Shared, format: Format) -> Outcome {
    let net = load_network(s)?;
    let kind = require_kind(s)?;
    let inst = build_formulation(&net, kind)?;
    let format = match format {
        Format::QcqpJson => ExportFormat::QcqpJson,
        Format::ConicText => ExportFormat::ConicText,
    };
    let bytes = export_problem(&inst, format, s.theta)?;
    match &s.out {
        Some(path) => write_output(path, &bytes)?,
        None => out!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(0)
}

fn cmd_paper(s: &Shared, perturb_z: f64, grid: usize) -> Outcome {
    if !(perturb_z > -1.0) {
        return Err(bad_input(anyhow::anyhow!("--perturb-z must exceed -1")));
    }
    if grid < 2 {
        return Err(bad_input(anyhow::anyhow!("--grid must be at least 2")));
    }
    let defaults = RegressionConfig::default();
    let cfg = RegressionConfig {
        perturb_z,
        samples: s.samples.unwrap_or(defaults.samples),
        grid,
        opts: solver_options(s)?,
        ..defaults
    };
    let rows = run_paper_checks(&cfg)?;
    let all_pass = rows.iter().all(|r| r.pass);
    if s.json {
        let doc = json!({ "all_pass": all_pass, "rows": rows });
        outln!("{}", serde_json::to_string_pretty(&doc).expect("json value serializes"));
    } else {
        outln!("{:<3} {:<5} {:<44} {:>22} {:>22} {:>6}", "#", "", "check", "expected", "observed", "tol");
        for r in &rows {
            let mark = if r.pass { "pass" } else { "FAIL" };
            let flag = if r.pass { "" } else { "  <<<" };
            outln!(
                "{:<3} {:<5} {:<44} {:>22} {:>22} {:>6}{flag}",
                r.criterion,
                mark,
                r.name,
                r.expected,
                r.observed,
                r.tolerance
            );
        }
        let failed = rows.iter().filter(|r| !r.pass).count();
        outln!("{} of {} checks passed", rows.len() - failed, rows.len());
    }
    Ok(if all_pass { 0 } else { FAILED })
}
