//! Command-line front end: parse JSON descriptors, dispatch to the library,
//! emit machine-readable reports (schema "symindex/1").
//!
//! Exit codes: 0 success, 2 schema violation, 3 module error (with a
//! structured error payload on stdout/output).

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Deserialize;
use serde_json::{json, Value};
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use symindex::convexbody::{
    capacity_hat, capacity_hat0, mollify, pb_lower_bound, pb_lower_bound_exact,
    spec_window_report, PbRegime,
};
use symindex::czindex::cz_index;
use symindex::descriptor::{
    BodyDescriptor, HamiltonianDescriptor, MaslovDescriptor, PathDescriptor, ProfileDescriptor,
    ToricModelDescriptor,
};
use symindex::error::SymError;
use symindex::hamflow;
use symindex::maslov::{maslov_index, MaslovOptions};
use symindex::report::{error_report, half_str, Report};
use symindex::toric::{loop_cz_at_fixed_point, rotation_lemma_gap, special_fiber_point, tilde_action};

#[derive(Parser)]
#[command(name = "symindex", version, about = "Indices, capacities, and spectra of linear symplectic models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Input JSON file (defaults to stdin).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output file, or "-" for stdout.
    #[arg(long, global = true, default_value = "-")]
    output: String,
    /// Tolerance profile for crossing detection.
    #[arg(long, global = true, value_enum, default_value_t = TolProfile::Default)]
    tol_profile: TolProfile,
    /// Integration steps for flows and linearizations.
    #[arg(long, global = true, default_value_t = 2000)]
    steps: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Conley-Zehnder index of a symplectic path.
    Index,
    /// Maslov index of a Lagrangian motion against a reference.
    Maslov,
    /// Flow, action, and linearized indices of a Hamiltonian orbit.
    Hamiltonian,
    /// Hat-capacities of a convex body (with certificates).
    Capacity,
    /// Orbit-spectrum window report for a profile Hamiltonian.
    Spec,
    /// Poisson-bracket lower bound.
    Pb,
    /// Linear toric model operations.
    Toric,
}

impl Cmd {
    fn name(self) -> &'static str {
        match self {
            Cmd::Index => "index",
            Cmd::Maslov => "maslov",
            Cmd::Hamiltonian => "hamiltonian",
            Cmd::Capacity => "capacity",
            Cmd::Spec => "spec",
            Cmd::Pb => "pb",
            Cmd::Toric => "toric",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TolProfile {
    Default,
    Strict,
}

impl TolProfile {
    fn options(self) -> MaslovOptions<f64> {
        match self {
            TolProfile::Default => MaslovOptions::default(),
            TolProfile::Strict => MaslovOptions {
                grid: 1024,
                crossing_tol: 1e-9,
                merge_tol: 1e-11,
                ..MaslovOptions::default()
            },
        }
    }

    fn describe(self) -> Value {
        match self {
            TolProfile::Default => json!({
                "profile": "default", "grid": 512, "crossing_tol": 1e-8, "merge_tol": 1e-10
            }),
            TolProfile::Strict => json!({
                "profile": "strict", "grid": 1024, "crossing_tol": 1e-9, "merge_tol": 1e-11
            }),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let input = match read_input(&cli.input) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read input: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = cli.tol_profile.options();
    let run: Result<Result<Value, SymError>, String> = dispatch(cli.cmd, &input, &opts, cli.steps);
    match run {
        Err(schema_err) => {
            eprintln!("error: schema violation: {schema_err}");
            ExitCode::from(2)
        }
        Ok(Err(module_err)) => {
            let payload = error_report(cli.cmd.name(), &input, &module_err);
            if write_output(&cli.output, &payload).is_err() {
                eprintln!("error: cannot write output");
            }
            ExitCode::from(3)
        }
        Ok(Ok(results)) => {
            let mut report = Report::new(
                cli.cmd.name(),
                &input,
                cli.tol_profile.describe(),
                results,
            );
            if let Some(certs) = report.results.as_object_mut().and_then(|m| m.remove("__certificates")) {
                report = report.with_certificates(certs);
            }
            match write_output(&cli.output, &report.to_json_string()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: cannot write output: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

fn read_input(path: &Option<PathBuf>) -> std::io::Result<Vec<u8>> {
    match path {
        Some(p) => std::fs::read(p),
        None => {
            let mut buf = Vec::new();
            std::io::stdin().read_to_end(&mut buf)?;
            Ok(buf)
        }
    }
}

fn write_output(target: &str, content: &str) -> std::io::Result<()> {
    if target == "-" {
        print!("{content}");
        Ok(())
    } else {
        std::fs::write(target, content)
    }
}

/// Outer error: schema violation (exit 2). Inner error: module error (3).
fn dispatch(
    cmd: Cmd,
    input: &[u8],
    opts: &MaslovOptions<f64>,
    steps: usize,
) -> Result<Result<Value, SymError>, String> {
    match cmd {
        Cmd::Index => {
            let d: PathDescriptor = parse(input)?;
            Ok(cmd_index(&d, opts))
        }
        Cmd::Maslov => {
            let d: MaslovDescriptor = parse(input)?;
            Ok(cmd_maslov(&d, opts))
        }
        Cmd::Hamiltonian => {
            let d: HamiltonianInput = parse(input)?;
            Ok(cmd_hamiltonian(&d, opts, steps))
        }
        Cmd::Capacity => {
            let d: CapacityInput = parse(input)?;
            Ok(cmd_capacity(&d))
        }
        Cmd::Spec => {
            let d: SpecInput = parse(input)?;
            Ok(cmd_spec(&d))
        }
        Cmd::Pb => {
            let d: PbInput = parse(input)?;
            Ok(cmd_pb(&d))
        }
        Cmd::Toric => {
            let d: ToricInput = parse(input)?;
            Ok(cmd_toric(&d))
        }
    }
}

fn parse<'a, D: Deserialize<'a>>(input: &'a [u8]) -> Result<D, String> {
    serde_json::from_slice(input).map_err(|e| e.to_string())
}

fn cmd_index(d: &PathDescriptor, opts: &MaslovOptions<f64>) -> Result<Value, SymError> {
    let path = d.build()?;
    let idx = cz_index(&path, opts)?;
    Ok(json!({
        "cz": half_str(idx.value),
        "kernel_dim": idx.kernel_dim,
        "max_cz": half_str(idx.max_value),
        "crossing_count": idx.crossings.len(),
        "perturbation_used": idx.perturbation_used,
    }))
}

fn cmd_maslov(d: &MaslovDescriptor, opts: &MaslovOptions<f64>) -> Result<Value, SymError> {
    let (path, l0, form) = d.build()?;
    let res = maslov_index(&path, &l0, &form, opts)?;
    let crossings: Vec<Value> = res
        .crossings
        .iter()
        .map(|c| {
            json!({
                "t": c.t,
                "endpoint": c.endpoint,
                "kernel_dim": c.kernel_dim,
                "signature": {
                    "plus": c.signature.p_plus,
                    "zero": c.signature.p_zero,
                    "minus": c.signature.p_minus,
                },
                "contribution": half_str(c.contribution),
            })
        })
        .collect();
    Ok(json!({
        "maslov": half_str(res.index),
        "crossings": crossings,
        "perturbation_used": res.perturbation_used,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianInput {
    hamiltonian: HamiltonianDescriptor,
    x0: Vec<f64>,
    #[serde(default)]
    kappa: Option<f64>,
}

fn cmd_hamiltonian(
    d: &HamiltonianInput,
    opts: &MaslovOptions<f64>,
    steps: usize,
) -> Result<Value, SymError> {
    let h = d.hamiltonian.build()?;
    let x0 = DVector::from_vec(d.x0.clone());
    let rec = hamflow::orbit_record(&h, &x0, steps, opts, None)?;
    let action_hat = match d.kappa {
        Some(k) if k != 0.0 => {
            let shift = hamflow::floor_half_shift(h.n, rec.index.max_value);
            Some(rec.action + shift as f64 / k)
        }
        Some(_) => return Err(SymError::InvalidInput("kappa must be nonzero".into())),
        None => None,
    };
    Ok(json!({
        "period_check": rec.period_check,
        "periodic": rec.periodic,
        "action": rec.action,
        "cz": half_str(rec.index.value),
        "kernel_dim": rec.index.kernel_dim,
        "max_cz": half_str(rec.index.max_value),
        "action_hat": action_hat,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacityInput {
    body: BodyDescriptor,
    #[serde(default)]
    delta: Option<f64>,
}

fn cmd_capacity(d: &CapacityInput) -> Result<Value, SymError> {
    let body = d.body.build()?;
    let c = capacity_hat(&body)?;
    let c0 = capacity_hat0(&body)?;
    let mut certs = json!({
        "C_hat": {"bound": c.bound, "guard": c.guard, "closed_form": c.closed_form},
        "C_hat0": {"bound": c0.bound, "guard": c0.guard, "closed_form": c0.closed_form},
    });
    if let Some(delta) = d.delta {
        let mg = mollify(&body, delta)?;
        certs["mollify"] = json!({
            "delta": delta,
            "hess_lb": mg.hess_lb,
            "guard": mg.guard,
        });
    }
    Ok(json!({
        "C_hat": c.value,
        "C_hat0": c0.value,
        "__certificates": certs,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecInput {
    body: BodyDescriptor,
    profile: ProfileDescriptor,
    kappa: f64,
    delta: f64,
    levels: Vec<f64>,
}

fn cmd_spec(d: &SpecInput) -> Result<Value, SymError> {
    let body = d.body.build()?;
    let (a, _) = symindex::convexbody::certify_hessian(&body)?;
    let profile = d.profile.build(a)?;
    profile.validate()?;
    let rep = spec_window_report(&body, &profile, d.kappa, d.delta, &d.levels)?;
    let entries: Vec<Value> = rep
        .entries
        .iter()
        .map(|e| {
            json!({
                "level": e.level,
                "block": e.block,
                "action": e.action,
                "action_hat": e.action_hat,
                "max_cz": half_str(e.max_cz),
                "periodic": e.periodic,
                "inside_window": e.inside_window,
            })
        })
        .collect();
    Ok(json!({
        "kappa": rep.kappa,
        "threshold": rep.threshold,
        "entries": entries,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PbInput {
    d: u32,
    cap: f64,
    /// Optional exact representation: cap = (num / den) * pi.
    #[serde(default)]
    cap_pi: Option<(i64, i64)>,
    regime: String,
}

fn cmd_pb(d: &PbInput) -> Result<Value, SymError> {
    let regime = match d.regime.as_str() {
        "kappa_nonpos_or_small_c0" => PbRegime::KappaNonposOrSmallC0,
        "kappa_pos_c" => PbRegime::KappaPosC,
        other => {
            return Err(SymError::InvalidInput(format!("unknown regime '{other}'")));
        }
    };
    let value = pb_lower_bound(d.d, d.cap, regime)?;
    let exact = match d.cap_pi {
        Some((num, den)) => {
            let (n, dd) = pb_lower_bound_exact(d.d, num, den)?;
            let frac = if n == 1 {
                format!("1/({dd}*pi)")
            } else {
                format!("{n}/({dd}*pi)")
            };
            Some(json!({"num": n, "den": dd, "of": "1/pi", "display": frac}))
        }
        None => None,
    };
    Ok(json!({
        "value": value,
        "exact": exact,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ToricInput {
    model: ToricModelDescriptor,
    op: ToricOp,
}

#[derive(Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
enum ToricOp {
    SpecialFiber,
    LoopCz { fixed_point: usize, m: Vec<i64> },
    TildeAction { c: f64, m: Vec<i64>, n_div: i64, p: Vec<f64> },
    RotationLemma { y: f64, m: i64, n_div: i64 },
}

fn cmd_toric(d: &ToricInput) -> Result<Value, SymError> {
    let model = d.model.build()?;
    match &d.op {
        ToricOp::SpecialFiber => {
            let (p, res) = special_fiber_point(&model)?;
            Ok(json!({
                "p_star": p.iter().copied().collect::<Vec<f64>>(),
                "residual": res,
                "kappa": model.kappa,
            }))
        }
        ToricOp::LoopCz { fixed_point, m } => {
            let v = loop_cz_at_fixed_point(&model, *fixed_point, m)?;
            Ok(json!({"loop_cz": v}))
        }
        ToricOp::TildeAction { c, m, n_div, p } => {
            let v = tilde_action(&model, *c, m, *n_div, &DVector::from_vec(p.clone()))?;
            Ok(json!({"tilde_action": v}))
        }
        ToricOp::RotationLemma { y, m, n_div } => {
            let (lhs, rhs, holds) = rotation_lemma_gap(*y, *m, *n_div)?;
            Ok(json!({"lhs": lhs, "rhs": rhs, "holds": holds}))
        }
    }
}
