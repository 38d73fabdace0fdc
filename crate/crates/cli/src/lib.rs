//! `impctl`: command-line front end for impulsive-control.
//!
//! Every subcommand reads JSON definitions, prints its main JSON report on
//! stdout and writes CSV/JSON artifacts atomically into `--out-dir`.
//! Exit codes: 0 success (controllable for `check`), 1 configuration or I/O
//! error, 2 validation error, 3 not controllable, 4 inconclusive.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use impulsive_control::control::ControlPair;
use impulsive_control::controllability::{
    controllability_report, default_schedule, CheckOptions, Verdict, DEFAULT_PROBE_SEED, DEFAULT_RANK_TOL,
};
use impulsive_control::gramian::gramian_set;
use impulsive_control::io::{self as fmt, fmt_num, vector_values, SCHEMA_VERSION};
use impulsive_control::propagation::{
    adjoint_post_impulse, adjoint_solution, duality_terms, simulate, Sample, Side, Trajectory,
};
use impulsive_control::quadrature::{QuadratureConfig, DEFAULT_NODES};
use impulsive_control::synthesis::{ImpulseMode, Steering, StopReason};
use impulsive_control::system::{validate_system, ImpulsiveSystem};
use impulsive_control::wave::{control_trace, wave_demo, WaveDemoOptions};
use impulsive_control::{Error, StateVector};
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NOT_CONTROLLABLE: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "impctl", version, about = "Approximate controllability of impulsive linear systems")]
pub struct Cli {
    /// Gauss-Legendre nodes per impulse subinterval.
    #[arg(long, global = true, default_value_t = DEFAULT_NODES)]
    pub quadrature_nodes: usize,
    /// Relative eigenvalue / singular-value threshold.
    #[arg(long, global = true, default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
    /// Seed for the random resolvent probes.
    #[arg(long, global = true, default_value_t = DEFAULT_PROBE_SEED)]
    pub seed: u64,
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward trajectory under a control; writes trajectory.csv.
    Simulate(SimulateArgs),
    /// Adjoint trajectory for a terminal value; writes adjoint.csv.
    Adjoint(AdjointArgs),
    /// Both sides of the forward/adjoint duality identity.
    DualityCheck(DualityArgs),
    /// The four Gramians, their sum and spectra; writes gramian.json.
    Gramian(SystemArg),
    /// Controllability verdict; writes check.json.
    Check(CheckArgs),
    /// Regularized steering to a target; writes synthesis.json and CSVs.
    Synthesize(SynthesizeArgs),
    /// Truncated wave-equation demo; writes wave_demo.json and CSVs.
    WaveDemo(WaveArgs),
}

#[derive(Debug, Args)]
pub struct SystemArg {
    /// System definition JSON.
    #[arg(long)]
    pub system: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArg,
    /// Control JSON; zero control when omitted.
    #[arg(long)]
    pub control: Option<PathBuf>,
    /// Initial state (vector literal or file); zero when omitted.
    #[arg(long)]
    pub x0: Option<String>,
    /// Uniform sample count on [0, b], impulse times are always added.
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct AdjointArgs {
    #[command(flatten)]
    pub system: SystemArg,
    /// Terminal value ψ(b) (vector literal or file).
    #[arg(long)]
    pub phi: String,
    /// Uniform sample count on [0, b], impulse times are always added.
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct DualityArgs {
    #[command(flatten)]
    pub system: SystemArg,
    /// Control JSON; zero control when omitted.
    #[arg(long)]
    pub control: Option<PathBuf>,
    /// Initial state; zero when omitted.
    #[arg(long)]
    pub x0: Option<String>,
    /// Terminal adjoint value.
    #[arg(long)]
    pub phi: String,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub system: SystemArg,
    /// Include the Gramian matrices and spectra in the report.
    #[arg(long)]
    pub emit_matrices: bool,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub system: SystemArg,
    /// Target terminal state (vector literal or file).
    #[arg(long)]
    pub target: String,
    /// Initial state; zero when omitted.
    #[arg(long)]
    pub x0: Option<String>,
    /// Regularization parameter.
    #[arg(long, conflicts_with = "tolerance")]
    pub epsilon: Option<f64>,
    /// Run the ε schedule until the terminal error is below this.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Uniform control samples written to control.csv.
    #[arg(long, default_value_t = 201)]
    pub control_samples: usize,
}

#[derive(Debug, Args)]
pub struct WaveArgs {
    /// Wave model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Target coefficients JSON {"alpha": [...], "beta": [...]}.
    #[arg(long)]
    pub target_coeffs: PathBuf,
    /// Regularization parameter.
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// Truncate the model to this many modes.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Treat the impulses as free controls instead of fixed data.
    #[arg(long)]
    pub free_impulses: bool,
    /// Number of times at which the displacement profile is written.
    #[arg(long, default_value_t = 65)]
    pub profile_times: usize,
    /// Uniform control samples written to control.csv.
    #[arg(long, default_value_t = 201)]
    pub control_samples: usize,
}

/// Failure of a run, mapped onto an exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::Io(_) => EXIT_CONFIG,
            _ => EXIT_VALIDATION,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: EXIT_CONFIG, message }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn with_file<T>(path: &Path, r: impl FnOnce() -> Result<T, Error>) -> Result<T, Failure> {
    r().map_err(|e| {
        let mut f = Failure::from(e);
        if f.code == EXIT_CONFIG {
            f.message = format!("{}: {}", path.display(), f.message);
        }
        f
    })
}

fn load_system(arg: &SystemArg) -> Result<ImpulsiveSystem, Failure> {
    let text = read_text(&arg.system)?;
    let def = with_file(&arg.system, || fmt::parse_system(&text))?;
    let report = validate_system(&def);
    if !report.is_ok() {
        return Err(Failure { code: EXIT_VALIDATION, message: format!("invalid system: {report}") });
    }
    Ok(ImpulsiveSystem::new(def)?)
}

/// A vector literal, or the path of a file holding one.
fn load_vector(what: &str, spec: &str, n: usize) -> Result<StateVector, Failure> {
    let path = Path::new(spec);
    let text = if path.is_file() { read_text(path)? } else { spec.to_string() };
    let v = fmt::parse_vector_literal(&text).map_err(|e| config_error(format!("--{what}: {e}")))?;
    if v.len() != n {
        return Err(Failure {
            code: EXIT_VALIDATION,
            message: format!("--{what} has {} entries, the system has dimension {n}", v.len()),
        });
    }
    Ok(v)
}

fn load_x0(spec: &Option<String>, sys: &ImpulsiveSystem) -> Result<StateVector, Failure> {
    match spec {
        Some(s) => load_vector("x0", s, sys.n()),
        None => Ok(StateVector::zeros(sys.n())),
    }
}

fn load_control(path: &Option<PathBuf>, sys: &ImpulsiveSystem) -> Result<ControlPair, Failure> {
    match path {
        Some(p) => {
            let text = read_text(p)?;
            with_file(p, || fmt::parse_control(&text, sys))
        }
        None => Ok(ControlPair::zero(sys)),
    }
}

fn uniform_grid(b: f64, samples: usize) -> Result<Vec<f64>, Failure> {
    if samples < 2 {
        return Err(config_error("at least two samples are required".into()));
    }
    Ok((0..samples).map(|i| if i + 1 == samples { b } else { b * i as f64 / (samples - 1) as f64 }).collect())
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let io = |e: std::io::Error| config_error(format!("{}: {e}", dir.join(name).display()));
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| io(e.error))?;
    Ok(target)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

struct Context {
    q: QuadratureConfig,
    rank_tol: f64,
    seed: u64,
    out_dir: PathBuf,
}

/// Main report plus the exit code it implies.
struct Outcome {
    report: Value,
    code: i32,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Outcome { report, code: EXIT_OK }
    }
}

fn run_simulate(ctx: &Context, a: &SimulateArgs) -> Result<Outcome, Failure> {
    let sys = load_system(&a.system)?;
    let w = load_control(&a.control, &sys)?;
    let x0 = load_x0(&a.x0, &sys)?;
    let traj = simulate(&sys, &ctx.q, &x0, &w, &uniform_grid(sys.horizon(), a.samples)?)?;
    let path = write_atomic(&ctx.out_dir, "trajectory.csv", &fmt::trajectory_csv(&traj, "x"))?;
    let terminal = &traj.samples.last().expect("grid ends at b").x;
    Ok(Outcome::ok(json!({
        "schema": SCHEMA_VERSION,
        "trajectory": path.display().to_string(),
        "samples": traj.len(),
        "terminal_state": vector_values(terminal),
    })))
}

fn run_adjoint(ctx: &Context, a: &AdjointArgs) -> Result<Outcome, Failure> {
    let sys = load_system(&a.system)?;
    let phi = load_vector("phi", &a.phi, sys.n())?;
    let mut times = uniform_grid(sys.horizon(), a.samples)?;
    times.extend(&sys.knots()[1..=sys.p()]);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut samples = Vec::with_capacity(times.len() + sys.p());
    for t in times {
        if let Some(k) = (1..=sys.p()).find(|&k| sys.knot(k) == t) {
            samples.push(Sample { t, side: Side::Left, x: adjoint_solution(&sys, &phi, t)? });
            samples.push(Sample { t, side: Side::Right, x: adjoint_post_impulse(&sys, &phi, k)? });
        } else {
            samples.push(Sample { t, side: Side::Regular, x: adjoint_solution(&sys, &phi, t)? });
        }
    }
    let traj = Trajectory { samples };
    let path = write_atomic(&ctx.out_dir, "adjoint.csv", &fmt::trajectory_csv(&traj, "psi"))?;
    Ok(Outcome::ok(json!({
        "schema": SCHEMA_VERSION,
        "adjoint": path.display().to_string(),
        "samples": traj.len(),
        "psi_0": vector_values(&traj.samples[0].x),
    })))
}

fn run_duality(ctx: &Context, a: &DualityArgs) -> Result<Outcome, Failure> {
    let sys = load_system(&a.system)?;
    let w = load_control(&a.control, &sys)?;
    let x0 = load_x0(&a.x0, &sys)?;
    let phi = load_vector("phi", &a.phi, sys.n())?;
    let d = duality_terms(&sys, &ctx.q, &x0, &w, &phi)?;
    let report = json!({
        "schema": SCHEMA_VERSION,
        "lhs": d.lhs,
        "rhs": d.rhs,
        "gap": d.gap(),
        "terminal_pairing": d.terminal_pairing,
        "relative_gap": d.gap().abs() / (1.0 + d.terminal_pairing.abs()),
    });
    write_atomic(&ctx.out_dir, "duality.json", &pretty(&report))?;
    Ok(Outcome::ok(report))
}

fn run_gramian(ctx: &Context, a: &SystemArg) -> Result<Outcome, Failure> {
    let sys = load_system(a)?;
    let report = fmt::gramian_report(&gramian_set(&sys, &ctx.q)?);
    write_atomic(&ctx.out_dir, "gramian.json", &pretty(&report))?;
    Ok(Outcome::ok(report))
}

fn run_check(ctx: &Context, a: &CheckArgs) -> Result<Outcome, Failure> {
    let sys = load_system(&a.system)?;
    let opts = CheckOptions { rank_tol: ctx.rank_tol, seed: ctx.seed, ..CheckOptions::default() };
    let r = controllability_report(&sys, &ctx.q, &opts)?;
    let mut report = serde_json::to_value(&r).expect("report serializes");
    let obj = report.as_object_mut().expect("report is an object");
    obj.insert("schema".into(), json!(SCHEMA_VERSION));
    if a.emit_matrices {
        obj.insert("matrices".into(), fmt::gramian_report(&r.gramians));
    }
    write_atomic(&ctx.out_dir, "check.json", &pretty(&report))?;
    let code = match r.verdict {
        Verdict::Controllable => EXIT_OK,
        Verdict::NotControllable => EXIT_NOT_CONTROLLABLE,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    };
    Ok(Outcome { report, code })
}

fn control_files(
    ctx: &Context,
    sys: &ImpulsiveSystem,
    w: &ControlPair,
    samples: usize,
) -> Result<(PathBuf, PathBuf), Failure> {
    if samples < 2 {
        return Err(config_error("at least two control samples are required".into()));
    }
    let trace = control_trace(sys, &w.law, samples)?;
    Ok((
        write_atomic(&ctx.out_dir, "control.csv", &fmt::control_samples_csv(&trace))?,
        write_atomic(&ctx.out_dir, "impulses.csv", &fmt::impulse_table_csv(sys, &w.impulses))?,
    ))
}

fn run_synthesize(ctx: &Context, a: &SynthesizeArgs) -> Result<Outcome, Failure> {
    let sys = load_system(&a.system)?;
    let h = load_vector("target", &a.target, sys.n())?;
    let x0 = load_x0(&a.x0, &sys)?;
    let steering = Steering::new(&sys, &ctx.q, ImpulseMode::Free)?;
    let (result, schedule) = match (a.epsilon, a.tolerance) {
        (Some(eps), None) => (steering.steer(&x0, &h, eps)?, Value::Null),
        (None, Some(tol)) => {
            let out = steering.steer_schedule(&x0, &h, &default_schedule(), tol)?;
            let trace: Vec<Value> = out.trace.iter().map(|(e, err)| json!({"epsilon": e, "error": err})).collect();
            let stop = match out.stop {
                StopReason::ToleranceMet => "tolerance_met",
                StopReason::Plateau => "plateau",
                StopReason::ScheduleExhausted => "schedule_exhausted",
            };
            (out.result, json!({ "trace": trace, "stop": stop }))
        }
        _ => return Err(config_error("exactly one of --epsilon or --tolerance is required".into())),
    };
    let mut report = fmt::synthesis_report(&result);
    let (control, impulses) = control_files(ctx, &sys, &result.control, a.control_samples)?;
    let obj = report.as_object_mut().expect("report is an object");
    obj.insert("target".into(), json!(vector_values(&h)));
    obj.insert("schedule".into(), schedule);
    obj.insert("control_csv".into(), json!(control.display().to_string()));
    obj.insert("impulses_csv".into(), json!(impulses.display().to_string()));
    write_atomic(&ctx.out_dir, "synthesis.json", &pretty(&report))?;
    Ok(Outcome::ok(report))
}

fn run_wave(ctx: &Context, a: &WaveArgs) -> Result<Outcome, Failure> {
    let text = read_text(&a.model)?;
    let mut wm = with_file(&a.model, || fmt::parse_wave_model(&text))?;
    if let Some(m) = a.modes {
        wm = wm.with_modes(m)?;
    }
    let target_text = read_text(&a.target_coeffs)?;
    let (alpha, beta) = with_file(&a.target_coeffs, || fmt::parse_wave_target(&target_text, wm.modes()))?;
    let opts = WaveDemoOptions {
        epsilon: a.epsilon,
        profile_times: a.profile_times,
        free_impulses: a.free_impulses,
        rank_tol: ctx.rank_tol,
    };
    let r = wave_demo(&wm, &alpha, &beta, &ctx.q, &opts)?;

    let mut profile = String::from("t,theta,x\n");
    for pt in &r.profile {
        profile.push_str(&format!("{},{},{}\n", fmt_num(pt.t), fmt_num(pt.theta), fmt_num(pt.x)));
    }
    let profile_path = write_atomic(&ctx.out_dir, "profile.csv", &profile)?;
    let (control, impulses) = control_files(ctx, &r.system, &r.synthesis.control, a.control_samples)?;

    let s = &r.synthesis;
    let report = json!({
        "schema": SCHEMA_VERSION,
        "modes": wm.modes(),
        "n": r.system.n(),
        "impulses": if a.free_impulses { "free" } else { "fixed" },
        "gamma_eigenvalues": r.gamma_eigenvalues,
        "gamma_lambda_min": r.gamma_lambda_min,
        "synthesis_lambda_min": r.synthesis_lambda_min,
        "controllable_at_truncation": r.controllable_at_truncation,
        "resolvent": r.resolvent,
        "target": vector_values(&r.target),
        "synthesis": fmt::synthesis_report(s),
        "terminal_error_norm": s.achieved_error.norm(),
        "identity_bound": s.epsilon * s.phi_hat.norm(),
        "terminal_profile_error": r.terminal_profile_error,
        "profile_csv": profile_path.display().to_string(),
        "control_csv": control.display().to_string(),
        "impulses_csv": impulses.display().to_string(),
    });
    write_atomic(&ctx.out_dir, "wave_demo.json", &pretty(&report))?;
    Ok(Outcome::ok(report))
}

fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    if !(cli.rank_tol > 0.0 && cli.rank_tol < 1.0) {
        return Err(config_error(format!("--rank-tol must lie in (0, 1), got {}", cli.rank_tol)));
    }
    let ctx = Context {
        q: QuadratureConfig::new(cli.quadrature_nodes)?,
        rank_tol: cli.rank_tol,
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
    };
    match &cli.command {
        Command::Simulate(a) => run_simulate(&ctx, a),
        Command::Adjoint(a) => run_adjoint(&ctx, a),
        Command::DualityCheck(a) => run_duality(&ctx, a),
        Command::Gramian(a) => run_gramian(&ctx, a),
        Command::Check(a) => run_check(&ctx, a),
        Command::Synthesize(a) => run_synthesize(&ctx, a),
        Command::WaveDemo(a) => run_wave(&ctx, a),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code. The report goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(outcome) => {
            if out.write_all(pretty(&outcome.report).as_bytes()).is_err() {
                return EXIT_CONFIG;
            }
            outcome.code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
