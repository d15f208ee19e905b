//! Command-line driver for the escape-time numerics.
//!
//! Subcommands: `geometry inspect`, `xray verify`, `greens solve`,
//! `mfpt asymptotic`, `mfpt simulate`, `mfpt compare`. Configuration is
//! strict TOML (unknown keys rejected, parse errors reported with line and
//! column); every run embeds its fully resolved config in the JSON report,
//! and re-running that config reproduces the report bit for bit.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 acceptance-check failure (a failed identity in `xray verify` or a
//! `mfpt compare --tolerance` violation).

pub mod config;
pub mod pipeline;
pub mod report;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use escape_core::geometry::Surface;
use escape_core::sim::{AbsorbingSet, DtExtrapolation, MfptEstimate, ReflectionScheme, SimConfig};
use escape_core::xray::identity_suite;
use nalgebra::Vector3;

use config::{
    load_run_config, load_shape, load_window, parse_sweep, resolve_jobs, AsymptoticParams,
    CompareParams, GreensParams, InspectParams, MethodSection, OutputSection, RunConfig,
    ShapeSection, SimulateParams, StartSpec, WindowSection, XrayParams, SCHEMA_VERSION,
};
use pipeline::{
    average_value, per_path_rows, run_simulation, solve_green, AverageValue, ExpansionPipeline,
    FieldPoint, PairingSummary, SolveSummary,
};
use report::{write_csv, Report};

/// Errors ranked by exit code: config 2, numerics/io 3, failed check 4.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(escape_core::Error),
    Io(String),
    Check(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
            CliError::Check(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Numerical(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "io: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<escape_core::Error> for CliError {
    fn from(e: escape_core::Error) -> Self {
        match e {
            escape_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Numerical(other),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "escape",
    version,
    about = "Mean escape time of Brownian particles through a small absorbing boundary window",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: TopCommand,
}

#[derive(Subcommand)]
enum TopCommand {
    /// Boundary-shape inspection.
    #[command(subcommand)]
    Geometry(GeometryCommand),
    /// Disk-operator identity checks.
    #[command(subcommand)]
    Xray(XrayCommand),
    /// Neumann Green-function boundary solver.
    #[command(subcommand)]
    Greens(GreensCommand),
    /// Escape-time estimators: expansion, particle simulation, comparison.
    #[command(subcommand)]
    Mfpt(MfptCommand),
}

#[derive(Subcommand)]
enum GeometryCommand {
    /// Report measures, scale, and curvature data of a shape.
    Inspect(InspectArgs),
}

#[derive(Subcommand)]
enum XrayCommand {
    /// Run the disk-operator identity suite and report each check.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum GreensCommand {
    /// Solve the boundary Green function poled at a point, with a
    /// mesh-refinement convergence table. CSV dump: node,distance,green_value.
    Solve(SolveArgs),
}

#[derive(Subcommand)]
enum MfptCommand {
    /// Evaluate the small-window expansion of the escape time.
    /// CSV dump: sweep rows, or field samples when --field-at is given.
    Asymptotic(AsymptoticArgs),
    /// Monte Carlo escape-time estimate from reflected Brownian paths.
    /// CSV dump: path,outcome,time.
    Simulate(SimulateArgs),
    /// Expansion vs. simulation table.
    /// CSV dump: epsilon,asymptotic,simulated,std_error,rel_diff.
    Compare(CompareArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug)]
struct IoArgs {
    /// JSON report destination ("-" = stdout).
    #[arg(long)]
    output: Option<String>,
    /// CSV data dump destination (columns fixed per subcommand).
    #[arg(long)]
    csv: Option<String>,
    /// Re-run a fully resolved config file (conflicts with run flags).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the resolved config as TOML.
    #[arg(long)]
    emit_config: Option<PathBuf>,
    /// Worker threads (default: ESCAPE_JOBS, then available parallelism).
    #[arg(long, short = 'j')]
    jobs: Option<usize>,
}

impl IoArgs {
    /// Builds the output section, rejecting run flags when --config is used.
    fn resolve_output(&self) -> OutputSection {
        OutputSection {
            json: self.output.clone().unwrap_or_else(|| "-".into()),
            csv: self.csv.clone(),
        }
    }

    fn reject_with_config(&self, extra_flags_used: bool) -> CliResult<()> {
        if self.config.is_some()
            && (extra_flags_used || self.output.is_some() || self.csv.is_some() || self.jobs.is_some())
        {
            return Err(CliError::Config(
                "--config re-runs a resolved file; pass either --config or run flags, not both"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// Shape config file (TOML with a [shape] table).
    #[arg(long, required_unless_present = "config")]
    shape: Option<PathBuf>,
    /// Probe point "x,y,z"; curvature is reported at its boundary projection.
    #[arg(long, value_parser = parse_point)]
    at: Option<[f64; 3]>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Window aspect ratio the disk operators are built for.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Radial quadrature resolution N (angular resolution is 2N).
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Shape config file (TOML with a [shape] table).
    #[arg(long, required_unless_present = "config")]
    shape: Option<PathBuf>,
    /// Boundary point "x,y,z" the solve is poled at.
    #[arg(long, value_parser = parse_point, required_unless_present = "config")]
    at: Option<[f64; 3]>,
    /// Finest icosphere refinement level (10·4^level + 2 nodes); the
    /// convergence table covers levels 1..=N.
    #[arg(long, default_value_t = 3)]
    mesh: usize,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
struct AsymptoticArgs {
    /// Shape config file (TOML with a [shape] table).
    #[arg(long, required_unless_present = "config")]
    shape: Option<PathBuf>,
    /// Window config file (TOML with a [window] table).
    #[arg(long, required_unless_present = "config")]
    window: Option<PathBuf>,
    /// Icosphere refinement level of the Green/auxiliary-field solve.
    #[arg(long, default_value_t = 2)]
    mesh: usize,
    /// Disk-pairing radial resolution.
    #[arg(long, default_value_t = 32)]
    disk_nr: usize,
    /// Disk-pairing angular resolution.
    #[arg(long, default_value_t = 64)]
    disk_ntheta: usize,
    /// ε sweep "start:end:count" (linearly spaced, inclusive).
    #[arg(long)]
    sweep_eps: Option<String>,
    /// Interior evaluation point "x,y,z" (repeatable).
    #[arg(long, value_parser = parse_point)]
    field_at: Vec<[f64; 3]>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Shape config file (TOML with a [shape] table).
    #[arg(long, required_unless_present = "config")]
    shape: Option<PathBuf>,
    /// Window config file (TOML with a [window] table).
    #[arg(long, required_unless_present = "config")]
    window: Option<PathBuf>,
    /// Number of independent paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Euler time step (default (ε/10)²).
    #[arg(long)]
    dt: Option<f64>,
    /// Base seed of the per-path counter streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Step budget per path (default: horizon of 2000·scale² time units).
    #[arg(long)]
    max_steps: Option<usize>,
    /// "uniform" or a fixed interior point "x,y,z".
    #[arg(long, value_parser = parse_start)]
    start: Option<StartSpec>,
    /// Also run at 4Δt and report the bias-cancelling combination
    /// 2τ̂(Δt) − τ̂(4Δt).
    #[arg(long)]
    extrapolate: bool,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Shape config file (TOML with a [shape] table).
    #[arg(long, required_unless_present = "config")]
    shape: Option<PathBuf>,
    /// Window config file (TOML with a [window] table).
    #[arg(long, required_unless_present = "config")]
    window: Option<PathBuf>,
    /// Icosphere refinement level of the expansion's boundary solve.
    #[arg(long, default_value_t = 2)]
    mesh: usize,
    /// Disk-pairing radial resolution.
    #[arg(long, default_value_t = 32)]
    disk_nr: usize,
    /// Disk-pairing angular resolution.
    #[arg(long, default_value_t = 64)]
    disk_ntheta: usize,
    /// Number of independent paths per row.
    #[arg(long)]
    paths: Option<usize>,
    /// Euler time step shared by all rows (default (ε/10)² at window.eps).
    #[arg(long)]
    dt: Option<f64>,
    /// Base seed of the per-path counter streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Step budget per path (default: horizon of 2000·scale² time units).
    #[arg(long)]
    max_steps: Option<usize>,
    /// "uniform" (compare domain averages) or "x,y,z" (compare the field at
    /// a fixed start point).
    #[arg(long, value_parser = parse_start)]
    start: Option<StartSpec>,
    /// Extrapolate the simulation in Δt before comparing.
    #[arg(long)]
    extrapolate: bool,
    /// ε sweep "start:end:count"; each row is simulated separately.
    #[arg(long)]
    sweep_eps: Option<String>,
    /// Exit with the acceptance-failure code when any |rel_diff| exceeds
    /// this bound.
    #[arg(long)]
    tolerance: Option<f64>,
    #[command(flatten)]
    io: IoArgs,
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected \"x,y,z\", got {s:?}"));
    }
    let mut p = [0.0; 3];
    for (slot, part) in p.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("expected \"x,y,z\", got {s:?}"))?;
    }
    Ok(p)
}

fn parse_start(s: &str) -> Result<StartSpec, String> {
    if s == "uniform" {
        Ok(StartSpec::Named("uniform".into()))
    } else {
        parse_point(s).map(StartSpec::Point)
    }
}

/// Parses argv, runs the selected pipeline, and maps errors to exit codes.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        TopCommand::Geometry(GeometryCommand::Inspect(args)) => {
            let (cfg, emit) = resolve_inspect(args)?;
            emit_resolved(&cfg, emit.as_deref())?;
            execute_inspect(cfg)
        }
        TopCommand::Xray(XrayCommand::Verify(args)) => {
            let (cfg, emit) = resolve_verify(args)?;
            emit_resolved(&cfg, emit.as_deref())?;
            execute_verify(cfg)
        }
        TopCommand::Greens(GreensCommand::Solve(args)) => {
            let (cfg, emit) = resolve_solve(args)?;
            emit_resolved(&cfg, emit.as_deref())?;
            execute_solve(cfg)
        }
        TopCommand::Mfpt(MfptCommand::Asymptotic(args)) => {
            let (cfg, emit) = resolve_asymptotic(args)?;
            emit_resolved(&cfg, emit.as_deref())?;
            execute_asymptotic(cfg)
        }
        TopCommand::Mfpt(MfptCommand::Simulate(args)) => {
            let (cfg, emit) = resolve_simulate(args)?;
            emit_resolved(&cfg, emit.as_deref())?;
            execute_simulate(cfg)
        }
        TopCommand::Mfpt(MfptCommand::Compare(args)) => {
            let (cfg, emit) = resolve_compare(args)?;
            emit_resolved(&cfg, emit.as_deref())?;
            execute_compare(cfg)
        }
    }
}

fn emit_resolved(cfg: &RunConfig, path: Option<&std::path::Path>) -> CliResult<()> {
    if let Some(path) = path {
        std::fs::write(path, cfg.to_toml()?)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn method_only(name: &str) -> MethodSection {
    MethodSection {
        name: name.into(),
        inspect: None,
        xray: None,
        greens: None,
        asymptotic: None,
        simulate: None,
        compare: None,
    }
}

/// Step budget giving every path a horizon of 2000·scale² time units — an
/// order of magnitude above the escape time for windows down to ε ≈ 0.005
/// on unit-scale domains.
fn default_max_steps(surface: &Surface, dt: f64) -> usize {
    let scale = surface.scale();
    ((2000.0 * scale * scale / dt).ceil() as usize).max(1)
}

// ---------------------------------------------------------------------------
// geometry inspect

fn resolve_inspect(args: InspectArgs) -> CliResult<(RunConfig, Option<PathBuf>)> {
    let emit = args.io.emit_config.clone();
    if let Some(path) = &args.io.config {
        args.io.reject_with_config(args.shape.is_some() || args.at.is_some())?;
        return Ok((load_run_config(path, "inspect")?, emit));
    }
    let shape = load_shape(args.shape.as_ref().expect("required by clap"))?.resolved();
    shape.build()?;
    let mut method = method_only("inspect");
    method.inspect = Some(InspectParams { at: args.at });
    let cfg = RunConfig {
        schema_version: SCHEMA_VERSION,
        method,
        shape: Some(shape),
        window: None,
        seed: None,
        jobs: resolve_jobs(args.io.jobs)?,
        output: args.io.resolve_output(),
    };
    cfg.validate()?;
    Ok((cfg, emit))
}

#[derive(Serialize)]
struct ProbeResult {
    /// Boundary projection of the probe point.
    point: [f64; 3],
    outward_normal: [f64; 3],
    lambda1: f64,
    lambda2: f64,
    mean_curvature: f64,
    gauss_curvature: f64,
    /// Largest admissible window semi-axis at this point.
    admissible_eps: f64,
}

#[derive(Serialize)]
struct InspectResult {
    scale: f64,
    volume: f64,
    boundary_area: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe: Option<ProbeResult>,
}

fn execute_inspect(cfg: RunConfig) -> CliResult<()> {
    if cfg.output.csv.is_some() {
        return Err(CliError::Config("geometry inspect has no CSV output".into()));
    }
    let shape = require_shape(&cfg)?;
    let surface = shape.build()?;
    let measures = surface.measures()?;
    let params = cfg.method.inspect.clone().expect("validated");
    let probe = match params.at {
        None => None,
        Some(p) => {
            let x = surface.project(&Vector3::new(p[0], p[1], p[2]))?;
            let c = surface.curvature_at(&x)?;
            Some(ProbeResult {
                point: [x.x, x.y, x.z],
                outward_normal: [c.normal.x, c.normal.y, c.normal.z],
                lambda1: c.lambda1,
                lambda2: c.lambda2,
                mean_curvature: c.mean_curvature,
                gauss_curvature: c.lambda1 * c.lambda2,
                admissible_eps: surface.admissible_eps(&x)?,
            })
        }
    };
    let result = InspectResult {
        scale: surface.scale(),
        volume: measures.volume,
        boundary_area: measures.boundary_area,
        probe,
    };
    Report::new("geometry inspect", cfg, result).write()
}

// ---------------------------------------------------------------------------
// xray verify

fn resolve_verify(args: VerifyArgs) -> CliResult<(RunConfig, Option<PathBuf>)> {
    let emit = args.io.emit_config.clone();
    if let Some(path) = &args.io.config {
        args.io.reject_with_config(args.a != 1.0 || args.resolution != 64)?;
        return Ok((load_run_config(path, "xray")?, emit));
    }
    let mut method = method_only("xray");
    method.xray = Some(XrayParams {
        a: args.a,
        n_r: args.resolution,
        n_theta: 2 * args.resolution,
    });
    let cfg = RunConfig {
        schema_version: SCHEMA_VERSION,
        method,
        shape: None,
        window: None,
        seed: None,
        jobs: resolve_jobs(args.io.jobs)?,
        output: args.io.resolve_output(),
    };
    cfg.validate()?;
    Ok((cfg, emit))
}

#[derive(Serialize)]
struct CheckRow {
    identity: String,
    computed: f64,
    expected: f64,
    abs_error: f64,
    tol: f64,
    pass: bool,
    n_r: usize,
    n_theta: usize,
}

#[derive(Serialize)]
struct VerifyResult {
    checks: Vec<CheckRow>,
    max_abs_error: f64,
    all_pass: bool,
}

fn execute_verify(cfg: RunConfig) -> CliResult<()> {
    if cfg.output.csv.is_some() {
        return Err(CliError::Config("xray verify has no CSV output".into()));
    }
    let params = cfg.method.xray.clone().expect("validated");
    let checks: Vec<CheckRow> = identity_suite(params.a, params.n_r, params.n_theta)?
        .into_iter()
        .map(|c| CheckRow {
            identity: c.identity,
            computed: c.computed,
            expected: c.expected,
            abs_error: c.abs_error,
            tol: c.tol,
            pass: c.pass,
            n_r: c.n_r,
            n_theta: c.n_theta,
        })
        .collect();
    let max_abs_error = checks.iter().map(|c| c.abs_error).fold(0.0, f64::max);
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.identity.clone())
        .collect();
    let result = VerifyResult { checks, max_abs_error, all_pass: failed.is_empty() };
    let failure = (!failed.is_empty()).then(|| failed.join(", "));
    Report::new("xray verify", cfg, result).write()?;
    match failure {
        None => Ok(()),
        Some(list) => Err(CliError::Check(format!("identity checks failed: {list}"))),
    }
}

// ---------------------------------------------------------------------------
// greens solve

fn resolve_solve(args: SolveArgs) -> CliResult<(RunConfig, Option<PathBuf>)> {
    let emit = args.io.emit_config.clone();
    if let Some(path) = &args.io.config {
        args.io
            .reject_with_config(args.shape.is_some() || args.at.is_some() || args.mesh != 3)?;
        return Ok((load_run_config(path, "greens")?, emit));
    }
    if args.mesh == 0 {
        return Err(CliError::Config("--mesh must be ≥ 1".into()));
    }
    let shape = load_shape(args.shape.as_ref().expect("required by clap"))?.resolved();
    shape.build()?;
    let mut method = method_only("greens");
    method.greens = Some(GreensParams {
        at: args.at.expect("required by clap"),
        mesh: args.mesh,
    });
    let cfg = RunConfig {
        schema_version: SCHEMA_VERSION,
        method,
        shape: Some(shape),
        window: None,
        seed: None,
        jobs: resolve_jobs(args.io.jobs)?,
        output: args.io.resolve_output(),
    };
    cfg.validate()?;
    Ok((cfg, emit))
}

#[derive(Serialize)]
struct FitRow {
    c0: f64,
    c1: f64,
    exponent: f64,
    window: (f64, f64),
    samples: usize,
}

#[derive(Serialize)]
struct GreensResult {
    /// Regular part R(x*, x*) on the finest mesh.
    r_star: f64,
    mesh_size: usize,
    convergence_table: Vec<SolveSummary>,
    fit: FitRow,
}

fn execute_solve(cfg: RunConfig) -> CliResult<()> {
    let shape = require_shape(&cfg)?;
    let surface = shape.build()?;
    let params = cfg.method.greens.clone().expect("validated");
    if params.mesh == 0 {
        return Err(CliError::Config("greens.mesh must be ≥ 1".into()));
    }
    let pole = Vector3::new(params.at[0], params.at[1], params.at[2]);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;

    let mut table = Vec::new();
    let mut finest = None;
    for level in 1..=params.mesh {
        let solve = pool.install(|| solve_green(&surface, &pole, level))?;
        table.push(solve.summary.clone());
        finest = Some(solve);
    }
    let finest = finest.expect("mesh ≥ 1");

    if let Some(csv) = &cfg.output.csv {
        let decomp = &finest.decomp;
        let x_star = decomp.mesh.nodes[decomp.mesh.pole];
        let rows: Vec<String> = decomp
            .mesh
            .nodes
            .iter()
            .enumerate()
            .map(|(j, z)| format!("{j},{},{}", (z - x_star).norm(), decomp.pole_row[j]))
            .collect();
        write_csv(csv, "node,distance,green_value", &rows)?;
    }

    let fit = &finest.decomp.fit;
    let result = GreensResult {
        r_star: finest.summary.r_star,
        mesh_size: finest.summary.mesh_size,
        convergence_table: table,
        fit: FitRow {
            c0: fit.c0,
            c1: fit.c1,
            exponent: fit.exponent,
            window: fit.window,
            samples: fit.samples,
        },
    };
    Report::new("greens solve", cfg, result).write()
}

// ---------------------------------------------------------------------------
// mfpt asymptotic

fn resolve_asymptotic(args: AsymptoticArgs) -> CliResult<(RunConfig, Option<PathBuf>)> {
    let emit = args.io.emit_config.clone();
    if let Some(path) = &args.io.config {
        args.io.reject_with_config(
            args.shape.is_some()
                || args.window.is_some()
                || args.sweep_eps.is_some()
                || !args.field_at.is_empty()
                || args.mesh != 2
                || args.disk_nr != 32
                || args.disk_ntheta != 64,
        )?;
        return Ok((load_run_config(path, "asymptotic")?, emit));
    }
    if let Some(spec) = &args.sweep_eps {
        parse_sweep(spec)?;
    }
    let shape = load_shape(args.shape.as_ref().expect("required by clap"))?.resolved();
    shape.build()?;
    let window = load_window(args.window.as_ref().expect("required by clap"))?;
    let mut method = method_only("asymptotic");
    method.asymptotic = Some(AsymptoticParams {
        mesh: args.mesh,
        disk_n_r: args.disk_nr,
        disk_n_theta: args.disk_ntheta,
        sweep_eps: args.sweep_eps,
        field_at: args.field_at,
    });
    let cfg = RunConfig {
        schema_version: SCHEMA_VERSION,
        method,
        shape: Some(shape),
        window: Some(window),
        seed: None,
        jobs: resolve_jobs(args.io.jobs)?,
        output: args.io.resolve_output(),
    };
    cfg.validate()?;
    Ok((cfg, emit))
}

#[derive(Serialize)]
struct SweepRow {
    epsilon: f64,
    leading: f64,
    log_term: f64,
    regular_term: f64,
    f_term: f64,
    log_pairing_term: f64,
    curvature_diff_term: f64,
    constant: f64,
    average: f64,
}

#[derive(Serialize)]
struct SolverInfo {
    green: SolveSummary,
    pairings: PairingSummary,
}

#[derive(Serialize)]
struct AsymptoticResult {
    input: escape_core::asymptotics::ExpansionInput,
    breakdown: escape_core::asymptotics::MfptBreakdown,
    average: AverageValue,
    solver: SolverInfo,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    field: Vec<FieldPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<Vec<SweepRow>>,
}

const SWEEP_HEADER: &str =
    "epsilon,leading,log_term,regular_term,f_term,log_pairing_term,curvature_diff_term,constant,average";

fn sweep_row(pipeline: &ExpansionPipeline, eps: f64) -> CliResult<SweepRow> {
    let (_, b, average) = pipeline.evaluate(eps)?;
    Ok(SweepRow {
        epsilon: eps,
        leading: b.leading,
        log_term: b.log_term,
        regular_term: b.regular_term,
        f_term: b.f_term,
        log_pairing_term: b.log_pairing_term,
        curvature_diff_term: b.curvature_diff_term,
        constant: b.total,
        average,
    })
}

fn sweep_csv_line(r: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.epsilon,
        r.leading,
        r.log_term,
        r.regular_term,
        r.f_term,
        r.log_pairing_term,
        r.curvature_diff_term,
        r.constant,
        r.average
    )
}

fn execute_asymptotic(cfg: RunConfig) -> CliResult<()> {
    let shape = require_shape(&cfg)?;
    let surface = shape.build()?;
    let window = require_window(&cfg)?;
    window.build(&surface)?;
    let params = cfg.method.asymptotic.clone().expect("validated");

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let pipeline = pool.install(|| {
        ExpansionPipeline::build(&surface, window, params.mesh, (params.disk_n_r, params.disk_n_theta))
    })?;

    let (input, breakdown, average) = pipeline.evaluate(window.eps)?;
    let field: Vec<FieldPoint> = params
        .field_at
        .iter()
        .map(|p| {
            pipeline.field_at(&surface, &input, &breakdown, &Vector3::new(p[0], p[1], p[2]))
        })
        .collect::<CliResult<_>>()?;

    let sweep = match &params.sweep_eps {
        None => None,
        Some(spec) => Some(
            parse_sweep(spec)?
                .into_iter()
                .map(|eps| sweep_row(&pipeline, eps))
                .collect::<CliResult<Vec<_>>>()?,
        ),
    };

    if let Some(csv) = &cfg.output.csv {
        if let Some(rows) = &sweep {
            let lines: Vec<String> = rows.iter().map(sweep_csv_line).collect();
            write_csv(csv, SWEEP_HEADER, &lines)?;
        } else if !field.is_empty() {
            let lines: Vec<String> = field
                .iter()
                .map(|f| {
                    format!(
                        "{},{},{},{},{},{},{}",
                        f.point[0], f.point[1], f.point[2], f.f_value, f.g_value, f.value,
                        f.near_window
                    )
                })
                .collect();
            write_csv(csv, "x,y,z,f_value,g_value,value,near_window", &lines)?;
        } else {
            let row = sweep_row(&pipeline, window.eps)?;
            write_csv(csv, SWEEP_HEADER, &[sweep_csv_line(&row)])?;
        }
    }

    let result = AsymptoticResult {
        input,
        breakdown,
        average: average_value(average),
        solver: SolverInfo { green: pipeline.solve.summary.clone(), pairings: pipeline.pairings.clone() },
        field,
        sweep,
    };
    Report::new("mfpt asymptotic", cfg, result).write()
}

// ---------------------------------------------------------------------------
// mfpt simulate

fn resolve_simulate(args: SimulateArgs) -> CliResult<(RunConfig, Option<PathBuf>)> {
    let emit = args.io.emit_config.clone();
    if let Some(path) = &args.io.config {
        args.io.reject_with_config(
            args.shape.is_some()
                || args.window.is_some()
                || args.paths.is_some()
                || args.dt.is_some()
                || args.seed.is_some()
                || args.max_steps.is_some()
                || args.start.is_some()
                || args.extrapolate,
        )?;
        return Ok((load_run_config(path, "simulate")?, emit));
    }
    let shape = load_shape(args.shape.as_ref().expect("required by clap"))?.resolved();
    let surface = shape.build()?;
    let window = load_window(args.window.as_ref().expect("required by clap"))?;
    window.build(&surface)?;
    let dt = args.dt.unwrap_or_else(|| SimConfig::default_dt(window.eps));
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CliError::Config(format!("--dt must be positive, got {dt}")));
    }
    let mut method = method_only("simulate");
    method.simulate = Some(SimulateParams {
        paths: args.paths.unwrap_or(SimConfig::DEFAULT_N_PATHS),
        dt,
        max_steps: args.max_steps.unwrap_or_else(|| default_max_steps(&surface, dt)),
        start: args.start.unwrap_or(StartSpec::Named("uniform".into())),
        extrapolate: args.extrapolate,
    });
    let cfg = RunConfig {
        schema_version: SCHEMA_VERSION,
        method,
        shape: Some(shape),
        window: Some(window),
        seed: Some(args.seed.unwrap_or(0)),
        jobs: resolve_jobs(args.io.jobs)?,
        output: args.io.resolve_output(),
    };
    cfg.validate()?;
    Ok((cfg, emit))
}

#[derive(Serialize)]
struct SimulateResult {
    estimate: MfptEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    extrapolation: Option<DtExtrapolation>,
    /// max_steps · dt, the per-path time budget.
    horizon: f64,
    /// Systematic bias order of the reported mean in the time step.
    time_step_bias: &'static str,
    /// Censoring below the validity threshold.
    valid: bool,
}

fn sim_config_from(params: &SimulateParams, seed: u64) -> CliResult<SimConfig> {
    let config = SimConfig {
        dt: params.dt,
        n_paths: params.paths,
        seed,
        max_steps: params.max_steps,
        start: params.start.to_mode()?,
        reflection: ReflectionScheme::Specular,
    };
    config.validate()?;
    Ok(config)
}

fn execute_simulate(cfg: RunConfig) -> CliResult<()> {
    let shape = require_shape(&cfg)?;
    let surface = shape.build()?;
    let window = require_window(&cfg)?;
    let wspec = window.build(&surface)?;
    let params = cfg.method.simulate.clone().expect("validated");
    let sim_config = sim_config_from(&params, cfg.seed.unwrap_or(0))?;

    let product = run_simulation(
        &surface,
        AbsorbingSet::Window(&wspec),
        &sim_config,
        cfg.jobs,
        params.extrapolate,
        cfg.output.csv.is_some(),
    )?;
    if let (Some(csv), Some(outcomes)) = (&cfg.output.csv, &product.per_path) {
        write_csv(csv, "path,outcome,time", &per_path_rows(outcomes))?;
    }
    let valid = product.is_valid();
    if !valid {
        eprintln!(
            "warning: {} of {} paths censored; raise --max-steps for a valid estimate",
            product.estimate.n_censored, params.paths
        );
    }
    let result = SimulateResult {
        estimate: product.estimate.clone(),
        extrapolation: product.extrapolation.clone(),
        horizon: sim_config.horizon(),
        time_step_bias: if params.extrapolate { "O(dt)" } else { "O(sqrt(dt))" },
        valid,
    };
    Report::new("mfpt simulate", cfg, result).write()
}

// ---------------------------------------------------------------------------
// mfpt compare

fn resolve_compare(args: CompareArgs) -> CliResult<(RunConfig, Option<PathBuf>)> {
    let emit = args.io.emit_config.clone();
    if let Some(path) = &args.io.config {
        args.io.reject_with_config(
            args.shape.is_some()
                || args.window.is_some()
                || args.paths.is_some()
                || args.dt.is_some()
                || args.seed.is_some()
                || args.max_steps.is_some()
                || args.start.is_some()
                || args.extrapolate
                || args.sweep_eps.is_some()
                || args.tolerance.is_some()
                || args.mesh != 2
                || args.disk_nr != 32
                || args.disk_ntheta != 64,
        )?;
        return Ok((load_run_config(path, "compare")?, emit));
    }
    if let Some(spec) = &args.sweep_eps {
        parse_sweep(spec)?;
    }
    let shape = load_shape(args.shape.as_ref().expect("required by clap"))?.resolved();
    let surface = shape.build()?;
    let window = load_window(args.window.as_ref().expect("required by clap"))?;
    window.build(&surface)?;
    let dt = args.dt.unwrap_or_else(|| SimConfig::default_dt(window.eps));
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CliError::Config(format!("--dt must be positive, got {dt}")));
    }
    let mut method = method_only("compare");
    method.compare = Some(CompareParams {
        mesh: args.mesh,
        disk_n_r: args.disk_nr,
        disk_n_theta: args.disk_ntheta,
        paths: args.paths.unwrap_or(SimConfig::DEFAULT_N_PATHS),
        dt,
        max_steps: args.max_steps.unwrap_or_else(|| default_max_steps(&surface, dt)),
        start: args.start.unwrap_or(StartSpec::Named("uniform".into())),
        extrapolate: args.extrapolate,
        sweep_eps: args.sweep_eps,
        tolerance: args.tolerance,
    });
    let cfg = RunConfig {
        schema_version: SCHEMA_VERSION,
        method,
        shape: Some(shape),
        window: Some(window),
        seed: Some(args.seed.unwrap_or(0)),
        jobs: resolve_jobs(args.io.jobs)?,
        output: args.io.resolve_output(),
    };
    cfg.validate()?;
    Ok((cfg, emit))
}

#[derive(Serialize)]
struct CompareRow {
    epsilon: f64,
    asymptotic: f64,
    simulated: f64,
    std_error: f64,
    ci95: (f64, f64),
    rel_diff: f64,
    n_censored: usize,
    /// Fixed-start rows only: the start point sits inside the guard distance
    /// of the window, where the expansion's remainder degrades.
    near_window: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon_warning: Option<String>,
}

#[derive(Serialize)]
struct CompareResult {
    rows: Vec<CompareRow>,
    solver: SolverInfo,
    max_abs_rel_diff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

fn execute_compare(cfg: RunConfig) -> CliResult<()> {
    let shape = require_shape(&cfg)?;
    let surface = shape.build()?;
    let window = require_window(&cfg)?;
    let params = cfg.method.compare.clone().expect("validated");
    let seed = cfg.seed.unwrap_or(0);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let pipeline = pool.install(|| {
        ExpansionPipeline::build(&surface, window, params.mesh, (params.disk_n_r, params.disk_n_theta))
    })?;

    let eps_list = match &params.sweep_eps {
        Some(spec) => parse_sweep(spec)?,
        None => vec![window.eps],
    };
    let sim_params = SimulateParams {
        paths: params.paths,
        dt: params.dt,
        max_steps: params.max_steps,
        start: params.start.clone(),
        extrapolate: params.extrapolate,
    };

    let mut rows = Vec::with_capacity(eps_list.len());
    for eps in eps_list {
        let wspec = window.with_eps(eps).build(&surface)?;
        let (input, breakdown, average) = pipeline.evaluate(eps)?;
        let (asymptotic, near_window) = match &params.start {
            StartSpec::Point(p) => {
                let f = pipeline.field_at(
                    &surface,
                    &input,
                    &breakdown,
                    &Vector3::new(p[0], p[1], p[2]),
                )?;
                (f.value, f.near_window)
            }
            StartSpec::Named(_) => (average, false),
        };
        let sim_config = sim_config_from(&sim_params, seed)?;
        let product = run_simulation(
            &surface,
            AbsorbingSet::Window(&wspec),
            &sim_config,
            cfg.jobs,
            params.extrapolate,
            false,
        )?;
        let simulated = product.mean();
        let (ci_lo, ci_hi) = product
            .extrapolation
            .as_ref()
            .map_or(product.estimate.ci95, |e| e.ci95);
        rows.push(CompareRow {
            epsilon: eps,
            asymptotic,
            simulated,
            std_error: product.std_error(),
            ci95: (ci_lo, ci_hi),
            rel_diff: (simulated - asymptotic) / asymptotic,
            n_censored: product.estimate.n_censored,
            near_window,
            horizon_warning: sim_config.horizon_warning(asymptotic),
        });
    }

    if let Some(csv) = &cfg.output.csv {
        let lines: Vec<String> = rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{}",
                    r.epsilon, r.asymptotic, r.simulated, r.std_error, r.rel_diff
                )
            })
            .collect();
        write_csv(csv, "epsilon,asymptotic,simulated,std_error,rel_diff", &lines)?;
    }

    let max_abs_rel_diff = rows.iter().map(|r| r.rel_diff.abs()).fold(0.0, f64::max);
    let tolerance = params.tolerance;
    let result = CompareResult {
        rows,
        solver: SolverInfo { green: pipeline.solve.summary.clone(), pairings: pipeline.pairings.clone() },
        max_abs_rel_diff,
        tolerance,
    };
    Report::new("mfpt compare", cfg, result).write()?;
    match tolerance {
        Some(tol) if max_abs_rel_diff > tol => Err(CliError::Check(format!(
            "max |rel_diff| = {max_abs_rel_diff:.4e} exceeds tolerance {tol:.4e}"
        ))),
        _ => Ok(()),
    }
}

// ---------------------------------------------------------------------------

fn require_shape(cfg: &RunConfig) -> CliResult<&ShapeSection> {
    cfg.shape
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("method {:?} requires a [shape] section", cfg.method.name)))
}

fn require_window(cfg: &RunConfig) -> CliResult<&WindowSection> {
    cfg.window
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("method {:?} requires a [window] section", cfg.method.name)))
}
