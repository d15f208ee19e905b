//! Shared wiring between subcommands: the boundary-element solve poled at
//! the window centre, the disk pairings for the window aspect, expansion
//! assembly, and the particle-simulation glue. Everything here is
//! deterministic for fixed inputs, so reports round-trip bit-identically.

use serde::Serialize;

use escape_core::asymptotics::{
    c_eps_a, mfpt_average, mfpt_field, ExpansionInput, MfptBreakdown, ERROR_ORDER_AVERAGE,
};
use escape_core::bem::{
    assemble_layers, solve_boundary_green, solve_f, BoundaryMesh, FSolution, GreenDecomposition,
};
use escape_core::geometry::Surface;
use escape_core::sim::{
    aggregate_paths, estimate_mfpt_extrapolated, run_paths, AbsorbingSet, DtExtrapolation,
    MfptEstimate, PathOutcome, SimConfig, StepCounters,
};
use escape_core::xray::{pairing_inf_a, pairing_log_a};
use nalgebra::Vector3;

use crate::config::WindowSection;
use crate::CliResult;

/// One Green-function solve: the decomposition, the auxiliary field, and a
/// serializable summary row.
pub struct GreenSolve {
    pub decomp: GreenDecomposition,
    pub fsol: FSolution,
    pub summary: SolveSummary,
}

/// Mesh-level summary of one boundary solve (the convergence-table row).
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    /// Icosphere refinement level (10·4^level + 2 nodes).
    pub level: usize,
    pub mesh_size: usize,
    /// Regular part R(x*, x*) of the boundary Green function at the pole.
    pub r_star: f64,
    /// Auxiliary field F(x*) and its volume integral ∫_M F dV.
    pub f_star: f64,
    pub f_volume_integral: f64,
    /// |Gauss solid-angle identity − 1| at an interior probe.
    pub gauss_residual: f64,
    /// max_k |Σ_j N_kj w_j − 1| after assembly.
    pub double_rowsum_residual: f64,
    /// ‖S − Sᵀ‖∞ / ‖S‖∞ of the single-layer matrix.
    pub single_asymmetry: f64,
    /// Pivot-ratio estimate of the bordered system's conditioning.
    pub condition_estimate: f64,
    /// max_k |∂_ν F(z_k) + |M|/|∂M|| of the recovered reflecting flux.
    pub flux_residual: f64,
}

/// Solves the Neumann Green function and auxiliary field on the mesh poled
/// at `center` (projected onto the boundary).
pub fn solve_green(surface: &Surface, center: &Vector3<f64>, level: usize) -> CliResult<GreenSolve> {
    let mesh = BoundaryMesh::build(surface, center, level)?;
    let mesh_size = mesh.len();
    let layers = assemble_layers(surface, &mesh)?;
    let decomp = solve_boundary_green(surface, mesh, layers)?;
    let fsol = solve_f(surface, &decomp)?;
    let d = &decomp.diagnostics;
    let summary = SolveSummary {
        level,
        mesh_size,
        r_star: decomp.r_star,
        f_star: fsol.f_star,
        f_volume_integral: fsol.volume_integral,
        gauss_residual: d.gauss_residual,
        double_rowsum_residual: d.double_rowsum_residual,
        single_asymmetry: d.single_asymmetry,
        condition_estimate: d.condition_estimate,
        flux_residual: fsol.flux_residual,
    };
    Ok(GreenSolve { decomp, fsol, summary })
}

/// Disk pairings ⟨L_a⁻¹ R_log,a u₀, u₀⟩ and ⟨L_a⁻¹ R_∞,a u₀, u₀⟩ with their
/// refinement-based error estimates.
#[derive(Debug, Clone, Serialize)]
pub struct PairingSummary {
    pub a: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub log_value: f64,
    pub log_error_estimate: f64,
    pub inf_value: f64,
    pub inf_error_estimate: f64,
}

pub fn solve_pairings(a: f64, n_r: usize, n_theta: usize) -> CliResult<PairingSummary> {
    let (log_value, log_error_estimate) = pairing_log_a(a, n_r, n_theta)?;
    let (inf_value, inf_error_estimate) = pairing_inf_a(a, n_r, n_theta)?;
    Ok(PairingSummary { a, n_r, n_theta, log_value, log_error_estimate, inf_value, inf_error_estimate })
}

/// Everything the expansion needs, assembled once per (shape, window centre,
/// mesh, disk-resolution) tuple; ε enters only at evaluation time.
pub struct ExpansionPipeline {
    pub solve: GreenSolve,
    pub pairings: PairingSummary,
    pub input_template: ExpansionInput,
}

impl ExpansionPipeline {
    pub fn build(
        surface: &Surface,
        window: &WindowSection,
        mesh_level: usize,
        disk: (usize, usize),
    ) -> CliResult<ExpansionPipeline> {
        let center = surface.project(&window.center_vec())?;
        let solve = solve_green(surface, &center, mesh_level)?;
        let pairings = solve_pairings(window.a, disk.0, disk.1)?;
        let measures = surface.measures()?;
        let curv = surface.curvature_at(&center)?;
        let input_template = ExpansionInput {
            volume: measures.volume,
            boundary_area: measures.boundary_area,
            mean_curvature: curv.mean_curvature,
            lambda1: curv.lambda1,
            lambda2: curv.lambda2,
            eps: window.eps,
            a: window.a,
            r_star: solve.summary.r_star,
            f_star: solve.summary.f_star,
        };
        Ok(ExpansionPipeline { solve, pairings, input_template })
    }

    /// Expansion input at a sweep value of ε.
    pub fn input_at(&self, eps: f64) -> ExpansionInput {
        ExpansionInput { eps, ..self.input_template.clone() }
    }

    /// Constant breakdown and domain average at ε.
    pub fn evaluate(&self, eps: f64) -> CliResult<(ExpansionInput, MfptBreakdown, f64)> {
        let input = self.input_at(eps);
        let breakdown = c_eps_a(&input, self.pairings.log_value, self.pairings.inf_value)?;
        let average = mfpt_average(&input, &breakdown, self.fvol());
        Ok((input, breakdown, average))
    }

    /// Escape-time field at an interior point through the solved G and F.
    pub fn field_at(
        &self,
        surface: &Surface,
        input: &ExpansionInput,
        breakdown: &MfptBreakdown,
        x: &Vector3<f64>,
    ) -> CliResult<FieldPoint> {
        let pole = self.solve.decomp.mesh.nodes[self.solve.decomp.mesh.pole];
        let f = self.fsol().evaluate(surface, &self.solve.decomp, x)?;
        let g = self.solve.decomp.evaluate_interior(surface, x, &pole)?;
        let sample = mfpt_field(input, breakdown, f, g, (x - pole).norm());
        Ok(FieldPoint {
            point: [x.x, x.y, x.z],
            f_value: f,
            g_value: g,
            value: sample.value,
            near_window: sample.near_window,
        })
    }

    fn fvol(&self) -> f64 {
        self.solve.summary.f_volume_integral
    }

    fn fsol(&self) -> &FSolution {
        &self.solve.fsol
    }
}

/// One interior field evaluation E[τ](x) = F(x) + C − |M| G(x, x*).
#[derive(Debug, Clone, Serialize)]
pub struct FieldPoint {
    pub point: [f64; 3],
    pub f_value: f64,
    pub g_value: f64,
    pub value: f64,
    /// Within the guard distance of the window centre, where the expansion's
    /// remainder control degrades.
    pub near_window: bool,
}

/// Domain average with its remainder-order tag.
#[derive(Debug, Clone, Serialize)]
pub struct AverageValue {
    pub value: f64,
    pub error_order: &'static str,
}

pub fn average_value(v: f64) -> AverageValue {
    AverageValue { value: v, error_order: ERROR_ORDER_AVERAGE }
}

/// Simulation product: the base estimate, the optional Richardson pair, and
/// (when a per-path CSV is requested) the raw fine-level outcomes.
pub struct SimProduct {
    pub estimate: MfptEstimate,
    pub extrapolation: Option<DtExtrapolation>,
    pub per_path: Option<Vec<(PathOutcome, StepCounters)>>,
}

impl SimProduct {
    /// The mean the run reports: extrapolated when available.
    pub fn mean(&self) -> f64 {
        self.extrapolation.as_ref().map_or(self.estimate.mean, |e| e.mean)
    }

    pub fn std_error(&self) -> f64 {
        self.extrapolation.as_ref().map_or(self.estimate.std_error, |e| e.std_error)
    }

    pub fn is_valid(&self) -> bool {
        self.extrapolation.as_ref().map_or(self.estimate.is_valid(), |e| e.is_valid())
    }
}

/// Runs the particle simulation inside a worker pool of the configured size.
/// Results are bit-identical for any `jobs` value.
pub fn run_simulation(
    surface: &Surface,
    absorb: AbsorbingSet,
    config: &SimConfig,
    jobs: usize,
    extrapolate: bool,
    want_paths: bool,
) -> CliResult<SimProduct> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| crate::CliError::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        if extrapolate {
            let extrapolation = estimate_mfpt_extrapolated(surface, absorb, config)?;
            let per_path = if want_paths {
                // Deterministic re-run of the fine level for the CSV dump.
                Some(run_paths(surface, absorb, config)?)
            } else {
                None
            };
            Ok(SimProduct {
                estimate: extrapolation.fine.clone(),
                extrapolation: Some(extrapolation),
                per_path,
            })
        } else {
            let outcomes = run_paths(surface, absorb, config)?;
            let estimate = aggregate_paths(&outcomes);
            Ok(SimProduct {
                estimate,
                extrapolation: None,
                per_path: want_paths.then_some(outcomes),
            })
        }
    })
}

/// Fixed per-path CSV rows: `path,outcome,time` (time empty when censored).
pub fn per_path_rows(outcomes: &[(PathOutcome, StepCounters)]) -> Vec<String> {
    outcomes
        .iter()
        .enumerate()
        .map(|(i, (outcome, _))| match outcome {
            PathOutcome::Absorbed(t) => format!("{i},absorbed,{t}"),
            PathOutcome::Censored => format!("{i},censored,"),
        })
        .collect()
}
