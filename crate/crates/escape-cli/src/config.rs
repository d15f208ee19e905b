//! Strict TOML configuration. Shape and window sections are shared by all
//! subcommands; a [`RunConfig`] is the fully resolved description of one run
//! (every default filled in) that each invocation embeds in its JSON report.
//! Re-running a resolved config reproduces the report bit for bit.
//!
//! Unknown keys are rejected everywhere, and parse errors carry the
//! line/column position reported by the TOML parser.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use escape_core::geometry::{Surface, WindowSpec};
use escape_core::sim::StartMode;
use nalgebra::Vector3;

use crate::{CliError, CliResult};

/// Version stamp carried by every emitted config and report.
pub const SCHEMA_VERSION: u32 = 1;

/// Boundary shape description: a ball, an axis-aligned ellipsoid, or a
/// surface of revolution with polynomial profile coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSection {
    /// "ball" | "ellipsoid" | "revolution".
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_coeffs: Option<Vec<f64>>,
}

impl ShapeSection {
    /// Copy with defaults filled in (ball radius 1).
    pub fn resolved(&self) -> ShapeSection {
        let mut s = self.clone();
        if s.kind == "ball" && s.radius.is_none() {
            s.radius = Some(1.0);
        }
        s
    }

    /// Builds the surface, rejecting parameters that do not belong to the
    /// declared kind.
    pub fn build(&self) -> CliResult<Surface> {
        let stray = |field: &str| {
            CliError::Config(format!(
                "shape.{field} is not a parameter of kind {:?}",
                self.kind
            ))
        };
        match self.kind.as_str() {
            "ball" => {
                if self.semi_axes.is_some() {
                    return Err(stray("semi_axes"));
                }
                if self.q_coeffs.is_some() {
                    return Err(stray("q_coeffs"));
                }
                let r = self.radius.unwrap_or(1.0);
                if !(r.is_finite() && r > 0.0) {
                    return Err(CliError::Config(format!(
                        "shape.radius must be a positive number, got {r}"
                    )));
                }
                Ok(Surface::ball(r))
            }
            "ellipsoid" => {
                if self.radius.is_some() {
                    return Err(stray("radius"));
                }
                if self.q_coeffs.is_some() {
                    return Err(stray("q_coeffs"));
                }
                let s = self.semi_axes.ok_or_else(|| {
                    CliError::Config("shape.semi_axes is required for kind \"ellipsoid\"".into())
                })?;
                if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(CliError::Config(format!(
                        "shape.semi_axes must be positive numbers, got {s:?}"
                    )));
                }
                Ok(Surface::ellipsoid(s[0], s[1], s[2]))
            }
            "revolution" => {
                if self.radius.is_some() {
                    return Err(stray("radius"));
                }
                if self.semi_axes.is_some() {
                    return Err(stray("semi_axes"));
                }
                let q = self.q_coeffs.clone().ok_or_else(|| {
                    CliError::Config("shape.q_coeffs is required for kind \"revolution\"".into())
                })?;
                Surface::revolution(q).map_err(|e| CliError::Config(e.to_string()))
            }
            other => Err(CliError::Config(format!(
                "shape.kind must be \"ball\", \"ellipsoid\", or \"revolution\", got {other:?}"
            ))),
        }
    }
}

/// Absorbing-window description: geodesic ellipse of semi-axes (ε, aε)
/// centred at the projection of `center` onto the boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub center: [f64; 3],
    pub eps: f64,
    #[serde(default = "default_aspect")]
    pub a: f64,
}

fn default_aspect() -> f64 {
    1.0
}

impl WindowSection {
    pub fn center_vec(&self) -> Vector3<f64> {
        Vector3::new(self.center[0], self.center[1], self.center[2])
    }

    pub fn build(&self, surface: &Surface) -> CliResult<WindowSpec> {
        Ok(WindowSpec::new(surface, &self.center_vec(), self.eps, self.a)?)
    }

    /// Copy with a different semi-major axis (ε sweeps).
    pub fn with_eps(&self, eps: f64) -> WindowSection {
        WindowSection { eps, ..self.clone() }
    }
}

/// Start-point rule for the particle simulation: the string "uniform" or a
/// fixed interior point `[x, y, z]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Named(String),
    Point([f64; 3]),
}

impl StartSpec {
    pub fn to_mode(&self) -> CliResult<StartMode> {
        match self {
            StartSpec::Named(s) if s == "uniform" => Ok(StartMode::UniformInterior),
            StartSpec::Named(s) => Err(CliError::Config(format!(
                "start must be \"uniform\" or a point [x, y, z], got {s:?}"
            ))),
            StartSpec::Point(p) => Ok(StartMode::Fixed(Vector3::new(p[0], p[1], p[2]))),
        }
    }
}

/// A `--shape`/`--window` input file; both sections may live in one file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub shape: Option<ShapeSection>,
    #[serde(default)]
    pub window: Option<WindowSection>,
}

fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> CliResult<T> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn load_shape(path: &Path) -> CliResult<ShapeSection> {
    let file: ConfigFile = parse_toml(path, &read_to_string(path)?)?;
    file.shape.ok_or_else(|| {
        CliError::Config(format!("{}: missing [shape] section", path.display()))
    })
}

pub fn load_window(path: &Path) -> CliResult<WindowSection> {
    let file: ConfigFile = parse_toml(path, &read_to_string(path)?)?;
    file.window.ok_or_else(|| {
        CliError::Config(format!("{}: missing [window] section", path.display()))
    })
}

/// Method selector plus exactly one parameter table matching `name`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    /// "inspect" | "xray" | "greens" | "asymptotic" | "simulate" | "compare".
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inspect: Option<InspectParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xray: Option<XrayParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greens: Option<GreensParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<AsymptoticParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectParams {
    /// Optional probe point; curvature data is reported at its projection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XrayParams {
    /// Window aspect ratio the disk operators are built for.
    pub a: f64,
    /// Radial × angular quadrature resolution.
    pub n_r: usize,
    pub n_theta: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreensParams {
    /// Boundary point the solve is poled at (projected onto the surface).
    pub at: [f64; 3],
    /// Finest icosphere refinement level; the convergence table runs from
    /// level 1 up to this value (10·4^level + 2 nodes).
    pub mesh: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticParams {
    /// Icosphere refinement level of the Green/auxiliary-field solve.
    pub mesh: usize,
    /// Disk-operator quadrature resolution for the pairing terms.
    pub disk_n_r: usize,
    pub disk_n_theta: usize,
    /// "start:end:count" ε sweep; absent = single evaluation at window.eps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_eps: Option<String>,
    /// Interior points where the escape-time field is evaluated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub field_at: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub paths: usize,
    pub dt: f64,
    pub max_steps: usize,
    pub start: StartSpec,
    /// Re-run at 4Δt and report the 2τ̂(Δt) − τ̂(4Δt) combination that
    /// cancels the O(√Δt) boundary bias.
    pub extrapolate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareParams {
    pub mesh: usize,
    pub disk_n_r: usize,
    pub disk_n_theta: usize,
    pub paths: usize,
    /// Time step shared by every sweep row.
    pub dt: f64,
    pub max_steps: usize,
    pub start: StartSpec,
    pub extrapolate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_eps: Option<String>,
    /// Largest |relative difference| accepted before the run exits with the
    /// acceptance-failure code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Output routing; `json = "-"` writes the report to stdout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub json: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

/// Fully resolved description of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub method: MethodSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSection>,
    /// Base seed of the counter-based path streams (randomized methods).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads for the parallel sections.
    pub jobs: usize,
    pub output: OutputSection,
}

impl RunConfig {
    /// The `[method.<name>]` table demanded by `method.name`, with a clear
    /// error when the wrong table (or none) is present.
    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let m = &self.method;
        let tables = [
            ("inspect", m.inspect.is_some()),
            ("xray", m.xray.is_some()),
            ("greens", m.greens.is_some()),
            ("asymptotic", m.asymptotic.is_some()),
            ("simulate", m.simulate.is_some()),
            ("compare", m.compare.is_some()),
        ];
        if !tables.iter().any(|(name, _)| *name == m.name) {
            return Err(CliError::Config(format!(
                "method.name must be one of inspect, xray, greens, asymptotic, simulate, compare; got {:?}",
                m.name
            )));
        }
        for (name, present) in tables {
            if name == m.name && !present {
                return Err(CliError::Config(format!(
                    "method.name = {name:?} requires a [method.{name}] table"
                )));
            }
            if name != m.name && present {
                return Err(CliError::Config(format!(
                    "[method.{name}] does not belong to method.name = {:?}",
                    m.name
                )));
            }
        }
        if self.jobs == 0 {
            return Err(CliError::Config("jobs must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("config serialization: {e}")))
    }
}

/// Loads a resolved run config, checking version and method consistency.
pub fn load_run_config(path: &Path, expect_method: &str) -> CliResult<RunConfig> {
    let cfg: RunConfig = parse_toml(path, &read_to_string(path)?)?;
    cfg.validate()?;
    if cfg.method.name != expect_method {
        return Err(CliError::Config(format!(
            "{}: method.name is {:?} but the invoked subcommand expects {:?}",
            path.display(),
            cfg.method.name,
            expect_method
        )));
    }
    Ok(cfg)
}

/// Default worker-thread count: the ESCAPE_JOBS environment variable when
/// set, otherwise the machine's available parallelism.
pub fn resolve_jobs(flag: Option<usize>) -> CliResult<usize> {
    if let Some(j) = flag {
        if j == 0 {
            return Err(CliError::Config("--jobs must be ≥ 1".into()));
        }
        return Ok(j);
    }
    match std::env::var("ESCAPE_JOBS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&j| j >= 1)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "ESCAPE_JOBS must be a positive integer, got {v:?}"
                ))
            }),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Parses "start:end:count" into an inclusive linearly spaced ε list.
pub fn parse_sweep(spec: &str) -> CliResult<Vec<f64>> {
    let err = || {
        CliError::Config(format!(
            "sweep must be start:end:count with positive bounds and count ≥ 1, got {spec:?}"
        ))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(err());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| err())?;
    let end: f64 = parts[1].trim().parse().map_err(|_| err())?;
    let count: usize = parts[2].trim().parse().map_err(|_| err())?;
    if !(start.is_finite() && end.is_finite() && start > 0.0 && end > 0.0 && count >= 1) {
        return Err(err());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count)
        .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
        .collect())
}
