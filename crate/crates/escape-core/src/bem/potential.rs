//! Interior potential F with ΔF = −1 and uniform Neumann data
//! ∂_ν F = −|M|/|∂M|, normalized to zero boundary mean. F splits into the
//! Newtonian potential of the unit density, evaluated by the star-shaped
//! radial reduction F_newt(x) = (1/8π) ∫_{S²} R_exit(x, Ω)² dΩ, plus a
//! single-layer correction V η whose density solves the adjoint second-kind
//! equation (I − NᵀW) η = 2(∂_ν F_newt + |M|/|∂M|). The volume integral of F
//! reduces to boundary-only sums through the divergence theorem applied
//! twice: ∫_M F_newt = −(1/8π) ∮∮ ν_x·ν_y |x − y| dA_x dA_y and
//! ∫_M V η = −Σ_j η_j w_j F_newt(z_j).

use super::green::GreenDecomposition;
use super::layers::seeded_tangent_basis;
use crate::error::Result;
use crate::geometry::Surface;
use nalgebra::{DVector, Vector3};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Hemisphere quadrature (Gauss–Legendre in the normal cosine × azimuth
/// midpoints) for boundary-based ray fans.
const HEMI_RES: (usize, usize) = (16, 32);
/// Full-sphere quadrature for interior evaluation points.
const FULL_RES: (usize, usize) = (24, 48);
/// Inward offset (relative to the shape scale) that keeps ray starts
/// strictly interior.
const RAY_NUDGE: f64 = 1e-9;

/// Solution of the interior −1 source problem restricted to the boundary.
pub struct FSolution {
    /// F at the window center x* (the mesh pole).
    pub f_star: f64,
    /// ∫_M F dV from the boundary-only reduction.
    pub volume_integral: f64,
    /// F at the mesh nodes.
    pub boundary_values: DVector<f64>,
    /// Single-layer density of the Neumann correction.
    pub eta: DVector<f64>,
    /// Additive constant enforcing the zero boundary mean.
    pub constant: f64,
    /// max_k |∂_ν F(z_k) + |M|/|∂M|| after the jump-relation recovery.
    pub flux_residual: f64,
    /// Border multiplier of the adjoint solve (≈0 for compatible data).
    pub border_multiplier: f64,
}

/// Newtonian boundary data at one node: (F_newt, ∂_ν F_newt).
fn newtonian_at_node(
    surface: &Surface,
    node: &Vector3<f64>,
    normal: &Vector3<f64>,
    seed: &Vector3<f64>,
    scale: f64,
) -> Result<(f64, f64)> {
    let (mus, wmu) = crate::quad::gauss_legendre_on(HEMI_RES.0, 0.0, 1.0);
    let nphi = HEMI_RES.1;
    let wphi = 2.0 * PI / nphi as f64;
    let (t1, t2) = seeded_tangent_basis(normal, Some(seed));
    let start = node - normal * (RAY_NUDGE * scale);
    let mut value = 0.0;
    let mut slope = 0.0;
    for (&mu, &wm) in mus.iter().zip(&wmu) {
        let s = (1.0 - mu * mu).sqrt();
        for i in 0..nphi {
            let phi = (i as f64 + 0.5) * wphi;
            let dir = -normal * mu + (t1 * phi.cos() + t2 * phi.sin()) * s;
            let r = surface.ray_exit(&start, &dir)?;
            value += wm * wphi * r * r;
            slope += wm * wphi * mu * r;
        }
    }
    Ok((value / (8.0 * PI), -slope / (4.0 * PI)))
}

/// Solve for F on the boundary of the domain carried by `decomp`.
pub fn solve_f(surface: &Surface, decomp: &GreenDecomposition) -> Result<FSolution> {
    let mesh = &decomp.mesh;
    let n = mesh.len();
    let w = &mesh.weights;
    let area = decomp.boundary_area();
    let volume = surface.measures()?.volume;
    let scale = (area / (4.0 * PI)).sqrt();

    let newt: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|k| newtonian_at_node(surface, &mesh.nodes[k], &mesh.normals[k], &mesh.seed_dirs[k], scale))
        .collect::<Result<_>>()?;
    let f_newt: Vec<f64> = newt.iter().map(|p| p.0).collect();
    let dn_newt: Vec<f64> = newt.iter().map(|p| p.1).collect();

    // Correction density: (I − NᵀW) η = 2(∂_ν F_newt + |M|/|∂M|), wᵀη = 0.
    let rhs: Vec<f64> = dn_newt.iter().map(|d| 2.0 * (d + volume / area)).collect();
    let (eta, mu) = decomp.solve_adjoint(&rhs)?;

    // Single-layer values S w η at the nodes.
    let smat = &decomp.layers.single.matrix;
    let sw_eta: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|j| smat[(k, j)] * w[j] * eta[j]).sum())
        .collect();

    let mut constant = 0.0;
    for k in 0..n {
        constant -= w[k] * (f_newt[k] + sw_eta[k]);
    }
    constant /= area;

    let boundary_values = DVector::from_fn(n, |k, _| f_newt[k] + sw_eta[k] + constant);
    let f_star = boundary_values[mesh.pole];

    // ∫_M F: boundary-only reduction of the Newtonian part plus the layer
    // part plus the constant.
    let newt_volume: f64 = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut acc = 0.0;
            for k in 0..n {
                let d = (mesh.nodes[j] - mesh.nodes[k]).norm();
                acc += w[j] * w[k] * mesh.normals[j].dot(&mesh.normals[k]) * d;
            }
            acc
        })
        .sum::<f64>()
        / (-8.0 * PI);
    let layer_volume: f64 = -(0..n).map(|j| eta[j] * w[j] * f_newt[j]).sum::<f64>();
    let volume_integral = newt_volume + layer_volume + constant * volume;

    // Jump-relation recovery of the total normal derivative.
    let tmat = &decomp.layers.adjoint.matrix;
    let mut flux_residual = 0.0_f64;
    for k in 0..n {
        let mut tw = 0.0;
        for j in 0..n {
            tw += tmat[(k, j)] * w[j] * eta[j];
        }
        let recovered = dn_newt[k] - eta[k] / 2.0 + tw / 2.0;
        flux_residual = flux_residual.max((recovered + volume / area).abs());
    }

    Ok(FSolution {
        f_star,
        volume_integral,
        boundary_values,
        eta,
        constant,
        flux_residual,
        border_multiplier: mu.abs(),
    })
}

impl FSolution {
    /// F at a strictly interior point: full-sphere ray fan for the Newtonian
    /// part plus the single-layer correction and the mean-fixing constant.
    pub fn evaluate(
        &self,
        surface: &Surface,
        decomp: &GreenDecomposition,
        x: &Vector3<f64>,
    ) -> Result<f64> {
        let mesh = &decomp.mesh;
        decomp.check_clearance(decomp.boundary_clearance(surface, x))?;
        let (us, wu) = crate::quad::gauss_legendre(FULL_RES.0);
        let nphi = FULL_RES.1;
        let wphi = 2.0 * PI / nphi as f64;
        let mut value = 0.0;
        for (&u, &wm) in us.iter().zip(&wu) {
            let s = (1.0 - u * u).sqrt();
            for i in 0..nphi {
                let phi = (i as f64 + 0.5) * wphi;
                let dir = Vector3::new(s * phi.cos(), s * phi.sin(), u);
                let r = surface.ray_exit(x, &dir)?;
                value += wm * wphi * r * r;
            }
        }
        let mut layer = 0.0;
        for j in 0..mesh.len() {
            let d = (x - mesh.nodes[j]).norm();
            layer += -1.0 / (4.0 * PI * d) * mesh.weights[j] * self.eta[j];
        }
        Ok(value / (8.0 * PI) + layer + self.constant)
    }
}
