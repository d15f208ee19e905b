//! Surface Green function of the Neumann Laplacian. On the boundary it
//! solves the second-kind integral equation
//!   (I − N W) u = −2 E(x, ·) + 2 P S 1,
//! whose solution u(·) = G(x, ·) has the uniform flux −1/|∂M| built into the
//! right-hand side; the rank-deficiency of the Neumann problem is pinned by a
//! bordered row enforcing the zero weighted mean. Near the diagonal G splits
//! into an explicit singular template and a Hölder-continuous remainder
//!   G(x, y) = 1/(2π d(x,y)) − (H(x)/4π) log d_h(x,y) + II-term + R(x, y),
//! and the diagonal value R(x*, x*) is extracted by solving for the smooth
//! difference v = u − m against a chord-based template m, with the
//! near-field products ∫ N m recovered on geodesic polar patches split into
//! exactly disjoint regions (target disk, pole disk minus target disk,
//! remaining nodal part). R(x*, x*) is then the intercept of a least-squares
//! fit c0 + c1 d^μ over a fixed ring of mesh nodes.

use super::bem_err;
use super::layers::{kernel_n, polar_patch, BorderedSystem, LayerSet};
use super::mesh::BoundaryMesh;
use crate::error::Result;
use crate::geometry::Surface;
use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Pole-disk radius: min(POLE_DISK_NODES·h̄, POLE_DISK_CAP·√|∂M|).
const POLE_DISK_NODES: f64 = 5.0;
const POLE_DISK_CAP: f64 = 0.34;
/// Remainder fit window in units of the mean node spacing h̄.
const FIT_WINDOW: (f64, f64) = (3.0, 8.0);
/// Hölder exponent of the remainder model c0 + c1 d^μ.
const FIT_EXPONENT: f64 = 0.9;
/// Radial × angular resolution of the pole-disk patch used for far targets.
const FAR_POLE_RES: (usize, usize) = (24, 48);
/// Fine pole-disk patch used for near targets and for ∫m.
const FINE_POLE_RES: (usize, usize) = (48, 96);
/// Patch over the target's own near-field disk.
const TARGET_DISK_RES: (usize, usize) = (32, 64);
/// Size of the nearest-neighbor stencil interpolating the pole value.
const POLE_STENCIL: usize = 6;

/// One remainder sample R(x*, z_j): geodesic distance, value, and the unit
/// direction of z_j in the principal frame at the pole.
#[derive(Debug, Clone, Copy)]
pub struct RSample {
    pub distance: f64,
    pub value: f64,
    pub direction: Vector2<f64>,
}

/// Least-squares fit R(d) ≈ c0 + c1 d^exponent over `samples` ring nodes.
#[derive(Debug, Clone, Copy)]
pub struct HolderFit {
    pub c0: f64,
    pub c1: f64,
    pub exponent: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Solver health indicators, all dimensionless.
#[derive(Debug, Clone, Copy)]
pub struct BemDiagnostics {
    /// |Gauss solid-angle identity − 1| at an interior probe point.
    pub gauss_residual: f64,
    /// max_k |Σ_j N_kj w_j − 1| after assembly.
    pub double_rowsum_residual: f64,
    /// ‖S − Sᵀ‖∞/‖S‖∞.
    pub single_asymmetry: f64,
    /// Relative area defect of the raw panel quadrature before rescaling.
    pub area_defect: f64,
    /// Border multiplier of the refined pole solve (≈0 for compatible data).
    pub pole_multiplier: f64,
    /// Largest border multiplier over the plain row solves.
    pub max_row_multiplier: f64,
    /// Radius of the pole disk used for the near-field splitting.
    pub pole_patch_radius: f64,
    /// Pivot-ratio estimate of the bordered system's conditioning.
    pub condition_estimate: f64,
}

/// Dense boundary Green matrix plus the refined diagonal data at the pole.
pub struct GreenDecomposition {
    pub mesh: BoundaryMesh,
    pub layers: LayerSet,
    /// Row i holds G(z_i, ·) at the nodes; each row has zero weighted mean.
    pub boundary_matrix: DMatrix<f64>,
    /// Refined pole row u = v + m from the regularized solve; the pole entry
    /// is the cell average of G(x*, ·) over its own node cell.
    pub pole_row: DVector<f64>,
    /// Remainder value R(x*, x*) — the fit intercept.
    pub r_star: f64,
    pub r_samples: Vec<RSample>,
    pub fit: HolderFit,
    pub diagnostics: BemDiagnostics,
    adjoint_system: BorderedSystem,
    area: f64,
}

/// Geodesic log data of one node relative to the pole.
struct PoleChart {
    dist: f64,
    dir: Vector2<f64>,
}

pub fn solve_boundary_green(
    surface: &Surface,
    mesh: BoundaryMesh,
    layers: LayerSet,
) -> Result<GreenDecomposition> {
    let n = mesh.len();
    let pole = mesh.pole;
    let x_star = mesh.nodes[pole];
    let w = &mesh.weights;
    let area: f64 = w.iter().sum();
    let h_bar = mesh.h_mean;
    let rho_bar = mesh.patch_radius;
    let rho_pole = (POLE_DISK_NODES * h_bar).min(POLE_DISK_CAP * area.sqrt());
    let curv_star = &mesh.curvatures[pole];
    let h_star = curv_star.mean_curvature;

    // Chord distances to the pole and the chord-based singular template m;
    // the pole entry of m is its cell average over a disk of equal area.
    let chord: Vec<f64> = mesh.nodes.iter().map(|z| (z - x_star).norm()).collect();
    let r_cell = (w[pole] / PI).sqrt();
    let m_cell = 1.0 / (PI * w[pole]).sqrt() - h_star / (4.0 * PI) * (r_cell.ln() - 0.5);
    let m: Vec<f64> = (0..n)
        .map(|j| {
            if j == pole {
                m_cell
            } else {
                1.0 / (2.0 * PI * chord[j]) - h_star / (4.0 * PI) * chord[j].ln()
            }
        })
        .collect();

    // Geodesic chart (distance + principal-frame direction) for every node
    // close enough to matter: inside the pole disk (membership test for the
    // frozen template) or inside the fit window. Geodesic ≥ chord certifies
    // everything farther out.
    let chart_cap = rho_pole.max(FIT_WINDOW.1 * h_bar) * (1.0 + 1e-12);
    let charts: Vec<Option<PoleChart>> = (0..n)
        .into_par_iter()
        .map(|j| -> Result<Option<PoleChart>> {
            if j == pole || chord[j] > chart_cap {
                return Ok(None);
            }
            let wv = surface.log_map_in_frame(&x_star, &curv_star.e1, &curv_star.e2, &mesh.nodes[j], true)?;
            let dist = wv.norm();
            Ok(Some(PoleChart { dist, dir: wv / dist }))
        })
        .collect::<Result<_>>()?;

    // Frozen template: m zeroed inside the pole disk (geodesic test where
    // known, chord ≥ rho_pole certifies the rest) and at the pole itself.
    let frozen: Vec<bool> = (0..n)
        .map(|j| {
            if j == pole {
                return false;
            }
            match &charts[j] {
                Some(c) => c.dist >= rho_pole,
                None => true,
            }
        })
        .collect();

    let nmat = &layers.double.matrix;
    let smat = &layers.single.matrix;

    // base = N (w ∘ mz): nodal part of ∫ N m over the frozen region.
    let wmz = DVector::from_fn(n, |j, _| if frozen[j] { w[j] * m[j] } else { 0.0 });
    let base = nmat * &wmz;

    // Pole-disk patches (shared by all targets) with template values.
    let pole_seed = mesh.seed_dirs[mesh.pole];
    let far_patch = polar_patch(
        surface,
        &x_star,
        rho_pole,
        FAR_POLE_RES.0,
        FAR_POLE_RES.1,
        Some(&pole_seed),
    )?;
    let fine_patch = polar_patch(
        surface,
        &x_star,
        rho_pole,
        FINE_POLE_RES.0,
        FINE_POLE_RES.1,
        Some(&pole_seed),
    )?;
    let template = |p: &Vector3<f64>| -> f64 {
        let c = (p - x_star).norm();
        1.0 / (2.0 * PI * c) - h_star / (4.0 * PI) * c.ln()
    };
    let far_m: Vec<f64> = far_patch.points.iter().map(&template).collect();
    let fine_m: Vec<f64> = fine_patch.points.iter().map(&template).collect();

    // Near-field correction per target: far targets see the pole disk as a
    // smooth patch; near targets get the exactly disjoint decomposition
    // (own disk with the true template) + (pole disk minus own disk).
    let near_limit = rho_pole + rho_bar;
    let corr: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            if k == pole {
                return Ok(0.0);
            }
            let zk = mesh.nodes[k];
            if chord[k] >= near_limit {
                let mut acc = 0.0;
                for q in 0..far_patch.points.len() {
                    acc += far_patch.weights[q]
                        * kernel_n(&zk, &far_patch.points[q], &far_patch.normals[q])
                        * far_m[q];
                }
                return Ok(acc);
            }
            let disk = polar_patch(
                surface,
                &zk,
                rho_bar,
                TARGET_DISK_RES.0,
                TARGET_DISK_RES.1,
                Some(&mesh.seed_dirs[k]),
            )?;
            let mut acc = 0.0;
            for q in 0..disk.points.len() {
                acc += disk.weights[q]
                    * kernel_n(&zk, &disk.points[q], &disk.normals[q])
                    * template(&disk.points[q]);
            }
            if frozen[k] {
                // The identity diagonal already covered the own-disk mass
                // with the template frozen at z_k; swap it for the true patch.
                acc -= m[k] * nmat[(k, k)] * w[k];
            }
            // Chordal radius of the own disk, from the local curvature scale.
            let kappa = mesh.curvatures[k].mean_curvature.abs();
            let hole = if kappa * rho_bar > 1e-4 {
                (2.0 / kappa) * ((kappa * rho_bar / 2.0).min(PI / 2.0)).sin()
            } else {
                rho_bar
            };
            for q in 0..fine_patch.points.len() {
                if (fine_patch.points[q] - zk).norm() >= hole {
                    acc += fine_patch.weights[q]
                        * kernel_n(&zk, &fine_patch.points[q], &fine_patch.normals[q])
                        * fine_m[q];
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    // ps = (wᵀ S)/|∂M|: boundary average of the single layer per column.
    let wv = DVector::from_column_slice(w);
    let ps = smat.tr_mul(&wv) / area;

    // Right-hand side of the regularized system for v = u − m.
    let mut rhs_v = vec![0.0; n];
    for k in 0..n {
        if k == pole {
            continue;
        }
        let m2 = -h_star / (4.0 * PI) * chord[k].ln();
        rhs_v[k] = 2.0 * ps[k] - m2 + base[k] + corr[k];
    }

    // ∫m over the boundary: frozen nodal part + fine pole-disk patch.
    let mut int_m = 0.0;
    for j in 0..n {
        if frozen[j] {
            int_m += w[j] * m[j];
        }
    }
    for q in 0..fine_patch.points.len() {
        int_m += fine_patch.weights[q] * fine_m[q];
    }

    // Bordered second-kind system (I − N W) with zero-weighted-mean pinning.
    let a = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - nmat[(i, j)] * w[j]
    });
    let ones = vec![1.0; n];
    let main_system = BorderedSystem::new(a, &ones, w)?;

    // Plain block solve: row i of G from the right-hand side
    // b_k = −2 S_ik + 2 ps_k (the diagonal of S supplies the cell average).
    let rhs_block = DMatrix::from_fn(n, n, |k, i| -2.0 * smat[(i, k)] + 2.0 * ps[k]);
    let (sol_block, row_mus) = main_system.solve_block(&rhs_block)?;
    let boundary_matrix = sol_block.transpose();
    let max_row_multiplier = row_mus.iter().fold(0.0_f64, |acc, m| acc.max(m.abs()));

    // Refined pole solve: replace the pole row by a nearest-neighbor
    // interpolation (v is continuous there, u is not) and constrain the
    // weighted mean of v to −∫m.
    let mut order: Vec<usize> = (0..n).filter(|&j| j != pole).collect();
    order.sort_by(|&a, &b| chord[a].total_cmp(&chord[b]));
    let stencil = &order[..POLE_STENCIL.min(order.len())];
    let mut old_row = DVector::zeros(n + 1);
    for j in 0..n {
        old_row[j] = if j == pole { 1.0 } else { 0.0 } - nmat[(pole, j)] * w[j];
    }
    old_row[n] = 1.0;
    let mut new_row = DVector::zeros(n + 1);
    new_row[pole] = 1.0;
    for &j in stencil {
        new_row[j] = -1.0 / stencil.len() as f64;
    }
    let (v, pole_multiplier) =
        main_system.solve_replacing_row(pole, &old_row, &new_row, &rhs_v, 0.0, -int_m)?;

    // Remainder samples over the fit ring and the Hölder fit.
    let lam_diff = curv_star.lambda1 - curv_star.lambda2;
    let window = (FIT_WINDOW.0 * h_bar, FIT_WINDOW.1 * h_bar);
    let mut r_samples: Vec<RSample> = Vec::new();
    for j in 0..n {
        let Some(c) = &charts[j] else { continue };
        if c.dist < window.0 || c.dist > window.1 {
            continue;
        }
        let delta = (c.dist / chord[j]).ln();
        let ii = lam_diff * (c.dir.x * c.dir.x - c.dir.y * c.dir.y) / (16.0 * PI);
        r_samples.push(RSample {
            distance: c.dist,
            value: v[j] - h_star / (4.0 * PI) * delta - ii,
            direction: c.dir,
        });
    }
    r_samples.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    if r_samples.len() < 4 {
        return Err(bem_err("fit window contains too few nodes at this resolution"));
    }
    let (mut s0, mut s1, mut s2, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in &r_samples {
        let t = s.distance.powf(FIT_EXPONENT);
        s0 += 1.0;
        s1 += t;
        s2 += t * t;
        b0 += s.value;
        b1 += t * s.value;
    }
    let det = s0 * s2 - s1 * s1;
    if det.abs() < 1e-14 {
        return Err(bem_err("degenerate remainder fit"));
    }
    let c0 = (s2 * b0 - s1 * b1) / det;
    let c1 = (s0 * b1 - s1 * b0) / det;
    let fit = HolderFit {
        c0,
        c1,
        exponent: FIT_EXPONENT,
        window,
        samples: r_samples.len(),
    };

    // Refined pole row in terms of u = v + m.
    let pole_row = DVector::from_fn(n, |j, _| v[j] + m[j]);

    // Adjoint bordered system (I − Nᵀ W) with w in both borders; reused by
    // the interior evaluator and the potential solver.
    let tmat = &layers.adjoint.matrix;
    let a_adj = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - tmat[(i, j)] * w[j]
    });
    let adjoint_system = BorderedSystem::new(a_adj, w, w)?;

    let probe = {
        let mut c = Vector3::zeros();
        for (z, &wj) in mesh.nodes.iter().zip(w) {
            c += z * wj;
        }
        c / area
    };
    let mut rowsum_residual = 0.0_f64;
    for k in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += nmat[(k, j)] * w[j];
        }
        rowsum_residual = rowsum_residual.max((s - 1.0).abs());
    }
    let diagnostics = BemDiagnostics {
        gauss_residual: mesh.gauss_identity_residual(&probe),
        double_rowsum_residual: rowsum_residual,
        single_asymmetry: layers.single_asymmetry,
        area_defect: mesh.area_defect,
        pole_multiplier: pole_multiplier.abs(),
        max_row_multiplier,
        pole_patch_radius: rho_pole,
        condition_estimate: main_system.condition_estimate(),
    };

    Ok(GreenDecomposition {
        mesh,
        layers,
        boundary_matrix,
        pole_row,
        r_star: c0,
        r_samples,
        fit,
        diagnostics,
        adjoint_system,
        area,
    })
}

/// Singular template g_sing(x, y) for two boundary points: reciprocal
/// geodesic distance, mean-curvature log, and the principal-curvature
/// quadrupole, symmetrized in the two base points.
pub fn singular_part(surface: &Surface, x: &Vector3<f64>, y: &Vector3<f64>) -> Result<f64> {
    let cx = surface.curvature_at(x)?;
    let cy = surface.curvature_at(y)?;
    let wx = surface.log_map_in_frame(x, &cx.e1, &cx.e2, y, true)?;
    let wy = surface.log_map_in_frame(y, &cy.e1, &cy.e2, x, true)?;
    let d = 0.5 * (wx.norm() + wy.norm());
    if d == 0.0 {
        return Err(bem_err("singular template evaluated at coincident points"));
    }
    let h = 0.5 * (cx.mean_curvature + cy.mean_curvature);
    let ex = wx / wx.norm();
    let ey = wy / wy.norm();
    let ii_x = (cx.lambda1 - cx.lambda2) * (ex.x * ex.x - ex.y * ex.y);
    let ii_y = (cy.lambda1 - cy.lambda2) * (ey.x * ey.x - ey.y * ey.y);
    Ok(1.0 / (2.0 * PI * d) - h / (4.0 * PI) * d.ln() + (ii_x + ii_y) / (2.0 * 16.0 * PI))
}

impl GreenDecomposition {
    /// Boundary area carried by the mesh weights.
    pub fn boundary_area(&self) -> f64 {
        self.area
    }

    /// Solve the adjoint bordered system (I − NᵀW) q = rhs with wᵀq = 0;
    /// returns the density and the border multiplier.
    pub(crate) fn solve_adjoint(&self, rhs: &[f64]) -> Result<(DVector<f64>, f64)> {
        self.adjoint_system.solve(rhs, 0.0)
    }

    /// Adjoint-density solve: σ with (I − NᵀW) σ = 2/|∂M| − N(x, ·),
    /// wᵀσ = 0; the single-layer extension of σ reconstructs G(x, ·).
    fn interior_density(&self, x: &Vector3<f64>) -> Result<(DVector<f64>, f64)> {
        let n = self.mesh.len();
        let rhs: Vec<f64> = (0..n)
            .map(|k| 2.0 / self.area - kernel_n(x, &self.mesh.nodes[k], &self.mesh.normals[k]))
            .collect();
        let (sigma, _mu) = self.adjoint_system.solve(&rhs, 0.0)?;
        // Additive constant fixing the zero boundary mean of G(x, ·).
        let mut c_x = 0.0;
        let smat = &self.layers.single.matrix;
        let w = &self.mesh.weights;
        for k in 0..n {
            let mut sw = 0.0;
            for j in 0..n {
                sw += smat[(k, j)] * w[j] * sigma[j];
            }
            let phi = 1.0 / (4.0 * PI * (x - self.mesh.nodes[k]).norm());
            c_x += w[k] * (phi + sw);
        }
        Ok((sigma, -c_x / self.area))
    }

    /// G(x, y) for x strictly interior and y either interior or a mesh node.
    /// Both representations are exactly harmonic in the interior argument.
    pub fn evaluate_interior(
        &self,
        surface: &Surface,
        x: &Vector3<f64>,
        y: &Vector3<f64>,
    ) -> Result<f64> {
        let scale = (self.area / (4.0 * PI)).sqrt();
        let node_tol = 1e-8 * scale;
        let nearest = |p: &Vector3<f64>| -> (usize, f64) {
            let mut best = (0, f64::INFINITY);
            for (j, z) in self.mesh.nodes.iter().enumerate() {
                let d = (p - z).norm();
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        };
        let (ky, dy) = nearest(y);
        let (kx, dx) = nearest(x);
        if dy <= node_tol {
            self.check_clearance(self.boundary_clearance(surface, x))?;
            return self.row_representation(ky, x);
        }
        if dx <= node_tol {
            self.check_clearance(self.boundary_clearance(surface, y))?;
            return self.row_representation(kx, y);
        }
        self.check_clearance(self.boundary_clearance(surface, x))?;
        self.check_clearance(self.boundary_clearance(surface, y))?;
        let (sigma, c_x) = self.interior_density(x)?;
        let w = &self.mesh.weights;
        let mut g = 1.0 / (4.0 * PI * (x - y).norm());
        for j in 0..self.mesh.len() {
            let d = (y - self.mesh.nodes[j]).norm();
            g += -1.0 / (4.0 * PI * d) * w[j] * sigma[j];
        }
        Ok(g + c_x)
    }

    /// Lower bound on dist(p, ∂M).  Projection fails only at critical points
    /// of the level function deep in the interior; there the nearest mesh
    /// node bounds the distance from below up to one mesh spacing.
    pub(crate) fn boundary_clearance(&self, surface: &Surface, p: &Vector3<f64>) -> f64 {
        if let Ok(q) = surface.project(p) {
            return (p - q).norm();
        }
        let dmin = self
            .mesh
            .nodes
            .iter()
            .map(|z| (p - z).norm())
            .fold(f64::INFINITY, f64::min);
        (dmin - self.mesh.h_mean).max(0.0)
    }

    pub(crate) fn check_clearance(&self, c: f64) -> Result<()> {
        if c < self.mesh.patch_radius {
            return Err(bem_err(
                "interior evaluation point is closer to the boundary than the quadrature \
                 resolution supports",
            ));
        }
        Ok(())
    }

    /// Harmonic extension of boundary row k to an interior point p:
    /// G(z_k, p) from the double-layer representation of the row values.
    fn row_representation(&self, k: usize, p: &Vector3<f64>) -> Result<f64> {
        let n = self.mesh.len();
        let w = &self.mesh.weights;
        let row = if k == self.mesh.pole {
            self.pole_row.clone()
        } else {
            self.boundary_matrix.row(k).transpose()
        };
        let d0 = (p - self.mesh.nodes[k]).norm();
        if d0 == 0.0 {
            return Err(bem_err("interior point coincides with a boundary node"));
        }
        let g = 1.0 / (4.0 * PI * d0);
        let mut v1 = 0.0;
        let mut dl = 0.0;
        for j in 0..n {
            let diff = self.mesh.nodes[j] - p;
            let d = diff.norm();
            v1 += w[j] / (4.0 * PI * d);
            // ∂_{ν_z} Φ(p, z) = −ν·(z − p)/(4π d³)
            dl += row[j] * w[j] * (-self.mesh.normals[j].dot(&diff) / (4.0 * PI * d * d * d));
        }
        Ok(g - v1 / self.area - dl)
    }

    /// Total boundary flux ∫ ∂_ν G(x, ·) dA for interior x; −1 in exact
    /// arithmetic, recovered through the interior jump relation of the
    /// single-layer density.
    pub fn boundary_flux(&self, surface: &Surface, x: &Vector3<f64>) -> Result<f64> {
        self.check_clearance(self.boundary_clearance(surface, x))?;
        let (sigma, _) = self.interior_density(x)?;
        let n = self.mesh.len();
        let w = &self.mesh.weights;
        let tmat = &self.layers.adjoint.matrix;
        let mut flux = 0.0;
        for k in 0..n {
            let mut tw = 0.0;
            for j in 0..n {
                tw += tmat[(k, j)] * w[j] * sigma[j];
            }
            let nk = kernel_n(x, &self.mesh.nodes[k], &self.mesh.normals[k]);
            flux += w[k] * (-nk / 2.0 - sigma[k] / 2.0 + tw / 2.0);
        }
        Ok(flux)
    }
}
