//! Layer potentials on the boundary mesh. The fundamental solution is
//! E(x, y) = −1/(4π|x−y|); the single layer S has kernel E and the double
//! layer N has the bounded kernel
//!   N(x, y) = (1/2π) ν_y·(y − x)/|y − x|³,
//! normalized so that ∫_{∂M} N(x, y) dA_y = 1 (twice the classical jump
//! constant 1/2). Nyström assembly: raw kernels at well-separated node pairs,
//! zero inside the near-field radius ρ̄, the S diagonal from a geodesic polar
//! patch (where the area element cancels the 1/d singularity), and the N
//! diagonal from the Gauss identity so that the weighted row sums are exact.
//! The adjoint N* is the matrix transpose — the exact adjoint in the
//! weighted inner product ⟨f, g⟩ = Σ_i w_i f_i g_i — and P is the rank-one
//! area average.

use super::bem_err;
use super::mesh::BoundaryMesh;
use crate::error::Result;
use crate::geometry::{orthonormal_tangent_basis, Surface};
use nalgebra::{DMatrix, DVector, Dyn, Vector3};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Radial × angular resolution of the diagonal polar patches.
const DIAG_PATCH_RES: (usize, usize) = (12, 24);

/// Fundamental solution E(x, y) = −1/(4π|x−y|) of the Laplacian.
pub fn kernel_e(x: &Vector3<f64>, y: &Vector3<f64>) -> Result<f64> {
    let d = (x - y).norm();
    if d == 0.0 {
        return Err(bem_err("fundamental solution evaluated at coincident points"));
    }
    Ok(-1.0 / (4.0 * PI * d))
}

/// Double-layer kernel N(x, y) = 2 ∂_{ν_y} E(x, y); bounded on C² surfaces
/// because ν_y·(y − x) = O(|y − x|²) as y → x.
pub(crate) fn kernel_n(x: &Vector3<f64>, y: &Vector3<f64>, nu_y: &Vector3<f64>) -> f64 {
    let d = y - x;
    let r = d.norm();
    nu_y.dot(&d) / (2.0 * PI * r * r * r)
}

/// Which boundary operator a dense matrix discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    SingleLayer,
    DoubleLayer,
    AdjointDoubleLayer,
    RankOneAverage,
}

/// Dense Nyström matrix of one boundary operator.
#[derive(Debug, Clone)]
pub struct LayerOperator {
    pub kind: LayerKind,
    pub matrix: DMatrix<f64>,
}

/// The four assembled operators plus assembly diagnostics.
#[derive(Debug, Clone)]
pub struct LayerSet {
    pub single: LayerOperator,
    pub double: LayerOperator,
    pub adjoint: LayerOperator,
    pub average: LayerOperator,
    /// ‖S − Sᵀ‖∞ / ‖S‖∞ of the assembled single layer.
    pub single_asymmetry: f64,
}

/// Assemble (S, N, N*, P) on the mesh. Entries with |z_i − z_j| < ρ̄ are
/// handled by patch quadrature (S diagonal) or the Gauss identity
/// (N diagonal); the skipped near-field mass of off-diagonal cells is
/// reintroduced analytically by the solvers that need it.
pub fn assemble_layers(surface: &Surface, mesh: &BoundaryMesh) -> Result<LayerSet> {
    let n = mesh.len();
    if n == 0 {
        return Err(bem_err("cannot assemble layers on an empty mesh"));
    }
    let rho = mesh.patch_radius;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut srow = vec![0.0; n];
            let mut nrow = vec![0.0; n];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = (mesh.nodes[i] - mesh.nodes[j]).norm();
                if d < rho {
                    continue;
                }
                srow[j] = -1.0 / (4.0 * PI * d);
                nrow[j] = kernel_n(&mesh.nodes[i], &mesh.nodes[j], &mesh.normals[j]);
            }
            (srow, nrow)
        })
        .collect();

    let mut s = DMatrix::zeros(n, n);
    let mut nmat = DMatrix::zeros(n, n);
    for (i, (srow, nrow)) in rows.into_iter().enumerate() {
        for j in 0..n {
            s[(i, j)] = srow[j];
            nmat[(i, j)] = nrow[j];
        }
    }

    // S diagonal: cell average of the patch integral ∫_{D_i} E dA, computed
    // in geodesic polar coordinates where dA = J dr dθ cancels the 1/d blow-up.
    let sdiag: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let patch = polar_patch(
                surface,
                &mesh.nodes[i],
                rho,
                DIAG_PATCH_RES.0,
                DIAG_PATCH_RES.1,
                Some(&mesh.seed_dirs[i]),
            )?;
            let mut acc = 0.0;
            for (p, wq) in patch.points.iter().zip(&patch.weights) {
                acc += wq * kernel_e(&mesh.nodes[i], p)?;
            }
            Ok(acc / mesh.weights[i])
        })
        .collect::<Result<_>>()?;
    for (i, v) in sdiag.into_iter().enumerate() {
        s[(i, i)] = v;
    }

    // N diagonal from ∫ N(z_i, ·) dA = 1: the weighted row sums become exact
    // and the diagonal cell absorbs the near-field mass.
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if j != i {
                off += nmat[(i, j)] * mesh.weights[j];
            }
        }
        nmat[(i, i)] = (1.0 - off) / mesh.weights[i];
    }

    let mut asym: f64 = 0.0;
    let mut norm: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
            norm = norm.max(s[(i, j)].abs());
        }
    }

    let total: f64 = mesh.weights.iter().sum();
    let average = DMatrix::from_fn(n, n, |_, j| mesh.weights[j] / total);
    let adjoint = nmat.transpose();
    Ok(LayerSet {
        single: LayerOperator { kind: LayerKind::SingleLayer, matrix: s },
        double: LayerOperator { kind: LayerKind::DoubleLayer, matrix: nmat },
        adjoint: LayerOperator { kind: LayerKind::AdjointDoubleLayer, matrix: adjoint },
        average: LayerOperator { kind: LayerKind::RankOneAverage, matrix: average },
        single_asymmetry: asym / norm,
    })
}

/// Geodesic polar quadrature grid on the disk D(center, rho) ⊂ ∂M:
/// Gauss–Legendre in radius, midpoint in angle, with the exact area element
/// J = |∂_r exp × ∂_θ exp| recovered by differencing the exponential map.
#[derive(Debug, Clone)]
pub struct PolarPatch {
    pub points: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
    pub radii: Vec<f64>,
}

pub fn polar_patch(
    surface: &Surface,
    center: &Vector3<f64>,
    rho: f64,
    nr: usize,
    ntheta: usize,
    seed: Option<&Vector3<f64>>,
) -> Result<PolarPatch> {
    let normal = surface.outward_normal(center);
    let (t1, t2) = seeded_tangent_basis(&normal, seed);
    let (xs, ws) = crate::quad::gauss_legendre_on(nr, 0.0, rho);
    let dth = 2.0 * PI / ntheta as f64;
    let npts = nr * ntheta;
    let mut points = Vec::with_capacity(npts);
    let mut normals = Vec::with_capacity(npts);
    let mut weights = Vec::with_capacity(npts);
    let mut radii = Vec::with_capacity(npts);
    let dir = |theta: f64| t1 * theta.cos() + t2 * theta.sin();
    for k in 0..ntheta {
        let theta = (k as f64 + 0.5) * dth;
        let v = dir(theta);
        for (&r, &wr) in xs.iter().zip(&ws) {
            let p = surface.exp_map_fast(center, &v, r)?;
            // Jacobian by central differences of the exponential map.
            let dr = (1e-4 * rho).min(r / 2.0);
            let pr1 = surface.exp_map_fast(center, &v, r + dr)?;
            let pr0 = surface.exp_map_fast(center, &v, r - dr)?;
            let dt = 1e-4;
            let pt1 = surface.exp_map_fast(center, &dir(theta + dt), r)?;
            let pt0 = surface.exp_map_fast(center, &dir(theta - dt), r)?;
            let jr = (pr1 - pr0) / (2.0 * dr);
            let jt = (pt1 - pt0) / (2.0 * dt);
            let jac = jr.cross(&jt).norm();
            points.push(p);
            normals.push(surface.outward_normal(&p));
            weights.push(wr * dth * jac);
            radii.push(r);
        }
    }
    Ok(PolarPatch { points, normals, weights, radii })
}

/// Tangent frame whose first axis follows the in-plane projection of `seed`,
/// keeping angular quadrature grids attached to the geometry they sample;
/// falls back to a coordinate-based frame when no usable seed is given.
pub(crate) fn seeded_tangent_basis(
    normal: &Vector3<f64>,
    seed: Option<&Vector3<f64>>,
) -> (Vector3<f64>, Vector3<f64>) {
    if let Some(s) = seed {
        let in_plane = s - normal * normal.dot(s);
        let norm = in_plane.norm();
        if norm > 1e-10 * s.norm() {
            let t1 = in_plane / norm;
            return (t1, normal.cross(&t1));
        }
    }
    orthonormal_tangent_basis(normal)
}

/// LU factorization of the bordered matrix [[A, c],[rᵀ, 0]] that pins the
/// rank-one defect of a second-kind boundary system: solves A x + μ c = b
/// subject to rᵀ x = t, reporting the multiplier μ (small when the data are
/// compatible).
pub struct BorderedSystem {
    lu: nalgebra::linalg::LU<f64, Dyn, Dyn>,
    n: usize,
    condition: f64,
}

impl BorderedSystem {
    pub fn new(a: DMatrix<f64>, border_col: &[f64], border_row: &[f64]) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || border_col.len() != n || border_row.len() != n {
            return Err(bem_err("bordered system dimensions disagree"));
        }
        let mut big = DMatrix::zeros(n + 1, n + 1);
        big.view_mut((0, 0), (n, n)).copy_from(&a);
        for i in 0..n {
            big[(i, n)] = border_col[i];
            big[(n, i)] = border_row[i];
        }
        let lu = big.lu();
        let diag = lu.u().diagonal();
        let dmax = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let dmin = diag.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
        if dmin == 0.0 {
            return Err(bem_err("bordered boundary system is singular at this resolution"));
        }
        Ok(BorderedSystem { lu, n, condition: dmax / dmin })
    }

    /// Ratio of extreme pivots of U — a cheap order-of-magnitude condition
    /// estimate reported with the solver diagnostics.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    /// Solve A x + μ c = rhs with rᵀ x = constraint.
    pub fn solve(&self, rhs: &[f64], constraint: f64) -> Result<(DVector<f64>, f64)> {
        let mut b = DVector::zeros(self.n + 1);
        for (i, &v) in rhs.iter().enumerate() {
            b[i] = v;
        }
        b[self.n] = constraint;
        let sol = self
            .lu
            .solve(&b)
            .ok_or_else(|| bem_err("bordered solve failed"))?;
        let mu = sol[self.n];
        Ok((sol.rows(0, self.n).into_owned(), mu))
    }

    /// Solve for many right-hand sides at once (constraint 0 for each);
    /// returns the n×k solution block and the k border multipliers.
    pub fn solve_block(&self, rhs: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let k = rhs.ncols();
        let mut b = DMatrix::zeros(self.n + 1, k);
        b.view_mut((0, 0), (self.n, k)).copy_from(rhs);
        let sol = self
            .lu
            .solve(&b)
            .ok_or_else(|| bem_err("bordered block solve failed"))?;
        let mus = sol.row(self.n).transpose();
        Ok((sol.view((0, 0), (self.n, k)).into_owned(), mus))
    }

    /// Solve the system with row `i` of the bordered matrix replaced by
    /// `new_row` (length n+1, last entry the border column coefficient),
    /// via the rank-one update formula: with u = M⁻¹ e_i and c the row
    /// difference, x = y − u (cᵀy)/(1 + cᵀu).
    pub fn solve_replacing_row(
        &self,
        i: usize,
        old_row: &DVector<f64>,
        new_row: &DVector<f64>,
        rhs: &[f64],
        rhs_at_i: f64,
        constraint: f64,
    ) -> Result<(DVector<f64>, f64)> {
        let m = self.n + 1;
        if old_row.len() != m || new_row.len() != m || i >= self.n {
            return Err(bem_err("row replacement dimensions disagree"));
        }
        let mut b = DVector::zeros(m);
        for (k, &v) in rhs.iter().enumerate() {
            b[k] = v;
        }
        b[i] = rhs_at_i;
        b[self.n] = constraint;
        let y = self
            .lu
            .solve(&b)
            .ok_or_else(|| bem_err("bordered solve failed"))?;
        let mut ei = DVector::zeros(m);
        ei[i] = 1.0;
        let u = self
            .lu
            .solve(&ei)
            .ok_or_else(|| bem_err("bordered solve failed"))?;
        let c = new_row - old_row;
        let denom = 1.0 + c.dot(&u);
        if denom.abs() < 1e-12 {
            return Err(bem_err("row replacement made the boundary system singular"));
        }
        let x = &y - &u * (c.dot(&y) / denom);
        let mu = x[self.n];
        Ok((x.rows(0, self.n).into_owned(), mu))
    }
}
