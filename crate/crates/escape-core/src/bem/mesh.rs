//! Boundary quadrature meshes. An icosahedral sphere mesh is subdivided,
//! rotated so that a distinguished vertex lands on the window center, and
//! pushed onto the surface by the shape map (radial for balls and surfaces of
//! revolution, linear for ellipsoids). Node weights are the thirds of the
//! curved panel areas — a dual quadrature whose weights w_i satisfy
//! Σ_i w_i f(z_i) ≈ ∫_{∂M} f — rescaled so Σ w_i equals the exact boundary
//! area. Curved panel areas use a degree-4 six-point rule with the panel
//! Jacobian differenced through the composite map.

use super::bem_err;
use crate::error::Result;
use crate::geometry::{CurvatureData, Shape, Surface};
use nalgebra::{Matrix3, Vector3};
use std::collections::HashMap;

/// Near-field radius in units of the mean node spacing √(mean w): inside
/// this distance kernels are integrated by polar patches instead of the
/// nodal rule.
pub(crate) const PATCH_RADIUS_FACTOR: f64 = 3.0;

/// Degree-4 six-point rule on the reference triangle (barycentric points
/// with weights summing to one).
const TRI6: [(f64, f64, f64, f64); 6] = [
    (0.445948490915965, 0.445948490915965, 0.108103018168070, 0.223381589678011),
    (0.445948490915965, 0.108103018168070, 0.445948490915965, 0.223381589678011),
    (0.108103018168070, 0.445948490915965, 0.445948490915965, 0.223381589678011),
    (0.091576213509771, 0.091576213509771, 0.816847572980458, 0.109951743655322),
    (0.091576213509771, 0.816847572980458, 0.091576213509771, 0.109951743655322),
    (0.816847572980458, 0.091576213509771, 0.091576213509771, 0.109951743655322),
];

/// Quadrature nodes on ∂M with dual area weights, outward normals, and
/// per-node curvature data; `faces` keeps the panel structure for the
/// near-singular polar refinement.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub nodes: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
    pub curvatures: Vec<CurvatureData>,
    pub faces: Vec<[usize; 3]>,
    /// Per-node in-plane reference direction for patch and fan quadratures,
    /// taken from the face structure so that rigidly moving the mesh moves
    /// every quadrature grid with it.
    pub seed_dirs: Vec<Vector3<f64>>,
    /// Index of the node placed at the window center.
    pub pole: usize,
    /// Mean node spacing √(mean w).
    pub h_mean: f64,
    /// Uniform near-field radius ρ̄ = 3·h_mean.
    pub patch_radius: f64,
    /// Relative defect |Σ w_raw / |∂M| − 1| absorbed by the final rescale.
    pub area_defect: f64,
}

impl BoundaryMesh {
    /// Build a mesh with 10·4^nsub + 2 nodes whose node 0 sits at `center`
    /// (a boundary point). Supported for solid (level-set) shapes.
    pub fn build(surface: &Surface, center: &Vector3<f64>, nsub: usize) -> Result<Self> {
        if !surface.shape.is_solid() {
            return Err(bem_err("boundary meshes need a solid (level-set) shape"));
        }
        let center = surface.project(center)?;
        let (mut verts, faces) = icosphere(nsub);

        // Rotate the unit mesh so vertex 0 maps to the preimage of `center`.
        let target = unit_preimage(&surface.shape, &center);
        let rot = rotation_between(&verts[0], &target);
        for v in verts.iter_mut() {
            *v = (rot * *v).normalize();
        }

        let nodes: Vec<Vector3<f64>> = verts
            .iter()
            .map(|u| shape_point(surface, u))
            .collect::<Result<_>>()?;
        let n = nodes.len();
        if (nodes[0] - center).norm() > 1e-6 * surface.scale() {
            return Err(bem_err("window center did not land on a mesh node"));
        }

        let mut weights = vec![0.0; n];
        for f in &faces {
            let a = panel_area(surface, &verts[f[0]], &verts[f[1]], &verts[f[2]])?;
            for &i in f {
                weights[i] += a / 3.0;
            }
        }
        let raw: f64 = weights.iter().sum();
        let exact = surface.measures()?.boundary_area;
        let area_defect = (raw / exact - 1.0).abs();
        if area_defect > 1e-3 {
            return Err(bem_err(format!(
                "panel areas disagree with the boundary area by {area_defect:.2e}"
            )));
        }
        for w in weights.iter_mut() {
            *w *= exact / raw;
        }

        let normals = nodes.iter().map(|p| surface.outward_normal(p)).collect();
        let curvatures = nodes
            .iter()
            .map(|p| surface.curvature_at(p))
            .collect::<Result<Vec<_>>>()?;

        // First incident face in list order, lower-index partner vertex.
        let mut seed_dirs = vec![Vector3::zeros(); n];
        let mut found = vec![false; n];
        for f in &faces {
            for &i in f {
                if !found[i] {
                    let j = *f.iter().filter(|&&v| v != i).min().unwrap();
                    seed_dirs[i] = nodes[j] - nodes[i];
                    found[i] = true;
                }
            }
        }

        let h_mean = (exact / n as f64).sqrt();
        Ok(BoundaryMesh {
            nodes,
            normals,
            weights,
            curvatures,
            faces,
            seed_dirs,
            pole: 0,
            h_mean,
            patch_radius: PATCH_RADIUS_FACTOR * h_mean,
            area_defect,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Residual of the Gauss identity ∫_{∂M} ∂_{ν_y}E(x,y) dA_y = 1 for an
    /// interior point x under the nodal rule (E the fundamental solution).
    pub fn gauss_identity_residual(&self, x: &Vector3<f64>) -> f64 {
        let mut sum = 0.0;
        for ((z, nu), w) in self.nodes.iter().zip(&self.normals).zip(&self.weights) {
            let d = z - x;
            let r = d.norm();
            sum += w * nu.dot(&d) / (4.0 * std::f64::consts::PI * r * r * r);
        }
        (sum - 1.0).abs()
    }
}

/// Direction on the unit sphere that the shape map sends to `p` on ∂M.
fn unit_preimage(shape: &Shape, p: &Vector3<f64>) -> Vector3<f64> {
    match shape {
        Shape::Ellipsoid { semi_axes: s } => {
            Vector3::new(p.x / s[0], p.y / s[1], p.z / s[2]).normalize()
        }
        _ => p.normalize(),
    }
}

/// Image of a unit-sphere direction under the shape map.
fn shape_point(surface: &Surface, u: &Vector3<f64>) -> Result<Vector3<f64>> {
    match &surface.shape {
        Shape::Ball { radius } => Ok(u * *radius),
        Shape::Ellipsoid { semi_axes: s } => {
            Ok(Vector3::new(u.x * s[0], u.y * s[1], u.z * s[2]))
        }
        _ => {
            let t = surface.ray_exit(&Vector3::zeros(), u)?;
            Ok(u * t)
        }
    }
}

/// Rodrigues rotation taking unit vector `a` to unit vector `b`.
fn rotation_between(a: &Vector3<f64>, b: &Vector3<f64>) -> Matrix3<f64> {
    let v = a.cross(b);
    let s = v.norm();
    let c = a.dot(b);
    if s < 1e-12 {
        return if c > 0.0 {
            Matrix3::identity()
        } else {
            -Matrix3::identity()
        };
    }
    let k = Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0);
    Matrix3::identity() + k + k * k * ((1.0 - c) / (s * s))
}

/// Area of the curved panel spanned by three unit-sphere vertices, through
/// the composite map b ↦ shape(normalize(b₁A + b₂B + b₃C)).
fn panel_area(
    surface: &Surface,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Result<f64> {
    let point = |b1: f64, b2: f64| -> Result<Vector3<f64>> {
        let q = a * b1 + b * b2 + c * (1.0 - b1 - b2);
        shape_point(surface, &q.normalize())
    };
    let d = 1e-5;
    let mut area = 0.0;
    for &(b1, b2, _, wq) in &TRI6 {
        let dp1 = (point(b1 + d, b2)? - point(b1 - d, b2)?) / (2.0 * d);
        let dp2 = (point(b1, b2 + d)? - point(b1, b2 - d)?) / (2.0 * d);
        area += wq * dp1.cross(&dp2).norm() / 2.0;
    }
    Ok(area)
}

/// Icosahedron refined `nsub` times by edge-midpoint subdivision, vertices
/// on the unit sphere, faces oriented outward.
fn icosphere(nsub: usize) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = Vec::with_capacity(12);
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            verts.push(Vector3::new(0.0, s1, s2 * phi));
            verts.push(Vector3::new(s1, s2 * phi, 0.0));
            verts.push(Vector3::new(s2 * phi, 0.0, s1));
        }
    }
    for v in verts.iter_mut() {
        *v = v.normalize();
    }
    // Faces: all vertex triples at the icosahedral edge length.
    let edge = (verts[0] - verts[2]).norm();
    let mut faces: Vec<[usize; 3]> = Vec::with_capacity(20);
    for i in 0..12 {
        for j in (i + 1)..12 {
            if ((verts[i] - verts[j]).norm() - edge).abs() > 1e-9 {
                continue;
            }
            for k in (j + 1)..12 {
                if ((verts[i] - verts[k]).norm() - edge).abs() < 1e-9
                    && ((verts[j] - verts[k]).norm() - edge).abs() < 1e-9
                {
                    faces.push([i, j, k]);
                }
            }
        }
    }
    debug_assert_eq!(faces.len(), 20);
    for _ in 0..nsub {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut new_faces = Vec::with_capacity(4 * faces.len());
        for f in &faces {
            let mut mid = [0usize; 3];
            for (m, (i, j)) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]
                .into_iter()
                .enumerate()
            {
                let key = (i.min(j), i.max(j));
                mid[m] = *cache.entry(key).or_insert_with(|| {
                    verts.push((verts[i] + verts[j]).normalize());
                    verts.len() - 1
                });
            }
            new_faces.push([f[0], mid[0], mid[2]]);
            new_faces.push([mid[0], f[1], mid[1]]);
            new_faces.push([mid[2], mid[1], f[2]]);
            new_faces.push([mid[0], mid[1], mid[2]]);
        }
        faces = new_faces;
    }
    // Orient every face outward (positive volume contribution).
    for f in faces.iter_mut() {
        let (a, b, c) = (verts[f[0]], verts[f[1]], verts[f[2]]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            f.swap(1, 2);
        }
    }
    (verts, faces)
}
