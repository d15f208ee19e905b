//! Boundary geometry of the diffusion domain: shapes, curvature frames,
//! geodesics of the induced boundary metric, the window chart, and
//! volume/area measures.
//!
//! Conventions (used consistently by every downstream module):
//! - the ambient distance d_g(x, y) = |x − y| is the Euclidean chord;
//! - d_h is the geodesic distance inside the boundary surface (d_h ≥ d_g);
//! - principal curvatures are taken with the inward-pointing convention, so
//!   the unit sphere has λ₁ = λ₂ = +1;
//! - flux normals ν point outward;
//! - the frame (E₁, E₂, ν) is right-handed: E₁ × E₂ = ν.

mod curvature;
mod geodesic;
mod measures;
mod shape;
mod window;

pub use curvature::CurvatureData;
pub use shape::{ImmersionChart, Shape};
pub use window::WindowSpec;

use crate::error::{Error, Result};
use nalgebra::Vector3;

/// Volume of the solid domain and area of its boundary surface.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DomainMeasures {
    pub volume: f64,
    pub boundary_area: f64,
}

/// A closed C² boundary surface together with the solid domain it bounds.
#[derive(Clone)]
pub struct Surface {
    pub(crate) shape: Shape,
}

impl Surface {
    pub fn new(shape: Shape) -> Self {
        Surface { shape }
    }

    pub fn unit_ball() -> Self {
        Surface::new(Shape::Ball { radius: 1.0 })
    }

    pub fn ball(radius: f64) -> Self {
        Surface::new(Shape::Ball { radius })
    }

    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Self {
        Surface::new(Shape::Ellipsoid {
            semi_axes: [a, b, c],
        })
    }

    /// Surface of revolution around the z-axis with squared profile
    /// ρ²(z) = (1 − z²) q(z) on [−1, 1]; `q_coeffs` are the coefficients of
    /// q (ascending powers), and q must stay positive on [−1, 1].
    pub fn revolution(q_coeffs: Vec<f64>) -> Result<Self> {
        shape::check_revolution_profile(&q_coeffs)?;
        Ok(Surface::new(Shape::Revolution { q_coeffs }))
    }

    /// Chord distance in the ambient space.
    pub fn ambient_distance(&self, x: &Vector3<f64>, y: &Vector3<f64>) -> f64 {
        (x - y).norm()
    }

    /// True when the point lies strictly inside the solid domain.
    pub fn is_inside(&self, p: &Vector3<f64>) -> bool {
        self.shape.level(p) < 0.0
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.shape.gradient(p).normalize()
    }

    /// Nearest-point projection onto the boundary (Newton on the level set).
    pub fn project(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        self.shape.project(p)
    }

    /// Exit length t > 0 with x + tΩ on the boundary, for x inside.
    pub fn ray_exit(&self, x: &Vector3<f64>, dir: &Vector3<f64>) -> Result<f64> {
        self.shape.ray_exit(x, dir)
    }

    pub(crate) fn level(&self, p: &Vector3<f64>) -> f64 {
        self.shape.level(p)
    }

    /// Characteristic length of the domain (used for tolerances).
    pub fn scale(&self) -> f64 {
        self.shape.scale()
    }

    /// Heuristic admissibility bound on the window radius ε: a fraction of
    /// the smallest principal curvature radius at the window center. Inside
    /// this bound the geodesic window chart stays injective in practice.
    pub fn admissible_eps(&self, center: &Vector3<f64>) -> Result<f64> {
        let c = self.curvature_at(center)?;
        let kmax = c.lambda1.abs().max(c.lambda2.abs()).max(1.0 / self.scale());
        Ok(0.25 / kmax)
    }
}

pub(crate) fn orthonormal_tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    // Deterministic: pick the coordinate axis least aligned with n.
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut best = 0;
    let mut best_dot = f64::INFINITY;
    for (i, a) in axes.iter().enumerate() {
        let d = n.dot(a).abs();
        if d < best_dot {
            best_dot = d;
            best = i;
        }
    }
    let t1 = (axes[best] - n * n.dot(&axes[best])).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

pub(crate) fn geometry_err(msg: impl Into<String>) -> Error {
    Error::Geometry(msg.into())
}
