//! Absorbing window: a geodesic ellipse on the boundary with semi-axes ε and
//! aε along the principal directions at its center. The window chart maps the
//! closed unit disk s' ↦ exp_{x*}(ε s₁ E₁ + ε a s₂ E₂); its area element is
//! a ε² (1 + O(ε²)). Membership of a boundary point is decided by pulling the
//! point back through the chart (log map), never by ambient distance.

use super::{CurvatureData, Surface};
use crate::error::Result;
use crate::error::Error;
use nalgebra::{Vector2, Vector3};

/// Geodesic-ellipse window Γ on the boundary surface.
#[derive(Debug, Clone)]
pub struct WindowSpec {
    /// Window center x* (on the boundary).
    pub center: Vector3<f64>,
    /// Geodesic major semi-axis ε (along E₁).
    pub eps: f64,
    /// Aspect ratio a ∈ (0, 1]; minor semi-axis is aε (along E₂).
    pub a: f64,
    /// Curvature frame at the center; the chart axes are its E₁, E₂.
    pub frame: CurvatureData,
}

impl WindowSpec {
    /// Build a window centered at the boundary projection of `center`.
    /// Fails if a ∉ (0,1], ε ≤ 0, or ε exceeds the admissibility bound of
    /// the surface at the center.
    pub fn new(surface: &Surface, center: &Vector3<f64>, eps: f64, a: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Config(format!(
                "window aspect ratio a must lie in (0, 1], got {a}"
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::Config(format!(
                "window radius eps must be positive, got {eps}"
            )));
        }
        let x_star = surface.project(center)?;
        let bound = surface.admissible_eps(&x_star)?;
        if eps > bound {
            return Err(Error::Config(format!(
                "window radius eps = {eps} exceeds the admissibility bound {bound:.4} \
                 at the window center"
            )));
        }
        let frame = surface.curvature_at(&x_star)?;
        Ok(WindowSpec {
            center: x_star,
            eps,
            a,
            frame,
        })
    }

    /// Chart map: s' in the closed unit disk ↦ boundary point.
    pub fn chart_point(&self, surface: &Surface, s: &Vector2<f64>) -> Result<Vector3<f64>> {
        let w = Vector2::new(self.eps * s.x, self.eps * self.a * s.y);
        let arc = w.norm();
        if arc == 0.0 {
            return Ok(self.center);
        }
        let dir = (self.frame.e1 * w.x + self.frame.e2 * w.y) / arc;
        surface.exp_map(&self.center, &dir, arc)
    }

    /// Induced area element |∂X/∂s₁ × ∂X/∂s₂| of the chart at s', by central
    /// differences; equals aε²(1 + O(ε²)) uniformly on the disk.
    pub fn area_element(&self, surface: &Surface, s: &Vector2<f64>) -> Result<f64> {
        let d = 1e-4;
        let xp = self.chart_point(surface, &Vector2::new(s.x + d, s.y))?;
        let xm = self.chart_point(surface, &Vector2::new(s.x - d, s.y))?;
        let yp = self.chart_point(surface, &Vector2::new(s.x, s.y + d))?;
        let ym = self.chart_point(surface, &Vector2::new(s.x, s.y - d))?;
        let du = (xp - xm) / (2.0 * d);
        let dv = (yp - ym) / (2.0 * d);
        Ok(du.cross(&dv).norm())
    }

    /// Window membership of a boundary point by pullback: compute the log-map
    /// coordinates (w₁, w₂) at the center and test (w₁/ε)² + (w₂/(aε))² ≤ 1.
    /// Points with chord distance > ε are rejected without shooting (the
    /// ellipse lies inside the geodesic ball of radius ε and d_g ≤ d_h).
    pub fn contains(&self, surface: &Surface, p: &Vector3<f64>) -> Result<bool> {
        if (p - self.center).norm() > self.eps {
            return Ok(false);
        }
        let w = surface.log_map_in_frame(&self.center, &self.frame.e1, &self.frame.e2, p, true)?;
        let t1 = w.x / self.eps;
        let t2 = w.y / (self.a * self.eps);
        Ok(t1 * t1 + t2 * t2 <= 1.0)
    }

    /// Pullback chart coordinates s' of a boundary point near the window
    /// (valid while the chart stays injective).
    pub fn pullback(&self, surface: &Surface, p: &Vector3<f64>) -> Result<Vector2<f64>> {
        let w = surface.log_map_in_frame(&self.center, &self.frame.e1, &self.frame.e2, p, false)?;
        Ok(Vector2::new(w.x / self.eps, w.y / (self.a * self.eps)))
    }
}
