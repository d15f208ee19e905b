//! Shape catalogue. The three solid kinds (ball, ellipsoid, surface of
//! revolution) carry an analytic level set F with F < 0 inside, which gives
//! normals, curvature, ray casting and projection in closed form. A generic
//! immersed chart supports the intrinsic surface operations only.

use super::geometry_err;
use crate::error::Result;
use nalgebra::{Matrix3, Vector2, Vector3};
use std::sync::Arc;

/// User-supplied parametrized surface patch. `point` must be C²; derivatives
/// are optional and are replaced by central differences when absent.
pub trait ImmersionChart: Send + Sync {
    fn point(&self, u: &Vector2<f64>) -> Vector3<f64>;
    /// Parameter rectangle [u_min, u_max] × [v_min, v_max].
    fn domain(&self) -> [f64; 4];
    fn jacobian(&self, _u: &Vector2<f64>) -> Option<[Vector3<f64>; 2]> {
        None
    }
    /// Second partials (X_uu, X_uv, X_vv).
    fn second_derivatives(&self, _u: &Vector2<f64>) -> Option<[Vector3<f64>; 3]> {
        None
    }
    /// Step used for finite-difference derivatives; tune to curvature scale.
    fn fd_step(&self) -> f64 {
        1e-5
    }
}

#[derive(Clone)]
pub enum Shape {
    Ball { radius: f64 },
    Ellipsoid { semi_axes: [f64; 3] },
    /// ρ²(z) = (1 − z²) q(z) around the z-axis, q > 0 on [−1, 1].
    Revolution { q_coeffs: Vec<f64> },
    Immersion { chart: Arc<dyn ImmersionChart> },
}

pub(crate) fn check_revolution_profile(q: &[f64]) -> Result<()> {
    if q.is_empty() {
        return Err(geometry_err("revolution profile q(z) has no coefficients"));
    }
    for k in 0..=400 {
        let z = -1.0 + 2.0 * k as f64 / 400.0;
        if poly_eval(q, z) <= 0.0 {
            return Err(geometry_err(format!(
                "revolution profile q(z) must be positive on [-1,1]; q({z:.3}) <= 0"
            )));
        }
    }
    Ok(())
}

pub(crate) fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &ck)| k as f64 * ck)
        .collect()
}

impl Shape {
    /// Level-set value; negative inside the solid domain.
    pub fn level(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Shape::Ball { radius } => p.norm_squared() - radius * radius,
            Shape::Ellipsoid { semi_axes: s } => {
                (p.x / s[0]).powi(2) + (p.y / s[1]).powi(2) + (p.z / s[2]).powi(2) - 1.0
            }
            Shape::Revolution { q_coeffs } => {
                p.x * p.x + p.y * p.y - (1.0 - p.z * p.z) * poly_eval(q_coeffs, p.z)
            }
            Shape::Immersion { .. } => f64::NAN,
        }
    }

    pub fn gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        match self {
            Shape::Ball { .. } => 2.0 * p,
            Shape::Ellipsoid { semi_axes: s } => Vector3::new(
                2.0 * p.x / (s[0] * s[0]),
                2.0 * p.y / (s[1] * s[1]),
                2.0 * p.z / (s[2] * s[2]),
            ),
            Shape::Revolution { q_coeffs } => {
                let q = poly_eval(q_coeffs, p.z);
                let dq = poly_eval(&poly_derivative(q_coeffs), p.z);
                // d/dz of ρ² = -2z q + (1-z²) q'
                let drho2 = -2.0 * p.z * q + (1.0 - p.z * p.z) * dq;
                Vector3::new(2.0 * p.x, 2.0 * p.y, -drho2)
            }
            Shape::Immersion { .. } => Vector3::zeros(),
        }
    }

    pub fn hessian(&self, p: &Vector3<f64>) -> Matrix3<f64> {
        match self {
            Shape::Ball { .. } => Matrix3::identity() * 2.0,
            Shape::Ellipsoid { semi_axes: s } => Matrix3::from_diagonal(&Vector3::new(
                2.0 / (s[0] * s[0]),
                2.0 / (s[1] * s[1]),
                2.0 / (s[2] * s[2]),
            )),
            Shape::Revolution { q_coeffs } => {
                let dq = poly_derivative(q_coeffs);
                let ddq = poly_derivative(&dq);
                let (q, q1, q2) = (
                    poly_eval(q_coeffs, p.z),
                    poly_eval(&dq, p.z),
                    poly_eval(&ddq, p.z),
                );
                // second z-derivative of ρ²(z) = (1-z²)q
                let d2rho2 = -2.0 * q - 4.0 * p.z * q1 + (1.0 - p.z * p.z) * q2;
                let mut h = Matrix3::identity() * 2.0;
                h[(2, 2)] = -d2rho2;
                h
            }
            Shape::Immersion { .. } => Matrix3::zeros(),
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            Shape::Ball { radius } => *radius,
            Shape::Ellipsoid { semi_axes } => semi_axes.iter().cloned().fold(0.0, f64::max),
            Shape::Revolution { q_coeffs } => poly_eval(q_coeffs, 0.0).sqrt().max(1.0),
            Shape::Immersion { .. } => 1.0,
        }
    }

    pub fn is_solid(&self) -> bool {
        !matches!(self, Shape::Immersion { .. })
    }

    /// Newton projection of p onto the level set along the gradient.
    pub fn project(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        if !self.is_solid() {
            return Err(geometry_err("projection needs a level-set shape"));
        }
        let mut x = *p;
        for _ in 0..60 {
            let f = self.level(&x);
            let g = self.gradient(&x);
            let g2 = g.norm_squared();
            if g2 == 0.0 {
                return Err(geometry_err("projection hit a critical point"));
            }
            let step = f / g2;
            x -= g * step;
            if (f / g2.sqrt()).abs() < 1e-13 * self.scale() {
                return Ok(x);
            }
        }
        Err(geometry_err("projection did not converge"))
    }

    /// First boundary crossing x + tΩ, t > 0, from an interior point.
    pub fn ray_exit(&self, x: &Vector3<f64>, dir: &Vector3<f64>) -> Result<f64> {
        match self {
            Shape::Ball { radius } => {
                let b = x.dot(dir);
                let c = x.norm_squared() - radius * radius;
                let disc = b * b - dir.norm_squared() * c;
                if disc < 0.0 {
                    return Err(geometry_err("ray misses ball boundary"));
                }
                Ok((-b + disc.sqrt()) / dir.norm_squared())
            }
            Shape::Ellipsoid { semi_axes: s } => {
                let xs = Vector3::new(x.x / s[0], x.y / s[1], x.z / s[2]);
                let ds = Vector3::new(dir.x / s[0], dir.y / s[1], dir.z / s[2]);
                let a = ds.norm_squared();
                let b = xs.dot(&ds);
                let c = xs.norm_squared() - 1.0;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return Err(geometry_err("ray misses ellipsoid boundary"));
                }
                Ok((-b + disc.sqrt()) / a)
            }
            Shape::Revolution { .. } => {
                // Bracket the first sign change, then bisect + Newton polish.
                let scale = self.scale();
                let mut t0 = 0.0;
                let mut f0 = self.level(x);
                if f0 >= 0.0 {
                    return Err(geometry_err("ray_exit needs an interior start"));
                }
                let dt = 0.02 * scale;
                let mut t1 = dt;
                let mut found = false;
                for _ in 0..2000 {
                    let f1 = self.level(&(x + dir * t1));
                    if f1 >= 0.0 {
                        found = true;
                        break;
                    }
                    t0 = t1;
                    f0 = f1;
                    t1 += dt;
                }
                if !found {
                    return Err(geometry_err("ray did not exit revolution surface"));
                }
                let mut lo = t0;
                let mut hi = t1;
                let mut flo = f0;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let fm = self.level(&(x + dir * mid));
                    if fm < 0.0 {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-14 * scale.max(1.0) {
                        break;
                    }
                }
                let _ = flo;
                Ok(0.5 * (lo + hi))
            }
            Shape::Immersion { .. } => Err(geometry_err("ray casting needs a level-set shape")),
        }
    }
}
