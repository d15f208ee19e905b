//! Curvature frames. The second fundamental form and the shape operator are
//! taken with respect to the inward normal (unit sphere: λ₁ = λ₂ = +1);
//! the stored `normal` is the outward one used by flux quantities, and the
//! frame satisfies E₁ × E₂ = normal.

use super::shape::Shape;
use super::{geometry_err, orthonormal_tangent_basis, Surface};
use crate::error::Result;
use nalgebra::{Matrix2, Vector2, Vector3};

/// Principal curvatures λ₁ ≥ λ₂ with their orthonormal directions and the
/// outward unit normal; `mean_curvature` = (λ₁ + λ₂)/2.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureData {
    pub lambda1: f64,
    pub lambda2: f64,
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub mean_curvature: f64,
}

/// Relative gap below which a point counts as umbilic and the frame falls
/// back to a fixed reference axis.
pub(crate) const UMBILIC_GAP: f64 = 1e-9;

impl Surface {
    /// First and second fundamental forms at a boundary point, both expressed
    /// in a deterministic orthonormal tangent basis (so the first form is the
    /// identity for level-set shapes). For immersed charts `p` is ignored in
    /// favor of chart coordinates; use [`Surface::fundamental_forms_chart`].
    pub fn fundamental_forms(&self, p: &Vector3<f64>) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
        match &self.shape {
            Shape::Immersion { .. } => Err(geometry_err(
                "immersed charts take chart coordinates; call fundamental_forms_chart",
            )),
            _ => {
                let n = self.outward_normal(p);
                let (t1, t2) = orthonormal_tangent_basis(&n);
                let a = self.inward_hessian_form(p);
                let second = Matrix2::new(
                    t1.dot(&(a * t1)),
                    t1.dot(&(a * t2)),
                    t2.dot(&(a * t1)),
                    t2.dot(&(a * t2)),
                );
                Ok((Matrix2::identity(), second))
            }
        }
    }

    /// Fundamental forms of an immersed chart in its own (u, v) coordinates.
    pub fn fundamental_forms_chart(&self, u: &Vector2<f64>) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
        let Shape::Immersion { chart } = &self.shape else {
            return Err(geometry_err("chart coordinates need an immersed shape"));
        };
        let (xu, xv) = chart_jacobian(chart.as_ref(), u);
        let cross = xu.cross(&xv);
        let cn = cross.norm();
        if cn < 1e-12 {
            return Err(geometry_err("chart Jacobian is rank deficient"));
        }
        // Inward normal: the chart is oriented with X_u × X_v outward.
        let n_in = -cross / cn;
        let (xuu, xuv, xvv) = chart_second(chart.as_ref(), u);
        let first = Matrix2::new(xu.dot(&xu), xu.dot(&xv), xv.dot(&xu), xv.dot(&xv));
        let second = Matrix2::new(
            xuu.dot(&n_in),
            xuv.dot(&n_in),
            xuv.dot(&n_in),
            xvv.dot(&n_in),
        );
        Ok((first, second))
    }

    /// Principal curvature data at a boundary point of a level-set shape.
    pub fn curvature_at(&self, p: &Vector3<f64>) -> Result<CurvatureData> {
        match &self.shape {
            Shape::Immersion { .. } => Err(geometry_err(
                "immersed charts take chart coordinates; call curvature_at_chart",
            )),
            _ => {
                let n = self.outward_normal(p);
                let (t1, t2) = orthonormal_tangent_basis(&n);
                let a = self.inward_hessian_form(p);
                let m = Matrix2::new(
                    t1.dot(&(a * t1)),
                    t1.dot(&(a * t2)),
                    t2.dot(&(a * t1)),
                    t2.dot(&(a * t2)),
                );
                Ok(frame_from_eigen(&m, &t1, &t2, &n))
            }
        }
    }

    /// Principal curvature data of an immersed chart at chart coordinates.
    pub fn curvature_at_chart(&self, u: &Vector2<f64>) -> Result<CurvatureData> {
        let Shape::Immersion { chart } = &self.shape else {
            return Err(geometry_err("chart coordinates need an immersed shape"));
        };
        let (first, second) = self.fundamental_forms_chart(u)?;
        let (xu, xv) = chart_jacobian(chart.as_ref(), u);
        let n_out = xu.cross(&xv).normalize();
        // Orthonormalize the chart basis (Gram–Schmidt) and re-express the
        // shape operator there; the eigenproblem then stays symmetric.
        let e = first[(0, 0)].sqrt();
        let t1 = xu / e;
        let proj = xv.dot(&t1);
        let t2v = xv - t1 * proj;
        let t2n = t2v.norm();
        if t2n < 1e-12 {
            return Err(geometry_err("chart Jacobian is rank deficient"));
        }
        let t2 = t2v / t2n;
        // Basis change from chart coords to (t1, t2): columns of B.
        let b = Matrix2::new(e, proj, 0.0, t2n);
        let binv = b
            .try_inverse()
            .ok_or_else(|| geometry_err("chart basis change is singular"))?;
        let m_ortho = binv.transpose() * second * binv;
        Ok(frame_from_eigen(&m_ortho, &t1, &t2, &n_out))
    }

    /// Ambient-coordinate inward second-fundamental-form operator
    /// Hess F / |∇F| (restriction to the tangent plane is implicit).
    fn inward_hessian_form(&self, p: &Vector3<f64>) -> nalgebra::Matrix3<f64> {
        let g = self.shape.gradient(p);
        self.shape.hessian(p) / g.norm()
    }
}

/// Eigen-decompose a symmetric 2×2 form given in the orthonormal tangent
/// basis (t1, t2); returns the ordered frame with E₁ × E₂ = n.
fn frame_from_eigen(
    m: &Matrix2<f64>,
    t1: &Vector3<f64>,
    t2: &Vector3<f64>,
    n: &Vector3<f64>,
) -> CurvatureData {
    let (a, b, c) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    let half_tr = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let lambda1 = half_tr + disc;
    let lambda2 = half_tr - disc;

    let e1 = if lambda1 - lambda2 < UMBILIC_GAP * lambda1.abs().max(lambda2.abs()).max(1.0) {
        // Umbilic: any direction is principal; use a fixed reference axis
        // projected to the tangent plane for reproducible frames.
        let mut v = Vector3::x() - n * n.x;
        if v.norm() < 1e-6 {
            v = Vector3::y() - n * n.y;
        }
        v.normalize()
    } else {
        // Eigenvector of the larger eigenvalue: the more orthogonal of the
        // two algebraic candidates.
        let cand1 = Vector2::new(b, lambda1 - a);
        let cand2 = Vector2::new(lambda1 - c, b);
        let v = if cand1.norm() >= cand2.norm() {
            cand1.normalize()
        } else {
            cand2.normalize()
        };
        canonical_sign(t1 * v.x + t2 * v.y)
    };
    let e2 = n.cross(&e1);
    CurvatureData {
        lambda1,
        lambda2,
        e1,
        e2,
        normal: *n,
        mean_curvature: half_tr,
    }
}

/// Flip the sign so the largest-magnitude Cartesian component is positive.
fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let mut idx = 0;
    for i in 1..3 {
        if v[i].abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        -v
    } else {
        v
    }
}

fn chart_jacobian(chart: &dyn super::ImmersionChart, u: &Vector2<f64>) -> (Vector3<f64>, Vector3<f64>) {
    if let Some([xu, xv]) = chart.jacobian(u) {
        return (xu, xv);
    }
    let h = chart.fd_step();
    let xu = (chart.point(&Vector2::new(u.x + h, u.y)) - chart.point(&Vector2::new(u.x - h, u.y)))
        / (2.0 * h);
    let xv = (chart.point(&Vector2::new(u.x, u.y + h)) - chart.point(&Vector2::new(u.x, u.y - h)))
        / (2.0 * h);
    (xu, xv)
}

fn chart_second(
    chart: &dyn super::ImmersionChart,
    u: &Vector2<f64>,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    if let Some([xuu, xuv, xvv]) = chart.second_derivatives(u) {
        return (xuu, xuv, xvv);
    }
    let h = chart.fd_step();
    let p0 = chart.point(u);
    let pu = chart.point(&Vector2::new(u.x + h, u.y));
    let mu = chart.point(&Vector2::new(u.x - h, u.y));
    let pv = chart.point(&Vector2::new(u.x, u.y + h));
    let mv = chart.point(&Vector2::new(u.x, u.y - h));
    let pp = chart.point(&Vector2::new(u.x + h, u.y + h));
    let pm = chart.point(&Vector2::new(u.x + h, u.y - h));
    let mp = chart.point(&Vector2::new(u.x - h, u.y + h));
    let mm = chart.point(&Vector2::new(u.x - h, u.y - h));
    let xuu = (pu - p0 * 2.0 + mu) / (h * h);
    let xvv = (pv - p0 * 2.0 + mv) / (h * h);
    let xuv = (pp - pm - mp + mm) / (4.0 * h * h);
    (xuu, xuv, xvv)
}
