//! Integral operators on the unit disk 𝔻 tied to the X-ray transform.
//!
//! The normal operator L f(t') = ∫_𝔻 f(s')/|t'−s'| ds' equals ½ I*I for the
//! X-ray transform I, and its anisotropic variant
//!   L_a f(t') = a ∫_𝔻 f(s') ((t₁−s₁)² + a²(t₂−s₂)²)^{−1/2} ds'
//! arises from an elliptic window after rescaling the minor axis. All
//! inverses of smooth functions live in the weighted space
//! {smooth factor} × (1−|t'|²)^{−1/2}; in particular
//!   L_a (K_a^{−1} (1−|t'|²)^{−1/2}) = 1,
//!   K_a = (π/2)∫₀^{2π}(cos²θ + sin²θ/a²)^{−1/2} dθ,  K₁ = π².
//! The companion kernels
//!   R_{log,a}: a·log((t₁−s₁)² + a²(t₂−s₂)²)^{1/2},
//!   R_{∞,a}:   a·((t₁−s₁)² − a²(t₂−s₂)²)/((t₁−s₁)² + a²(t₂−s₂)²)
//! enter the O(1) window constant through the weighted pairings
//! ⟨(1−|t'|²)^{−1/2}, R_{·,a}(1−|s'|²)^{−1/2}⟩.
//!
//! Quadrature design: every target integral is taken in polar coordinates
//! centered at t', where the ray 0 ≤ r ≤ R(φ) hits the rim at
//! R = −t'·ω + √(1 − |t'|² + (t'·ω)²) and the rim weight factorizes as
//! 1 − |t' + rω|² = (R − r)(r − r₋). The substitution
//! r = −t'·ω + √(1−|t'|²+(t'·ω)²)·sin ψ turns (1−|s'|²)^{−1/2} dr into dψ,
//! absorbing the endpoint singularity exactly; the polar Jacobian r cancels
//! the 1/r of the L_a kernel analytically.

mod solve;
mod zernike;

pub use solve::{solve_l_a, GalerkinSolution};

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre_on, pairwise_sum, periodic_adaptive};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

/// Default polar resolution (radial × angular); identity checks double it
/// automatically when a tolerance is missed.
pub const DEFAULT_N_R: usize = 64;
pub const DEFAULT_N_THETA: usize = 128;

/// Unit-circle direction table (cos θ_j, sin θ_j), θ_j = 2πj/n, built so the
/// node multiset is *bitwise* invariant under the coordinate swap
/// (x, y) ↦ (y, x) (θ ↦ π/2 − θ). This makes the antisymmetry that kills
/// pairing_inf(1) exact in the discretization. Requires n divisible by 4.
pub(crate) fn symmetric_angles(n: usize) -> Vec<(f64, f64)> {
    assert!(n % 4 == 0, "angular resolution must be divisible by 4");
    let quarter = n / 4;
    let mut base = vec![(0.0f64, 0.0f64); quarter + 1];
    for (j, slot) in base.iter_mut().enumerate() {
        if 2 * j < quarter {
            let th = 2.0 * PI * j as f64 / n as f64;
            *slot = (th.cos(), th.sin());
        }
    }
    for j in 0..=quarter {
        if 2 * j == quarter {
            let c = (2.0 * PI * j as f64 / n as f64).cos();
            base[j] = (c, c);
        } else if 2 * j > quarter {
            let (c, s) = base[quarter - j];
            base[j] = (s, c);
        }
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let (q, m) = (j / quarter, j % quarter);
        let (c, s) = base[m];
        out.push(match q {
            0 => (c, s),
            1 => (-s, c),
            2 => (-c, -s),
            _ => (s, -c),
        });
    }
    out
}

/// Polar tensor quadrature on the unit disk with plain area weights
/// (Σw = π). Radial Gauss–Legendre against r dr, angular trapezoid.
#[derive(Debug, Clone)]
pub struct DiskGrid {
    pub n_r: usize,
    pub n_theta: usize,
    /// Flattened nodes (x, y, weight).
    pub nodes: Vec<(f64, f64, f64)>,
}

impl DiskGrid {
    pub fn new(n_r: usize, n_theta: usize) -> Self {
        let (rs, ws) = gauss_legendre_on(n_r, 0.0, 1.0);
        let angles = symmetric_angles(n_theta);
        let dth = 2.0 * PI / n_theta as f64;
        let mut nodes = Vec::with_capacity(n_r * n_theta);
        for (&r, &wr) in rs.iter().zip(&ws) {
            for &(c, s) in &angles {
                nodes.push((r * c, r * s, wr * r * dth));
            }
        }
        DiskGrid {
            n_r,
            n_theta,
            nodes,
        }
    }
}

/// Rim-weighted companion grid: quadrature for ∫_𝔻 g(t')(1−|t'|²)^{−1/2} dt'
/// (Σw = 2π), with radii r = sin ψ so the weight is absorbed analytically.
pub fn rim_weighted_grid(n_r: usize, n_theta: usize) -> Vec<(f64, f64, f64)> {
    let (psis, wpsis) = gauss_legendre_on(n_r, 0.0, FRAC_PI_2);
    let angles = symmetric_angles(n_theta);
    let dth = 2.0 * PI / n_theta as f64;
    let mut nodes = Vec::with_capacity(n_r * n_theta);
    for (&psi, &wp) in psis.iter().zip(&wpsis) {
        let r = psi.sin();
        for &(c, s) in &angles {
            nodes.push((r * c, r * s, wp * r * dth));
        }
    }
    nodes
}

/// Smooth factor v of a weighted density f(t') = v(t')·(1−|t'|²)^{−1/2}.
#[derive(Clone)]
pub enum SmoothFactor {
    Constant(f64),
    /// Zernike expansion Σ c_k Z_k; entries are (radial order n, angular m)
    /// with m ≥ 0 ↦ cos(mθ) and m < 0 ↦ sin(|m|θ).
    Zernike {
        modes: Vec<(u32, i32)>,
        coeffs: Vec<f64>,
    },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

/// Edge-singular density on the unit disk, stored via its smooth factor.
#[derive(Clone)]
pub struct WeightedDiskDensity {
    pub factor: SmoothFactor,
}

impl WeightedDiskDensity {
    pub fn constant(v: f64) -> Self {
        WeightedDiskDensity {
            factor: SmoothFactor::Constant(v),
        }
    }

    pub fn from_fn(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        WeightedDiskDensity {
            factor: SmoothFactor::Custom(Arc::new(f)),
        }
    }

    /// Smooth factor v(x, y); finite on the closed disk.
    pub fn smooth_factor(&self, x: f64, y: f64) -> f64 {
        match &self.factor {
            SmoothFactor::Constant(c) => *c,
            SmoothFactor::Zernike { modes, coeffs } => modes
                .iter()
                .zip(coeffs)
                .map(|(&(n, m), &c)| c * zernike::eval(n, m, x, y))
                .sum(),
            SmoothFactor::Custom(f) => f(x, y),
        }
    }

    /// ∫_𝔻 f: the weight integrates the smooth factor against the rim rule.
    pub fn integral(&self, n_r: usize, n_theta: usize) -> f64 {
        let terms: Vec<f64> = rim_weighted_grid(n_r, n_theta)
            .iter()
            .map(|&(x, y, w)| w * self.smooth_factor(x, y))
            .collect();
        pairwise_sum(&terms)
    }
}

/// K_a = (π/2)∫₀^{2π}(cos²θ + sin²θ/a²)^{−1/2} dθ, the window capacitance
/// constant; K₁ = π² exactly.
pub fn k_a(a: f64) -> Result<f64> {
    check_aspect(a)?;
    let val = periodic_adaptive(
        |th| {
            let (s, c) = th.sin_cos();
            1.0 / (c * c + s * s / (a * a)).sqrt()
        },
        1e-13,
    )
    .map_err(Error::Quadrature)?;
    Ok(FRAC_PI_2 * val)
}

/// u₀,a = K_a^{−1}(1−|t'|²)^{−1/2}: the unique weighted solution of L_a u = 1.
pub fn u0_a(a: f64) -> Result<WeightedDiskDensity> {
    Ok(WeightedDiskDensity::constant(1.0 / k_a(a)?))
}

fn check_aspect(a: f64) -> Result<()> {
    if a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "aspect ratio a must lie in (0, 1], got {a}"
        )))
    }
}

/// Closed form of R_{log,1} u₀ at radius r:
/// (2/π)[log r + ½log|√(1−r²)+1| − ½log|√(1−r²)−1| − √(1−r²)].
/// Near r = 0 the first and third terms cancel; a series branch keeps full
/// precision there (value (2/π)(log 2 − 1) at r = 0).
pub fn f_log_closed(r: f64) -> f64 {
    // With q = √(1−r²) the identity 1−q = r²/(1+q) collapses
    // log r + ½log(1+q) − ½log(1−q) − q to log(1+q) − q, which is
    // cancellation-free on the whole disk.
    let q = ((1.0 - r) * (1.0 + r)).max(0.0).sqrt();
    (2.0 / PI) * (q.ln_1p() - q)
}

/// X-ray transform of a weighted density along the chord through boundary
/// point x (|x| = 1) with direction `dir`: the substitution
/// τ = T(1−cos φ)/2 (T = chord length) absorbs both endpoint singularities,
/// leaving the midpoint rule on a smooth integrand.
pub fn xray_transform(f: &WeightedDiskDensity, x: (f64, f64), dir: (f64, f64)) -> f64 {
    let nrm = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
    if nrm == 0.0 {
        return 0.0;
    }
    let d = (dir.0 / nrm, dir.1 / nrm);
    let t_len = -2.0 * (x.0 * d.0 + x.1 * d.1);
    if t_len <= 1e-14 {
        return 0.0; // tangent or outward chord
    }
    let n = 64;
    let mut sum = 0.0;
    for j in 0..n {
        let phi = PI * (j as f64 + 0.5) / n as f64;
        let tau = t_len * (1.0 - phi.cos()) / 2.0;
        sum += f.smooth_factor(x.0 + tau * d.0, x.1 + tau * d.1);
    }
    sum * PI / n as f64
}

/// ½·I*I applied to f at an interior point, reconstructed from chord
/// integrals: ½∫_{S¹} If(chord through t' with direction ω) dω. Agrees with
/// apply_l at a = 1 (the Schwartz kernel of I*I is 2/|t'−s'|).
pub fn half_istar_i(f: &WeightedDiskDensity, t: (f64, f64), n_dir: usize) -> f64 {
    let angles = symmetric_angles(n_dir);
    let t2 = t.0 * t.0 + t.1 * t.1;
    let mut sum = 0.0;
    for &(c, s) in &angles {
        let tw = t.0 * c + t.1 * s;
        let back = tw + (1.0 - t2 + tw * tw).max(0.0).sqrt();
        let x = (t.0 - back * c, t.1 - back * s);
        sum += xray_transform(f, x, (c, s));
    }
    0.5 * sum * 2.0 * PI / n_dir as f64
}

/// Operator family at fixed aspect a and polar resolution.
pub struct DiskOperators {
    pub a: f64,
    pub n_r: usize,
    pub n_theta: usize,
    angles: Vec<(f64, f64)>,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

enum KernelKind {
    InverseDistance,
    Log,
    Ratio,
}

impl DiskOperators {
    pub fn new(a: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        check_aspect(a)?;
        if n_theta % 4 != 0 {
            return Err(Error::Config(format!(
                "angular resolution must be divisible by 4, got {n_theta}"
            )));
        }
        let (gl_nodes, gl_weights) = gauss_legendre_on(n_r, -1.0, 1.0);
        Ok(DiskOperators {
            a,
            n_r,
            n_theta,
            angles: symmetric_angles(n_theta),
            gl_nodes,
            gl_weights,
        })
    }

    pub fn with_defaults(a: f64) -> Result<Self> {
        Self::new(a, DEFAULT_N_R, DEFAULT_N_THETA)
    }

    /// L_a f(t').
    pub fn apply_l(&self, f: &WeightedDiskDensity, t: (f64, f64)) -> Result<f64> {
        self.apply_kernel(f, t, KernelKind::InverseDistance)
    }

    /// R_{log,a} f(t').
    pub fn apply_r_log(&self, f: &WeightedDiskDensity, t: (f64, f64)) -> Result<f64> {
        self.apply_kernel(f, t, KernelKind::Log)
    }

    /// R_{∞,a} f(t').
    pub fn apply_r_inf(&self, f: &WeightedDiskDensity, t: (f64, f64)) -> Result<f64> {
        self.apply_kernel(f, t, KernelKind::Ratio)
    }

    fn apply_kernel(
        &self,
        f: &WeightedDiskDensity,
        t: (f64, f64),
        kind: KernelKind,
    ) -> Result<f64> {
        let t2 = t.0 * t.0 + t.1 * t.1;
        if t2 > 1.0 + 1e-12 {
            return Err(Error::Quadrature(format!(
                "operator target ({}, {}) lies outside the closed disk",
                t.0, t.1
            )));
        }
        let one_minus = (1.0 - t2).max(0.0);
        let a2 = self.a * self.a;
        let dth = 2.0 * PI / self.n_theta as f64;
        let mut total = 0.0;
        for &(c, s) in &self.angles {
            let tw = t.0 * c + t.1 * s;
            let disc = one_minus + tw * tw;
            if disc <= 0.0 {
                continue;
            }
            let d = disc.sqrt();
            if d < 1e-15 {
                continue;
            }
            let psi0 = (tw / d).clamp(-1.0, 1.0).asin();
            if FRAC_PI_2 - psi0 < 1e-15 {
                continue; // zero-length ray (target on the rim, outward angle)
            }
            let g = c * c + a2 * s * s;
            // Angle-only kernel factor (the log kernel keeps an r-dependent
            // part handled per node below).
            let ang_factor = match kind {
                KernelKind::InverseDistance => self.a / g.sqrt(),
                KernelKind::Log => self.a,
                KernelKind::Ratio => (self.a * (c * c - a2 * s * s)) / g,
            };
            // ψ-Gauss rule on [ψ₀, π/2]: (1−|s'|²)^{−1/2} dr = dψ.
            let half = 0.5 * (FRAC_PI_2 - psi0);
            let mid = 0.5 * (FRAC_PI_2 + psi0);
            let mut ray = 0.0;
            for (&xi, &wi) in self.gl_nodes.iter().zip(&self.gl_weights) {
                let psi = mid + half * xi;
                let r = (-tw + d * psi.sin()).max(0.0);
                let v = f.smooth_factor(t.0 + r * c, t.1 + r * s);
                let term = match kind {
                    KernelKind::InverseDistance => v,
                    // kernel a·log(r√g) against r dr; r·log r → 0 at the apex
                    KernelKind::Log => {
                        if r > 0.0 {
                            v * r * (r.ln() + 0.5 * g.ln())
                        } else {
                            0.0
                        }
                    }
                    KernelKind::Ratio => v * r,
                };
                ray += wi * half * term;
            }
            total += ang_factor * ray * dth;
        }
        Ok(total)
    }

    /// ⟨(1−|t'|²)^{−1/2}, R_{log,a}(1−|s'|²)^{−1/2}⟩ on this grid.
    pub fn pairing_log(&self) -> f64 {
        self.pairing(KernelKind::Log)
    }

    /// ⟨(1−|t'|²)^{−1/2}, R_{∞,a}(1−|s'|²)^{−1/2}⟩ on this grid; vanishes at
    /// a = 1 by an exact antisymmetry of the discretized sum.
    pub fn pairing_inf(&self) -> f64 {
        self.pairing(KernelKind::Ratio)
    }

    fn pairing(&self, kind: KernelKind) -> f64 {
        let weight = WeightedDiskDensity::constant(1.0);
        let outer = rim_weighted_grid(self.n_r, self.n_theta);
        let terms: Vec<f64> = outer
            .par_iter()
            .map(|&(x, y, w)| {
                let g = match kind {
                    KernelKind::Log => self.apply_r_log(&weight, (x, y)),
                    KernelKind::Ratio => self.apply_r_inf(&weight, (x, y)),
                    KernelKind::InverseDistance => self.apply_l(&weight, (x, y)),
                };
                w * g.expect("pairing target inside closed disk")
            })
            .collect();
        pairwise_sum(&terms)
    }

    /// Weighted inner product ⟨g·weight, h⟩ for a smooth function h:
    /// ∫ g(t') h(t') (1−|t'|²)^{−1/2} dt' on this grid.
    pub(crate) fn weighted_inner(
        &self,
        g: &WeightedDiskDensity,
        h: impl Fn(f64, f64) -> f64 + Sync,
    ) -> f64 {
        let terms: Vec<f64> = rim_weighted_grid(self.n_r, self.n_theta)
            .iter()
            .map(|&(x, y, w)| w * g.smooth_factor(x, y) * h(x, y))
            .collect();
        pairwise_sum(&terms)
    }
}

/// Weighted pairings at a given resolution with a refinement error estimate
/// (difference against the doubled grid).
pub fn pairing_log_a(a: f64, n_r: usize, n_theta: usize) -> Result<(f64, f64)> {
    let coarse = DiskOperators::new(a, n_r, n_theta)?.pairing_log();
    let fine = DiskOperators::new(a, 2 * n_r, 2 * n_theta)?.pairing_log();
    Ok((fine, (fine - coarse).abs()))
}

pub fn pairing_inf_a(a: f64, n_r: usize, n_theta: usize) -> Result<(f64, f64)> {
    let coarse = DiskOperators::new(a, n_r, n_theta)?.pairing_inf();
    let fine = DiskOperators::new(a, 2 * n_r, 2 * n_theta)?.pairing_inf();
    Ok((fine, (fine - coarse).abs()))
}

/// One line of the identity report produced by the verification suite.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub computed: f64,
    pub expected: f64,
    pub abs_error: f64,
    pub tol: f64,
    pub pass: bool,
    /// Resolution at which the reported value was obtained (the suite doubles
    /// the grid once when a check misses its tolerance).
    pub n_r: usize,
    pub n_theta: usize,
}

/// Closed-form value π²(8 log 2 − 6) of pairing_log(1).
pub fn pairing_log_one_exact() -> f64 {
    PI * PI * (8.0 * 2.0f64.ln() - 6.0)
}

/// Run the full identity suite at aspect `a`. Checks with closed-form
/// expectations exist only at a = 1 and are skipped otherwise.
pub fn identity_suite(a: f64, n_r: usize, n_theta: usize) -> Result<Vec<IdentityCheck>> {
    let mut out = Vec::new();
    let mut record = |identity: &str,
                      computed: f64,
                      expected: f64,
                      tol: f64,
                      res: (usize, usize)|
     -> bool {
        let abs_error = (computed - expected).abs();
        let pass = abs_error <= tol;
        out.push(IdentityCheck {
            identity: identity.to_string(),
            computed,
            expected,
            abs_error,
            tol,
            pass,
            n_r: res.0,
            n_theta: res.1,
        });
        pass
    };

    // K_a closed form / monotone bound.
    let k = k_a(a)?;
    if a == 1.0 {
        record("K_1 = pi^2", k, PI * PI, 1e-12, (0, 0));
    } else {
        record("K_a <= pi^2", (k - PI * PI).max(0.0), 0.0, 0.0, (0, 0));
    }

    // L_a u0_a = 1 on |t'| <= 0.95, with one automatic refinement.
    let u0 = u0_a(a)?;
    let sup_dev = |ops: &DiskOperators| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &r in &[0.0, 0.25, 0.5, 0.75, 0.9, 0.95] {
            for j in 0..8 {
                let th = 2.0 * PI * j as f64 / 8.0 + 0.1;
                let val = ops.apply_l(&u0, (r * th.cos(), r * th.sin()))?;
                worst = worst.max((val - 1.0).abs());
            }
        }
        Ok(worst)
    };
    let mut res = (n_r, n_theta);
    let mut ops = DiskOperators::new(a, res.0, res.1)?;
    let mut dev = sup_dev(&ops)?;
    if dev > 1e-3 {
        res = (2 * n_r, 2 * n_theta);
        ops = DiskOperators::new(a, res.0, res.1)?;
        dev = sup_dev(&ops)?;
    }
    record("sup |L_a u0_a - 1| on |t'|<=0.95", dev, 0.0, 1e-3, res);

    // Weighted pairings with refinement error estimates. The nested double
    // integral is quadratically more expensive than single applications, so
    // it runs at a capped resolution (still far inside tolerance).
    let pr = n_r.min(32);
    let pt = n_theta.min(64);
    let (plog, plog_err) = pairing_log_a(a, pr, pt)?;
    if a == 1.0 {
        record(
            "pairing_log(1) = pi^2(8 log2 - 6)",
            plog,
            pairing_log_one_exact(),
            1e-3 * pairing_log_one_exact().abs(),
            (2 * pr, 2 * pt),
        );
    } else {
        record(
            "pairing_log(a) refinement stability",
            plog_err,
            0.0,
            1e-3 * plog.abs().max(1.0),
            (2 * pr, 2 * pt),
        );
    }
    let (pinf, pinf_err) = pairing_inf_a(a, pr, pt)?;
    if a == 1.0 {
        record(
            "pairing_inf(1) = 0",
            pinf,
            0.0,
            1e-6,
            (2 * pr, 2 * pt),
        );
    } else {
        record(
            "pairing_inf(a) refinement stability",
            pinf_err,
            0.0,
            1e-3 * pinf.abs().max(1.0),
            (2 * pr, 2 * pt),
        );
    }

    if a == 1.0 {
        // R_log u0 against the closed form.
        let mut worst: f64 = 0.0;
        for k in 0..20 {
            let r = k as f64 / 19.0;
            let computed = ops.apply_r_log(&u0, (r, 0.0))?;
            worst = worst.max((computed - f_log_closed(r)).abs());
        }
        record("sup |R_log u0 - closed form|", worst, 0.0, 1e-3, res);

        // X-ray constancy over 100 deterministic chords.
        let mut worst_x: f64 = 0.0;
        for i in 0..100 {
            let alpha = 2.0 * PI * (i as f64 * 0.381966) % (2.0 * PI);
            let beta = PI * (0.05 + 0.9 * ((i as f64 * 0.618034) % 1.0));
            let x = (alpha.cos(), alpha.sin());
            // Inward direction: rotate the inward normal −x by angle β−π/2.
            let ang = alpha + PI + (beta - FRAC_PI_2);
            let dir = (ang.cos(), ang.sin());
            let val = xray_transform(&u0, x, dir);
            if -2.0 * (x.0 * dir.0 + x.1 * dir.1) > 1e-6 {
                worst_x = worst_x.max((val - 1.0 / PI).abs());
            }
        }
        record("sup |I u0 - 1/pi| over 100 chords", worst_x, 0.0, 1e-6, res);

        // L = (1/2) I*I at interior points for a smooth weighted density.
        let f = WeightedDiskDensity::from_fn(|x, y| 1.0 + 0.3 * (x * x - y * y) + 0.2 * x);
        let mut worst_c: f64 = 0.0;
        for &t in &[(0.0, 0.0), (0.3, 0.2), (-0.5, 0.4)] {
            let lhs = ops.apply_l(&f, t)?;
            let rhs = half_istar_i(&f, t, 256);
            worst_c = worst_c.max((lhs - rhs).abs());
        }
        record("sup |L f - (1/2) I*I f|", worst_c, 0.0, 1e-6, res);
    }

    // Discrete self-adjointness of L_a.
    let f = WeightedDiskDensity::from_fn(|x, y| 0.7 + x * y + 0.4 * y);
    let g = WeightedDiskDensity::from_fn(|x, y| 1.0 - 0.5 * x + 0.3 * (x * x + y * y));
    let small = DiskOperators::new(a, 24, 48)?;
    let lf: Vec<f64> = rim_weighted_grid(24, 48)
        .par_iter()
        .map(|&(x, y, w)| {
            w * g.smooth_factor(x, y) * small.apply_l(&f, (x, y)).expect("inside disk")
        })
        .collect();
    let lg: Vec<f64> = rim_weighted_grid(24, 48)
        .par_iter()
        .map(|&(x, y, w)| {
            w * f.smooth_factor(x, y) * small.apply_l(&g, (x, y)).expect("inside disk")
        })
        .collect();
    let norm_f = small.weighted_inner(&f, |x, y| f.smooth_factor(x, y)).sqrt();
    let norm_g = small.weighted_inner(&g, |x, y| g.smooth_factor(x, y)).sqrt();
    record(
        "self-adjointness <L_a f, g> = <f, L_a g>",
        pairwise_sum(&lf) - pairwise_sum(&lg),
        0.0,
        1e-8 * norm_f * norm_g,
        (24, 48),
    );

    // Galerkin inverse: rhs = 1 recovers u0_a.
    let sol = solve_l_a(|_, _| 1.0, a, 6, 24, 48)?;
    let mut worst_u: f64 = 0.0;
    for &r in &[0.0, 0.3, 0.6, 0.9] {
        worst_u = worst_u.max((sol.density.smooth_factor(r, 0.0) - 1.0 / k).abs());
    }
    record("solve_L_a(1) smooth factor = 1/K_a", worst_u, 0.0, 1e-4, (24, 48));

    if a == 1.0 {
        // <L^{-1} t1^2, 1> = (1/pi^2) ∫ t1^2 (1-|t'|^2)^{-1/2} = 2/(3pi).
        let sol_t = solve_l_a(|x, _| x * x, 1.0, 8, 24, 48)?;
        let integral = sol_t.density.integral(48, 96);
        record(
            "<L^{-1} t1^2, 1> = 2/(3pi)",
            integral,
            2.0 / (3.0 * PI),
            1e-4,
            (24, 48),
        );
    }

    Ok(out)
}
