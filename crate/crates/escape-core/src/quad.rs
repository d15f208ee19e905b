//! Shared quadrature kernels: Gauss–Legendre rules, periodic trapezoid,
//! adaptive refinement wrappers, and a Duffy-type rule for triangles.
//!
//! Everything here is plain f64 and deterministic; callers pick resolutions.

/// Gauss–Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on P_n with the three-term recurrence; accurate to
/// machine precision for the moderate n used here (n ≤ 256).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&t| mid + c * t).collect(),
        w.iter().map(|&t| c * t).collect(),
    )
}

/// Integrate a smooth 2π-periodic function by the trapezoid rule,
/// doubling the resolution until two successive levels agree to `tol`
/// (relative, floored at `tol` absolute). Spectral for analytic integrands.
pub fn periodic_adaptive(f: impl Fn(f64) -> f64, tol: f64) -> Result<f64, String> {
    let tau = 2.0 * std::f64::consts::PI;
    let eval = |n: usize| -> f64 {
        let h = tau / n as f64;
        (0..n).map(|k| f(k as f64 * h)).sum::<f64>() * h
    };
    let mut n = 16;
    let mut prev = eval(n);
    for _ in 0..14 {
        n *= 2;
        let cur = eval(n);
        if (cur - prev).abs() <= tol * cur.abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(format!(
        "periodic quadrature did not reach tol {tol:.1e} at n = {n}"
    ))
}

/// Adaptive Simpson on [a, b]; used by test oracles and a few cold paths.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + rec(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Degree-exact Gauss rule on the reference triangle {u ≥ 0, v ≥ 0, u+v ≤ 1}
/// via the Duffy map (u, v) = (s, t(1−s)) of a tensor GL grid. Smooth
/// integrands converge at the tensor-GL rate.
pub fn duffy_triangle(n: usize) -> Vec<(f64, f64, f64)> {
    let (xs, ws) = gauss_legendre_on(n, 0.0, 1.0);
    let mut out = Vec::with_capacity(n * n);
    for (s, ws1) in xs.iter().zip(&ws) {
        for (t, wt) in xs.iter().zip(&ws) {
            out.push((*s, t * (1.0 - s), ws1 * wt * (1.0 - s)));
        }
    }
    out
}

/// Pairwise (cascade) summation: deterministic and accurate independent of
/// the order in which partial results were produced by worker threads.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}
