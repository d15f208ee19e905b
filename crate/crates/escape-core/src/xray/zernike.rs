//! Zernike polynomials: the orthogonal polynomial family of the unit disk,
//! used as smooth factors for the Galerkin inversion of L_a. Modes are
//! indexed by radial order n and angular frequency m (|m| ≤ n, n − |m| even);
//! m ≥ 0 selects cos(mθ), m < 0 selects sin(|m|θ).

/// Radial part R_n^{|m|}(r) by the explicit factorial sum.
fn radial(n: u32, m_abs: u32, r: f64) -> f64 {
    debug_assert!(m_abs <= n && (n - m_abs) % 2 == 0);
    let kmax = (n - m_abs) / 2;
    let mut sum = 0.0;
    for k in 0..=kmax {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let num = factorial(n - k);
        let den = factorial(k) * factorial((n + m_abs) / 2 - k) * factorial((n - m_abs) / 2 - k);
        sum += sign * (num / den) * r.powi((n - 2 * k) as i32);
    }
    sum
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Z_n^m at Cartesian disk coordinates.
pub(crate) fn eval(n: u32, m: i32, x: f64, y: f64) -> f64 {
    let r = (x * x + y * y).sqrt();
    let m_abs = m.unsigned_abs();
    let rad = radial(n, m_abs, r);
    if m == 0 {
        rad
    } else {
        let theta = y.atan2(x);
        if m > 0 {
            rad * (m_abs as f64 * theta).cos()
        } else {
            rad * (m_abs as f64 * theta).sin()
        }
    }
}

/// All modes with radial order ≤ max_order.
pub(crate) fn modes_up_to(max_order: u32) -> Vec<(u32, i32)> {
    let mut out = Vec::new();
    for n in 0..=max_order {
        let mut m = -(n as i32);
        while m <= n as i32 {
            out.push((n, m));
            m += 2;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_closed_forms() {
        // Z_0^0 = 1, Z_1^1 = x·(r cosθ scaling), Z_2^0 = 2r² − 1.
        assert_eq!(eval(0, 0, 0.3, -0.4), 1.0);
        let (x, y) = (0.3, -0.4);
        assert!((eval(1, 1, x, y) - x).abs() < 1e-14);
        assert!((eval(1, -1, x, y) - y).abs() < 1e-14);
        let r2 = x * x + y * y;
        assert!((eval(2, 0, x, y) - (2.0 * r2 - 1.0)).abs() < 1e-14);
        // Z_2^2 = r²cos2θ = x² − y².
        assert!((eval(2, 2, x, y) - (x * x - y * y)).abs() < 1e-14);
    }

    #[test]
    fn orthogonality_on_disk() {
        // ∫ Z_n^m Z_n'^m' r dr dθ = π/(2n+2)·δ (with the cos/sin halves).
        let grid = crate::xray::DiskGrid::new(24, 32);
        let modes = modes_up_to(3);
        for (i, &(n1, m1)) in modes.iter().enumerate() {
            for &(n2, m2) in &modes[i + 1..] {
                let dot: f64 = grid
                    .nodes
                    .iter()
                    .map(|&(x, y, w)| w * eval(n1, m1, x, y) * eval(n2, m2, x, y))
                    .sum();
                assert!(
                    dot.abs() < 1e-12,
                    "modes ({n1},{m1}) and ({n2},{m2}) not orthogonal: {dot}"
                );
            }
        }
    }
}
