//! Disk-operator suite: capacitance constant, normal-operator identities,
//! log/ratio kernel pairings with their closed forms at aspect 1, X-ray
//! constancy, adjointness, and the weighted Galerkin inverse.

use escape_core::quad::adaptive_simpson;
use escape_core::xray::{
    f_log_closed, half_istar_i, identity_suite, k_a, pairing_inf_a, pairing_log_a,
    pairing_log_one_exact, solve_l_a, u0_a, xray_transform, DiskGrid, DiskOperators,
    WeightedDiskDensity,
};
use std::f64::consts::PI;

/// Adaptive Gauss oracle for K(1/2), frozen from an independent
/// high-precision evaluation of (π/2)∫(cos²θ + 4sin²θ)^{−1/2}dθ.
const K_HALF: f64 = 6.774893715536316;

/// Refinement-extrapolated references for the aspect-1/2 pairings.
const PAIRING_LOG_HALF: f64 = -7.923080;
const PAIRING_INF_HALF: f64 = 6.579744;

#[test]
fn k1_equals_pi_squared() {
    assert!((k_a(1.0).unwrap() - PI * PI).abs() < 1e-12);
}

#[test]
fn k_half_matches_frozen_oracle() {
    assert!((k_a(0.5).unwrap() - K_HALF).abs() < 1e-10);
}

#[test]
fn k_a_bounded_by_pi_squared() {
    for &a in &[0.2, 0.5, 0.8, 1.0] {
        let k = k_a(a).unwrap();
        assert!(k <= PI * PI + 1e-12 && k > 0.0);
    }
    assert!(k_a(0.0).is_err());
    assert!(k_a(1.5).is_err());
}

fn sup_l_deviation(a: f64, n_r: usize, n_theta: usize) -> f64 {
    let ops = DiskOperators::new(a, n_r, n_theta).unwrap();
    let u0 = u0_a(a).unwrap();
    let mut worst: f64 = 0.0;
    for &r in &[0.0, 0.25, 0.5, 0.75, 0.9, 0.95] {
        for j in 0..8 {
            let th = 2.0 * PI * j as f64 / 8.0 + 0.1;
            let v = ops.apply_l(&u0, (r * th.cos(), r * th.sin())).unwrap();
            worst = worst.max((v - 1.0).abs());
        }
    }
    worst
}

#[test]
fn l1_maps_u0_to_one() {
    let dev = sup_l_deviation(1.0, 64, 128);
    assert!(dev <= 1e-3, "sup deviation {dev:.2e}");
    // Refinement does not degrade (the aspect-1 rule is exact up to
    // rounding, so "improvement" saturates at the noise floor).
    let fine = sup_l_deviation(1.0, 128, 256);
    assert!(fine <= dev.max(1e-12), "coarse {dev:.2e}, fine {fine:.2e}");
}

#[test]
fn l_half_maps_u0_half_to_one_improving_under_refinement() {
    let coarse = sup_l_deviation(0.5, 8, 8);
    let mid = sup_l_deviation(0.5, 16, 16);
    let fine = sup_l_deviation(0.5, 64, 128);
    assert!(fine <= 1e-3, "default-resolution deviation {fine:.2e}");
    assert!(
        fine <= mid.max(1e-12) && mid <= coarse.max(1e-12),
        "no refinement improvement: {coarse:.2e} -> {mid:.2e} -> {fine:.2e}"
    );
}

#[test]
fn l_of_zero_density_is_zero() {
    let ops = DiskOperators::new(0.7, 16, 16).unwrap();
    let z = WeightedDiskDensity::constant(0.0);
    assert_eq!(ops.apply_l(&z, (0.3, -0.2)).unwrap(), 0.0);
}

#[test]
fn target_outside_disk_is_rejected() {
    let ops = DiskOperators::new(1.0, 16, 16).unwrap();
    let u0 = u0_a(1.0).unwrap();
    assert!(ops.apply_l(&u0, (1.2, 0.0)).is_err());
}

#[test]
fn r_inf_of_radial_density_vanishes_at_origin() {
    let ops = DiskOperators::new(1.0, 32, 32).unwrap();
    let radial = WeightedDiskDensity::from_fn(|x, y| 1.0 + 3.0 * (x * x + y * y));
    let v = ops.apply_r_inf(&radial, (0.0, 0.0)).unwrap();
    assert!(v.abs() < 1e-14, "angular symmetry violated: {v:.2e}");
}

#[test]
fn r_log_u0_matches_closed_form() {
    let ops = DiskOperators::new(1.0, 64, 128).unwrap();
    let u0 = u0_a(1.0).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let r = k as f64 / 19.0;
        let v = ops.apply_r_log(&u0, (r, 0.0)).unwrap();
        worst = worst.max((v - f_log_closed(r)).abs());
    }
    assert!(worst <= 1e-3, "sup error {worst:.2e}");
}

#[test]
fn f_log_closed_form_properties() {
    // Value at the origin and vanishing at the rim.
    assert!((f_log_closed(0.0) - (2.0 / PI) * (2.0f64.ln() - 1.0)).abs() < 1e-15);
    assert!(f_log_closed(1.0).abs() < 1e-15);
    // Lipschitz near the origin: f'(r) = (2/π) r/(1+√(1−r²)), so the
    // variation over a 2e-7 interval at r = 0.05 is ≈ 3.2e-9.
    assert!((f_log_closed(0.0499999) - f_log_closed(0.0500001)).abs() < 1e-8);
}

/// Independent oracle via the circle mean-value property of log:
/// ∫₀^{2π} log|t − ρe^{iφ}| dφ = 2π log max(|t|, ρ), which collapses
/// R_log u₀ at radius r to one-dimensional integrals.
#[test]
fn f_log_closed_matches_mean_value_oracle() {
    for &r in &[0.2f64, 0.4, 0.5, 0.7, 0.9] {
        let tail = adaptive_simpson(
            &|psi: f64| psi.sin().ln() * psi.sin(),
            r.asin(),
            PI / 2.0,
            1e-12,
        );
        let oracle = (2.0 / PI) * ((1.0 - (1.0 - r * r).sqrt()) * r.ln() + tail);
        assert!(
            (f_log_closed(r) - oracle).abs() < 1e-6,
            "r = {r}: closed {} vs oracle {}",
            f_log_closed(r),
            oracle
        );
    }
}

#[test]
fn pairing_log_one_matches_closed_form() {
    let exact = pairing_log_one_exact();
    let (v, err_est) = pairing_log_a(1.0, 32, 64).unwrap();
    assert!(
        (v - exact).abs() <= 1e-3 * exact.abs(),
        "pairing_log(1) = {v}, exact {exact}, refinement estimate {err_est:.2e}"
    );
}

#[test]
fn pairing_inf_one_vanishes() {
    let ops = DiskOperators::new(1.0, 32, 48).unwrap();
    let v = ops.pairing_inf();
    assert!(v.abs() <= 1e-12, "pairing_inf(1) = {v:.3e}");
}

/// The discrete antisymmetry behind pairing_inf(1) = 0: the ratio kernel is
/// exactly negated under the coordinate swap, and the quadrature node set is
/// exactly swap-invariant, so the sum cancels term by term.
#[test]
fn pairing_inf_antisymmetry_is_exact() {
    // Kernel: bitwise negation under (Δ1, Δ2) ↦ (Δ2, Δ1) at a = 1.
    let kern = |d1: f64, d2: f64| (d1 * d1 - d2 * d2) / (d1 * d1 + d2 * d2);
    for &(d1, d2) in &[(0.3, -0.7), (0.123456, 0.9), (-1.5, 0.2)] {
        assert_eq!(
            kern(d1, d2).to_bits(),
            (-kern(d2, d1)).to_bits(),
            "kernel not exactly antisymmetric at ({d1}, {d2})"
        );
    }
    // Node set: the angular table maps onto itself under the swap.
    for n in [32usize, 48, 64] {
        let grid = DiskGrid::new(8, n);
        let quarter = n / 4;
        for j in 0..n {
            let jm = (quarter + n - j) % n;
            for i in 0..8 {
                let a = grid.nodes[i * n + j];
                let b = grid.nodes[i * n + jm];
                assert!(
                    a.0 == b.1 && a.1 == b.0 && a.2 == b.2,
                    "angular node {j} of {n} not swap-symmetric"
                );
            }
        }
    }
}

#[test]
fn pairings_converge_with_order_at_least_two() {
    let reference_log = pairing_log_a(0.5, 48, 96).unwrap().0;
    let reference_inf = pairing_inf_a(0.5, 48, 96).unwrap().0;
    let mut errs_log = Vec::new();
    let mut errs_inf = Vec::new();
    for &(nr, nt) in &[(6usize, 12usize), (12, 24), (24, 48)] {
        let ops = DiskOperators::new(0.5, nr, nt).unwrap();
        errs_log.push((ops.pairing_log() - reference_log).abs());
        errs_inf.push((ops.pairing_inf() - reference_inf).abs());
    }
    for errs in [&errs_log, &errs_inf] {
        for k in 0..errs.len() - 1 {
            let order = (errs[k] / errs[k + 1]).log2();
            assert!(
                order >= 2.0,
                "pairing refinement order {order:.2} (errors {errs:?})"
            );
        }
    }
}

#[test]
fn pairing_half_values_match_refinement_references() {
    let (plog, _) = pairing_log_a(0.5, 32, 64).unwrap();
    let (pinf, _) = pairing_inf_a(0.5, 32, 64).unwrap();
    assert!(
        (plog - PAIRING_LOG_HALF).abs() < 1e-3 * PAIRING_LOG_HALF.abs(),
        "pairing_log(1/2) = {plog}"
    );
    assert!(
        (pinf - PAIRING_INF_HALF).abs() < 1e-3 * PAIRING_INF_HALF.abs(),
        "pairing_inf(1/2) = {pinf}"
    );
}

#[test]
fn xray_transform_constancy() {
    let u0 = u0_a(1.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let alpha = 2.0 * PI * ((i as f64 * 0.381966) % 1.0);
        let gamma = 0.9 * PI * (((i as f64) * 0.618034) % 1.0) - 0.45 * PI;
        let x = (alpha.cos(), alpha.sin());
        let ang = alpha + PI + gamma;
        let v = xray_transform(&u0, x, (ang.cos(), ang.sin()));
        worst = worst.max((v - 1.0 / PI).abs());
    }
    assert!(worst <= 1e-6, "X-ray constancy deviation {worst:.2e}");
}

#[test]
fn xray_transform_edge_cases() {
    let z = WeightedDiskDensity::constant(0.0);
    assert_eq!(xray_transform(&z, (1.0, 0.0), (-1.0, 0.0)), 0.0);
    let u0 = u0_a(1.0).unwrap();
    // Tangent chord: direction orthogonal to the inward normal.
    assert_eq!(xray_transform(&u0, (1.0, 0.0), (0.0, 1.0)), 0.0);
    // Outward direction.
    assert_eq!(xray_transform(&u0, (1.0, 0.0), (1.0, 0.0)), 0.0);
}

#[test]
fn l_equals_half_istar_i_at_interior_points() {
    let ops = DiskOperators::new(1.0, 64, 128).unwrap();
    let f = WeightedDiskDensity::from_fn(|x, y| 1.0 + 0.3 * (x * x - y * y) + 0.2 * x);
    for &t in &[(0.0, 0.0), (0.3, 0.2), (-0.5, 0.4)] {
        let lhs = ops.apply_l(&f, t).unwrap();
        let rhs = half_istar_i(&f, t, 256);
        assert!(
            (lhs - rhs).abs() < 1e-6,
            "L vs half I*I mismatch at {t:?}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn disk_grid_total_weight_is_pi() {
    for &(nr, nt) in &[(8usize, 16usize), (24, 32), (64, 128)] {
        let g = DiskGrid::new(nr, nt);
        let total: f64 = g.nodes.iter().map(|n| n.2).sum();
        assert!((total - PI).abs() < 1e-12, "Σw = {total} at ({nr},{nt})");
    }
}

#[test]
fn galerkin_recovers_u0_for_rhs_one() {
    for &a in &[1.0, 0.5] {
        let sol = solve_l_a(|_, _| 1.0, a, 6, 24, 48).unwrap();
        let k = k_a(a).unwrap();
        for &r in &[0.0, 0.4, 0.8, 0.95] {
            let v = sol.density.smooth_factor(r * 0.6, -r * 0.8);
            assert!(
                (v - 1.0 / k).abs() < 1e-4,
                "a = {a}, r = {r}: smooth factor {v} vs {}",
                1.0 / k
            );
        }
        assert!(sol.residual_sup <= 1e-3, "residual {:.2e}", sol.residual_sup);
        assert!(sol.condition.is_finite() && sol.condition > 1.0);
    }
}

#[test]
fn galerkin_weighted_integral_identity_for_t1_squared() {
    // ⟨L⁻¹(t₁²), 1⟩ = (1/π²)∫ t₁²(1−|t'|²)^{−1/2} dt' = 2/(3π).
    let sol = solve_l_a(|x, _| x * x, 1.0, 8, 24, 48).unwrap();
    let integral = sol.density.integral(48, 96);
    assert!(
        (integral - 2.0 / (3.0 * PI)).abs() < 1e-4,
        "integral {integral} vs {}",
        2.0 / (3.0 * PI)
    );
}

#[test]
fn identity_suite_passes_at_default_resolution() {
    for &a in &[1.0, 0.5] {
        let checks = identity_suite(a, 64, 128).unwrap();
        assert!(!checks.is_empty());
        for c in &checks {
            assert!(
                c.pass,
                "identity '{}' failed at a = {a}: computed {}, expected {}, err {:.2e} > tol {:.2e}",
                c.identity, c.computed, c.expected, c.abs_error, c.tol
            );
        }
    }
}
