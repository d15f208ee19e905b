//! Integration tests for the reflected Euler–Maruyama escape-time estimator:
//! exact solutions on the ball, √Δt boundary-bias behaviour and its
//! Richardson removal, chart-based window absorption, determinism across
//! thread counts, and agreement with the asymptotic expansion.

use escape_core::asymptotics::{c_eps_a, mfpt_average, mfpt_field, ExpansionInput};
use escape_core::geometry::{Surface, WindowSpec};
use escape_core::sim::{
    estimate_mfpt, estimate_mfpt_extrapolated, path_rng, simulate_path, AbsorbingSet,
    PathOutcome, ReflectionScheme, SimConfig, StartMode, MAX_CENSORED_FRACTION,
};
use nalgebra::{Vector2, Vector3};
use std::f64::consts::PI;

/// Regular part of the ball Neumann Green function on the diagonal,
/// (ln 2 − 2)/(4π).
const R_STAR_BALL: f64 = -0.10399604305373243;

fn ball_config(dt: f64, n_paths: usize, seed: u64, start: StartMode) -> SimConfig {
    SimConfig {
        dt,
        n_paths,
        seed,
        max_steps: (40.0 / dt) as usize,
        start,
        reflection: ReflectionScheme::Specular,
    }
}

/// Expansion inputs of the unit ball with a window at the north pole:
/// H = λ₁ = λ₂ = 1 towards the interior, and the closed-form disk pairings
/// ⟨L⁻¹R_log u₀, u₀⟩ = π²(8 ln 2 − 6) and ⟨L⁻¹R_∞ u₀, u₀⟩ = 0 at a = 1.
fn ball_expansion(eps: f64) -> (ExpansionInput, f64, f64) {
    let input = ExpansionInput {
        volume: 4.0 * PI / 3.0,
        boundary_area: 4.0 * PI,
        mean_curvature: 1.0,
        lambda1: 1.0,
        lambda2: 1.0,
        eps,
        a: 1.0,
        r_star: R_STAR_BALL,
        f_star: 0.0,
    };
    let pairing_log = PI * PI * (8.0 * 2.0_f64.ln() - 6.0);
    (input, pairing_log, 0.0)
}

#[test]
fn config_validation_and_horizon_warning() {
    let base = ball_config(1e-3, 10, 1, StartMode::Fixed(Vector3::zeros()));
    assert!(base.validate().is_ok());
    assert!(SimConfig { dt: 0.0, ..base.clone() }.validate().is_err());
    assert!(SimConfig { dt: -1.0, ..base.clone() }.validate().is_err());
    assert!(SimConfig { n_paths: 0, ..base.clone() }.validate().is_err());
    assert!(SimConfig { max_steps: 0, ..base.clone() }.validate().is_err());

    assert_eq!(SimConfig::default_dt(0.1), 1e-4);
    assert_eq!(SimConfig::DEFAULT_N_PATHS, 100_000);
    let cfg = SimConfig::for_window(0.1, 50.0, 9, StartMode::UniformInterior);
    assert_eq!(cfg.dt, 1e-4);
    assert_eq!(cfg.max_steps, 500_000);
    assert!((cfg.horizon() - 50.0).abs() < 1e-9);

    // Horizon below 10× the predicted escape time must warn.
    assert!(cfg.horizon_warning(10.0).is_some());
    assert!(cfg.horizon_warning(4.9).is_none());
}

#[test]
fn start_inside_window_closure_is_instant() {
    let surface = Surface::unit_ball();
    let window = WindowSpec::new(&surface, &Vector3::new(0.0, 0.0, 1.0), 0.2, 1.0).unwrap();
    // Window centre and an interior chart point, both on the boundary.
    let off_center = window
        .chart_point(&surface, &Vector2::new(0.7, 0.3))
        .unwrap();
    for start in [Vector3::new(0.0, 0.0, 1.0), off_center] {
        let config = ball_config(1e-4, 40, 5, StartMode::Fixed(start));
        let est = estimate_mfpt(&surface, AbsorbingSet::Window(&window), &config).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.n_absorbed, 40);
        assert_eq!(est.n_censored, 0);
        assert_eq!(est.total_steps, 0);
    }
}

#[test]
fn start_outside_domain_is_rejected() {
    let surface = Surface::unit_ball();
    let config = ball_config(1e-3, 4, 2, StartMode::Fixed(Vector3::new(1.5, 0.0, 0.0)));
    assert!(estimate_mfpt(&surface, AbsorbingSet::WholeBoundary, &config).is_err());
}

#[test]
fn all_absorbing_ball_center_bias_and_extrapolation() {
    // Exact mean exit time from the centre is 1/6. Endpoint-monitored
    // crossings miss within-step excursions, so raw estimates sit above the
    // truth by ≈ 0.275·√Δt (outward barrier shift); the order in Δt is 1/2
    // and the paired-step extrapolation removes it.
    let surface = Surface::unit_ball();
    let scans = [
        (1.6e-3, 101_u64),
        (4e-4, 102),
        (1e-4, 103),
        (2.5e-5, 104),
    ];
    let mut biases = Vec::new();
    for &(dt, seed) in &scans {
        let config = ball_config(dt, 60_000, seed, StartMode::Fixed(Vector3::zeros()));
        let est = estimate_mfpt(&surface, AbsorbingSet::WholeBoundary, &config).unwrap();
        assert!(est.is_valid());
        assert_eq!(est.n_censored, 0);
        // All-absorbing boundary: the first contact ends the path.
        assert_eq!(est.total_reflections, 0);
        println!(
            "dt={dt:.2e}  mean={:.6}  se={:.2e}  bias={:+.3e}",
            est.mean,
            est.std_error,
            est.mean - 1.0 / 6.0
        );
        biases.push(est.mean - 1.0 / 6.0);
    }
    for (i, b) in biases.iter().enumerate() {
        assert!(*b > 0.0, "boundary bias must be positive, got {b} at scan {i}");
        if i > 0 {
            assert!(*b < biases[i - 1], "bias must shrink with dt");
        }
    }
    // Observed order in Δt over the 64× scan range: 1/2 within noise.
    let order = (biases[0] / biases[3]).ln() / 64.0_f64.ln();
    println!("observed raw order in dt: {order:.3}");
    assert!(
        (0.35..=0.65).contains(&order),
        "raw weak order in dt should be ≈ 1/2, got {order:.3}"
    );

    // Richardson pair (Δt, 4Δt) at Δt = 2.5e-5: the √Δt term cancels and
    // the remainder is far below the raw bias at Δt = 1e-4.
    let config = ball_config(2.5e-5, 80_000, 700, StartMode::Fixed(Vector3::zeros()));
    let ext = estimate_mfpt_extrapolated(&surface, AbsorbingSet::WholeBoundary, &config).unwrap();
    let resid = ext.mean - 1.0 / 6.0;
    println!(
        "ext mean={:.6} se={:.2e} resid={:+.2e} ci=({:.6},{:.6})",
        ext.mean, ext.std_error, resid, ext.ci95.0, ext.ci95.1
    );
    assert!(ext.is_valid());
    assert!(
        ext.ci95.0 <= 1.0 / 6.0 && 1.0 / 6.0 <= ext.ci95.1,
        "extrapolated CI ({:.6}, {:.6}) must contain 1/6",
        ext.ci95.0,
        ext.ci95.1
    );
    assert!(
        resid.abs() < 0.6 * biases[2],
        "extrapolated residual {resid:+.2e} should be well below the raw bias {:+.2e}",
        biases[2]
    );
}

#[test]
fn shrinking_dt_estimates_are_cauchy() {
    // Weak-order consistency: successive estimates at Δt and Δt/4 agree
    // within their combined 95% confidence intervals.
    let surface = Surface::unit_ball();
    let fine = estimate_mfpt(
        &surface,
        AbsorbingSet::WholeBoundary,
        &ball_config(2.5e-5, 4000, 31, StartMode::Fixed(Vector3::zeros())),
    )
    .unwrap();
    let coarse = estimate_mfpt(
        &surface,
        AbsorbingSet::WholeBoundary,
        &ball_config(1e-4, 4000, 32, StartMode::Fixed(Vector3::zeros())),
    )
    .unwrap();
    let gap = (fine.mean - coarse.mean).abs();
    let combined = 1.96 * (fine.std_error.powi(2) + coarse.std_error.powi(2)).sqrt();
    println!("gap={gap:.2e} combined CI={combined:.2e}");
    assert!(
        gap < combined,
        "dt-refined estimates differ by {gap:.2e}, beyond the combined CI {combined:.2e}"
    );
}

#[test]
fn determinism_across_thread_counts_and_reruns() {
    let surface = Surface::unit_ball();
    let window = WindowSpec::new(&surface, &Vector3::new(0.0, 0.0, 1.0), 0.25, 1.0).unwrap();
    let config = ball_config(1e-3, 400, 77, StartMode::UniformInterior);
    let reference = estimate_mfpt(&surface, AbsorbingSet::Window(&window), &config).unwrap();
    assert!(reference.n_absorbed > 0);
    for threads in [1usize, 2, 5] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let est = pool
            .install(|| estimate_mfpt(&surface, AbsorbingSet::Window(&window), &config))
            .unwrap();
        assert_eq!(est.mean.to_bits(), reference.mean.to_bits());
        assert_eq!(est.std_error.to_bits(), reference.std_error.to_bits());
        assert_eq!(est.n_absorbed, reference.n_absorbed);
        assert_eq!(est.total_steps, reference.total_steps);
    }
    // Re-running in the same process reproduces the estimate bit for bit.
    let again = estimate_mfpt(&surface, AbsorbingSet::Window(&window), &config).unwrap();
    assert_eq!(again.mean.to_bits(), reference.mean.to_bits());
}

#[test]
fn no_flux_reflection_censors_every_path() {
    let surface = Surface::unit_ball();
    let config = SimConfig {
        dt: 1e-3,
        n_paths: 300,
        seed: 13,
        max_steps: 3000,
        start: StartMode::UniformInterior,
        reflection: ReflectionScheme::Specular,
    };
    let est = estimate_mfpt(&surface, AbsorbingSet::None, &config).unwrap();
    assert_eq!(est.n_absorbed, 0);
    assert_eq!(est.n_censored, 300);
    assert!(est.mean.is_nan());
    assert!(!est.is_valid());
    assert_eq!(est.total_steps, 300 * 3000);
    assert!(est.total_reflections > 0);
    // Δt resolves the curvature: double reflections are negligible.
    println!(
        "reflections={} multi={}",
        est.total_reflections, est.multi_reflection_steps
    );
    assert!(
        (est.multi_reflection_steps as f64) < 1e-3 * est.total_steps as f64,
        "multi-reflection steps: {} of {}",
        est.multi_reflection_steps,
        est.total_steps
    );
}

#[test]
fn excessive_censoring_flags_estimate_invalid() {
    let surface = Surface::unit_ball();
    let window = WindowSpec::new(&surface, &Vector3::new(0.0, 0.0, 1.0), 0.1, 1.0).unwrap();
    // Horizon far below the escape time: essentially everything censors.
    let config = SimConfig {
        dt: 1e-3,
        n_paths: 200,
        seed: 3,
        max_steps: 100,
        start: StartMode::UniformInterior,
        reflection: ReflectionScheme::Specular,
    };
    assert!(config.horizon_warning(10.9).is_some());
    let est = estimate_mfpt(&surface, AbsorbingSet::Window(&window), &config).unwrap();
    assert!(est.censored_fraction() >= MAX_CENSORED_FRACTION);
    assert!(!est.is_valid());
}

#[test]
fn antipode_start_matches_field_prediction() {
    // Window of radius ε = 0.2 at the north pole, paths from the south
    // pole. The expansion predicts E[τ](x) = F(x) + C_{ε,a} − |M| G(x, x*)
    // with F(south) = 0 and the ball Green function between antipodal
    // boundary points G(south, north) = −(1 + ln 2) / (4π).
    let surface = Surface::unit_ball();
    let window = WindowSpec::new(&surface, &Vector3::new(0.0, 0.0, 1.0), 0.2, 1.0).unwrap();
    let (input, pairing_log, pairing_inf) = ball_expansion(0.2);
    let breakdown = c_eps_a(&input, pairing_log, pairing_inf).unwrap();
    let g_antipode = -(1.0 + 2.0_f64.ln()) / (4.0 * PI);
    let field = mfpt_field(&input, &breakdown, 0.0, g_antipode, 2.0);
    assert!(!field.near_window);

    let config = SimConfig {
        dt: 2.5e-4,
        n_paths: 30_000,
        seed: 4242,
        max_steps: 400_000,
        start: StartMode::Fixed(Vector3::new(0.0, 0.0, -1.0)),
        reflection: ReflectionScheme::Specular,
    };
    let ext = estimate_mfpt_extrapolated(&surface, AbsorbingSet::Window(&window), &config).unwrap();
    assert!(ext.is_valid());
    let rel = (ext.mean - field.value) / field.value;
    println!(
        "predicted={:.4} simulated={:.4}±{:.4} rel={:+.2}%",
        field.value,
        ext.mean,
        ext.std_error,
        100.0 * rel
    );
    assert!(
        rel.abs() < 0.05,
        "antipode estimate {:.4} vs field prediction {:.4}: {:+.2}%",
        ext.mean,
        field.value,
        100.0 * rel
    );
}

#[test]
fn uniform_start_average_matches_expansion() {
    // Domain-averaged escape time at ε = 0.1: expansion average
    // (∫F)/|M| + C − F* with ∫F = 4π/45 on the unit ball.
    let surface = Surface::unit_ball();
    let window = WindowSpec::new(&surface, &Vector3::new(0.0, 0.0, 1.0), 0.1, 1.0).unwrap();
    let (input, pairing_log, pairing_inf) = ball_expansion(0.1);
    let breakdown = c_eps_a(&input, pairing_log, pairing_inf).unwrap();
    let predicted = mfpt_average(&input, &breakdown, 4.0 * PI / 45.0);

    let config = SimConfig {
        dt: 2.5e-4,
        n_paths: 10_000,
        seed: 57,
        max_steps: 1_600_000,
        start: StartMode::UniformInterior,
        reflection: ReflectionScheme::Specular,
    };
    let ext = estimate_mfpt_extrapolated(&surface, AbsorbingSet::Window(&window), &config).unwrap();
    assert!(ext.is_valid());
    let rel = (ext.mean - predicted) / predicted;
    println!(
        "predicted={predicted:.4} simulated={:.4}±{:.4} rel={:+.2}%",
        ext.mean,
        ext.std_error,
        100.0 * rel
    );
    assert!(
        rel.abs() < 0.05,
        "uniform-start average {:.4} vs expansion {predicted:.4}: {:+.2}%",
        ext.mean,
        100.0 * rel
    );
}

#[test]
fn ci_width_halves_when_paths_quadruple() {
    let surface = Surface::unit_ball();
    let small = estimate_mfpt(
        &surface,
        AbsorbingSet::WholeBoundary,
        &ball_config(1e-3, 2000, 61, StartMode::Fixed(Vector3::zeros())),
    )
    .unwrap();
    let large = estimate_mfpt(
        &surface,
        AbsorbingSet::WholeBoundary,
        &ball_config(1e-3, 8000, 62, StartMode::Fixed(Vector3::zeros())),
    )
    .unwrap();
    // CLT: the CI width scales as n^{−1/2}, so 4× the paths halves it
    // (tolerance ±30%).
    let ratio = (small.ci95.1 - small.ci95.0) / (large.ci95.1 - large.ci95.0);
    println!("width ratio={ratio:.3}");
    assert!(
        (1.4..=2.6).contains(&ratio),
        "quadrupling paths should halve the CI width, ratio {ratio:.3}"
    );
}

#[test]
fn single_path_stream_is_reproducible() {
    let surface = Surface::unit_ball();
    let window = WindowSpec::new(&surface, &Vector3::new(0.0, 0.0, 1.0), 0.25, 1.0).unwrap();
    let config = ball_config(1e-3, 1, 19, StartMode::Fixed(Vector3::zeros()));
    let mut rng = path_rng(19, 0);
    let (a, ca) = simulate_path(&surface, AbsorbingSet::Window(&window), &config, &mut rng).unwrap();
    let mut rng = path_rng(19, 0);
    let (b, cb) = simulate_path(&surface, AbsorbingSet::Window(&window), &config, &mut rng).unwrap();
    assert_eq!(a, b);
    assert_eq!(ca.steps, cb.steps);
    assert_eq!(ca.reflections, cb.reflections);
    match a {
        PathOutcome::Absorbed(t) => assert!(t > 0.0),
        PathOutcome::Censored => panic!("path should absorb within the budget"),
    }
}
