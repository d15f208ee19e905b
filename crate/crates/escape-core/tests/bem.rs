//! Integration tests for the boundary-integral Green solver: kernel algebra,
//! layer-operator invariants, the regular-part refinement study on the unit
//! sphere against the closed-form oracle, interior evaluation, and the
//! auxiliary −1-source potential.

use escape_core::bem::{
    assemble_layers, polar_patch, singular_part, solve_boundary_green, solve_f, BorderedSystem,
    BoundaryMesh, GreenDecomposition,
};
use escape_core::geometry::{ImmersionChart, Shape, Surface};
use nalgebra::{DMatrix, Vector2, Vector3};
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

/// Regular part of the boundary Green function at the diagonal on the unit
/// sphere: closed form (ln 2 − 2)/(4π) of the summed harmonic series.
const R_STAR_EXACT: f64 = -0.10399604305373243;

/// Neumann Green function of the unit ball (zero boundary mean) for
/// arguments anywhere in the closed ball.
fn ball_green(x: &Vector3<f64>, z: &Vector3<f64>) -> f64 {
    let d = (x - z).norm();
    let t = x.norm() * z.norm();
    let u = if t > 0.0 { (x.dot(z) / t).clamp(-1.0, 1.0) } else { 0.0 };
    let s = (1.0 - 2.0 * t * u + t * t).max(0.0).sqrt();
    1.0 / (4.0 * PI * d) - 1.0 / (4.0 * PI)
        + (1.0 / (4.0 * PI)) * (1.0 / s - 1.0 + (2.0 / (1.0 - t * u + s)).ln())
}

fn solve_unit_sphere(nsub: usize) -> GreenDecomposition {
    let surface = Surface::new(Shape::Ball { radius: 1.0 });
    let mesh = BoundaryMesh::build(&surface, &Vector3::new(0.0, 0.0, 1.0), nsub).unwrap();
    let layers = assemble_layers(&surface, &mesh).unwrap();
    solve_boundary_green(&surface, mesh, layers).unwrap()
}

/// Shared 642-node unit-sphere decomposition.
fn fixture() -> &'static GreenDecomposition {
    static FIX: OnceLock<GreenDecomposition> = OnceLock::new();
    FIX.get_or_init(|| solve_unit_sphere(3))
}

#[test]
fn fundamental_solution_examples() {
    let x = Vector3::new(0.3, -0.2, 0.5);
    let y = x + Vector3::new(1.0, 0.0, 0.0);
    // Unit separation and homogeneity of degree −1.
    let v1 = escape_core::bem::kernel_e(&x, &y).unwrap();
    assert!((v1 - (-1.0 / (4.0 * PI))).abs() < 1e-15);
    let v2 = escape_core::bem::kernel_e(&(2.0 * x), &(2.0 * y)).unwrap();
    assert!((v2 - 0.5 * v1).abs() < 1e-15);
    // Coincident points are rejected.
    assert!(escape_core::bem::kernel_e(&x, &x).is_err());
    // Harmonic in y away from x: central second differences.
    let h = 1e-3;
    let mut lap = -6.0 * escape_core::bem::kernel_e(&x, &y).unwrap();
    for ax in 0..3 {
        let mut e = Vector3::zeros();
        e[ax] = h;
        lap += escape_core::bem::kernel_e(&x, &(y + e)).unwrap();
        lap += escape_core::bem::kernel_e(&x, &(y - e)).unwrap();
    }
    assert!((lap / (h * h)).abs() < 1e-5);
}

#[test]
fn layer_matrix_invariants() {
    let decomp = fixture();
    let mesh = &decomp.mesh;
    let n = mesh.len();
    let area = decomp.boundary_area();

    // Dual weights reproduce the boundary area exactly after the rescale.
    let total: f64 = mesh.weights.iter().sum();
    assert!((total / (4.0 * PI) - 1.0).abs() < 1e-12);
    assert!(mesh.area_defect < 1e-5);

    // Single layer symmetric, adjoint the exact transpose of the double layer.
    assert_eq!(decomp.diagnostics.single_asymmetry, 0.0);
    let nd = &decomp.layers.double.matrix;
    let na = &decomp.layers.adjoint.matrix;
    for k in (0..n).step_by(53) {
        for j in (0..n).step_by(29) {
            assert_eq!(na[(k, j)], nd[(j, k)]);
        }
    }

    // Double-layer rows reproduce the interior jump constant against the
    // weights: Σ_j N_kj w_j = 1 (identity split of the diagonal).
    assert!(decomp.diagnostics.double_rowsum_residual < 1e-12);

    // Rank-one averaging operator: P f = area mean of f for any f.
    let pmat = &decomp.layers.average.matrix;
    let f = DMatrix::from_fn(n, 1, |k, _| (0.37 * k as f64).sin());
    let mean: f64 = (0..n).map(|k| mesh.weights[k] * f[(k, 0)]).sum::<f64>() / area;
    let pf = pmat * &f;
    for k in (0..n).step_by(71) {
        assert!((pf[(k, 0)] - mean).abs() < 1e-12);
    }

    // Gauss identity at the diagnostics probe and at an off-center point.
    assert!(decomp.diagnostics.gauss_residual < 1e-3);
    assert!(mesh.gauss_identity_residual(&Vector3::new(0.2, 0.1, 0.4)) < 1e-3);

    // Zero boundary mean of the solved rows.
    for k in [mesh.pole, 100, 401] {
        let mut mean = 0.0;
        for j in 0..n {
            mean += mesh.weights[j] * decomp.boundary_matrix[(k, j)];
        }
        assert!(mean.abs() < 1e-10, "row {k} mean {mean:.2e}");
    }
    assert!(decomp.diagnostics.condition_estimate > 1.0);
    assert!(decomp.diagnostics.max_row_multiplier.abs() < 1e-2);
}

#[test]
fn polar_patch_integrates_disk_masses() {
    let surface = Surface::new(Shape::Ball { radius: 1.0 });
    let decomp = fixture();
    let mesh = &decomp.mesh;
    let rho = mesh.patch_radius;
    let node = mesh.nodes[200];
    let patch = polar_patch(&surface, &node, rho, 32, 64, None).unwrap();

    // Geodesic disk area on the unit sphere: 2π(1 − cos ρ).
    let area: f64 = patch.weights.iter().sum();
    let exact_area = 2.0 * PI * (1.0 - rho.cos());
    assert!((area / exact_area - 1.0).abs() < 1e-6, "area {area} vs {exact_area}");

    // Double-layer mass over the disk: sin(ρ/2) on the unit sphere.
    let mut mass = 0.0;
    for (i, p) in patch.points.iter().enumerate() {
        let diff = p - node;
        let d = diff.norm();
        if d > 1e-14 {
            mass += patch.weights[i] * patch.normals[i].dot(&diff) / (2.0 * PI * d * d * d);
        }
    }
    assert!((mass - (rho / 2.0).sin()).abs() < 1e-3, "mass {mass}");
}

#[test]
fn sphere_regular_part_refinement_study() {
    // Frozen solver outputs on the three icosphere refinements; reproduced
    // here to 1e-9 so any quadrature or solve change is caught deliberately.
    let pinned = [
        (2usize, -0.105189010392714583),
        (3, -0.102958771704167604),
        (4, -0.103359071829669358),
    ];
    let mut rels = Vec::new();
    let mut antisym = Vec::new();
    for &(nsub, pin) in &pinned {
        let decomp;
        let d = if nsub == 3 {
            fixture()
        } else {
            decomp = solve_unit_sphere(nsub);
            &decomp
        };
        assert!((d.r_star - pin).abs() < 1e-9, "nsub {nsub}: {:.12} vs {pin:.12}", d.r_star);
        rels.push((d.r_star - R_STAR_EXACT).abs() / R_STAR_EXACT.abs());

        // Asymmetry of the boundary Green matrix over a fixed physical band.
        let n = d.mesh.len();
        let mut a: f64 = 0.0;
        for k in 0..n {
            for j in (k + 1)..n {
                let c = (d.mesh.nodes[k] - d.mesh.nodes[j]).norm();
                if (0.7..1.0).contains(&c) {
                    a = a.max((d.boundary_matrix[(k, j)] - d.boundary_matrix[(j, k)]).abs());
                }
            }
        }
        antisym.push(a);

        // Far-field of the refined diagonal row against the closed form.
        let pole_node = d.mesh.nodes[d.mesh.pole];
        let h = d.mesh.h_mean;
        for j in 0..n {
            if j == d.mesh.pole {
                continue;
            }
            let gamma = d.mesh.nodes[j].dot(&pole_node).clamp(-1.0, 1.0).acos();
            if gamma >= 10.0 * h {
                let want = ball_green(&pole_node, &d.mesh.nodes[j]);
                assert!(
                    (d.pole_row[j] - want).abs() < 1e-2,
                    "nsub {nsub} far row err {:.2e}",
                    (d.pole_row[j] - want).abs()
                );
            }
        }

        // Fit bookkeeping: samples live in the declared window.
        assert!(d.fit.samples >= 80);
        assert!((d.fit.exponent - 0.9).abs() < 1e-12);
        for s in &d.r_samples {
            assert!(s.distance >= d.fit.window.0 && s.distance <= d.fit.window.1);
        }
    }

    // Relative error decreases monotonically and ends within 2%.
    assert!(rels[0] > rels[1] && rels[1] > rels[2], "not monotone: {rels:?}");
    assert!(rels[2] < 0.02, "finest error {:.3e}", rels[2]);

    // Green-matrix asymmetry over the fixed band vanishes under refinement.
    assert!(antisym[0] > antisym[1] && antisym[1] > antisym[2], "antisym: {antisym:?}");
    assert!(antisym[2] < 5e-3);
}

#[test]
fn sphere_diagonal_value_is_pole_independent() {
    let surface = Surface::new(Shape::Ball { radius: 1.0 });
    let mut vals = Vec::new();
    for center in [Vector3::new(0.0, 0.0, 1.0), Vector3::new(1.0, 1.0, 1.0).normalize()] {
        let mesh = BoundaryMesh::build(&surface, &center, 2).unwrap();
        let layers = assemble_layers(&surface, &mesh).unwrap();
        vals.push(solve_boundary_green(&surface, mesh, layers).unwrap().r_star);
    }
    assert!((vals[0] - vals[1]).abs() < 1e-6, "poles differ: {vals:?}");
}

#[test]
fn interior_evaluation_matches_closed_form() {
    let surface = Surface::new(Shape::Ball { radius: 1.0 });
    let decomp = fixture();
    let x = Vector3::new(0.2, 0.1, 0.4);

    // Boundary-argument path through the stored rows.
    for (k, tol) in [(40usize, 5e-3), (200, 5e-3), (400, 5e-4)] {
        let zk = decomp.mesh.nodes[k];
        let got = decomp.evaluate_interior(&surface, &x, &zk).unwrap();
        let want = ball_green(&x, &zk);
        assert!((got - want).abs() < tol, "node {k}: err {:.2e}", (got - want).abs());
    }

    // Interior-pair path through the adjoint density, and its symmetry.
    let y = Vector3::new(-0.1, 0.25, -0.35);
    let gxy = decomp.evaluate_interior(&surface, &x, &y).unwrap();
    let gyx = decomp.evaluate_interior(&surface, &y, &x).unwrap();
    let want = ball_green(&x, &y);
    assert!((gxy - want).abs() < 1e-3);
    assert!((gyx - want).abs() < 1e-3);
    assert!((gxy - gyx).abs() < 1e-5);

    // Total flux over the boundary for an interior source.
    let flux = decomp.boundary_flux(&surface, &x).unwrap();
    assert!((flux + 1.0).abs() < 1e-3, "flux {flux}");

    // Harmonicity in the interior argument, both representations.
    let z200 = decomp.mesh.nodes[200];
    let x_far = -0.35 * z200;
    let h = 5e-3;
    let fd_lap = |f: &dyn Fn(&Vector3<f64>) -> f64| -> f64 {
        let mut acc = -6.0 * f(&x_far);
        for ax in 0..3 {
            let mut e = Vector3::zeros();
            e[ax] = h;
            acc += f(&(x_far + e)) + f(&(x_far - e));
        }
        acc / (h * h)
    };
    let row_fn = |p: &Vector3<f64>| decomp.evaluate_interior(&surface, p, &z200).unwrap();
    let sig_fn = |p: &Vector3<f64>| decomp.evaluate_interior(&surface, p, &y).unwrap();
    assert!(fd_lap(&row_fn).abs() < 1e-4);
    assert!(fd_lap(&sig_fn).abs() < 1e-4);

    // Points too close to the boundary are rejected.
    let near = Vector3::new(0.0, 0.0, 0.9);
    assert!(decomp.evaluate_interior(&surface, &near, &y).is_err());
    assert!(decomp.boundary_flux(&surface, &near).is_err());
}

#[test]
fn singular_template_on_the_sphere() {
    let surface = Surface::new(Shape::Ball { radius: 1.0 });
    let p1 = Vector3::new(0.0, 0.0, 1.0);
    for gamma in [0.05_f64, 0.3] {
        let p2 = Vector3::new(gamma.sin(), 0.0, gamma.cos());
        let got = singular_part(&surface, &p1, &p2).unwrap();
        // Umbilic surface: anisotropy term vanishes, template is
        // 1/(2πγ) − ln γ/(4π) in the geodesic distance γ.
        let want = 1.0 / (2.0 * PI * gamma) - gamma.ln() / (4.0 * PI);
        assert!((got - want).abs() < 1e-6, "γ={gamma}: err {:.2e}", (got - want).abs());
        // Symmetrized construction is exactly symmetric.
        let swapped = singular_part(&surface, &p2, &p1).unwrap();
        assert!((got - swapped).abs() < 1e-14);
    }
    // Green value minus template tends to the diagonal constant.
    let gamma = 0.05_f64;
    let p2 = Vector3::new(gamma.sin(), 0.0, gamma.cos());
    let r = ball_green(&p1, &p2) - singular_part(&surface, &p1, &p2).unwrap();
    assert!((r - R_STAR_EXACT).abs() < 5e-3);
    // Coincident points are rejected.
    assert!(singular_part(&surface, &p1, &p1).is_err());
}

#[test]
fn poisson_solution_is_exact_on_the_ball() {
    let surface = Surface::new(Shape::Ball { radius: 1.0 });
    let decomp = fixture();
    let fsol = solve_f(&surface, decomp).unwrap();

    // (1 − |x|²)/6 satisfies all three conditions, so the boundary values,
    // the diagonal value, and the correction density all vanish.
    assert!(fsol.f_star.abs() < 1e-9);
    assert!(fsol.boundary_values.amax() < 1e-9);
    assert!(fsol.eta.amax() < 1e-9);
    assert!((fsol.constant + 1.0 / 3.0).abs() < 1e-9);
    assert!(fsol.flux_residual < 1e-8);
    assert!(fsol.border_multiplier < 1e-6, "multiplier {:.2e}", fsol.border_multiplier);

    // Interior value at the center and the volume integral.
    let f0 = fsol.evaluate(&surface, decomp, &Vector3::zeros()).unwrap();
    assert!((f0 - 1.0 / 6.0).abs() < 1e-9);
    let exact_int = 4.0 * PI / 45.0;
    assert!((fsol.volume_integral - exact_int).abs() / exact_int < 5e-3);

    // Clearance guard mirrors the Green evaluator.
    assert!(fsol.evaluate(&surface, decomp, &Vector3::new(0.0, 0.0, 0.9)).is_err());
}

#[test]
fn ellipsoid_pipeline_consistency() {
    let surface = Surface::new(Shape::Ellipsoid { semi_axes: [1.0, 1.0, 1.3] });
    let mesh = BoundaryMesh::build(&surface, &Vector3::new(0.0, 0.0, 1.3), 3).unwrap();
    let area = surface.measures().unwrap().boundary_area;
    let scale = (area / (4.0 * PI)).sqrt();
    let layers = assemble_layers(&surface, &mesh).unwrap();
    let decomp = solve_boundary_green(&surface, mesh, layers).unwrap();

    assert!(decomp.diagnostics.gauss_residual < 1e-3);
    assert!(decomp.diagnostics.double_rowsum_residual < 1e-12);
    assert_eq!(decomp.diagnostics.single_asymmetry, 0.0);
    assert!(decomp.fit.samples >= 100);
    assert!(decomp.r_star.is_finite());

    // Interior symmetry of the evaluated Green function.
    let x = Vector3::new(0.1, -0.2, 0.3);
    let y = Vector3::new(-0.15, 0.1, -0.4);
    let gxy = decomp.evaluate_interior(&surface, &x, &y).unwrap();
    let gyx = decomp.evaluate_interior(&surface, &y, &x).unwrap();
    assert!((gxy - gyx).abs() < 1e-3 * scale, "antisym {:.2e}", (gxy - gyx).abs());

    // Total flux for an interior source.
    let flux = decomp.boundary_flux(&surface, &x).unwrap();
    assert!((flux + 1.0).abs() < 1e-3);

    // −1-source potential: pointwise Neumann data and zero boundary mean.
    let fsol = solve_f(&surface, &decomp).unwrap();
    assert!(fsol.flux_residual < 1e-3, "flux residual {:.2e}", fsol.flux_residual);
    let bd_mean: f64 = (0..decomp.mesh.len())
        .map(|k| decomp.mesh.weights[k] * fsol.boundary_values[k])
        .sum();
    assert!(bd_mean.abs() < 1e-6 * area * scale);
}

#[test]
fn bordered_system_solves_and_rejects() {
    // Singular principal block with compatible borders still solves the
    // constrained system; a fully singular bordered matrix is rejected.
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    let sys = BorderedSystem::new(a, &[1.0, -1.0], &[1.0, -1.0]).unwrap();
    let (x, _mu) = sys.solve(&[2.0, 2.0], 0.0).unwrap();
    // x solves A x + μ c = b with x1 − x2 = 0: x = (1, 1), μ = 0.
    assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);

    let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    assert!(BorderedSystem::new(a, &[0.0, 0.0], &[0.0, 0.0]).is_err());
}

#[test]
fn mesh_requires_level_set_shape() {
    struct Flat;
    impl ImmersionChart for Flat {
        fn point(&self, u: &Vector2<f64>) -> Vector3<f64> {
            Vector3::new(u.x, u.y, 0.0)
        }
        fn domain(&self) -> [f64; 4] {
            [-1.0, 1.0, -1.0, 1.0]
        }
    }
    let surface = Surface::new(Shape::Immersion { chart: Arc::new(Flat) });
    assert!(BoundaryMesh::build(&surface, &Vector3::zeros(), 2).is_err());
}
