use std::sync::OnceLock;

use teichcurve::bochner::{energy_hessian_check, solve_bochner, solve_bochner_with, total_energy, DEFAULT_T_MAX};
use teichcurve::mesh::SurfaceField;
use teichcurve::qdiff::QuadDifferential;
use teichcurve::surface::Surface;
use teichcurve::Error;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

fn fx() -> &'static (Surface, QuadDifferential) {
    static F: OnceLock<(Surface, QuadDifferential)> = OnceLock::new();
    F.get_or_init(|| {
        let s = Surface::build(0.1, 4).unwrap();
        let phi0 = s.orthonormalize_wp(&s.raw_basis()).unwrap().element(0);
        (s, phi0)
    })
}

#[test]
fn zero_time_is_the_identity() {
    let (s, phi0) = fx();
    let sol = solve_bochner(s, phi0, 0.0).unwrap();
    assert!(sol.h.values.iter().all(|&v| v == 1.0));
    assert!(sol.l.values.iter().all(|&v| v == 0.0));
    assert!(sol.e.values.iter().all(|&v| v == 1.0));
    assert!(sol.jacobian.values.iter().all(|&v| v == 1.0));
}

#[test]
fn area_energy_at_zero() {
    let (s, _) = fx();
    let e0 = total_energy(s, &SurfaceField::constant(s.mesh.num_classes(), 1.0));
    assert!((e0 - 12.56636213712731).abs() < 1e-9);
    assert!((e0 - FOUR_PI).abs() < 1e-4);
    let fine = Surface::build(0.05, 4).unwrap();
    let e0_fine = total_energy(&fine, &SurfaceField::constant(fine.mesh.num_classes(), 1.0));
    assert!((e0_fine - FOUR_PI).abs() < (e0 - FOUR_PI).abs());
}

#[test]
fn log_density_follows_the_helmholtz_expansion() {
    // Independent of the Newton solve: log H = t²·D(|μ₀|²) + O(t⁴).
    let (s, phi0) = fx();
    let d = s.d_abs_mu_sq(phi0).unwrap();
    let mut last = f64::INFINITY;
    for t in [0.04, 0.02, 0.01] {
        let sol = solve_bochner(s, phi0, t).unwrap();
        let gap = sol
            .h
            .values
            .iter()
            .zip(&d.values)
            .map(|(h, d)| (h.ln() - t * t * d).abs())
            .fold(0.0, f64::max);
        assert!(gap < 2.0 * t.powi(4) * 10.0, "t={t}: {gap}");
        assert!(gap < last);
        last = gap;
    }
}

#[test]
fn frozen_solution_at_small_time() {
    let (s, phi0) = fx();
    let sol = solve_bochner(s, phi0, 0.05).unwrap();
    assert!((sol.jacobian.min() - 0.9998139304473219).abs() < 1e-9);
    assert!((sol.e.max() - 1.0006847942875372).abs() < 1e-9);
    assert!((sol.total_energy(s) - 12.571420792223012).abs() < 1e-8);
    assert!(sol.residual < 1e-9);
    assert!((1..=20).contains(&sol.newton_steps));
}

#[test]
fn product_identity_and_positivity() {
    let (s, phi0) = fx();
    for t in [0.05, 0.12, 0.2] {
        let sol = solve_bochner(s, phi0, t).unwrap();
        assert!(sol.product_defect() < 1e-12);
        assert!(sol.jacobian.min() > 0.0);
        assert!(sol.e.min() >= 1.0 - 1e-12);
        for ((e, h), l) in sol.e.values.iter().zip(&sol.h.values).zip(&sol.l.values) {
            assert!((e - h - l).abs() < 1e-14);
        }
        assert!(sol.total_energy(s) > FOUR_PI - 1e-4);
    }
}

#[test]
fn density_is_even_in_time() {
    let (s, phi0) = fx();
    let a = solve_bochner(s, phi0, 0.08).unwrap();
    let b = solve_bochner(s, phi0, -0.08).unwrap();
    for (x, y) in a.e.values.iter().zip(&b.e.values) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn energy_hessian_matches_at_default_and_halved_steps() {
    let (s, phi0) = fx();
    let r = energy_hessian_check(s, phi0, 0.02).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.first_difference < 1e-10);
    assert!(r.second_difference_gap_half <= r.second_difference_gap);
    assert!(r.richardson_gap <= r.second_difference_gap);
    assert!(energy_hessian_check(s, phi0, 0.0).is_err());
    assert!(energy_hessian_check(s, phi0, 0.15).is_err());
}

#[test]
fn time_outside_the_window_is_rejected() {
    let (s, phi0) = fx();
    assert!(matches!(solve_bochner(s, phi0, DEFAULT_T_MAX + 0.01), Err(Error::Config(_))));
    assert!(solve_bochner(s, phi0, f64::NAN).is_err());
    assert!(solve_bochner_with(s, phi0, 0.3, 0.5).is_ok());
}

#[test]
fn csv_dump_has_one_row_per_class() {
    let (s, phi0) = fx();
    let sol = solve_bochner(s, phi0, 0.05).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("density.csv");
    sol.write_csv(&s.mesh, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("class,x,y,H,L,e,J"));
    assert_eq!(lines.count(), s.mesh.num_classes());
}
