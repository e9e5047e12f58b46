use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use teichcurve::curvature::{k_fiber_from_mu, shape_from_value, CurvatureReport};
use teichcurve::disk::{density, DiskIsometry, C64};
use teichcurve::fuchsian::reduce_to_domain;
use teichcurve::jets::{build_curve_jet, real_hessian};
use teichcurve::mesh::SurfaceField;
use teichcurve::qdiff::BasisSet;
use teichcurve::report::{check_rows_csv, fmt_f64, parse_points, CheckRow};
use teichcurve::surface::Surface;

fn fx() -> &'static (Surface, BasisSet) {
    static F: OnceLock<(Surface, BasisSet)> = OnceLock::new();
    F.get_or_init(|| {
        let s = Surface::build(0.2, 3).unwrap();
        let wp = s.orthonormalize_wp(&s.raw_basis()).unwrap();
        (s, wp)
    })
}

fn disk_point(max: f64) -> impl Strategy<Value = C64> {
    (0.0..max, 0.0..std::f64::consts::TAU).prop_map(|(r, a)| C64::from_polar(r, a))
}

fn random_field(n: usize, seed: u64) -> SurfaceField<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    SurfaceField::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

proptest! {
    #[test]
    fn density_is_isometry_invariant(z in disk_point(0.9), theta in 0.0..6.3f64, d in 0.0..2.0f64) {
        let g = DiskIsometry::rotation(theta).compose(&DiskIsometry::real_translation(d));
        let w = g.map(z);
        let pulled = density(w) * g.derivative(z).norm_sqr();
        prop_assert!((pulled - density(z)).abs() <= 1e-8 * density(z));
    }

    #[test]
    fn reduction_lands_in_the_domain(z in disk_point(0.97)) {
        let (s, _) = fx();
        let (p, word) = reduce_to_domain(&s.group, &s.domain, z).unwrap();
        prop_assert!(s.domain.contains(p, 1e-9));
        let back = s.group.eval_word(&word).unwrap().map(p);
        prop_assert!((back - z).norm() < 1e-9 * (1.0 - z.norm()).recip());
    }

    #[test]
    fn real_hessian_is_the_real_form(
        entries in proptest::collection::vec(-1.0..1.0f64, 18),
        t in proptest::collection::vec(-1.0..1.0f64, 6),
    ) {
        // Hermitian M from random entries.
        let m = DMatrix::from_fn(3, 3, |i, j| {
            let c = C64::new(entries[3 * i + j], entries[9 + 3 * i + j]);
            let d = C64::new(entries[3 * j + i], entries[9 + 3 * j + i]);
            0.5 * (c + d.conj())
        });
        let tc: Vec<C64> = (0..3).map(|a| C64::new(t[2 * a], t[2 * a + 1])).collect();
        let mut q = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                q += (m[(a, b)] * tc[a] * tc[b].conj()).re;
            }
        }
        let h = real_hessian(&m);
        prop_assert!((h.clone() - h.transpose()).norm() < 1e-14);
        let x = nalgebra::DVector::from_vec(t.clone());
        prop_assert!((0.5 * x.dot(&(&h * &x)) - q).abs() < 1e-12);
    }

    #[test]
    fn shape_operator_is_traceless_with_opposite_curvatures(z in disk_point(0.9), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let phi = C64::new(re, im);
        let s = shape_from_value(phi, z);
        let g = density(z);
        let mu = phi.norm() / g;
        let [k1, k2] = s.principal_curvatures;
        prop_assert!(s.mean_curvature.abs() < 1e-12 * (1.0 + mu));
        prop_assert!((k1 - 2.0 * mu).abs() < 1e-12 * (1.0 + mu));
        prop_assert!((k2 + 2.0 * mu).abs() < 1e-12 * (1.0 + mu));
        let h = s.second_fundamental_form;
        let op = Matrix2::new(h[0][0], h[0][1], h[1][0], h[1][1]) / g;
        let mut ev: Vec<f64> = op.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        prop_assert!((ev[1] - k1).abs() < 1e-10 * (1.0 + mu));
        prop_assert!((ev[0] - k2).abs() < 1e-10 * (1.0 + mu));
    }

    #[test]
    fn fiber_curvature_is_at_least_minus_one(mu in proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 0..5)) {
        let mu: Vec<C64> = mu.into_iter().map(|(a, b)| C64::new(a, b)).collect();
        prop_assert!(k_fiber_from_mu(&mu) >= -1.0);
    }

    #[test]
    fn floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn report_gap_is_the_absolute_difference(a in -10.0..10.0f64, b in -10.0..10.0f64, tol in 0.0..1.0f64) {
        let r = CurvatureReport::new(C64::new(0.1, 0.2), "p", a, b, tol);
        prop_assert_eq!(r.gap, (a - b).abs());
        prop_assert_eq!(r.pass, (a - b).abs() <= tol);
        let row = CheckRow::close("s", "c", "x", None, a, b, tol);
        prop_assert_eq!(row.pass, r.pass);
        let csv = check_rows_csv(&[row]);
        let line = csv.lines().nth(1).unwrap();
        prop_assert_eq!(line.split(',').count(), 10);
    }

    #[test]
    fn points_files_round_trip(points in proptest::collection::vec(disk_point(0.99), 1..8)) {
        let text: String = points.iter().map(|z| format!("{} {}\n", fmt_f64(z.re), fmt_f64(z.im))).collect();
        prop_assert_eq!(parse_points(&text).unwrap(), points);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn d_is_linear_self_adjoint_and_averaging(seed in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let (s, _) = fx();
        let op = &s.operator;
        let n = op.dim();
        let f = random_field(n, seed);
        let g = random_field(n, seed ^ 0x9e37_79b9);
        let comb = SurfaceField::new(f.values.iter().zip(&g.values).map(|(x, y)| a * x + b * y).collect());
        let (df, dg, dc) = (op.apply_d(&f).unwrap(), op.apply_d(&g).unwrap(), op.apply_d(&comb).unwrap());
        for i in 0..n {
            prop_assert!((dc.values[i] - a * df.values[i] - b * dg.values[i]).abs() < 1e-9);
        }
        prop_assert!(op.self_adjointness_defect(&f, &g).unwrap() < 1e-9);
        // Discrete maximum principle, up to solver tolerance.
        prop_assert!(df.max() <= f.max() + 1e-9 && df.min() >= f.min() - 1e-9);
    }

    #[test]
    fn curve_metric_is_positive_definite_near_the_fiber(
        z in disk_point(0.7),
        params in proptest::collection::vec(-0.1..0.1f64, 6),
    ) {
        let (s, wp) = fx();
        let z0 = s.reduce(z).unwrap();
        let jet = build_curve_jet(s, wp, z0).unwrap();
        let m = jet.metric(z0, &params).unwrap();
        prop_assert!((m.clone() - m.transpose()).norm() < 1e-14);
        prop_assert!(m.symmetric_eigen().eigenvalues.min() > 0.0);
    }
}
