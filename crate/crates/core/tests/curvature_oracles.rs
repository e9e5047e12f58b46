use std::sync::OnceLock;

use nalgebra::DMatrix;
use teichcurve::curvature::{
    christoffel_fd, christoffel_table_check, k_fiber_closed, k_germ_closed, k_mixed_closed, lapse_invariance_check,
    sample_points, second_fundamental_form, sectional_fd, FdSteps, DEFAULT_SAMPLE_SEED, SAMPLE_RADIUS,
};
use teichcurve::disk::{density, C64};
use teichcurve::jets::{build_curve_jet, build_germ_jet, build_lapse_jet, JetKind, Lapse, MetricJet};
use teichcurve::qdiff::{BasisSet, QuadDifferential};
use teichcurve::surface::Surface;
use teichcurve::Error;

struct Fixture {
    surface: Surface,
    wp: BasisSet,
    phi0: QuadDifferential,
    points: Vec<C64>,
}

fn fx() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let surface = Surface::build(0.1, 4).unwrap();
        let wp = surface.orthonormalize_wp(&surface.raw_basis()).unwrap();
        let phi0 = wp.element(0);
        let points = sample_points(&surface.domain, DEFAULT_SAMPLE_SEED, 10);
        Fixture { surface, wp, phi0, points }
    })
}

/// Sectional curvature of the coordinate plane `(a, b)` from metric values only:
/// `R_abba = ½(2g_ab,ab − g_aa,bb − g_bb,aa) + g_mn(Γ^m_ab Γ^n_ab − Γ^m_aa Γ^n_bb)` with
/// Christoffels of the first kind from central first differences.
fn oracle_sectional(metric: &dyn Fn(&[f64]) -> DMatrix<f64>, x0: &[f64], steps: &[f64], a: usize, b: usize) -> f64 {
    let n = x0.len();
    let at = |shifts: &[(usize, f64)]| {
        let mut x = x0.to_vec();
        for &(i, s) in shifts {
            x[i] += s * steps[i];
        }
        metric(&x)
    };
    let g0 = at(&[]);
    // dg[k] = ∂_k g
    let dg: Vec<DMatrix<f64>> = (0..n).map(|k| (at(&[(k, 1.0)]) - at(&[(k, -1.0)])) / (2.0 * steps[k])).collect();
    let second = |i: usize, j: usize, k: usize, l: usize| -> f64 {
        // ∂_k ∂_l g_ij
        if k == l {
            (at(&[(k, 1.0)])[(i, j)] - 2.0 * g0[(i, j)] + at(&[(k, -1.0)])[(i, j)]) / (steps[k] * steps[k])
        } else {
            (at(&[(k, 1.0), (l, 1.0)])[(i, j)] - at(&[(k, 1.0), (l, -1.0)])[(i, j)] - at(&[(k, -1.0), (l, 1.0)])[(i, j)]
                + at(&[(k, -1.0), (l, -1.0)])[(i, j)])
                / (4.0 * steps[k] * steps[l])
        }
    };
    let first_kind = |m: usize, i: usize, j: usize| 0.5 * (dg[j][(m, i)] + dg[i][(m, j)] - dg[m][(i, j)]);
    let ginv = g0.clone().try_inverse().unwrap();
    let upper = |i: usize, j: usize| -> Vec<f64> {
        (0..n).map(|l| (0..n).map(|m| ginv[(l, m)] * first_kind(m, i, j)).sum()).collect()
    };
    let (gab, gaa, gbb) = (upper(a, b), upper(a, a), upper(b, b));
    let mut quad = 0.0;
    for m in 0..n {
        for k in 0..n {
            quad += g0[(m, k)] * (gab[m] * gab[k] - gaa[m] * gbb[k]);
        }
    }
    let r = 0.5 * (2.0 * second(a, b, a, b) - second(a, a, b, b) - second(b, b, a, a)) + quad;
    r / (g0[(a, a)] * g0[(b, b)] - g0[(a, b)] * g0[(a, b)])
}

fn jet_oracle(jet: &MetricJet, a: usize, b: usize) -> f64 {
    let dim = jet.dim();
    let mut x0 = vec![0.0; dim];
    x0[0] = jet.window.re;
    x0[1] = jet.window.im;
    let mut steps = vec![1e-2; dim];
    steps[0] = 1e-3;
    steps[1] = 1e-3;
    let metric = |x: &[f64]| jet.metric(C64::new(x[0], x[1]), &x[2..]).unwrap();
    oracle_sectional(&metric, &x0, &steps, a, b)
}

#[test]
fn oracle_recovers_the_hyperbolic_plane() {
    let metric = |x: &[f64]| DMatrix::from_diagonal_element(2, 2, density(C64::new(x[0], x[1])));
    for z in [[0.0, 0.0], [0.4, -0.3], [-0.6, 0.1]] {
        let k = oracle_sectional(&metric, &z, &[1e-3, 1e-3], 0, 1);
        assert!((k + 1.0).abs() < 1e-5, "{k}");
    }
}

#[test]
fn curve_jet_matches_closed_forms_at_sample_points() {
    let f = fx();
    for &z in &f.points {
        let jet = build_curve_jet(&f.surface, &f.wp, z).unwrap();
        let kf = k_fiber_closed(&f.wp, z);
        assert!((jet_oracle(&jet, 0, 1) - kf).abs() < 1e-5);
        assert!((sectional_fd(&jet, (0, 1), FdSteps::default()).unwrap().value - kf).abs() < 1e-8);
        for l in 0..f.wp.len() {
            let km = k_mixed_closed(&f.surface, &f.wp, l, z).unwrap();
            for (a, b) in [(0, 2 + 2 * l), (1, 3 + 2 * l)] {
                assert!((jet_oracle(&jet, a, b) - km).abs() < 1e-5, "{z} l={l}");
            }
        }
    }
}

#[test]
fn germ_jet_matches_closed_forms_at_sample_points() {
    let f = fx();
    for &z in &f.points {
        let jet = build_germ_jet(&f.surface, &f.phi0, z).unwrap();
        let (kf, km) = k_germ_closed(&f.surface, &f.phi0, z).unwrap();
        assert!((jet_oracle(&jet, 0, 1) - kf).abs() < 1e-5);
        assert!((jet_oracle(&jet, 0, 2) - km).abs() < 1e-5);
        assert!((jet_oracle(&jet, 1, 2) - km).abs() < 1e-5);
        assert!((sectional_fd(&jet, (1, 2), FdSteps::default()).unwrap().value - km).abs() < 1e-8);
    }
}

#[test]
fn frozen_values_at_the_centre() {
    let f = fx();
    let z = C64::new(0.0, 0.0);
    assert!((k_fiber_closed(&f.wp, z) - -0.8257837998231565).abs() < 1e-9);
    assert!((k_mixed_closed(&f.surface, &f.wp, 0, z).unwrap() - -0.04988177198633459).abs() < 1e-9);
    let (kf, km) = k_germ_closed(&f.surface, &f.phi0, z).unwrap();
    assert!((kf - -0.8257837998231565).abs() < 1e-9);
    assert!((km - -0.09976354397266918).abs() < 1e-9);
}

#[test]
fn closed_forms_obey_sign_and_ordering() {
    let f = fx();
    for &z in &f.points {
        let mu_sq: f64 = {
            let p = f.phi0.eval(z);
            p.norm_sqr() / (density(z) * density(z))
        };
        let (kf, km) = k_germ_closed(&f.surface, &f.phi0, z).unwrap();
        assert!(kf >= -1.0 && km <= 0.0);
        assert!((kf - (-1.0 + mu_sq)).abs() < 1e-14);
        for l in 0..f.wp.len() {
            assert!(k_mixed_closed(&f.surface, &f.wp, l, z).unwrap() <= 0.0);
        }
    }
}

/// The first differential of a jet replaced by zero.
fn zeroed_first(mut jet: MetricJet) -> MetricJet {
    let k = jet.recombination.ncols();
    for c in 0..k {
        jet.recombination[(0, c)] = C64::new(0.0, 0.0);
    }
    for i in 0..jet.frozen_d.nrows() {
        jet.frozen_d[(0, i)] = C64::new(0.0, 0.0);
        jet.frozen_d[(i, 0)] = C64::new(0.0, 0.0);
    }
    jet
}

#[test]
fn zero_differential_has_flat_mixed_planes() {
    let f = fx();
    let z = f.points[3];
    let jet = zeroed_first(build_curve_jet(&f.surface, &f.wp, z).unwrap());
    for plane in [(0, 2), (1, 2), (0, 3), (1, 3)] {
        assert!(sectional_fd(&jet, plane, FdSteps::default()).unwrap().value.abs() < 1e-9);
    }
    let t = christoffel_fd(&jet, FdSteps::default(), None).unwrap();
    for l in 0..2 {
        for p in 2..4 {
            assert!(t.get(l, p, p).value.abs() < 1e-9);
            assert!(t.get(p, l, l).value.abs() < 1e-9);
        }
    }
}

#[test]
fn zero_germ_is_the_hyperbolic_product() {
    let f = fx();
    let z = f.points[1];
    let mut jet = zeroed_first(build_germ_jet(&f.surface, &f.phi0, z).unwrap());
    assert!(matches!(jet.kind, JetKind::Germ));
    let k = sectional_fd(&jet, (0, 1), FdSteps::default()).unwrap();
    assert!((k.value + 1.0).abs() < 1e-9);
    assert!(sectional_fd(&jet, (0, 2), FdSteps::default()).unwrap().value.abs() < 1e-9);
    jet.window = C64::new(0.0, 0.0);
    assert!((jet_oracle(&jet, 0, 1) + 1.0).abs() < 1e-5);
}

#[test]
fn parameter_block_is_euclidean() {
    let f = fx();
    let z = f.points[2];
    let jet = build_curve_jet(&f.surface, &f.wp, z).unwrap();
    assert!(sectional_fd(&jet, (2, 3), FdSteps::default()).unwrap().value.abs() < 1e-9);
    assert!(jet_oracle(&jet, 2, 5).abs() < 1e-6);
}

#[test]
fn tabulated_christoffel_symbols() {
    let f = fx();
    let z = f.points[5];
    let jet = build_curve_jet(&f.surface, &f.wp, z).unwrap();
    let t = christoffel_fd(&jet, FdSteps::default(), None).unwrap();
    let phis = jet.differentials(&jet.bank.seeds(z));
    for (l, phi) in phis.iter().enumerate() {
        let (xl, yl) = (2 + 2 * l, 3 + 2 * l);
        // Γ^{xℓ}_{yy} = Re φℓ/2, Γ^{xℓ}_{xy} = Im φℓ/2, Γ^{yℓ}_{yy} = −Im φℓ/2.
        assert!((t.get(xl, 1, 1).value - 0.5 * phi.re).abs() < 1e-8);
        assert!((t.get(xl, 0, 1).value - 0.5 * phi.im).abs() < 1e-8);
        assert!((t.get(yl, 1, 1).value + 0.5 * phi.im).abs() < 1e-8);
    }
    let germ = build_germ_jet(&f.surface, &f.phi0, z).unwrap();
    let t = christoffel_fd(&germ, FdSteps::default(), None).unwrap();
    assert!(t.get(0, 2, 2).value.abs() < 1e-12);
    assert!(t.get(2, 2, 2).value.abs() < 1e-12);
}

#[test]
fn full_christoffel_tables_pass() {
    let f = fx();
    for &z in &f.points[..3] {
        let curve = christoffel_table_check(&build_curve_jet(&f.surface, &f.wp, z).unwrap(), FdSteps::default()).unwrap();
        let germ = christoffel_table_check(&build_germ_jet(&f.surface, &f.phi0, z).unwrap(), FdSteps::default()).unwrap();
        for e in curve.iter().chain(&germ) {
            assert!(e.pass, "{} at {z}: {} vs {}", e.name, e.closed_form, e.oracle);
        }
    }
}

#[test]
fn gauss_equation_links_shape_and_fiber_curvature() {
    let f = fx();
    for &z in &f.points {
        let s = second_fundamental_form(&f.phi0, z);
        let [k1, k2] = s.principal_curvatures;
        let jet = build_germ_jet(&f.surface, &f.phi0, z).unwrap();
        let k = sectional_fd(&jet, (0, 1), FdSteps::default()).unwrap().value;
        // The fiber is intrinsically hyperbolic; the shape operator is that of ∂_t g = 2·II.
        assert!((k - (-1.0 - 0.25 * k1 * k2)).abs() < 1e-8);
        assert!(s.mean_curvature.abs() < 1e-14);
    }
}

#[test]
fn pointwise_d_basis_stays_below_the_bound() {
    let f = fx();
    let c = f.surface.domain.centroid();
    let pd = f.surface.normalize_pointwise_d(&f.surface.raw_basis(), c).unwrap();
    let k = k_fiber_closed(&pd, c);
    assert!(k <= 8.0);
    assert!((k - 0.7462912125953647).abs() < 1e-9);
}

#[test]
fn error_paths() {
    let f = fx();
    let z = f.points[4];
    let jet = build_germ_jet(&f.surface, &f.phi0, z).unwrap();
    assert!(matches!(
        christoffel_fd(&jet, FdSteps::default(), Some(1e-30)),
        Err(Error::StepTooLarge { .. })
    ));
    assert!(christoffel_fd(&jet, FdSteps::default(), Some(1e-3)).is_ok());
    assert!(sectional_fd(&jet, (1, 1), FdSteps::default()).is_err());
    assert!(sectional_fd(&jet, (0, 3), FdSteps::default()).is_err());
    let doubled = f.phi0.scaled(C64::new(2.0, 0.0));
    assert!(matches!(k_germ_closed(&f.surface, &doubled, z), Err(Error::Normalization { .. })));
    assert!(matches!(build_germ_jet(&f.surface, &doubled, z), Err(Error::Normalization { .. })));
    let bad = Lapse { name: "2", f: |_| 2.0 };
    assert!(matches!(build_lapse_jet(&f.surface, &f.phi0, z, bad), Err(Error::InvalidLapse(_))));
    let neg = Lapse { name: "1-9t", f: |t| 1.0 - 9.0 * t };
    assert!(matches!(build_lapse_jet(&f.surface, &f.phi0, z, neg), Err(Error::InvalidLapse(_))));
    assert!(matches!(jet.metric(C64::new(1.2, 0.0), &[0.0]), Err(Error::Domain(_))));
}

#[test]
fn unit_lapse_reproduces_the_germ() {
    let f = fx();
    let z = f.points[6];
    let germ = build_germ_jet(&f.surface, &f.phi0, z).unwrap();
    let lapse = build_lapse_jet(&f.surface, &f.phi0, z, Lapse::ONE).unwrap();
    let a = sectional_fd(&germ, (0, 1), FdSteps::default()).unwrap();
    let b = sectional_fd(&lapse, (0, 1), FdSteps::default()).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    for l in [Lapse::ONE, Lapse::ONE_PLUS_T2, Lapse::EXP] {
        assert!(lapse_invariance_check(&f.surface, &f.phi0, z, l, FdSteps::default()).unwrap().pass);
    }
}

#[test]
fn sample_points_are_seeded_and_admissible() {
    let f = fx();
    let again = sample_points(&f.surface.domain, DEFAULT_SAMPLE_SEED, 10);
    assert_eq!(f.points, again);
    assert_eq!(f.points[0], f.surface.domain.centroid());
    assert!((f.points[1] - C64::new(0.22124729364164253, -0.5895368626673294)).norm() < 1e-15);
    for z in &f.points[1..] {
        assert!(z.norm() <= SAMPLE_RADIUS && f.surface.domain.contains(*z, 0.0));
    }
    assert_ne!(sample_points(&f.surface.domain, 7, 10), f.points);
}
