//! Verification suites. Every assertion becomes a [`CheckRow`]; nothing is skipped silently.

use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bochner::{energy_hessian_check, solve_bochner, total_energy, DEFAULT_T_MAX, SECOND_DIFFERENCE_TOL};
use crate::cache::{build, Build};
use crate::config::{NormTag, RunConfig};
use crate::curvature::{
    christoffel_table_check, k_fiber_closed, k_germ_closed, k_mixed_closed, lapse_invariance_check,
    oracle_tolerance, sample_points, second_fundamental_form, sectional_fd, FdSteps,
};
use crate::disk::{density, gauss_curvature_probe, C64};
use crate::error::{Error, Result};
use crate::fuchsian::DEFAULT_ELEMENT_CAP;
use crate::helmholtz::HelmholtzOperator;
use crate::jets::{build_curve_jet, build_germ_jet, Lapse};
use crate::mesh::{mesh_domain, SurfaceField, SurfaceMesh};
use crate::qdiff::{automorphy_residual, eigen_range, BasisSet, QuadDifferential, SeriesBank, RANK_RATIO_FLOOR};
use crate::report::CheckRow;
use crate::surface::Surface;
use anchors::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Surface,
    Operator,
    Curve,
    Germ,
    Minimality,
    Bochner,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] = [
        Suite::Surface,
        Suite::Operator,
        Suite::Curve,
        Suite::Germ,
        Suite::Minimality,
        Suite::Bochner,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Surface => "surface",
            Suite::Operator => "operator",
            Suite::Curve => "curve",
            Suite::Germ => "germ",
            Suite::Minimality => "minimality",
            Suite::Bochner => "bochner",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .iter()
            .chain(&[Suite::All])
            .find(|x| x.name() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

pub const PROBE_POINTS: usize = 50;
pub const PROBE_STEP: f64 = 1e-4;
pub const MINIMALITY_DIFFERENTIALS: usize = 5;
/// Below this, a quantity that should shrink under refinement counts as converged.
pub const REFINEMENT_FLOOR: f64 = 1e-12;
/// Same for plain FD gaps, which bottom out at round-off of nested differences.
pub const FD_GAP_FLOOR: f64 = 1e-9;
pub const AREA_TOL: f64 = 1e-3;

/// Anchor strings attached to report rows, one per certified statement.
pub mod anchors {
    pub const RELATION: &str = "abABcdCD = 1";
    pub const PROBE: &str = "Gauss curvature of g = -1";
    pub const INVARIANCE: &str = "g(γz)|γ'(z)|² = g(z)";
    pub const EULER: &str = "χ = 2 - 2g = -2";
    pub const AREA: &str = "Area = 4π (Gauss-Bonnet)";
    pub const AUTOMORPHY: &str = "φ(γz)γ'(z)² = φ(z), residual decreasing in L";
    pub const GRAM: &str = "WP Gram full rank";
    pub const D_ONE: &str = "D(1)=1";
    pub const SELF_ADJOINT: &str = "<Df,g> = <f,Dg>";
    pub const POSITIVE: &str = "f ≥ 0 ⇒ Df ≥ 0";
    pub const SUP: &str = "inf f ≤ Df ≤ sup f";
    pub const WOLPERT: &str = "3D(|μ|²) ≥ |μ|²";
    pub const K_FIBER: &str = "K(x,y) = -1 + Σ|μ_l|²";
    pub const K_MIXED: &str = "K(x,x_l) = K(y,x_l) = K(x,y_l) = K(y,y_l) = -D(|μ_l|²)/2";
    pub const K_MIXED_BOUND: &str = "K(x,x_l) ≤ -|μ_l|²/6";
    pub const TABLE: &str = "Christoffel symbols of the pulled-back metric";
    pub const BOUND: &str = "K(x,y) ≤ 9g - 10 = 8 (pointwise-D basis)";
    pub const SIGNS: &str = "K(x,y) ≥ -1 and K(x,x_l) ≤ 0";
    pub const SUP_OBSERVED: &str = "sup K(x,y) > 0 over the Teichmüller curve (observational)";
    pub const GERM_FIBER: &str = "K_H(x,y) = -1 + |μ0|²";
    pub const GERM_MIXED: &str = "K_H(x,t) = K_H(y,t) = -D(|μ0|²)";
    pub const GERM_RANGE: &str = "-sup|μ0|² ≤ -D(|μ0|²) ≤ 0";
    pub const LAPSE: &str = "K_{H_f}(x,y) = -1 + |μ0|²";
    pub const TRACE: &str = "tr(g⁻¹h) = 0 (fibers minimal)";
    pub const PRINCIPAL: &str = "λ = ±2|μ0|";
    pub const REFINE: &str = "oracle gap shrinks under h→h/2, step→step/2";
    pub const BOCHNER: &str = "Δ log H = 2H - 2L - 2 (external Bochner oracle)";
    pub const E0: &str = "E(0) = Area = 4π";
    pub const HL: &str = "H·L = |tφ0|²/g²";
    pub const FIRST: &str = "∂e/∂t|0 = 0";
    pub const SECOND: &str = "∂²e/∂t²|0 = (D+1)(2|φ0|²/g²)";
    pub const JACOBIAN: &str = "J = H - L > 0, e ≥ J";
}

/// Everything the suites share: the cached build, the unit germ direction, sample points and
/// a lazily built refined surface.
pub struct Session {
    pub config: RunConfig,
    pub build: Build,
    /// Unit WP-norm differential driving the germ, minimality and Bochner checks.
    pub phi0: QuadDifferential,
    pub points: Vec<C64>,
    refined: OnceLock<std::result::Result<Refined, String>>,
}

struct Refined {
    surface: Surface,
    basis: Option<BasisSet>,
    phi0: QuadDifferential,
}

fn unit_direction(surface: &Surface) -> Result<QuadDifferential> {
    Ok(surface.orthonormalize_wp(&surface.raw_basis())?.element(0))
}

impl Session {
    pub fn new(config: RunConfig) -> Result<Session> {
        let build = build(&config)?;
        let phi0 = unit_direction(&build.surface)?;
        let points = sample_points(&build.surface.domain, config.sample_seed, config.sample_count);
        Ok(Session {
            config,
            build,
            phi0,
            points,
            refined: OnceLock::new(),
        })
    }

    pub fn surface(&self) -> &Surface {
        &self.build.surface
    }

    /// The configured basis at `z0`; `None` where the pointwise-D form is indefinite.
    pub fn basis_at(&self, z0: C64) -> Result<Option<BasisSet>> {
        basis_for(self.surface(), self.config.normalization, Some(&self.build.basis), z0)
    }

    fn refined(&self) -> Result<&Refined> {
        self.refined
            .get_or_init(|| {
                let run = || -> Result<Refined> {
                    let surface = Surface::build(0.5 * self.config.h, self.config.truncation_length)?;
                    let raw = surface.raw_basis();
                    let basis = match self.config.normalization {
                        NormTag::Raw => Some(raw),
                        NormTag::Wp => Some(surface.orthonormalize_wp(&raw)?),
                        NormTag::PointD => None,
                    };
                    let phi0 = unit_direction(&surface)?;
                    Ok(Refined { surface, basis, phi0 })
                };
                run().map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Construction(format!("refined surface: {e}")))
    }
}

fn basis_for(surface: &Surface, norm: NormTag, fixed: Option<&BasisSet>, z0: C64) -> Result<Option<BasisSet>> {
    match norm {
        NormTag::PointD => match surface.normalize_pointwise_d(&surface.raw_basis(), z0) {
            Ok(b) => Ok(Some(b)),
            Err(Error::Indefinite(_)) | Err(Error::RankDeficient { .. }) => Ok(None),
            Err(e) => Err(e),
        },
        _ => match fixed {
            Some(b) => Ok(Some(b.clone())),
            None => Err(Error::Construction("missing basis".into())),
        },
    }
}

pub fn run_suite(session: &Session, suite: Suite) -> Result<Vec<CheckRow>> {
    match suite {
        Suite::Surface => surface_suite(session),
        Suite::Operator => operator_suite(session),
        Suite::Curve => curve_suite(session),
        Suite::Germ => germ_suite(session),
        Suite::Minimality => minimality_suite(session),
        Suite::Bochner => bochner_suite(session),
        Suite::All => {
            let mut rows = Vec::new();
            for s in Suite::EACH {
                rows.extend(run_suite(session, s)?);
            }
            Ok(rows)
        }
    }
}

/// Samples for automorphy residuals: a spiral inside `|z| ≤ 0.5`.
pub fn automorphy_samples() -> Vec<C64> {
    (0..20)
        .map(|i| C64::from_polar(0.5 * (i as f64 + 1.0) / 20.0, 2.4 * i as f64))
        .collect()
}

fn surface_suite(s: &Session) -> Result<Vec<CheckRow>> {
    const S: &str = "surface";
    let surf = s.surface();
    let mut rows = vec![CheckRow::close(
        S,
        "octagon relation residual",
        RELATION,
        None,
        surf.group.relation_residual(),
        0.0,
        1e-9,
    )];
    let probes = sample_points(&surf.domain, s.config.sample_seed, PROBE_POINTS);
    for &z in &probes {
        let k = gauss_curvature_probe(z, PROBE_STEP)?;
        rows.push(CheckRow::close(S, "curvature probe", PROBE, Some(z), k, -1.0, 1e-6));
    }
    for (i, g) in surf.group.generators.iter().enumerate() {
        let worst = probes
            .iter()
            .map(|&z| (density(g.map(z)) * g.derivative(z).norm_sqr() - density(z)).abs() / density(z))
            .fold(0.0, f64::max);
        let name = format!("density invariance, generator {}", crate::fuchsian::LETTERS[i]);
        rows.push(CheckRow::close(S, name, INVARIANCE, None, worst, 0.0, 1e-9));
    }
    rows.push(CheckRow::close(
        S,
        "Euler characteristic",
        EULER,
        None,
        surf.mesh.euler_characteristic() as f64,
        -2.0,
        0.0,
    ));
    rows.push(CheckRow::at_least(
        S,
        "minimum triangle angle (deg)",
        "mesh quality",
        None,
        surf.mesh.min_angle().to_degrees(),
        15.0,
        0.0,
    ));
    let area = surf.quadrature.integrate(density);
    rows.push(CheckRow::close(S, "hyperbolic area", AREA, None, area, 4.0 * std::f64::consts::PI, AREA_TOL));

    // Basis quality.
    let l = s.config.truncation_length;
    let lower = l.saturating_sub(2);
    let low_bank = Arc::new(SeriesBank::new(&surf.group, lower, DEFAULT_ELEMENT_CAP)?);
    let samples = automorphy_samples();
    for (i, g) in surf.group.generators.iter().enumerate() {
        let mut hi = 0.0f64;
        let mut lo = 0.0f64;
        for k in 0..crate::qdiff::NUM_SEEDS {
            hi = hi.max(automorphy_residual(&surf.seed(k)?, g, &samples)?);
            lo = lo.max(automorphy_residual(&QuadDifferential::seed(low_bank.clone(), k)?, g, &samples)?);
        }
        let name = format!(
            "automorphy residual L={l} vs L={lower}, generator {}",
            crate::fuchsian::LETTERS[i]
        );
        let mut row = CheckRow::at_most(S, name, AUTOMORPHY, None, hi, lo, 0.0);
        row.pass = hi < lo;
        rows.push(row);
    }
    let gram = surf.wp_gram(&s.build.basis);
    let (lo, hi) = eigen_range(&gram);
    rows.push(CheckRow::at_most(S, "WP Gram condition number", GRAM, None, hi / lo, 1e6, 0.0));
    rows.push(CheckRow::at_least(
        S,
        "WP Gram eigenvalue ratio",
        GRAM,
        None,
        lo / hi,
        RANK_RATIO_FLOOR,
        0.0,
    ));
    Ok(rows)
}

/// Smooth test field on any mesh: a random trigonometric polynomial in `(x, y)`.
fn random_field(mesh: &SurfaceMesh, coeffs: &[(f64, f64, f64, f64)]) -> SurfaceField<f64> {
    SurfaceField::new(
        mesh.classes
            .iter()
            .map(|c| {
                let z = mesh.nodes[c[0]];
                coeffs
                    .iter()
                    .map(|&(a, kx, ky, ph)| a * (kx * z.re + ky * z.im + ph).cos())
                    .sum()
            })
            .collect(),
    )
}

fn random_coeffs(rng: &mut ChaCha8Rng) -> Vec<(f64, f64, f64, f64)> {
    (0..4)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(-4.0..4.0),
                rng.random_range(-4.0..4.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect()
}

struct OperatorMetrics {
    d_one: f64,
    adjoint: Vec<f64>,
    /// Largest `max(0, −min Df)` over the nonnegative fields.
    negativity: f64,
    sup: Vec<bool>,
}

fn operator_metrics(mesh: &SurfaceMesh, op: &HelmholtzOperator, seed: u64) -> Result<OperatorMetrics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adjoint = Vec::new();
    for _ in 0..20 {
        let f = random_field(mesh, &random_coeffs(&mut rng));
        let g = random_field(mesh, &random_coeffs(&mut rng));
        adjoint.push(op.self_adjointness_defect(&f, &g)?);
    }
    let mut negativity = 0.0f64;
    let mut sup = Vec::new();
    for _ in 0..20 {
        let f = random_field(mesh, &random_coeffs(&mut rng));
        let f = SurfaceField::new(f.values.iter().map(|v| v * v).collect());
        let r = op.sup_bound_check(&f)?;
        negativity = negativity.max(-r.min_df);
        sup.push(r.pass);
    }
    Ok(OperatorMetrics {
        d_one: op.d_one_error()?,
        adjoint,
        negativity,
        sup,
    })
}

fn operator_suite(s: &Session) -> Result<Vec<CheckRow>> {
    const S: &str = "operator";
    let surf = s.surface();
    let seed = s.config.sample_seed;
    let coarse = operator_metrics(&surf.mesh, &surf.operator, seed)?;
    let mut rows = vec![CheckRow::close(S, "max |D(1) - 1|", D_ONE, None, coarse.d_one, 0.0, 1e-8)];
    for (i, d) in coarse.adjoint.iter().enumerate() {
        rows.push(CheckRow::close(S, format!("self-adjointness defect, pair {i}"), SELF_ADJOINT, None, *d, 0.0, 1e-8));
    }
    rows.push(CheckRow::at_least(S, "min Df over f ≥ 0", POSITIVE, None, -coarse.negativity, 0.0, 1e-8));
    let sup_pass = coarse.sup.iter().filter(|p| **p).count();
    rows.push(CheckRow::close(
        S,
        "fields within inf f ≤ Df ≤ sup f",
        SUP,
        None,
        sup_pass as f64,
        coarse.sup.len() as f64,
        0.0,
    ));

    let fine_mesh = mesh_domain(&surf.group, &surf.domain, 0.5 * s.config.h)?;
    let fine_op = HelmholtzOperator::new(&fine_mesh);
    let fine = operator_metrics(&fine_mesh, &fine_op, seed)?;
    let improve = |name: &str, anchor: &str, f: f64, c: f64| {
        CheckRow::at_most(S, format!("{name} under h→h/2"), anchor, None, f, c.max(REFINEMENT_FLOOR), 0.0)
    };
    rows.push(improve("|D(1) - 1|", D_ONE, fine.d_one, coarse.d_one));
    let worst = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    rows.push(improve("self-adjointness defect", SELF_ADJOINT, worst(&fine.adjoint), worst(&coarse.adjoint)));
    rows.push(improve("positivity violation", POSITIVE, fine.negativity.max(0.0), coarse.negativity.max(0.0)));

    let derr = coarse.d_one;
    let slack_tol = (10.0 * derr).max(1e-6);
    for (i, phi) in s.build.basis.elements().iter().enumerate() {
        let m = surf.abs_mu_sq(phi)?;
        let d = surf.d_abs_mu_sq(phi)?;
        let slack = m
            .values
            .iter()
            .zip(&d.values)
            .map(|(m, d)| 3.0 * d - m)
            .fold(f64::INFINITY, f64::min);
        rows.push(CheckRow::at_least(
            S,
            format!("min over nodes of 3D(|μ|²) - |μ|², element {}", i + 1),
            WOLPERT,
            None,
            slack,
            0.0,
            slack_tol,
        ));
    }
    Ok(rows)
}

/// Plain-FD oracle gap of a plane of a jet.
fn plain_gap(jet: &crate::jets::MetricJet, plane: (usize, usize), closed: f64, steps: FdSteps) -> Result<f64> {
    Ok((sectional_fd(jet, plane, steps)?.coarse - closed).abs())
}

fn mixed_planes(l: usize) -> [(usize, usize); 4] {
    [(0, 2 + 2 * l), (1, 2 + 2 * l), (0, 3 + 2 * l), (1, 3 + 2 * l)]
}

fn curve_point_rows(s: &Session, z0: C64, basis: &BasisSet) -> Result<Vec<CheckRow>> {
    const S: &str = "curve";
    let surf = s.surface();
    let steps = s.config.fd_steps;
    let derr = surf.d_error()?;
    let tol = |est: f64| oracle_tolerance(est, derr).max(s.config.oracle_floor);
    let jet = build_curve_jet(surf, basis, z0)?;
    let labels = jet.labels();
    let mut rows = Vec::new();
    let kf = k_fiber_closed(basis, z0);
    let fd = sectional_fd(&jet, (0, 1), steps)?;
    rows.push(CheckRow::close(S, "K(x,y) vs FD", K_FIBER, Some(z0), fd.value, kf, tol(fd.estimate)));
    let mu = crate::curvature::beltrami_values(basis, z0);
    let mut mixed = Vec::new();
    for l in 0..basis.len() {
        let closed = k_mixed_closed(surf, basis, l, z0)?;
        mixed.push(closed);
        let mut vals = Vec::new();
        let mut est = 0.0f64;
        for (a, b) in mixed_planes(l) {
            let fd = sectional_fd(&jet, (a, b), steps)?;
            let name = format!("K({},{}) vs FD", labels[a], labels[b]);
            rows.push(CheckRow::close(S, name, K_MIXED, Some(z0), fd.value, closed, tol(fd.estimate)));
            vals.push(fd.value);
            est = est.max(fd.estimate);
        }
        let spread = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) - vals.iter().copied().fold(f64::INFINITY, f64::min);
        rows.push(CheckRow::close(
            S,
            format!("four mixed planes agree, l={}", l + 1),
            K_MIXED,
            Some(z0),
            spread,
            0.0,
            (4.0 * est).max(s.config.table_floor),
        ));
        rows.push(CheckRow::at_most(
            S,
            format!("K(x,x{}) + |μ{}|²/6", l + 1, l + 1),
            K_MIXED_BOUND,
            Some(z0),
            closed + mu[l].norm_sqr() / 6.0,
            0.0,
            (10.0 * derr).max(1e-6),
        ));
    }
    for e in christoffel_table_check(&jet, steps)? {
        let tol = e.estimate.max(s.config.table_floor);
        rows.push(CheckRow::close(S, e.name, TABLE, Some(z0), e.oracle, e.closed_form, tol));
    }
    Ok(rows)
}

fn curve_refinement_rows(s: &Session, z0: C64, basis: &BasisSet) -> Result<Vec<CheckRow>> {
    const S: &str = "curve";
    let steps = s.config.fd_steps;
    let r = s.refined()?;
    let fine_basis = basis_for(&r.surface, s.config.normalization, r.basis.as_ref(), z0)?;
    let Some(fine_basis) = fine_basis else {
        return Ok(vec![CheckRow::close(
            S,
            "pointwise-D normalization indefinite on the refined mesh",
            REFINE,
            Some(z0),
            0.0,
            0.0,
            0.0,
        )]);
    };
    let coarse_jet = build_curve_jet(s.surface(), basis, z0)?;
    let fine_jet = build_curve_jet(&r.surface, &fine_basis, z0)?;
    let labels = coarse_jet.labels();
    let mut planes = vec![((0, 1), k_fiber_closed(basis, z0), k_fiber_closed(&fine_basis, z0))];
    for l in 0..basis.len() {
        let c = k_mixed_closed(s.surface(), basis, l, z0)?;
        let f = k_mixed_closed(&r.surface, &fine_basis, l, z0)?;
        for p in mixed_planes(l) {
            planes.push((p, c, f));
        }
    }
    let mut rows = Vec::new();
    for (p, c, f) in planes {
        let gc = plain_gap(&coarse_jet, p, c, steps)?;
        let gf = plain_gap(&fine_jet, p, f, steps.halved())?;
        let name = format!("plain FD gap of K({},{}) under refinement", labels[p.0], labels[p.1]);
        rows.push(CheckRow::at_most(S, name, REFINE, Some(z0), gf, gc.max(FD_GAP_FLOOR), 0.0));
    }
    Ok(rows)
}

fn curve_suite(s: &Session) -> Result<Vec<CheckRow>> {
    const S: &str = "curve";
    let surf = s.surface();
    let per_point: Vec<Vec<CheckRow>> = s
        .points
        .par_iter()
        .map(|&z0| -> Result<Vec<CheckRow>> {
            let Some(basis) = s.basis_at(z0)? else {
                return Ok(vec![CheckRow::close(
                    S,
                    "pointwise-D normalization indefinite; curve checks not applicable",
                    K_FIBER,
                    Some(z0),
                    0.0,
                    0.0,
                    0.0,
                )]);
            };
            let mut rows = curve_point_rows(s, z0, &basis)?;
            rows.extend(curve_refinement_rows(s, z0, &basis)?);
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<CheckRow> = per_point.into_iter().flatten().collect();

    // Upper bound with the pointwise-D basis at each point.
    let mut observed = f64::NEG_INFINITY;
    for &z0 in &s.points {
        match basis_for(surf, NormTag::PointD, None, z0)? {
            Some(b) => {
                let k = k_fiber_closed(&b, z0);
                observed = observed.max(k);
                rows.push(CheckRow::at_most(S, "K(x,y) with pointwise-D basis", BOUND, Some(z0), k, 8.0, 0.0));
            }
            None => rows.push(CheckRow::close(
                S,
                "pointwise-D normalization indefinite; bound not applicable",
                BOUND,
                Some(z0),
                0.0,
                0.0,
                0.0,
            )),
        }
    }
    if observed.is_finite() {
        rows.push(CheckRow::close(
            S,
            "observed max of K(x,y) over the sample points (not certified)",
            SUP_OBSERVED,
            None,
            observed,
            observed,
            0.0,
        ));
    }

    // Sign dichotomy at every node, configured basis.
    let basis = &s.build.basis;
    let mut sum_mu = vec![0.0; surf.mesh.num_classes()];
    let mut max_mixed = f64::NEG_INFINITY;
    for phi in basis.elements() {
        for (a, m) in sum_mu.iter_mut().zip(&surf.abs_mu_sq(&phi)?.values) {
            *a += m;
        }
        max_mixed = max_mixed.max(-0.5 * surf.d_abs_mu_sq(&phi)?.min());
    }
    let min_fiber = -1.0 + sum_mu.iter().copied().fold(f64::INFINITY, f64::min);
    rows.push(CheckRow::at_least(S, "min over nodes of K(x,y)", SIGNS, None, min_fiber, -1.0, 0.0));
    rows.push(CheckRow::at_most(S, "max over nodes of K(x,x_l)", SIGNS, None, max_mixed, 0.0, 1e-8));
    Ok(rows)
}

fn germ_point_rows(s: &Session, z0: C64) -> Result<Vec<CheckRow>> {
    const S: &str = "germ";
    let surf = s.surface();
    let steps = s.config.fd_steps;
    let derr = surf.d_error()?;
    let tol = |est: f64| oracle_tolerance(est, derr).max(s.config.oracle_floor);
    let jet = build_germ_jet(surf, &s.phi0, z0)?;
    let (kf, km) = k_germ_closed(surf, &s.phi0, z0)?;
    let a = sectional_fd(&jet, (0, 1), steps)?;
    let b = sectional_fd(&jet, (0, 2), steps)?;
    let c = sectional_fd(&jet, (1, 2), steps)?;
    let mut rows = vec![
        CheckRow::close(S, "K_H(x,y) vs FD", GERM_FIBER, Some(z0), a.value, kf, tol(a.estimate)),
        CheckRow::close(S, "K_H(x,t) vs FD", GERM_MIXED, Some(z0), b.value, km, tol(b.estimate)),
        CheckRow::close(S, "K_H(y,t) vs FD", GERM_MIXED, Some(z0), c.value, km, tol(c.estimate)),
        CheckRow::close(
            S,
            "K_H(x,t) = K_H(y,t) by FD",
            GERM_MIXED,
            Some(z0),
            b.value,
            c.value,
            (b.estimate + c.estimate).max(s.config.table_floor),
        ),
        CheckRow::at_most(S, "-D(|μ0|²) ≤ 0", GERM_RANGE, Some(z0), km, 0.0, 0.0),
        CheckRow::at_least(
            S,
            "-D(|μ0|²) ≥ -sup|μ0|²",
            GERM_RANGE,
            Some(z0),
            km,
            -surf.abs_mu_sq(&s.phi0)?.max(),
            (10.0 * derr).max(1e-8),
        ),
    ];
    for e in christoffel_table_check(&jet, steps)? {
        let tol = e.estimate.max(s.config.table_floor);
        rows.push(CheckRow::close(S, e.name, TABLE, Some(z0), e.oracle, e.closed_form, tol));
    }
    for lapse in [Lapse::ONE, Lapse::ONE_PLUS_T2, Lapse::EXP] {
        let r = lapse_invariance_check(surf, &s.phi0, z0, lapse, steps)?;
        rows.push(CheckRow::close(
            S,
            format!("K_f(x,y) vs FD, f = {}", lapse.name),
            LAPSE,
            Some(z0),
            r.oracle,
            r.closed_form,
            r.tolerance.max(s.config.oracle_floor),
        ));
    }

    let r = s.refined()?;
    let fine_jet = build_germ_jet(&r.surface, &r.phi0, z0)?;
    let (fkf, fkm) = k_germ_closed(&r.surface, &r.phi0, z0)?;
    for (plane, label, c, f) in [((0, 1), "(x,y)", kf, fkf), ((0, 2), "(x,t)", km, fkm), ((1, 2), "(y,t)", km, fkm)] {
        let gc = plain_gap(&jet, plane, c, steps)?;
        let gf = plain_gap(&fine_jet, plane, f, steps.halved())?;
        rows.push(CheckRow::at_most(
            S,
            format!("plain FD gap of K_H{label} under refinement"),
            REFINE,
            Some(z0),
            gf,
            gc.max(FD_GAP_FLOOR),
            0.0,
        ));
    }
    Ok(rows)
}

fn germ_suite(s: &Session) -> Result<Vec<CheckRow>> {
    s.refined()?;
    let per_point: Vec<Vec<CheckRow>> = s
        .points
        .par_iter()
        .map(|&z0| germ_point_rows(s, z0))
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

/// `count` random unit WP-norm differentials.
pub fn random_unit_differentials(surface: &Surface, seed: u64, count: usize) -> Result<Vec<QuadDifferential>> {
    let wp = surface.orthonormalize_wp(&surface.raw_basis())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let c: Vec<C64> = (0..wp.len())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm: f64 = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        let phi = QuadDifferential {
            bank: wp.bank.clone(),
            coefficients: std::array::from_fn(|k| (0..wp.len()).map(|i| c[i] * wp.recombination[(i, k)]).sum()),
        };
        let n = surface.wp_norm(&phi);
        out.push(phi.scaled(C64::new(1.0 / n, 0.0)));
    }
    Ok(out)
}

fn minimality_suite(s: &Session) -> Result<Vec<CheckRow>> {
    const S: &str = "minimality";
    let surf = s.surface();
    let points = sample_points(&surf.domain, s.config.sample_seed, PROBE_POINTS);
    let phis = random_unit_differentials(surf, s.config.sample_seed.wrapping_add(1), MINIMALITY_DIFFERENTIALS)?;
    let mut rows = Vec::new();
    for (i, phi) in phis.iter().enumerate() {
        let norm = surf.wp_norm(phi);
        rows.push(CheckRow::close(S, format!("‖φ{i}‖_WP"), "unit WP norm", None, norm, 1.0, 1e-12));
        for &z in &points {
            let shape = second_fundamental_form(phi, z);
            let trace = 2.0 * shape.mean_curvature;
            rows.push(CheckRow::close(S, format!("tr(g⁻¹h), φ{i}"), TRACE, Some(z), trace, 0.0, 1e-12));
            let mu = phi.eval(z).norm() / density(z);
            let [k1, k2] = shape.principal_curvatures;
            rows.push(CheckRow::close(S, format!("λ+ vs 2|μ0|, φ{i}"), PRINCIPAL, Some(z), k1, 2.0 * mu, 1e-10));
            rows.push(CheckRow::close(S, format!("λ- vs -2|μ0|, φ{i}"), PRINCIPAL, Some(z), k2, -2.0 * mu, 1e-10));
        }
    }
    Ok(rows)
}

fn bochner_suite(s: &Session) -> Result<Vec<CheckRow>> {
    const S: &str = "bochner";
    let surf = s.surface();
    let phi0 = &s.phi0;
    let four_pi = 4.0 * std::f64::consts::PI;
    let zero = solve_bochner(surf, phi0, 0.0)?;
    let dev = zero.h.values.iter().map(|h| (h - 1.0).abs()).fold(0.0, f64::max);
    let e0 = zero.total_energy(surf);
    let mut rows = vec![
        CheckRow::close(S, "max |H - 1| at t = 0", BOCHNER, None, dev, 0.0, 1e-10),
        CheckRow::close(S, "max L at t = 0", BOCHNER, None, zero.l.max(), 0.0, 1e-10),
        CheckRow::close(S, "E(0)", E0, None, e0, four_pi, AREA_TOL),
    ];
    let ones = SurfaceField::constant(surf.mesh.num_classes(), 1.0);
    rows.push(CheckRow::close(S, "E(0) vs area of e ≡ 1", E0, None, e0, total_energy(surf, &ones), 1e-12));

    for t in [0.05, DEFAULT_T_MAX] {
        let plus = solve_bochner(surf, phi0, t)?;
        let minus = solve_bochner(surf, phi0, -t)?;
        rows.push(CheckRow::close(
            S,
            format!("Newton residual at t = {t}"),
            BOCHNER,
            None,
            plus.residual,
            0.0,
            crate::bochner::NEWTON_TOLERANCE,
        ));
        rows.push(CheckRow::close(S, format!("max |H·L - m| at t = {t}"), HL, None, plus.product_defect(), 0.0, 1e-10));
        rows.push(CheckRow::at_least(S, format!("min J at t = {t}"), JACOBIAN, None, plus.jacobian.min(), 0.0, 0.0));
        let e_minus_j = plus
            .e
            .values
            .iter()
            .zip(&plus.jacobian.values)
            .map(|(e, j)| e - j)
            .fold(f64::INFINITY, f64::min);
        rows.push(CheckRow::at_least(S, format!("min (e - J) at t = {t}"), JACOBIAN, None, e_minus_j, 0.0, 0.0));
        let odd = plus
            .e
            .values
            .iter()
            .zip(&minus.e.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rows.push(CheckRow::close(S, format!("max |e(t) - e(-t)| at t = {t}"), FIRST, None, odd, 0.0, 1e-10));
        rows.push(CheckRow::at_least(
            S,
            format!("max e at t = {t}"),
            BOCHNER,
            None,
            plus.e.max(),
            1.0 + f64::EPSILON,
            0.0,
        ));
        rows.push(CheckRow::at_least(S, format!("E({t}) ≥ E(0)"), E0, None, plus.total_energy(surf), e0, 0.0));
    }

    let step = s.config.t_step;
    let coarse = energy_hessian_check(surf, phi0, step)?;
    rows.push(CheckRow::close(S, "first difference of e", FIRST, None, coarse.first_difference, 0.0, 1e-4));
    rows.push(CheckRow::close(
        S,
        format!("relative gap of second difference, step {step}"),
        SECOND,
        None,
        coarse.second_difference_gap,
        0.0,
        SECOND_DIFFERENCE_TOL,
    ));
    rows.push(CheckRow::at_most(
        S,
        format!("relative gap of second difference, step {}", step / 2.0),
        SECOND,
        None,
        coarse.second_difference_gap_half,
        coarse.second_difference_gap.max(crate::bochner::HALVING_NOISE_FLOOR),
        0.0,
    ));
    rows.push(CheckRow::close(
        S,
        "relative gap of Richardson second difference",
        SECOND,
        None,
        coarse.richardson_gap,
        0.0,
        SECOND_DIFFERENCE_TOL,
    ));
    Ok(rows)
}
