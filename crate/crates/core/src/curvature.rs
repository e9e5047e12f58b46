//! Closed-form curvatures and their finite-difference oracles on metric jets.
//!
//! Christoffel symbols come from central differences of the metric, the Riemann tensor
//! from central differences of those, with
//! `R^l_{ijk} = ∂_i Γ^l_{jk} − ∂_j Γ^l_{ik} + Γ^m_{jk} Γ^l_{im} − Γ^m_{ik} Γ^l_{jm}` and
//! `K(a, b) = g_{la} R^l_{abb} / (g_aa g_bb − g_ab²)`, so the hyperbolic plane has `K = −1`.
//! Every FD quantity is computed at steps `h` and `h/2`; the reported value is the
//! Richardson extrapolation and `|q(h) − q(h/2)|` is the error estimate.

use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::disk::{density, density_gradient, C64};
use crate::error::{Error, Result};
use crate::fuchsian::FundamentalDomain;
use crate::jets::{build_lapse_jet, JetKind, Lapse, MetricJet};
use crate::qdiff::{BasisSet, QuadDifferential, NUM_SEEDS};
use crate::surface::Surface;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdSteps {
    pub fiber: f64,
    pub param: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            fiber: 1e-3,
            param: 1e-2,
        }
    }
}

impl FdSteps {
    pub fn halved(&self) -> Self {
        FdSteps {
            fiber: 0.5 * self.fiber,
            param: 0.5 * self.param,
        }
    }

    fn step(&self, coord: usize) -> f64 {
        if coord < 2 {
            self.fiber
        } else {
            self.param
        }
    }
}

/// A Richardson-extrapolated FD quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdEstimate {
    pub value: f64,
    pub estimate: f64,
    /// Plain value at the base step.
    pub coarse: f64,
    /// Plain value at the halved step.
    pub fine: f64,
}

impl FdEstimate {
    fn from_pair(coarse: f64, fine: f64) -> Self {
        FdEstimate {
            value: (4.0 * fine - coarse) / 3.0,
            estimate: (coarse - fine).abs(),
            coarse,
            fine,
        }
    }
}

/// Metric evaluation around the window point with seed values memoized per `z`.
struct Probe<'a> {
    jet: &'a MetricJet,
    seeds: RefCell<HashMap<(u64, u64), [C64; NUM_SEEDS]>>,
}

impl<'a> Probe<'a> {
    fn new(jet: &'a MetricJet) -> Self {
        Probe {
            jet,
            seeds: RefCell::new(HashMap::new()),
        }
    }

    fn base(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.jet.dim()];
        c[0] = self.jet.window.re;
        c[1] = self.jet.window.im;
        c
    }

    fn metric(&self, c: &[f64]) -> Result<DMatrix<f64>> {
        let z = C64::new(c[0], c[1]);
        let key = (c[0].to_bits(), c[1].to_bits());
        let s = *self
            .seeds
            .borrow_mut()
            .entry(key)
            .or_insert_with(|| self.jet.bank.seeds(z));
        self.jet.metric_with_seeds(z, &s, &c[2..])
    }

    fn shifted(c: &[f64], k: usize, h: f64) -> Vec<f64> {
        let mut d = c.to_vec();
        d[k] += h;
        d
    }

    /// `Γ[l][i][j]` flattened as `l·n² + i·n + j`.
    fn christoffel(&self, c: &[f64], steps: &FdSteps) -> Result<Vec<f64>> {
        let n = self.jet.dim();
        let g = self.metric(c)?;
        let ginv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Indefinite("singular metric".into()))?;
        let mut dg = Vec::with_capacity(n);
        for k in 0..n {
            let h = steps.step(k);
            let plus = self.metric(&Self::shifted(c, k, h))?;
            let minus = self.metric(&Self::shifted(c, k, -h))?;
            dg.push((plus - minus) / (2.0 * h));
        }
        let mut gamma = vec![0.0; n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        s += ginv[(l, m)] * (dg[i][(m, j)] + dg[j][(m, i)] - dg[m][(i, j)]);
                    }
                    gamma[l * n * n + i * n + j] = 0.5 * s;
                    gamma[l * n * n + j * n + i] = 0.5 * s;
                }
            }
        }
        Ok(gamma)
    }

    fn christoffel_derivative(&self, c: &[f64], k: usize, steps: &FdSteps) -> Result<Vec<f64>> {
        let h = steps.step(k);
        let plus = self.christoffel(&Self::shifted(c, k, h), steps)?;
        let minus = self.christoffel(&Self::shifted(c, k, -h), steps)?;
        Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect())
    }

    fn sectional(&self, a: usize, b: usize, steps: &FdSteps) -> Result<f64> {
        let n = self.jet.dim();
        let c = self.base();
        let gam = self.christoffel(&c, steps)?;
        let da = self.christoffel_derivative(&c, a, steps)?;
        let db = self.christoffel_derivative(&c, b, steps)?;
        let idx = |l: usize, i: usize, j: usize| l * n * n + i * n + j;
        let g = self.metric(&c)?;
        let mut r_abba = 0.0;
        for l in 0..n {
            let mut r = da[idx(l, b, b)] - db[idx(l, a, b)];
            for m in 0..n {
                r += gam[idx(m, b, b)] * gam[idx(l, a, m)] - gam[idx(m, a, b)] * gam[idx(l, b, m)];
            }
            r_abba += g[(l, a)] * r;
        }
        Ok(r_abba / (g[(a, a)] * g[(b, b)] - g[(a, b)] * g[(a, b)]))
    }
}

/// FD Christoffel symbols at `(window, 0)` with Richardson estimates.
#[derive(Clone, Debug)]
pub struct ChristoffelTable {
    pub dim: usize,
    pub labels: Vec<String>,
    pub value: Vec<f64>,
    pub estimate: Vec<f64>,
}

impl ChristoffelTable {
    /// `Γ^l_{ij}`.
    pub fn get(&self, l: usize, i: usize, j: usize) -> FdEstimate {
        let k = l * self.dim * self.dim + i * self.dim + j;
        FdEstimate {
            value: self.value[k],
            estimate: self.estimate[k],
            coarse: f64::NAN,
            fine: f64::NAN,
        }
    }

    pub fn max_estimate(&self) -> f64 {
        self.estimate.iter().copied().fold(0.0, f64::max)
    }
}

fn richardson_table(jet: &MetricJet, coarse: Vec<f64>, fine: Vec<f64>) -> ChristoffelTable {
    let (value, estimate) = coarse
        .iter()
        .zip(&fine)
        .map(|(&c, &f)| {
            let e = FdEstimate::from_pair(c, f);
            (e.value, e.estimate)
        })
        .unzip();
    ChristoffelTable {
        dim: jet.dim(),
        labels: jet.labels(),
        value,
        estimate,
    }
}

fn check_tolerance(table: &ChristoffelTable, tolerance: Option<f64>) -> Result<()> {
    if let Some(tol) = tolerance {
        let est = table.max_estimate();
        if est > tol {
            return Err(Error::StepTooLarge {
                estimate: est,
                tolerance: tol,
            });
        }
    }
    Ok(())
}

/// Christoffel symbols at `(window, 0)`. With `tolerance`, fails if any Richardson
/// estimate exceeds it.
pub fn christoffel_fd(jet: &MetricJet, steps: FdSteps, tolerance: Option<f64>) -> Result<ChristoffelTable> {
    let probe = Probe::new(jet);
    let c = probe.base();
    let coarse = probe.christoffel(&c, &steps)?;
    let fine = probe.christoffel(&c, &steps.halved())?;
    let table = richardson_table(jet, coarse, fine);
    check_tolerance(&table, tolerance)?;
    Ok(table)
}

/// `∂_k Γ^l_{ij}` at `(window, 0)`.
pub fn christoffel_derivative_fd(
    jet: &MetricJet,
    k: usize,
    steps: FdSteps,
    tolerance: Option<f64>,
) -> Result<ChristoffelTable> {
    let probe = Probe::new(jet);
    let c = probe.base();
    let coarse = probe.christoffel_derivative(&c, k, &steps)?;
    let fine = probe.christoffel_derivative(&c, k, &steps.halved())?;
    let table = richardson_table(jet, coarse, fine);
    check_tolerance(&table, tolerance)?;
    Ok(table)
}

/// Sectional curvature of the coordinate plane `(a, b)` at `(window, 0)`.
pub fn sectional_fd(jet: &MetricJet, plane: (usize, usize), steps: FdSteps) -> Result<FdEstimate> {
    let (a, b) = plane;
    let n = jet.dim();
    if a == b || a >= n || b >= n {
        return Err(Error::Config(format!("invalid plane ({a}, {b}) in dimension {n}")));
    }
    let probe = Probe::new(jet);
    let coarse = probe.sectional(a, b, &steps)?;
    let fine = probe.sectional(a, b, &steps.halved())?;
    Ok(FdEstimate::from_pair(coarse, fine))
}

/// `−1 + Σ |μ_ℓ|²` from the Beltrami values at `z₀`.
pub fn k_fiber_from_mu(mu: &[C64]) -> f64 {
    -1.0 + mu.iter().map(|m| m.norm_sqr()).sum::<f64>()
}

/// Beltrami values `μ_ℓ(z₀) = conj(φ_ℓ(z₀))/gσ(z₀)` of a basis.
pub fn beltrami_values(basis: &BasisSet, z0: C64) -> Vec<C64> {
    let g = density(z0);
    basis.eval(z0).iter().map(|p| p.conj() / g).collect()
}

pub fn k_fiber_closed(basis: &BasisSet, z0: C64) -> f64 {
    k_fiber_from_mu(&beltrami_values(basis, z0))
}

/// `−½ D(|μ_ℓ|²)(z₀)`.
pub fn k_mixed_closed(surface: &Surface, basis: &BasisSet, l: usize, z0: C64) -> Result<f64> {
    if l >= basis.len() {
        return Err(Error::Config(format!("basis has no element {l}")));
    }
    let d = surface.basis_d_products_at(basis, z0)?;
    Ok(-0.5 * d[(l, l)].re)
}

/// `(−1 + |μ₀|², −D(|μ₀|²))` at `z₀`.
pub fn k_germ_closed(surface: &Surface, phi0: &QuadDifferential, z0: C64) -> Result<(f64, f64)> {
    let deviation = (surface.wp_norm(phi0) - 1.0).abs();
    if !(deviation <= crate::jets::GERM_NORM_TOL) {
        return Err(Error::Normalization { deviation });
    }
    let basis = BasisSet::from_elements(std::slice::from_ref(phi0))?;
    let mu = beltrami_values(&basis, z0);
    let d = surface.basis_d_products_at(&basis, z0)?;
    Ok((k_fiber_from_mu(&mu), -d[(0, 0)].re))
}

/// Second fundamental form of the fiber `t = 0` in the germ and its principal curvatures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShapeReport {
    pub point: [f64; 2],
    pub second_fundamental_form: [[f64; 2]; 2],
    pub principal_curvatures: [f64; 2],
    pub mean_curvature: f64,
}

/// `h = ∂_t g|₀ = [[2Re φ₀, −2Im φ₀], [−2Im φ₀, −2Re φ₀]]` against the fiber metric `gσ·I`.
pub fn second_fundamental_form(phi0: &QuadDifferential, z0: C64) -> ShapeReport {
    shape_from_value(phi0.eval(z0), z0)
}

pub fn shape_from_value(phi: C64, z0: C64) -> ShapeReport {
    let g = density(z0);
    let h = [[2.0 * phi.re, -2.0 * phi.im], [-2.0 * phi.im, -2.0 * phi.re]];
    // Shape operator gσ⁻¹h is symmetric since the fiber metric is conformal.
    let (a, b, d) = (h[0][0] / g, h[0][1] / g, h[1][1] / g);
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    ShapeReport {
        point: [z0.re, z0.im],
        second_fundamental_form: h,
        principal_curvatures: [mean + radius, mean - radius],
        mean_curvature: mean,
    }
}

/// One closed-form versus oracle comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub point: [f64; 2],
    pub plane: String,
    pub closed_form: f64,
    pub oracle: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CurvatureReport {
    pub fn new(z0: C64, plane: impl Into<String>, closed_form: f64, oracle: f64, tolerance: f64) -> Self {
        let gap = (closed_form - oracle).abs();
        CurvatureReport {
            point: [z0.re, z0.im],
            plane: plane.into(),
            closed_form,
            oracle,
            gap,
            tolerance,
            pass: gap <= tolerance,
        }
    }
}

/// `max(1e−2, 10·(FD estimate + D error))`.
pub fn oracle_tolerance(fd_estimate: f64, d_error: f64) -> f64 {
    (10.0 * (fd_estimate + d_error)).max(1e-2)
}

/// Fiber-plane curvature of `g_ρ + f(t)dt²` against `−1 + |μ₀|²`.
pub fn lapse_invariance_check(
    surface: &Surface,
    phi0: &QuadDifferential,
    z0: C64,
    lapse: Lapse,
    steps: FdSteps,
) -> Result<CurvatureReport> {
    let jet = build_lapse_jet(surface, phi0, z0, lapse)?;
    let fd = sectional_fd(&jet, (0, 1), steps)?;
    let (closed, _) = k_germ_closed(surface, phi0, z0)?;
    let tol = oracle_tolerance(fd.estimate, surface.d_error()?);
    Ok(CurvatureReport::new(
        z0,
        format!("(x,y) f={}", lapse.name),
        closed,
        fd.value,
        tol,
    ))
}

pub const SAMPLE_RADIUS: f64 = 0.7;
pub const DEFAULT_SAMPLE_SEED: u64 = 20_240_517;

/// The domain centroid followed by `count − 1` seeded points of the fundamental domain
/// with `|z| ≤ 0.7`.
pub fn sample_points(domain: &FundamentalDomain, seed: u64, count: usize) -> Vec<C64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push(domain.centroid());
    }
    while out.len() < count {
        let z = C64::new(
            rng.random_range(-SAMPLE_RADIUS..SAMPLE_RADIUS),
            rng.random_range(-SAMPLE_RADIUS..SAMPLE_RADIUS),
        );
        if z.norm() <= SAMPLE_RADIUS && domain.contains(z, 0.0) {
            out.push(z);
        }
    }
    out
}

/// A closed-form Christoffel entry with its FD counterpart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableEntry {
    pub point: [f64; 2],
    pub name: String,
    pub closed_form: f64,
    pub oracle: f64,
    pub estimate: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl TableEntry {
    fn new(z0: C64, name: String, closed_form: f64, fd: FdEstimate) -> Self {
        let tolerance = fd.estimate.max(1e-6);
        TableEntry {
            point: [z0.re, z0.im],
            name,
            closed_form,
            oracle: fd.value,
            estimate: fd.estimate,
            tolerance,
            pass: (closed_form - fd.value).abs() <= tolerance,
        }
    }
}

/// Closed-form symbols of the fiber block shared by the curve and germ tables.
fn fiber_entries(z0: C64) -> Vec<(usize, usize, usize, f64)> {
    let g = density(z0);
    let (gx, gy) = density_gradient(z0);
    let (a, b) = (gx / (2.0 * g), gy / (2.0 * g));
    vec![
        (0, 0, 0, a),
        (1, 0, 0, -b),
        (0, 0, 1, b),
        (1, 0, 1, a),
        (0, 1, 1, -a),
        (1, 1, 1, b),
    ]
}

/// Compare every tabulated Christoffel symbol (and the tabulated first derivatives) of
/// a curve or germ jet with its FD value at the jet window.
pub fn christoffel_table_check(jet: &MetricJet, steps: FdSteps) -> Result<Vec<TableEntry>> {
    let z0 = jet.window;
    let g = density(z0);
    let table = christoffel_fd(jet, steps, None)?;
    let labels = jet.labels();
    let name = |l: usize, i: usize, j: usize| format!("Gamma^{}_{{{},{}}}", labels[l], labels[i], labels[j]);
    let dname = |l: usize, i: usize, j: usize, k: usize| {
        format!("d_{} Gamma^{}_{{{},{}}}", labels[k], labels[l], labels[i], labels[j])
    };
    let mut out = Vec::new();
    for (l, i, j, v) in fiber_entries(z0) {
        out.push(TableEntry::new(z0, name(l, i, j), v, table.get(l, i, j)));
    }
    let phis = jet.differentials(&jet.bank.seeds(z0));
    match jet.kind {
        JetKind::Curve => {
            for (ell, phi) in phis.iter().enumerate() {
                let (x, y) = (2 + 2 * ell, 3 + 2 * ell);
                let (re, im) = (phi.re, phi.im);
                let closed = [
                    (x, 0, 0, -re / 2.0),
                    (y, 0, 0, im / 2.0),
                    (x, 0, 1, im / 2.0),
                    (y, 0, 1, re / 2.0),
                    (x, 1, 1, re / 2.0),
                    (y, 1, 1, -im / 2.0),
                    (0, 0, x, re / g),
                    (1, 0, x, -im / g),
                    (x, 0, x, 0.0),
                    (y, 0, x, 0.0),
                    (0, 0, y, -im / g),
                    (1, 0, y, -re / g),
                    (x, 0, y, 0.0),
                    (y, 0, y, 0.0),
                    (0, 1, x, -im / g),
                    (1, 1, x, -re / g),
                    (x, 1, x, 0.0),
                    (y, 1, x, 0.0),
                    (0, 1, y, -re / g),
                    (1, 1, y, im / g),
                    (x, 1, y, 0.0),
                    (y, 1, y, 0.0),
                    (0, x, x, 0.0),
                    (1, x, x, 0.0),
                    (0, x, y, 0.0),
                    (1, x, y, 0.0),
                    (0, y, y, 0.0),
                    (1, y, y, 0.0),
                    (x, x, x, 0.0),
                    (y, x, x, 0.0),
                    (x, x, y, 0.0),
                    (y, x, y, 0.0),
                    (x, y, y, 0.0),
                    (y, y, y, 0.0),
                ];
                for (l, i, j, v) in closed {
                    out.push(TableEntry::new(z0, name(l, i, j), v, table.get(l, i, j)));
                }
                // (D − 1)|μ_ℓ|² for the first and second fiber index, 0 for the cross one.
                let mu2 = phi.norm_sqr() / (g * g);
                let d_minus_one = jet.frozen_d[(ell, ell)].re - mu2;
                for k in [x, y] {
                    let dt = christoffel_derivative_fd(jet, k, steps, None)?;
                    for (l, i, v) in [(0, 0, d_minus_one), (1, 1, d_minus_one), (0, 1, 0.0)] {
                        let fd = dt.get(l, i, k);
                        out.push(TableEntry::new(z0, dname(l, i, k, k), v, fd));
                    }
                }
            }
        }
        JetKind::Germ | JetKind::Lapse(_) => {
            let (re, im) = (phis[0].re, phis[0].im);
            let closed = [
                (2, 0, 0, -re),
                (2, 0, 1, im),
                (2, 1, 1, re),
                (0, 0, 2, re / g),
                (1, 0, 2, -im / g),
                (2, 0, 2, 0.0),
                (0, 1, 2, -im / g),
                (1, 1, 2, -re / g),
                (2, 1, 2, 0.0),
                (0, 2, 2, 0.0),
                (1, 2, 2, 0.0),
                (2, 2, 2, 0.0),
            ];
            for (l, i, j, v) in closed {
                out.push(TableEntry::new(z0, name(l, i, j), v, table.get(l, i, j)));
            }
            let mu2 = phis[0].norm_sqr() / (g * g);
            let dt = christoffel_derivative_fd(jet, 2, steps, None)?;
            out.push(TableEntry::new(
                z0,
                dname(0, 0, 2, 2),
                jet.frozen_d[(0, 0)].re - mu2,
                dt.get(0, 0, 2),
            ));
        }
    }
    Ok(out)
}
