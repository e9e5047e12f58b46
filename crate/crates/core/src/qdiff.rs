//! Holomorphic quadratic differentials as truncated relative Poincaré series.
//!
//! The three seeds are `Θ_k(z) = Σ_{|w| ≤ L} γ_w′(z)² (γ_w z)^k` for `k = 0, 1, 2`. A
//! [`QuadDifferential`] is a complex combination of the seeds over a shared
//! [`SeriesBank`]; a [`BasisSet`] stacks such combinations as the rows of a recombination
//! matrix and records how it was normalized.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::disk::{density, DiskIsometry, C64};
use crate::error::{Error, Result};
use crate::fuchsian::{enumerate_group, FuchsianGroup};
use crate::mesh::SurfaceQuadrature;

pub const NUM_SEEDS: usize = 3;
pub const MAX_SEED_DEGREE: usize = NUM_SEEDS - 1;
pub const DEFAULT_TRUNCATION: usize = 4;
pub const RANK_RATIO_FLOOR: f64 = 1e-8;
/// Samples farther out than this are rejected by residual checks.
pub const SAMPLE_RADIUS_LIMIT: f64 = 0.995;

/// Group elements of word length at most `truncation_length`, in canonical order.
#[derive(Clone, Debug)]
pub struct SeriesBank {
    pub truncation_length: usize,
    pub elements: Vec<DiskIsometry>,
}

impl SeriesBank {
    pub fn new(group: &FuchsianGroup, truncation_length: usize, cap: usize) -> Result<Self> {
        let elements = enumerate_group(group, truncation_length, cap)?
            .into_iter()
            .map(|e| e.map)
            .collect();
        Ok(SeriesBank {
            truncation_length,
            elements,
        })
    }

    /// A bank over an already enumerated element list (e.g. loaded from a cache).
    pub fn from_elements(truncation_length: usize, elements: Vec<DiskIsometry>) -> Self {
        SeriesBank {
            truncation_length,
            elements,
        }
    }

    /// All three seed sums at `z`, accumulated in canonical element order.
    pub fn seeds(&self, z: C64) -> [C64; NUM_SEEDS] {
        let mut s = [C64::new(0.0, 0.0); NUM_SEEDS];
        for g in &self.elements {
            let inv = (g.b.conj() * z + g.a.conj()).inv();
            let d = inv * inv;
            let d2 = d * d;
            let w = (g.a * z + g.b) * inv;
            s[0] += d2;
            s[1] += d2 * w;
            s[2] += d2 * w * w;
        }
        s
    }
}

/// `Σ_k coefficients[k] · Θ_k`.
#[derive(Clone, Debug)]
pub struct QuadDifferential {
    pub bank: Arc<SeriesBank>,
    pub coefficients: [C64; NUM_SEEDS],
}

impl QuadDifferential {
    pub fn seed(bank: Arc<SeriesBank>, k: usize) -> Result<Self> {
        if k > MAX_SEED_DEGREE {
            return Err(Error::Config(format!(
                "seed degree {k} outside 0..={MAX_SEED_DEGREE}"
            )));
        }
        let mut coefficients = [C64::new(0.0, 0.0); NUM_SEEDS];
        coefficients[k] = C64::new(1.0, 0.0);
        Ok(QuadDifferential { bank, coefficients })
    }

    pub fn truncation_length(&self) -> usize {
        self.bank.truncation_length
    }

    /// The seed degree when this is a multiple of a single seed.
    pub fn seed_degree(&self) -> Option<usize> {
        let nonzero: Vec<usize> = (0..NUM_SEEDS)
            .filter(|&k| self.coefficients[k] != C64::new(0.0, 0.0))
            .collect();
        (nonzero.len() == 1).then(|| nonzero[0])
    }

    pub fn scaled(&self, c: C64) -> Self {
        QuadDifferential {
            bank: self.bank.clone(),
            coefficients: self.coefficients.map(|a| a * c),
        }
    }

    #[inline]
    pub fn combine(&self, seeds: &[C64; NUM_SEEDS]) -> C64 {
        self.coefficients
            .iter()
            .zip(seeds)
            .map(|(a, s)| a * s)
            .sum()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.combine(&self.bank.seeds(z))
    }

    pub fn beltrami(&self) -> BeltramiField {
        BeltramiField {
            source: self.clone(),
        }
    }
}

/// `μ = conj(φ)/gσ`.
#[derive(Clone, Debug)]
pub struct BeltramiField {
    pub source: QuadDifferential,
}

impl BeltramiField {
    pub fn eval(&self, z: C64) -> C64 {
        self.source.eval(z).conj() / density(z)
    }
}

/// Seed `k` truncated at word length `truncation_length`.
pub fn poincare_series(
    group: &FuchsianGroup,
    k: usize,
    truncation_length: usize,
    cap: usize,
) -> Result<QuadDifferential> {
    let bank = Arc::new(SeriesBank::new(group, truncation_length, cap)?);
    QuadDifferential::seed(bank, k)
}

/// `max |φ(γz)γ′(z)² − φ(z)| / (1 + |φ(z)|)` over the samples.
pub fn automorphy_residual(phi: &QuadDifferential, gamma: &DiskIsometry, samples: &[C64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &z in samples {
        let w = gamma.map(z);
        if !(z.norm() <= SAMPLE_RADIUS_LIMIT && w.norm() <= SAMPLE_RADIUS_LIMIT) {
            return Err(Error::Domain(format!("{z} (image {w})")));
        }
        let d = gamma.derivative(z);
        let here = phi.eval(z);
        let r = (phi.eval(w) * d * d - here).norm() / (1.0 + here.norm());
        worst = worst.max(r);
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Normalization {
    #[serde(rename = "raw")]
    Raw,
    #[serde(rename = "wp")]
    WpOrthonormal,
    #[serde(rename = "pointD")]
    PointwiseD { re: f64, im: f64 },
}

impl Normalization {
    pub fn tag(&self) -> &'static str {
        match self {
            Normalization::Raw => "raw",
            Normalization::WpOrthonormal => "wp",
            Normalization::PointwiseD { .. } => "pointD",
        }
    }
}

/// Basis elements as rows of `recombination` over the seeds.
#[derive(Clone, Debug)]
pub struct BasisSet {
    pub bank: Arc<SeriesBank>,
    pub recombination: DMatrix<C64>,
    pub normalization: Normalization,
}

impl BasisSet {
    /// The seeds themselves.
    pub fn raw(bank: Arc<SeriesBank>) -> Self {
        BasisSet {
            bank,
            recombination: DMatrix::identity(NUM_SEEDS, NUM_SEEDS),
            normalization: Normalization::Raw,
        }
    }

    pub fn from_elements(elements: &[QuadDifferential]) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::Config("empty basis".into()))?;
        if elements.iter().any(|e| !Arc::ptr_eq(&e.bank, &first.bank)) {
            return Err(Error::Config("basis elements use different series banks".into()));
        }
        let recombination =
            DMatrix::from_fn(elements.len(), NUM_SEEDS, |i, k| elements[i].coefficients[k]);
        Ok(BasisSet {
            bank: first.bank.clone(),
            recombination,
            normalization: Normalization::Raw,
        })
    }

    pub fn len(&self) -> usize {
        self.recombination.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn element(&self, i: usize) -> QuadDifferential {
        QuadDifferential {
            bank: self.bank.clone(),
            coefficients: std::array::from_fn(|k| self.recombination[(i, k)]),
        }
    }

    pub fn elements(&self) -> Vec<QuadDifferential> {
        (0..self.len()).map(|i| self.element(i)).collect()
    }

    /// Values of every element from precomputed seed values.
    pub fn combine(&self, seeds: &[C64; NUM_SEEDS]) -> Vec<C64> {
        (0..self.len())
            .map(|i| (0..NUM_SEEDS).map(|k| self.recombination[(i, k)] * seeds[k]).sum())
            .collect()
    }

    pub fn eval(&self, z: C64) -> Vec<C64> {
        self.combine(&self.bank.seeds(z))
    }

    /// Transform a seed-level sesquilinear matrix `S_kl` (linear in `φ_k`, antilinear in
    /// `φ_l`) to the basis: `C S Cᴴ`.
    pub fn transform(&self, seed_matrix: &Matrix3<C64>) -> DMatrix<C64> {
        let s = DMatrix::from_fn(NUM_SEEDS, NUM_SEEDS, |i, j| seed_matrix[(i, j)]);
        &self.recombination * s * self.recombination.adjoint()
    }

    pub fn descriptor(&self) -> BasisDescriptor {
        BasisDescriptor {
            seed_degrees: (0..NUM_SEEDS).collect(),
            truncation_length: self.bank.truncation_length,
            normalization: self.normalization,
            recombination: (0..self.len())
                .map(|i| {
                    (0..NUM_SEEDS)
                        .map(|k| [self.recombination[(i, k)].re, self.recombination[(i, k)].im])
                        .collect()
                })
                .collect(),
        }
    }
}

/// Reproducibility record of a basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub seed_degrees: Vec<usize>,
    pub truncation_length: usize,
    pub normalization: Normalization,
    /// Rows of `[re, im]` pairs.
    pub recombination: Vec<Vec<[f64; 2]>>,
}

/// `G_kl = ∫ Θ_k conj(Θ_l) / gσ² dAσ` over the domain.
pub fn seed_gram(bank: &SeriesBank, quad: &SurfaceQuadrature) -> Matrix3<C64> {
    use rayon::prelude::*;
    let parts: Vec<Matrix3<C64>> = quad
        .points
        .par_chunks(1024)
        .zip(quad.weights.par_chunks(1024))
        .map(|(pts, ws)| {
            let mut g = Matrix3::zeros();
            for (&z, &w) in pts.iter().zip(ws) {
                let s = bank.seeds(z);
                let f = w / density(z);
                for i in 0..NUM_SEEDS {
                    for j in 0..NUM_SEEDS {
                        g[(i, j)] += s[i] * s[j].conj() * f;
                    }
                }
            }
            g
        })
        .collect();
    let mut g = parts.into_iter().fold(Matrix3::zeros(), |a, b| a + b);
    // Hermitian by construction up to rounding; symmetrize exactly.
    g = (g + g.adjoint()) * C64::new(0.5, 0.0);
    g
}

/// Weil–Petersson Gram matrix of the basis.
pub fn wp_gram(basis: &BasisSet, quad: &SurfaceQuadrature) -> DMatrix<C64> {
    let g = basis.transform(&seed_gram(&basis.bank, quad));
    let (lo, hi) = eigen_range(&g);
    if lo < RANK_RATIO_FLOOR * hi {
        log::warn!("Gram matrix nearly rank-deficient: eigenvalues {lo:e} .. {hi:e}");
    }
    g
}

/// Smallest and largest eigenvalue of a Hermitian matrix.
pub fn eigen_range(m: &DMatrix<C64>) -> (f64, f64) {
    let e = m.clone().symmetric_eigenvalues();
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn check_rank(g: &DMatrix<C64>) -> Result<()> {
    let (lo, hi) = eigen_range(g);
    if !(lo > RANK_RATIO_FLOOR * hi) {
        return Err(Error::RankDeficient {
            ratio: lo / hi,
        });
    }
    Ok(())
}

/// `L⁻¹` for `m = LLᴴ`; `None` unless `m` is positive definite. The complex Cholesky
/// factorization takes square roots of negative pivots silently, so definiteness is
/// checked on the spectrum first.
fn lower_inverse(m: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let (lo, _) = eigen_range(m);
    if !(lo > 0.0) {
        return None;
    }
    let chol = m.clone().cholesky()?;
    chol.l().try_inverse()
}

/// Gram–Schmidt against a seed-level Gram matrix: `C ↦ L⁻¹C` with `C S Cᴴ = LLᴴ`.
pub fn orthonormalize_wp_with(basis: &BasisSet, seed_gram: &Matrix3<C64>) -> Result<BasisSet> {
    let g = basis.transform(seed_gram);
    check_rank(&g)?;
    let linv = lower_inverse(&g).ok_or(Error::RankDeficient { ratio: 0.0 })?;
    Ok(BasisSet {
        bank: basis.bank.clone(),
        recombination: linv * &basis.recombination,
        normalization: Normalization::WpOrthonormal,
    })
}

pub fn orthonormalize_wp(basis: &BasisSet, quad: &SurfaceQuadrature) -> Result<BasisSet> {
    orthonormalize_wp_with(basis, &seed_gram(&basis.bank, quad))
}

/// The matrix `M_αβ = D(μ_α conj(μ_β))(z₀)` of the basis, from the seed-level values
/// `P_kl = D(Θ_k conj(Θ_l)/gσ²)(z₀)`. Since `μ_α conj(μ_β) = conj(φ_α conj(φ_β))/gσ²`,
/// `M = conj(C P Cᴴ)`.
pub fn pointwise_d_matrix(basis: &BasisSet, seed_d_products: &Matrix3<C64>) -> DMatrix<C64> {
    basis.transform(seed_d_products).map(|c| c.conj())
}

/// Whiten the basis so that `D(μ_α conj(μ_β))(z₀) = δ_αβ`: with `M = LLᴴ`, `C ↦ conj(L⁻¹) C`.
pub fn normalize_pointwise_d_with(
    basis: &BasisSet,
    seed_d_products: &Matrix3<C64>,
    z0: C64,
) -> Result<BasisSet> {
    let m = pointwise_d_matrix(basis, seed_d_products);
    let (lo, _) = eigen_range(&m);
    let linv = lower_inverse(&m).ok_or_else(|| {
        Error::Indefinite(format!("D(μ_α conj μ_β)({z0}) has smallest eigenvalue {lo:e}"))
    })?;
    Ok(BasisSet {
        bank: basis.bank.clone(),
        recombination: linv.map(|c| c.conj()) * &basis.recombination,
        normalization: Normalization::PointwiseD { re: z0.re, im: z0.im },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::build_genus2_octagon;

    fn bank(l: usize) -> Arc<SeriesBank> {
        let (g, _) = build_genus2_octagon().unwrap();
        Arc::new(SeriesBank::new(&g, l, 100_000).unwrap())
    }

    #[test]
    fn truncation_zero_is_the_monomial() {
        let b = bank(0);
        let z = C64::new(0.2, 0.0);
        assert_eq!(QuadDifferential::seed(b.clone(), 0).unwrap().eval(z), C64::new(1.0, 0.0));
        assert!((QuadDifferential::seed(b.clone(), 1).unwrap().eval(z) - z).norm() < 1e-15);
        let w = C64::new(-0.3, 0.4);
        assert!((QuadDifferential::seed(b, 2).unwrap().eval(w) - w * w).norm() < 1e-15);
    }

    #[test]
    fn seed_degree_out_of_range() {
        assert!(QuadDifferential::seed(bank(0), 3).is_err());
    }

    #[test]
    fn holomorphic_by_cauchy_riemann() {
        let b = bank(2);
        let h = 1e-5;
        for k in 0..3 {
            let phi = QuadDifferential::seed(b.clone(), k).unwrap();
            for z in [C64::new(0.1, 0.2), C64::new(-0.4, 0.1), C64::new(0.3, -0.5)] {
                let dx = (phi.eval(z + h) - phi.eval(z - h)) / (2.0 * h);
                let dy = (phi.eval(z + C64::new(0.0, h)) - phi.eval(z - C64::new(0.0, h))) / (2.0 * h);
                // ∂φ/∂z̄ = (∂x + i∂y)/2 vanishes.
                let dbar = (dx + C64::new(0.0, 1.0) * dy) * 0.5;
                assert!(dbar.norm() <= 1e-6 * (1.0 + dx.norm()), "{dbar}");
            }
        }
    }

    #[test]
    fn constant_seed_is_not_automorphic() {
        let (g, _) = build_genus2_octagon().unwrap();
        let phi = QuadDifferential::seed(bank(0), 0).unwrap();
        let samples: Vec<C64> = (0..20)
            .map(|i| C64::from_polar(0.5 * (i as f64 + 1.0) / 20.0, 0.7 * i as f64))
            .collect();
        let r = automorphy_residual(&phi, &g.generators[0], &samples).unwrap();
        assert!(r > 0.1, "{r}");
    }

    #[test]
    fn residual_rejects_boundary_samples() {
        let (g, _) = build_genus2_octagon().unwrap();
        let phi = QuadDifferential::seed(bank(0), 0).unwrap();
        assert!(automorphy_residual(&phi, &g.generators[0], &[C64::new(0.999, 0.0)]).is_err());
    }

    #[test]
    fn beltrami_modulus_identity() {
        let phi = QuadDifferential::seed(bank(1), 1).unwrap();
        let mu = phi.beltrami();
        let z = C64::new(0.25, -0.1);
        let lhs = mu.eval(z).norm_sqr();
        let rhs = phi.eval(z).norm_sqr() / density(z).powi(2);
        assert!((lhs - rhs).abs() <= 1e-14 * rhs);
    }

    #[test]
    fn normalization_tags_round_trip() {
        for n in [
            Normalization::Raw,
            Normalization::WpOrthonormal,
            Normalization::PointwiseD { re: 0.1, im: -0.2 },
        ] {
            let s = serde_json::to_string(&n).unwrap();
            assert_eq!(serde_json::from_str::<Normalization>(&s).unwrap(), n);
        }
    }

    #[test]
    fn whitening_small_matrices() {
        let b = bank(0);
        let basis = BasisSet::raw(b);
        let s = Matrix3::new(
            C64::new(2.0, 0.0), C64::new(0.3, 0.4), C64::new(0.0, -0.1),
            C64::new(0.3, -0.4), C64::new(1.5, 0.0), C64::new(0.2, 0.0),
            C64::new(0.0, 0.1), C64::new(0.2, 0.0), C64::new(1.0, 0.0),
        );
        let wp = orthonormalize_wp_with(&basis, &s).unwrap();
        let g = wp.transform(&s);
        assert!((g - DMatrix::identity(3, 3)).norm() < 1e-12);
        let pd = normalize_pointwise_d_with(&basis, &s, C64::new(0.0, 0.0)).unwrap();
        let m = pointwise_d_matrix(&pd, &s);
        assert!((m - DMatrix::identity(3, 3)).norm() < 1e-12);
        let indefinite = Matrix3::from_diagonal(&nalgebra::Vector3::new(
            C64::new(1.0, 0.0),
            C64::new(-1.0, 0.0),
            C64::new(1.0, 0.0),
        ));
        assert!(matches!(
            normalize_pointwise_d_with(&basis, &indefinite, C64::new(0.0, 0.0)),
            Err(Error::Indefinite(_))
        ));
        let degenerate = Matrix3::from_diagonal(&nalgebra::Vector3::new(
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1e-10, 0.0),
        ));
        assert!(matches!(
            orthonormalize_wp_with(&basis, &degenerate),
            Err(Error::RankDeficient { .. })
        ));
    }
}
