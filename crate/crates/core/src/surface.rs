//! The assembled surface: group, domain, mesh, quadrature, series bank and `D`, with the
//! seed-level products that every basis-dependent quantity is a linear image of.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, Matrix3};

use crate::disk::{density, C64};
use crate::error::{Error, Result};
use crate::fuchsian::{build_genus2_octagon, reduce_to_domain, FuchsianGroup, FundamentalDomain, DEFAULT_ELEMENT_CAP};
use crate::helmholtz::HelmholtzOperator;
use crate::mesh::{mesh_domain, SurfaceField, SurfaceMesh, SurfaceQuadrature};
use crate::qdiff::{
    normalize_pointwise_d_with, orthonormalize_wp_with, BasisSet, QuadDifferential, SeriesBank, NUM_SEEDS,
};

/// `P_kl = Θ_k conj(Θ_l)/gσ²` per class and its image under `D`.
#[derive(Clone, Debug)]
pub struct SeedProducts {
    pub p: Vec<Vec<SurfaceField<C64>>>,
    pub dp: Vec<Vec<SurfaceField<C64>>>,
}

pub struct Surface {
    pub group: FuchsianGroup,
    pub domain: FundamentalDomain,
    pub mesh: SurfaceMesh,
    pub quadrature: SurfaceQuadrature,
    pub bank: Arc<SeriesBank>,
    pub operator: HelmholtzOperator,
    /// Seed values at every mesh node.
    pub node_seeds: Vec<[C64; NUM_SEEDS]>,
    gram: OnceLock<Matrix3<C64>>,
    products: OnceLock<std::result::Result<SeedProducts, String>>,
}

impl Surface {
    pub fn build(h: f64, truncation_length: usize) -> Result<Surface> {
        let (group, domain) = build_genus2_octagon()?;
        let mesh = mesh_domain(&group, &domain, h)?;
        let bank = Arc::new(SeriesBank::new(&group, truncation_length, DEFAULT_ELEMENT_CAP)?);
        Ok(Surface::from_parts(group, domain, mesh, bank))
    }

    pub fn from_parts(
        group: FuchsianGroup,
        domain: FundamentalDomain,
        mesh: SurfaceMesh,
        bank: Arc<SeriesBank>,
    ) -> Surface {
        use rayon::prelude::*;
        let quadrature = SurfaceQuadrature::new(&mesh, &domain);
        let operator = HelmholtzOperator::new(&mesh);
        let node_seeds = mesh.nodes.par_iter().map(|&z| bank.seeds(z)).collect();
        Surface {
            group,
            domain,
            mesh,
            quadrature,
            bank,
            operator,
            node_seeds,
            gram: OnceLock::new(),
            products: OnceLock::new(),
        }
    }

    pub fn raw_basis(&self) -> BasisSet {
        BasisSet::raw(self.bank.clone())
    }

    pub fn seed(&self, k: usize) -> Result<QuadDifferential> {
        QuadDifferential::seed(self.bank.clone(), k)
    }

    /// Seed-level WP Gram matrix.
    pub fn seed_gram(&self) -> &Matrix3<C64> {
        self.gram
            .get_or_init(|| crate::qdiff::seed_gram(&self.bank, &self.quadrature))
    }

    pub fn seed_products(&self) -> Result<&SeedProducts> {
        self.products
            .get_or_init(|| self.compute_products().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Construction(format!("D of the seed products: {e}")))
    }

    fn compute_products(&self) -> Result<SeedProducts> {
        let mut p = vec![vec![SurfaceField::new(Vec::new()); NUM_SEEDS]; NUM_SEEDS];
        let mut dp = p.clone();
        for k in 0..NUM_SEEDS {
            for l in k..NUM_SEEDS {
                let field = self.mesh.class_average(|v| {
                    let s = &self.node_seeds[v];
                    let g = density(self.mesh.nodes[v]);
                    s[k] * s[l].conj() / (g * g)
                });
                let d = if k == l {
                    let re = SurfaceField::new(field.values.iter().map(|c| c.re).collect());
                    let u = self.operator.apply_d(&re)?;
                    SurfaceField::new(u.values.iter().map(|&x| C64::new(x, 0.0)).collect())
                } else {
                    self.operator.apply_d_complex(&field)?
                };
                if k != l {
                    p[l][k] = SurfaceField::new(field.values.iter().map(|c| c.conj()).collect());
                    dp[l][k] = SurfaceField::new(d.values.iter().map(|c| c.conj()).collect());
                }
                p[k][l] = field;
                dp[k][l] = d;
            }
        }
        Ok(SeedProducts { p, dp })
    }

    /// Representative of `z` in the closed fundamental domain.
    pub fn reduce(&self, z: C64) -> Result<C64> {
        reduce_to_domain(&self.group, &self.domain, z).map(|(p, _)| p)
    }

    /// Interpolated value of a complex class field at `z` (reduced into the domain first).
    pub fn interpolate_complex(&self, f: &SurfaceField<C64>, z: C64) -> Result<C64> {
        let p = self.reduce(z)?;
        let re = SurfaceField::new(f.values.iter().map(|c| c.re).collect());
        let im = SurfaceField::new(f.values.iter().map(|c| c.im).collect());
        Ok(C64::new(self.mesh.interpolate(&re, p)?, self.mesh.interpolate(&im, p)?))
    }

    pub fn interpolate(&self, f: &SurfaceField<f64>, z: C64) -> Result<f64> {
        let p = self.reduce(z)?;
        self.mesh.interpolate(f, p)
    }

    /// `D(Θ_k conj(Θ_l)/gσ²)(z)` as a Hermitian matrix.
    pub fn seed_d_products_at(&self, z: C64) -> Result<Matrix3<C64>> {
        let sp = self.seed_products()?;
        let mut m = Matrix3::zeros();
        for k in 0..NUM_SEEDS {
            for l in k..NUM_SEEDS {
                let v = self.interpolate_complex(&sp.dp[k][l], z)?;
                m[(k, l)] = v;
                m[(l, k)] = v.conj();
            }
            m[(k, k)].im = 0.0;
        }
        Ok(m)
    }

    /// `D(φ_α conj(φ_β)/gσ²)(z)` for the basis elements.
    pub fn basis_d_products_at(&self, basis: &BasisSet, z: C64) -> Result<DMatrix<C64>> {
        Ok(basis.transform(&self.seed_d_products_at(z)?))
    }

    pub fn wp_gram(&self, basis: &BasisSet) -> DMatrix<C64> {
        basis.transform(self.seed_gram())
    }

    pub fn wp_norm(&self, phi: &QuadDifferential) -> f64 {
        let c = &phi.coefficients;
        let g = self.seed_gram();
        let mut s = C64::new(0.0, 0.0);
        for k in 0..NUM_SEEDS {
            for l in 0..NUM_SEEDS {
                s += c[k] * g[(k, l)] * c[l].conj();
            }
        }
        s.re.max(0.0).sqrt()
    }

    pub fn orthonormalize_wp(&self, basis: &BasisSet) -> Result<BasisSet> {
        orthonormalize_wp_with(basis, self.seed_gram())
    }

    pub fn normalize_pointwise_d(&self, basis: &BasisSet, z0: C64) -> Result<BasisSet> {
        normalize_pointwise_d_with(basis, &self.seed_d_products_at(z0)?, z0)
    }

    /// `Σ c_k conj(c_l) F_kl` for a seed-level field family.
    fn combine_fields(&self, fields: &[Vec<SurfaceField<C64>>], c: &[C64; NUM_SEEDS]) -> SurfaceField<f64> {
        let n = self.mesh.num_classes();
        let mut out = vec![0.0; n];
        for k in 0..NUM_SEEDS {
            for l in 0..NUM_SEEDS {
                let w = c[k] * c[l].conj();
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, f) in out.iter_mut().zip(&fields[k][l].values) {
                    *o += (w * f).re;
                }
            }
        }
        SurfaceField::new(out)
    }

    /// `|μ|² = |φ|²/gσ²` per class.
    pub fn abs_mu_sq(&self, phi: &QuadDifferential) -> Result<SurfaceField<f64>> {
        Ok(self.combine_fields(&self.seed_products()?.p, &phi.coefficients))
    }

    /// `D(|μ|²)` per class (linear in the seed products, so no new solve).
    pub fn d_abs_mu_sq(&self, phi: &QuadDifferential) -> Result<SurfaceField<f64>> {
        Ok(self.combine_fields(&self.seed_products()?.dp, &phi.coefficients))
    }

    /// `|D(1) − 1|_∞`, the per-mesh discretization-error proxy.
    pub fn d_error(&self) -> Result<f64> {
        self.operator.d_one_error()
    }
}
