//! Second-order metric families over the fiber coordinates `(x, y)` and deformation
//! parameters, built from the variation formulas of the energy density.
//!
//! The energy density is `e = 1 + Σ M_αβ t^α conj(t^β)` to second order, with
//! `M_αβ = (D + 1)(φ_α conj(φ_β)/gσ²)`. For real coordinates `t^α = x^α + i y^α` this gives
//! the real Hessian
//!
//! ```text
//! e_{x^α x^β} = e_{y^α y^β} = 2 Re M_αβ,   e_{x^α y^β} = 2 Im M_αβ.
//! ```
//!
//! A [`MetricJet`] is localized at a window point `z₀`: the `D` part of `M` is frozen at
//! its value there while gσ, φ and `φ_α conj(φ_β)/gσ²` stay exact in `z`. Curvature at
//! `(z₀, 0)` depends on the metric 2-jet only, and the `z`-variation of `M` enters the
//! metric with a factor `t²`, so it only affects third derivatives.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::disk::{density, C64};
use crate::error::{Error, Result};
use crate::mesh::SurfaceField;
use crate::qdiff::{BasisSet, Normalization, QuadDifferential, SeriesBank, NUM_SEEDS};
use crate::surface::Surface;

/// Allowed deviation of `‖μ₀‖_WP` from 1 for germ jets.
pub const GERM_NORM_TOL: f64 = 1e-4;

/// Real Hessian of `e` from a Hermitian complex one, in the order `x¹, y¹, x², y², …`.
pub fn real_hessian(m: &DMatrix<C64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (a, b) = (i / 2, j / 2);
        let c = m[(a, b)];
        match (i % 2, j % 2) {
            (0, 0) | (1, 1) => 2.0 * c.re,
            (0, 1) => 2.0 * c.im,
            _ => -2.0 * c.im,
        }
    })
}

/// Hessian fields of the energy density over the mesh.
#[derive(Clone, Debug)]
pub struct EnergyJet {
    pub basis: BasisSet,
    /// `(D + 1)(φ_α conj(φ_β)/gσ²)` per class.
    pub complex_hessian: Vec<Vec<SurfaceField<C64>>>,
}

impl EnergyJet {
    pub fn value_at_zero(&self) -> f64 {
        1.0
    }

    pub fn gradient_at_zero(&self) -> Vec<f64> {
        vec![0.0; 2 * self.basis.len()]
    }

    /// Real Hessian entry `(i, j)` (coordinates `x¹, y¹, …`) as a class field.
    pub fn hessian_field(&self, i: usize, j: usize) -> SurfaceField<f64> {
        let (a, b) = (i / 2, j / 2);
        let f = &self.complex_hessian[a][b];
        SurfaceField::new(
            f.values
                .iter()
                .map(|c| match (i % 2, j % 2) {
                    (0, 0) | (1, 1) => 2.0 * c.re,
                    (0, 1) => 2.0 * c.im,
                    _ => -2.0 * c.im,
                })
                .collect(),
        )
    }
}

pub fn build_energy_jet(surface: &Surface, basis: &BasisSet) -> Result<EnergyJet> {
    let sp = surface.seed_products()?;
    let n = basis.len();
    let c = &basis.recombination;
    let classes = surface.mesh.num_classes();
    let mut complex_hessian = vec![vec![SurfaceField::new(Vec::new()); n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut v = vec![C64::new(0.0, 0.0); classes];
            for k in 0..NUM_SEEDS {
                for l in 0..NUM_SEEDS {
                    let w = c[(a, k)] * c[(b, l)].conj();
                    for (o, (p, d)) in v.iter_mut().zip(sp.p[k][l].values.iter().zip(&sp.dp[k][l].values)) {
                        *o += w * (p + d);
                    }
                }
            }
            complex_hessian[a][b] = SurfaceField::new(v);
        }
    }
    // Exact Hermitian symmetry.
    for a in 0..n {
        for b in 0..a {
            complex_hessian[a][b] =
                SurfaceField::new(complex_hessian[b][a].values.iter().map(|c| c.conj()).collect());
        }
        for v in complex_hessian[a][a].values.iter_mut() {
            v.im = 0.0;
        }
    }
    Ok(EnergyJet {
        basis: basis.clone(),
        complex_hessian,
    })
}

/// Lapse function for the modified germ metric `g_ρ + f(t) dt²`.
#[derive(Clone, Copy, Debug)]
pub struct Lapse {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
}

impl Lapse {
    pub const ONE: Lapse = Lapse { name: "1", f: |_| 1.0 };
    pub const ONE_PLUS_T2: Lapse = Lapse { name: "1+t^2", f: |t| 1.0 + t * t };
    pub const EXP: Lapse = Lapse { name: "exp(t)", f: f64::exp };

    /// `f(0) = 1` and `f > 0` on `[−probe, probe]`.
    pub fn validate(&self, probe: f64) -> Result<()> {
        let f0 = (self.f)(0.0);
        if !((f0 - 1.0).abs() <= 1e-12) {
            return Err(Error::InvalidLapse(format!("{}: f(0) = {f0}", self.name)));
        }
        for i in -20..=20 {
            let t = probe * i as f64 / 20.0;
            let v = (self.f)(t);
            if !(v > 0.0) {
                return Err(Error::InvalidLapse(format!("{}: f({t}) = {v}", self.name)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub enum JetKind {
    /// Fiber plus the 2n real Teichmüller directions, parameter block 2·I.
    Curve,
    /// Fiber plus the geodesic parameter `t` along `t·φ₀`.
    Germ,
    Lapse(Lapse),
}

/// Taylor surrogate of a metric family, localized at `window`.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub kind: JetKind,
    pub bank: Arc<SeriesBank>,
    /// Rows: the differentials `φ_α` over the seeds.
    pub recombination: DMatrix<C64>,
    pub normalization: Normalization,
    pub window: C64,
    /// `D(φ_α conj(φ_β)/gσ²)(window)`.
    pub frozen_d: DMatrix<C64>,
}

/// Build the curve jet of a basis at `z0`.
pub fn build_curve_jet(surface: &Surface, basis: &BasisSet, z0: C64) -> Result<MetricJet> {
    Ok(MetricJet {
        kind: JetKind::Curve,
        bank: basis.bank.clone(),
        recombination: basis.recombination.clone(),
        normalization: basis.normalization,
        window: z0,
        frozen_d: surface.basis_d_products_at(basis, z0)?,
    })
}

fn check_unit_norm(surface: &Surface, phi0: &QuadDifferential) -> Result<()> {
    let deviation = (surface.wp_norm(phi0) - 1.0).abs();
    if !(deviation <= GERM_NORM_TOL) {
        return Err(Error::Normalization { deviation });
    }
    Ok(())
}

/// Geodesic germ `g_ρ(t) + dt²` along `t·φ₀`, localized at `z0`.
pub fn build_germ_jet(surface: &Surface, phi0: &QuadDifferential, z0: C64) -> Result<MetricJet> {
    check_unit_norm(surface, phi0)?;
    let basis = BasisSet::from_elements(std::slice::from_ref(phi0))?;
    Ok(MetricJet {
        kind: JetKind::Germ,
        bank: basis.bank.clone(),
        recombination: basis.recombination.clone(),
        normalization: Normalization::WpOrthonormal,
        window: z0,
        frozen_d: surface.basis_d_products_at(&basis, z0)?,
    })
}

pub fn build_lapse_jet(surface: &Surface, phi0: &QuadDifferential, z0: C64, lapse: Lapse) -> Result<MetricJet> {
    lapse.validate(0.5)?;
    let mut jet = build_germ_jet(surface, phi0, z0)?;
    jet.kind = JetKind::Lapse(lapse);
    Ok(jet)
}

impl MetricJet {
    pub fn num_differentials(&self) -> usize {
        self.recombination.nrows()
    }

    pub fn num_params(&self) -> usize {
        match self.kind {
            JetKind::Curve => 2 * self.num_differentials(),
            JetKind::Germ | JetKind::Lapse(_) => 1,
        }
    }

    /// Total dimension: two fiber coordinates plus parameters.
    pub fn dim(&self) -> usize {
        2 + self.num_params()
    }

    /// Coordinate labels in index order.
    pub fn labels(&self) -> Vec<String> {
        let mut l = vec!["x".to_string(), "y".to_string()];
        match self.kind {
            JetKind::Curve => {
                for a in 1..=self.num_differentials() {
                    l.push(format!("x{a}"));
                    l.push(format!("y{a}"));
                }
            }
            _ => l.push("t".into()),
        }
        l
    }

    /// `φ_α(z)` from seed values.
    pub fn differentials(&self, seeds: &[C64; NUM_SEEDS]) -> Vec<C64> {
        (0..self.num_differentials())
            .map(|a| (0..NUM_SEEDS).map(|k| self.recombination[(a, k)] * seeds[k]).sum())
            .collect()
    }

    pub fn metric(&self, z: C64, params: &[f64]) -> Result<DMatrix<f64>> {
        self.metric_with_seeds(z, &self.bank.seeds(z), params)
    }

    /// Metric at `(z, params)` given the seed values at `z`.
    pub fn metric_with_seeds(&self, z: C64, seeds: &[C64; NUM_SEEDS], params: &[f64]) -> Result<DMatrix<f64>> {
        if params.len() != self.num_params() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        if !(z.norm() < 1.0) {
            return Err(Error::Domain(format!("{z}")));
        }
        let g = density(z);
        let phis = self.differentials(seeds);
        let n = phis.len();
        let t: Vec<C64> = match self.kind {
            JetKind::Curve => (0..n).map(|a| C64::new(params[2 * a], params[2 * a + 1])).collect(),
            _ => vec![C64::new(params[0], 0.0)],
        };
        let mut e = 1.0;
        let mut phi_t = C64::new(0.0, 0.0);
        for a in 0..n {
            phi_t += t[a] * phis[a];
            for b in 0..n {
                let m = self.frozen_d[(a, b)] + phis[a] * phis[b].conj() / (g * g);
                e += (m * t[a] * t[b].conj()).re;
            }
        }
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        out[(0, 0)] = g * e + 2.0 * phi_t.re;
        out[(1, 1)] = g * e - 2.0 * phi_t.re;
        out[(0, 1)] = -2.0 * phi_t.im;
        out[(1, 0)] = -2.0 * phi_t.im;
        let det = out[(0, 0)] * out[(1, 1)] - out[(0, 1)] * out[(0, 1)];
        if !(out[(0, 0)] > 0.0 && det > 0.0) {
            return Err(Error::Indefinite(format!(
                "fiber block at {z} with parameters {params:?} has determinant {det:e}"
            )));
        }
        match self.kind {
            JetKind::Curve => {
                for i in 2..dim {
                    out[(i, i)] = 2.0;
                }
            }
            JetKind::Germ => out[(2, 2)] = 1.0,
            JetKind::Lapse(l) => {
                let f = (l.f)(params[0]);
                if !(f > 0.0) {
                    return Err(Error::InvalidLapse(format!("{}: f({}) = {f}", l.name, params[0])));
                }
                out[(2, 2)] = f;
            }
        }
        Ok(out)
    }
}

/// Metric of a jet at `(z, params)`.
pub fn evaluate_metric(jet: &MetricJet, z: C64, params: &[f64]) -> Result<DMatrix<f64>> {
    jet.metric(z, params)
}
