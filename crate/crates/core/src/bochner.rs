//! Harmonic-map energy density along the ray `t·φ₀`, from the scalar Bochner equation
//! `Δσ log H = 2H − 2L − 2` with `L = m/H` and `m = |tφ₀|²/gσ²`.
//!
//! The weak form uses the same stiffness and edge-midpoint mass rule as `D`, so at small `t`
//! the discrete solution satisfies `log H = t² D_h(|μ₀|²) + O(t⁴)` exactly.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::disk::density;
use crate::error::{Error, Result};
use crate::helmholtz::{assemble_mass, density_midpoint_weights, iteration_cap, pcg, CsrMatrix, CG_TOLERANCE};
use crate::mesh::{SurfaceField, SurfaceMesh};
use crate::qdiff::QuadDifferential;
use crate::surface::Surface;

pub const DEFAULT_T_MAX: f64 = 0.2;
pub const NEWTON_TOLERANCE: f64 = 1e-10;
const MAX_NEWTON_STEPS: usize = 60;
const MAX_HALVINGS: usize = 30;
/// Continuation step in `t`.
const CONTINUATION_STEP: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct DensitySolution {
    pub t: f64,
    pub h: SurfaceField<f64>,
    pub l: SurfaceField<f64>,
    pub e: SurfaceField<f64>,
    pub jacobian: SurfaceField<f64>,
    /// `|tφ₀|²/gσ²` per class.
    pub source: SurfaceField<f64>,
    pub newton_steps: usize,
    pub residual: f64,
}

impl DensitySolution {
    fn from_log(t: f64, u: &[f64], source: SurfaceField<f64>, newton_steps: usize, residual: f64) -> Self {
        let h: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        let l: Vec<f64> = h.iter().zip(&source.values).map(|(h, m)| m / h).collect();
        let e = h.iter().zip(&l).map(|(h, l)| h + l).collect();
        let j = h.iter().zip(&l).map(|(h, l)| h - l).collect();
        DensitySolution {
            t,
            h: SurfaceField::new(h),
            l: SurfaceField::new(l),
            e: SurfaceField::new(e),
            jacobian: SurfaceField::new(j),
            source,
            newton_steps,
            residual,
        }
    }

    /// `max |H·L − m|`.
    pub fn product_defect(&self) -> f64 {
        self.h
            .values
            .iter()
            .zip(&self.l.values)
            .zip(&self.source.values)
            .map(|((h, l), m)| (h * l - m).abs())
            .fold(0.0, f64::max)
    }

    /// Total energy `∫ e dAσ`.
    pub fn total_energy(&self, surface: &Surface) -> f64 {
        total_energy(surface, &self.e)
    }

    /// One row per class: `class,x,y,H,L,e,J`.
    pub fn write_csv(&self, mesh: &SurfaceMesh, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        let mut write = || -> std::io::Result<()> {
            writeln!(f, "class,x,y,H,L,e,J")?;
            for (c, nodes) in mesh.classes.iter().enumerate() {
                let z = mesh.nodes[nodes[0]];
                writeln!(
                    f,
                    "{c},{:?},{:?},{:?},{:?},{:?},{:?}",
                    z.re, z.im, self.h.values[c], self.l.values[c], self.e.values[c], self.jacobian.values[c]
                )?;
            }
            f.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

pub fn total_energy(surface: &Surface, e: &SurfaceField<f64>) -> f64 {
    let q = &surface.quadrature;
    (0..q.len())
        .map(|i| q.weights[i] * density(q.points[i]) * q.field_at(&surface.mesh, e, i))
        .sum()
}

/// Discrete Bochner system on a fixed mesh.
struct BochnerSystem<'a> {
    mesh: &'a SurfaceMesh,
    stiffness: &'a CsrMatrix,
    g_mid: Vec<[f64; 3]>,
}

impl BochnerSystem<'_> {
    fn midpoint_values(&self, t: usize, f: &[f64]) -> [f64; 3] {
        let c = self.mesh.triangles[t].map(|v| self.mesh.class_of[v]);
        [
            0.5 * (f[c[0]] + f[c[1]]),
            0.5 * (f[c[1]] + f[c[2]]),
            0.5 * (f[c[2]] + f[c[0]]),
        ]
    }

    /// `F(u) = K u + 2 ∫ gσ (e^u − m e^{−u} − 1) φ_i`.
    fn residual(&self, u: &[f64], m: &[f64]) -> Vec<f64> {
        let mut r = self.stiffness.apply(u);
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let a3 = self.mesh.triangle_area(t) / 3.0;
            let um = self.midpoint_values(t, u);
            let mm = self.midpoint_values(t, m);
            for e in 0..3 {
                let f = um[e].exp() - mm[e] * (-um[e]).exp() - 1.0;
                let q = 2.0 * a3 * self.g_mid[t][e] * f * 0.5;
                r[self.mesh.class_of[tri[e]]] += q;
                r[self.mesh.class_of[tri[(e + 1) % 3]]] += q;
            }
        }
        r
    }

    fn jacobian(&self, u: &[f64], m: &[f64]) -> CsrMatrix {
        let um: Vec<[f64; 3]> = (0..self.mesh.triangles.len()).map(|t| self.midpoint_values(t, u)).collect();
        let mm: Vec<[f64; 3]> = (0..self.mesh.triangles.len()).map(|t| self.midpoint_values(t, m)).collect();
        let w = assemble_mass(self.mesh, |t, e| {
            self.g_mid[t][e] * (um[t][e].exp() + mm[t][e] * (-um[t][e]).exp())
        });
        self.stiffness.plus_scaled(2.0, &w)
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Newton with step halving from `u0` at fixed source `m`.
fn newton(sys: &BochnerSystem, u0: Vec<f64>, m: &[f64], t: f64) -> Result<(Vec<f64>, usize, f64)> {
    let mut u = u0;
    let mut r = sys.residual(&u, m);
    let mut res = sup_norm(&r);
    for step in 0..MAX_NEWTON_STEPS {
        if res <= NEWTON_TOLERANCE {
            return Ok((u, step, res));
        }
        let jac = sys.jacobian(&u, m);
        let (du, _) = pcg(&jac, &r, CG_TOLERANCE, iteration_cap(jac.dim()))
            .map_err(|_| Error::NewtonDivergence { t, residual: res })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, d)| a - lambda * d).collect();
            let tr = sys.residual(&trial, m);
            let tres = sup_norm(&tr);
            if tres.is_finite() && tres < res {
                u = trial;
                r = tr;
                res = tres;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // Stalled at round-off: accept if already close.
            if res <= 10.0 * NEWTON_TOLERANCE {
                return Ok((u, step, res));
            }
            return Err(Error::NewtonDivergence { t, residual: res });
        }
    }
    if res <= NEWTON_TOLERANCE {
        Ok((u, MAX_NEWTON_STEPS, res))
    } else {
        Err(Error::NewtonDivergence { t, residual: res })
    }
}

/// Solve for `H` at `t` with continuation from 0; `|t| ≤ t_max`.
pub fn solve_bochner_with(surface: &Surface, phi0: &QuadDifferential, t: f64, t_max: f64) -> Result<DensitySolution> {
    if !t.is_finite() || t.abs() > t_max {
        return Err(Error::Config(format!("|t| = {} exceeds t_max = {t_max}", t.abs())));
    }
    let mu2 = surface.abs_mu_sq(phi0)?;
    let sys = BochnerSystem {
        mesh: &surface.mesh,
        stiffness: &surface.operator.stiffness,
        g_mid: density_midpoint_weights(&surface.mesh),
    };
    let n = surface.mesh.num_classes();
    let stages = ((t.abs() / CONTINUATION_STEP).ceil() as usize).max(1);
    let mut u = vec![0.0; n];
    let mut total = 0;
    let mut res = 0.0;
    for k in 1..=stages {
        let s = t * k as f64 / stages as f64;
        let m: Vec<f64> = mu2.values.iter().map(|v| s * s * v).collect();
        let (next, steps, r) = newton(&sys, u, &m, s)?;
        u = next;
        total += steps;
        res = r;
    }
    let source = SurfaceField::new(mu2.values.iter().map(|v| t * t * v).collect());
    let sol = DensitySolution::from_log(t, &u, source, total, res);
    if sol.h.values.iter().chain(&sol.e.values).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(sol)
}

pub fn solve_bochner(surface: &Surface, phi0: &QuadDifferential, t: f64) -> Result<DensitySolution> {
    solve_bochner_with(surface, phi0, t, DEFAULT_T_MAX)
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyHessianReport {
    pub t_step: f64,
    /// `max |(e(s) − e(−s))/(2s)|`.
    pub first_difference: f64,
    /// Relative L∞ gap of the second difference at `s` over nodes above the median `|μ₀|²`.
    pub second_difference_gap: f64,
    /// Same at `s/2`.
    pub second_difference_gap_half: f64,
    /// Relative L∞ gap of the Richardson combination of the two.
    pub richardson_gap: f64,
    /// Absolute gap at the excluded classes.
    pub excluded_absolute_gap: f64,
    pub min_jacobian: f64,
    pub pass: bool,
}

pub const FIRST_DIFFERENCE_TOL: f64 = 1e-4;
pub const SECOND_DIFFERENCE_TOL: f64 = 0.05;
/// Agreement under `s → s/2` counts as improved if within this of the coarse gap.
pub const HALVING_NOISE_FLOOR: f64 = 1e-6;

fn second_difference(plus: &DensitySolution, minus: &DensitySolution, s: f64) -> Vec<f64> {
    plus.e
        .values
        .iter()
        .zip(&minus.e.values)
        .map(|(p, m)| (p - 2.0 + m) / (s * s))
        .collect()
}

/// Central differences of `e` at `t = 0` against `(D + 1)(2|μ₀|²)`.
pub fn energy_hessian_check(surface: &Surface, phi0: &QuadDifferential, t_step: f64) -> Result<EnergyHessianReport> {
    if !(t_step > 0.0) || 2.0 * t_step > DEFAULT_T_MAX {
        return Err(Error::Config(format!("tStep {t_step} must lie in (0, {}]", DEFAULT_T_MAX / 2.0)));
    }
    let mu2 = surface.abs_mu_sq(phi0)?;
    let dmu2 = surface.d_abs_mu_sq(phi0)?;
    let closed: Vec<f64> = mu2.values.iter().zip(&dmu2.values).map(|(m, d)| 2.0 * (d + m)).collect();

    let half = 0.5 * t_step;
    let sols = [t_step, -t_step, half, -half]
        .iter()
        .map(|&s| solve_bochner(surface, phi0, s))
        .collect::<Result<Vec<_>>>()?;
    let first = sols[0]
        .e
        .values
        .iter()
        .zip(&sols[1].e.values)
        .map(|(p, m)| ((p - m) / (2.0 * t_step)).abs())
        .fold(0.0, f64::max);
    let d2 = second_difference(&sols[0], &sols[1], t_step);
    let d2_half = second_difference(&sols[2], &sols[3], half);
    let rich: Vec<f64> = d2.iter().zip(&d2_half).map(|(c, f)| (4.0 * f - c) / 3.0).collect();

    let mut sorted = mu2.values.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let mut gaps = [0.0f64; 3];
    let mut excluded = 0.0f64;
    for (i, &c) in closed.iter().enumerate() {
        let vals = [d2[i], d2_half[i], rich[i]];
        if mu2.values[i] > median {
            for (g, v) in gaps.iter_mut().zip(vals) {
                *g = g.max((v - c).abs() / c.abs());
            }
        } else {
            excluded = excluded.max((d2[i] - c).abs());
        }
    }
    let min_jacobian = sols.iter().map(|s| s.jacobian.min()).fold(f64::INFINITY, f64::min);
    let pass = first <= FIRST_DIFFERENCE_TOL
        && gaps[0] <= SECOND_DIFFERENCE_TOL
        && gaps[1] <= gaps[0].max(HALVING_NOISE_FLOOR)
        && min_jacobian > 0.0;
    Ok(EnergyHessianReport {
        t_step,
        first_difference: first,
        second_difference_gap: gaps[0],
        second_difference_gap_half: gaps[1],
        richardson_gap: gaps[2],
        excluded_absolute_gap: excluded,
        min_jacobian,
        pass,
    })
}
