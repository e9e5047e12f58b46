//! Poincaré disk primitives: unit-disk isometries and the hyperbolic density.
//!
//! An isometry is stored as the pair `(a, b)` of the matrix
//! `[[a, b], [conj(b), conj(a)]]` acting by `z ↦ (az + b)/(conj(b)z + conj(a))`,
//! normalized so that `|a|² − |b|² = 1`. The representation is projective:
//! `(a, b)` and `(−a, −b)` give the same map.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for treating two isometries as the same group element.
pub const ISOMETRY_DEDUP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskIsometry {
    pub a: C64,
    pub b: C64,
}

impl DiskIsometry {
    pub fn identity() -> Self {
        DiskIsometry {
            a: C64::new(1.0, 0.0),
            b: C64::new(0.0, 0.0),
        }
    }

    /// Rotation `z ↦ e^{iθ} z`.
    pub fn rotation(theta: f64) -> Self {
        DiskIsometry {
            a: C64::from_polar(1.0, 0.5 * theta),
            b: C64::new(0.0, 0.0),
        }
    }

    /// Hyperbolic translation of length `dist` along the real diameter, moving 0 towards +1.
    pub fn real_translation(dist: f64) -> Self {
        DiskIsometry {
            a: C64::new((0.5 * dist).cosh(), 0.0),
            b: C64::new((0.5 * dist).sinh(), 0.0),
        }
    }

    pub fn det(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    /// Rescale to unit determinant and fix the projective sign (`Re a > 0`, ties by `Im a`).
    pub fn normalized(&self) -> Self {
        let s = self.det().sqrt();
        let (mut a, mut b) = (self.a / s, self.b / s);
        if a.re < 0.0 || (a.re == 0.0 && a.im < 0.0) {
            a = -a;
            b = -b;
        }
        DiskIsometry { a, b }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &DiskIsometry) -> Self {
        let a = self.a * other.a + self.b * other.b.conj();
        let b = self.a * other.b + self.b * other.a.conj();
        DiskIsometry { a, b }.normalized()
    }

    pub fn inverse(&self) -> Self {
        DiskIsometry {
            a: self.a.conj(),
            b: -self.b,
        }
        .normalized()
    }

    pub fn trace(&self) -> f64 {
        2.0 * self.a.re
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.trace().abs() > 2.0
    }

    /// Matrix distance modulo the sign ambiguity.
    pub fn distance(&self, other: &DiskIsometry) -> f64 {
        let plus = (self.a - other.a).norm().max((self.b - other.b).norm());
        let minus = (self.a + other.a).norm().max((self.b + other.b).norm());
        plus.min(minus)
    }

    /// Image of `z`; no domain check.
    #[inline]
    pub fn map(&self, z: C64) -> C64 {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    /// Complex derivative `γ'(z) = 1/(conj(b) z + conj(a))²` (unit determinant).
    #[inline]
    pub fn derivative(&self, z: C64) -> C64 {
        let d = self.b.conj() * z + self.a.conj();
        (d * d).inv()
    }

    /// Fixed-point free action check on `|z| < 1`.
    pub fn apply(&self, z: C64) -> Result<C64> {
        if !(z.norm() < 1.0) {
            return Err(Error::Domain(format!("{z}")));
        }
        Ok(self.map(z))
    }
}

/// Free-function form of [`DiskIsometry::apply`].
pub fn apply_isometry(m: &DiskIsometry, z: C64) -> Result<C64> {
    m.apply(z)
}

/// The model density `gσ(z) = 4/(1 − |z|²)²` of the curvature −1 metric on the disk.
#[inline]
pub fn density(z: C64) -> f64 {
    let s = 1.0 - z.norm_sqr();
    4.0 / (s * s)
}

/// Euclidean gradient `((gσ)_x, (gσ)_y)`.
#[inline]
pub fn density_gradient(z: C64) -> (f64, f64) {
    let s = 1.0 - z.norm_sqr();
    let c = 16.0 / (s * s * s);
    (c * z.re, c * z.im)
}

/// Gauss curvature `−Δ₀ log gσ / (2 gσ)` from a five-point central stencil of width `step`.
pub fn gauss_curvature_probe(z: C64, step: f64) -> Result<f64> {
    if !(step > 0.0) || z.norm() + 2.0 * step >= 1.0 {
        return Err(Error::Domain(format!("{z} with stencil {step}")));
    }
    let lg = |w: C64| density(w).ln();
    let dx = C64::new(step, 0.0);
    let dy = C64::new(0.0, step);
    let lap = (lg(z + dx) + lg(z - dx) + lg(z + dy) + lg(z - dy) - 4.0 * lg(z)) / (step * step);
    Ok(-lap / (2.0 * density(z)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_rotation() {
        let z = C64::new(0.3, 0.1);
        assert_eq!(DiskIsometry::identity().apply(z).unwrap(), z);
        let th = 0.7;
        let w = DiskIsometry::rotation(th).apply(z).unwrap();
        assert!((w - C64::from_polar(1.0, th) * z).norm() < 1e-15);
    }

    #[test]
    fn apply_rejects_boundary() {
        assert!(DiskIsometry::identity().apply(C64::new(1.0, 0.0)).is_err());
        assert!(DiskIsometry::identity().apply(C64::new(0.8, 0.7)).is_err());
    }

    #[test]
    fn translation_moves_origin_along_real_axis() {
        let t = DiskIsometry::real_translation(2.0);
        let w = t.map(C64::new(0.0, 0.0));
        assert!((w.re - 1.0f64.tanh()).abs() < 1e-15 && w.im.abs() < 1e-15);
    }

    #[test]
    fn composition_inverse_is_identity() {
        let g = DiskIsometry::rotation(0.4).compose(&DiskIsometry::real_translation(1.3));
        let id = g.compose(&g.inverse());
        assert!(id.distance(&DiskIsometry::identity()) < 1e-12);
        assert!((g.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_is_isometry_invariant() {
        let g = DiskIsometry::rotation(1.1).compose(&DiskIsometry::real_translation(0.9));
        for z in [C64::new(0.1, 0.2), C64::new(-0.4, 0.3), C64::new(0.0, -0.6)] {
            let lhs = density(g.map(z)) * g.derivative(z).norm_sqr();
            assert!((lhs / density(z) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn curvature_probe_is_minus_one() {
        let k = gauss_curvature_probe(C64::new(0.0, 0.0), 1e-3).unwrap();
        assert!((k + 1.0).abs() < 1e-6, "{k}");
        // The leading stencil error at 0.5+0.2i is 1.571e-6 for step 1e-3; a tenth of the
        // step brings it well under 1e-6.
        let z = C64::new(0.5, 0.2);
        let coarse = gauss_curvature_probe(z, 1e-3).unwrap() + 1.0;
        assert!((coarse.abs() - 1.571e-6).abs() < 1e-9, "{coarse}");
        let fine = gauss_curvature_probe(z, 1e-4).unwrap() + 1.0;
        assert!(fine.abs() < 1e-6, "{fine}");
    }

    #[test]
    fn curvature_probe_converges_at_second_order() {
        let z = C64::new(0.5, 0.2);
        let e1 = (gauss_curvature_probe(z, 1e-3).unwrap() + 1.0).abs();
        let e2 = (gauss_curvature_probe(z, 5e-4).unwrap() + 1.0).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn curvature_probe_rejects_stencil_outside_disk() {
        assert!(gauss_curvature_probe(C64::new(0.99, 0.0), 0.01).is_err());
    }
}
