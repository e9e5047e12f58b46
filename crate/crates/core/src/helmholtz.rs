//! P1 finite elements for `D = −2(Δσ − 2)⁻¹` on the glued mesh.
//!
//! The weak form of `(Δσ − 2)u = −2f` is `(K + 2M)u = 2Mf`, where `K` is the Euclidean
//! cotangent stiffness matrix (the Dirichlet form is conformally invariant) and `M` is
//! the `gσ`-weighted mass matrix. `M` uses the edge-midpoint rule per triangle, which is
//! exact for the P1 products when the weight is constant on the triangle.

use crate::disk::{density, C64};
use crate::error::{Error, Result};
use crate::mesh::{SurfaceField, SurfaceMesh};

/// Default CG tolerance on the relative residual.
pub const CG_TOLERANCE: f64 = 1e-13;

/// Symmetric sparse matrix on the class graph, rows sorted by column.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with one entry per glued edge plus the diagonal.
    pub fn pattern(mesh: &SurfaceMesh) -> Self {
        let n = mesh.num_classes();
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for (a, b) in mesh.glued_edges() {
            if a != b {
                rows[a].push(b);
                rows[b].push(a);
            }
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        let nnz = cols.len();
        CsrMatrix {
            row_ptr,
            cols,
            vals: vec![0.0; nnz],
        }
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        self.row_ptr[i] + row.binary_search(&j).expect("entry outside sparsity pattern")
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.vals[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).map_or(0.0, |k| self.vals[self.row_ptr[i] + k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec(x, &mut y);
        y
    }

    /// `self + c·other` on the same pattern.
    pub fn plus_scaled(&self, c: f64, other: &CsrMatrix) -> CsrMatrix {
        let mut out = self.clone();
        for (a, b) in out.vals.iter_mut().zip(&other.vals) {
            *a += c * b;
        }
        out
    }
}

/// Cotangent stiffness `K_ij = ∫ ∇φ_i·∇φ_j dA` assembled on classes.
pub fn assemble_stiffness(mesh: &SurfaceMesh) -> CsrMatrix {
    let mut k = CsrMatrix::pattern(mesh);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|v| mesh.nodes[v]);
        let area = mesh.triangle_area(t);
        for e in 0..3 {
            let (i, j, o) = (e, (e + 1) % 3, (e + 2) % 3);
            // Edge (i, j) opposite vertex o: weight cot(θ_o)/2.
            let u = p[i] - p[o];
            let v = p[j] - p[o];
            let cot = (u.re * v.re + u.im * v.im) / (2.0 * area);
            let w = 0.5 * cot;
            let (ci, cj) = (mesh.class_of[tri[i]], mesh.class_of[tri[j]]);
            k.add(ci, cj, -w);
            k.add(cj, ci, -w);
            k.add(ci, ci, w);
            k.add(cj, cj, w);
        }
    }
    k
}

/// Edge midpoints of triangle `t`, ordered as edges (0,1), (1,2), (2,0).
pub fn edge_midpoints(mesh: &SurfaceMesh, t: usize) -> [C64; 3] {
    let p = mesh.triangles[t].map(|v| mesh.nodes[v]);
    [(p[0] + p[1]) * 0.5, (p[1] + p[2]) * 0.5, (p[2] + p[0]) * 0.5]
}

/// Mass matrix `∫ w φ_i φ_j dA` with the edge-midpoint rule. `weight(t, e)` is the weight
/// at the midpoint of edge `e` of triangle `t` (edges ordered as in [`edge_midpoints`]).
pub fn assemble_mass<F: Fn(usize, usize) -> f64>(mesh: &SurfaceMesh, weight: F) -> CsrMatrix {
    let mut m = CsrMatrix::pattern(mesh);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let a3 = mesh.triangle_area(t) / 3.0;
        let w = [weight(t, 0), weight(t, 1), weight(t, 2)];
        let c = tri.map(|v| mesh.class_of[v]);
        for e in 0..3 {
            let (i, j) = (e, (e + 1) % 3);
            // Both endpoints take the value 1/2 at this midpoint.
            let q = 0.25 * a3 * w[e];
            m.add(c[i], c[i], q);
            m.add(c[j], c[j], q);
            m.add(c[i], c[j], q);
            m.add(c[j], c[i], q);
        }
    }
    m
}

/// Hyperbolic-density weights at all edge midpoints.
pub fn density_midpoint_weights(mesh: &SurfaceMesh) -> Vec<[f64; 3]> {
    (0..mesh.triangles.len())
        .map(|t| edge_midpoints(mesh, t).map(density))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from the zero initial guess.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgStats)> {
    let n = a.dim();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            CgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::SolverDivergence {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        if !rel.is_finite() {
            return Err(Error::SolverDivergence {
                iterations: it,
                residual: rel,
            });
        }
        if rel <= tol {
            return Ok((
                x,
                CgStats {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDivergence {
        iterations: max_iter,
        residual: rel,
    })
}

/// Iteration cap `50·sqrt(n)`.
pub fn iteration_cap(n: usize) -> usize {
    (50.0 * (n as f64).sqrt()).ceil() as usize
}

/// Assembled `K`, `M` and `K + 2M` for one mesh.
#[derive(Clone, Debug)]
pub struct HelmholtzOperator {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub system: CsrMatrix,
    pub tolerance: f64,
}

impl HelmholtzOperator {
    pub fn new(mesh: &SurfaceMesh) -> Self {
        let stiffness = assemble_stiffness(mesh);
        let w = density_midpoint_weights(mesh);
        let mass = assemble_mass(mesh, |t, e| w[t][e]);
        let system = stiffness.plus_scaled(2.0, &mass);
        HelmholtzOperator {
            stiffness,
            mass,
            system,
            tolerance: CG_TOLERANCE,
        }
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// `u = D f`, i.e. `(K + 2M)u = 2Mf`.
    pub fn apply_d_stats(&self, f: &SurfaceField<f64>) -> Result<(SurfaceField<f64>, CgStats)> {
        if f.values.len() != self.dim() {
            return Err(Error::Config(format!(
                "field has {} values, mesh has {} classes",
                f.values.len(),
                self.dim()
            )));
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let rhs: Vec<f64> = self.mass.apply(&f.values).iter().map(|v| 2.0 * v).collect();
        let (u, stats) = pcg(&self.system, &rhs, self.tolerance, iteration_cap(self.dim()))?;
        Ok((SurfaceField::new(u), stats))
    }

    pub fn apply_d(&self, f: &SurfaceField<f64>) -> Result<SurfaceField<f64>> {
        self.apply_d_stats(f).map(|(u, _)| u)
    }

    pub fn apply_d_complex(&self, f: &SurfaceField<C64>) -> Result<SurfaceField<C64>> {
        let re = self.apply_d(&SurfaceField::new(f.values.iter().map(|c| c.re).collect()))?;
        let im = self.apply_d(&SurfaceField::new(f.values.iter().map(|c| c.im).collect()))?;
        Ok(SurfaceField::new(
            re.values
                .iter()
                .zip(&im.values)
                .map(|(&a, &b)| C64::new(a, b))
                .collect(),
        ))
    }

    /// `⟨u, v⟩σ = uᵀ M v`.
    pub fn inner(&self, u: &SurfaceField<f64>, v: &SurfaceField<f64>) -> f64 {
        let mv = self.mass.apply(&v.values);
        u.values.iter().zip(&mv).map(|(a, b)| a * b).sum()
    }

    /// `max |D(1) − 1|` over classes.
    pub fn d_one_error(&self) -> Result<f64> {
        let u = self.apply_d(&SurfaceField::constant(self.dim(), 1.0))?;
        Ok(u.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max))
    }

    /// Relative defect `|⟨Df, g⟩ − ⟨f, Dg⟩| / (|⟨Df, g⟩| + |⟨f, Dg⟩|)`.
    pub fn self_adjointness_defect(&self, f: &SurfaceField<f64>, g: &SurfaceField<f64>) -> Result<f64> {
        let a = self.inner(&self.apply_d(f)?, g);
        let b = self.inner(f, &self.apply_d(g)?);
        let scale = a.abs() + b.abs();
        Ok(if scale == 0.0 { 0.0 } else { (a - b).abs() / scale })
    }

    pub fn sup_bound_check(&self, f: &SurfaceField<f64>) -> Result<SupBoundReport> {
        let df = self.apply_d(f)?;
        let eps = SUP_BOUND_SLACK;
        let (min_f, max_f, min_df, max_df) = (f.min(), f.max(), df.min(), df.max());
        Ok(SupBoundReport {
            min_f,
            max_f,
            min_df,
            max_df,
            eps,
            pass: min_df >= min_f - eps && max_df <= max_f + eps,
        })
    }
}

pub const SUP_BOUND_SLACK: f64 = 1e-8;

/// `min f − ε ≤ Df ≤ max f + ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupBoundReport {
    pub min_f: f64,
    pub max_f: f64,
    pub min_df: f64,
    pub max_df: f64,
    pub eps: f64,
    pub pass: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::build_genus2_octagon;
    use crate::mesh::mesh_domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(h: f64) -> (SurfaceMesh, HelmholtzOperator) {
        let (g, d) = build_genus2_octagon().unwrap();
        let m = mesh_domain(&g, &d, h).unwrap();
        let op = HelmholtzOperator::new(&m);
        (m, op)
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let (_, op) = setup(0.1);
        let k1 = op.stiffness.apply(&vec![1.0; op.dim()]);
        assert!(k1.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn mass_total_is_area_of_polygon() {
        let (m, op) = setup(0.1);
        let ones = SurfaceField::constant(op.dim(), 1.0);
        let total = op.inner(&ones, &ones);
        let direct: f64 = (0..m.triangles.len())
            .map(|t| m.triangle_area(t) * edge_midpoints(&m, t).iter().map(|&z| density(z)).sum::<f64>() / 3.0)
            .sum();
        assert!((total - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn d_of_constant() {
        let (_, op) = setup(0.1);
        for c in [1.0, -2.5] {
            let u = op.apply_d(&SurfaceField::constant(op.dim(), c)).unwrap();
            assert!(u.values.iter().all(|v| (v - c).abs() < 1e-8));
        }
    }

    #[test]
    fn rejects_nan() {
        let (_, op) = setup(0.2);
        let mut f = SurfaceField::constant(op.dim(), 1.0);
        f.values[3] = f64::NAN;
        assert!(matches!(op.apply_d(&f), Err(Error::NonFinite)));
    }

    #[test]
    fn self_adjoint_and_positive() {
        let (_, op) = setup(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let f = SurfaceField::new((0..op.dim()).map(|_| rng.random::<f64>()).collect());
            let g = SurfaceField::new((0..op.dim()).map(|_| rng.random::<f64>() - 0.5).collect());
            assert!(op.self_adjointness_defect(&f, &g).unwrap() < 1e-8);
            assert!(op.apply_d(&f).unwrap().min() >= -1e-8);
        }
    }

    #[test]
    fn sup_bounds() {
        let (m, op) = setup(0.1);
        let one = op.sup_bound_check(&SurfaceField::constant(op.dim(), 1.0)).unwrap();
        assert!(one.pass && (one.min_df - 1.0).abs() < 1e-8 && (one.max_df - 1.0).abs() < 1e-8);
        // Bump supported near the center.
        let bump = m.class_average(|v| {
            let r = m.nodes[v].norm();
            if r < 0.3 { 1.0 - r / 0.3 } else { 0.0 }
        });
        let rep = op.sup_bound_check(&bump).unwrap();
        assert!(rep.pass && rep.min_df >= 0.0 && rep.max_df <= rep.max_f, "{rep:?}");
    }

    #[test]
    fn pcg_solves_small_system() {
        let (_, op) = setup(0.3);
        let x: Vec<f64> = (0..op.dim()).map(|i| (i as f64).sin()).collect();
        let b = op.system.apply(&x);
        let (y, stats) = pcg(&op.system, &b, 1e-13, 1000).unwrap();
        assert!(stats.relative_residual <= 1e-13);
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn iteration_cap_reports_divergence() {
        let (_, op) = setup(0.1);
        let b = vec![1.0; op.dim()];
        let b: Vec<f64> = b.iter().enumerate().map(|(i, v)| v * (i as f64).cos()).collect();
        assert!(matches!(pcg(&op.system, &b, 1e-14, 2), Err(Error::SolverDivergence { .. })));
    }
}
