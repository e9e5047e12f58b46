//! Triangulation of the fundamental octagon with side-pairing identification.
//!
//! The octagon is split into eight curved sectors (center, `v_k`, `v_{k+1}`). Ring `i`
//! of `n` holds the points `(i/n)·A_k(j/i)`, where `A_k(s)` is the point of side `k` at
//! hyperbolic-arclength fraction `s`. Ring `n` lies on the boundary arcs, so the node
//! sequences on paired sides are mirror images and glue node-to-node.
//!
//! Degrees of freedom live on gluing classes: a class is a set of nodes identified by the
//! side pairings. Interior nodes are singleton classes.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::disk::C64;
use crate::error::{Error, Result};
use crate::fuchsian::{FuchsianGroup, FundamentalDomain};

pub const MESH_FORMAT_VERSION: u32 = 1;

/// Meshes coarser than this leave fewer than two rings.
pub const MAX_MESH_SIZE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub side: usize,
}

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub h: f64,
    pub vertex_radius: f64,
    pub rings: usize,
    pub nodes: Vec<C64>,
    pub triangles: Vec<[usize; 3]>,
    /// Class index of every node.
    pub class_of: Vec<usize>,
    /// Members of every class, in increasing node order.
    pub classes: Vec<Vec<usize>>,
    pub boundary_edges: Vec<BoundaryEdge>,
    locator: Locator,
}

/// A real or complex scalar per gluing class.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceField<T> {
    pub values: Vec<T>,
}

impl<T: Copy> SurfaceField<T> {
    pub fn new(values: Vec<T>) -> Self {
        SurfaceField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at_node(&self, mesh: &SurfaceMesh, node: usize) -> T {
        self.values[mesh.class_of[node]]
    }
}

impl SurfaceField<f64> {
    pub fn constant(n: usize, c: f64) -> Self {
        SurfaceField { values: vec![c; n] }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn ring_start(i: usize) -> usize {
    if i == 0 {
        0
    } else {
        1 + 4 * i * (i - 1)
    }
}

/// Global index of node `j` of sector `k` on ring `i` (`j = i` is the next sector's `j = 0`).
fn node_index(i: usize, k: usize, j: usize) -> usize {
    if i == 0 {
        return 0;
    }
    let (k, j) = if j == i { ((k + 1) % 8, 0) } else { (k, j) };
    ring_start(i) + k * i + j
}

fn signed_area(a: C64, b: C64, c: C64) -> f64 {
    0.5 * ((b - a).re * (c - a).im - (b - a).im * (c - a).re)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Triangulate the domain with Euclidean mesh size about `h`.
pub fn mesh_domain(group: &FuchsianGroup, domain: &FundamentalDomain, h: f64) -> Result<SurfaceMesh> {
    if !(h > 0.0 && h <= MAX_MESH_SIZE) {
        return Err(Error::Meshing(format!(
            "mesh size {h} outside (0, {MAX_MESH_SIZE}]"
        )));
    }
    let n = ((domain.vertex_radius / h).ceil() as usize).max(2);
    let count = ring_start(n + 1);
    let mut nodes = vec![C64::new(0.0, 0.0); count];
    for i in 1..=n {
        let scale = i as f64 / n as f64;
        for k in 0..8 {
            for j in 0..i {
                nodes[node_index(i, k, j)] = domain.side_point(k, j as f64 / i as f64) * scale;
            }
        }
    }

    let mut triangles = Vec::with_capacity(8 * n * n);
    for i in 1..=n {
        for k in 0..8 {
            for j in 0..i {
                triangles.push([
                    node_index(i - 1, k, j),
                    node_index(i, k, j),
                    node_index(i, k, j + 1),
                ]);
            }
            for j in 1..i {
                triangles.push([
                    node_index(i - 1, k, j - 1),
                    node_index(i, k, j),
                    node_index(i - 1, k, j),
                ]);
            }
        }
    }
    for t in triangles.iter_mut() {
        let a = signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
        if a < 0.0 {
            t.swap(1, 2);
        } else if a == 0.0 {
            return Err(Error::Meshing("degenerate triangle".into()));
        }
    }

    let tol = 1e-6 * h;
    let mut uf = UnionFind((0..count).collect());
    for p in &domain.side_pairings {
        let g = group.generators[p.letter];
        for j in 0..=n {
            let a = node_index(n, p.source, j);
            let b = node_index(n, p.target, n - j);
            let gap = (g.map(nodes[a]) - nodes[b]).norm();
            if !(gap <= tol) {
                return Err(Error::Meshing(format!(
                    "side {} node {j} misses its partner on side {} by {gap:e}",
                    p.source, p.target
                )));
            }
            uf.union(a, b);
        }
    }
    let mut class_id = HashMap::new();
    let mut class_of = vec![0; count];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for v in 0..count {
        let r = uf.find(v);
        let next = class_id.len();
        let c = *class_id.entry(r).or_insert(next);
        if c == classes.len() {
            classes.push(Vec::new());
        }
        classes[c].push(v);
        class_of[v] = c;
    }

    let boundary_edges = (0..8)
        .flat_map(|k| {
            (0..n).map(move |j| BoundaryEdge {
                nodes: [node_index(n, k, j), node_index(n, k, j + 1)],
                side: k,
            })
        })
        .collect();

    let locator = Locator::new(&nodes, &triangles);
    Ok(SurfaceMesh {
        h,
        vertex_radius: domain.vertex_radius,
        rings: n,
        nodes,
        triangles,
        class_of,
        classes,
        boundary_edges,
        locator,
    })
}

impl SurfaceMesh {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    /// Distinct edges after gluing, as sorted class pairs.
    pub fn glued_edges(&self) -> BTreeSet<(usize, usize)> {
        let mut edges = BTreeSet::new();
        for t in &self.triangles {
            for e in 0..3 {
                let a = self.class_of[t[e]];
                let b = self.class_of[t[(e + 1) % 3]];
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges
    }

    /// `V − E + F` of the glued complex.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_classes() as i64 - self.glued_edges().len() as i64 + self.triangles.len() as i64
    }

    pub fn min_angle(&self) -> f64 {
        let mut m = f64::INFINITY;
        for t in &self.triangles {
            let p = [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]];
            for e in 0..3 {
                let u = p[(e + 1) % 3] - p[e];
                let v = p[(e + 2) % 3] - p[e];
                m = m.min((v / u).arg().abs());
            }
        }
        m
    }

    /// Class of the eight octagon vertices.
    pub fn vertex_class(&self) -> usize {
        self.class_of[node_index(self.rings, 0, 0)]
    }

    /// Nodes on the boundary ring, i.e. the octagon sides.
    pub fn is_boundary_node(&self, v: usize) -> bool {
        v >= ring_start(self.rings)
    }

    /// Containing triangle and barycentric coordinates. Points just outside the polygon
    /// (between a boundary chord and its arc) get the nearest triangle, extrapolated.
    pub fn locate(&self, z: C64) -> Option<(usize, [f64; 3])> {
        self.locator.locate(&self.nodes, &self.triangles, z)
    }

    /// Linear interpolation of a real class field at a point of the closed domain.
    pub fn interpolate(&self, field: &SurfaceField<f64>, z: C64) -> Result<f64> {
        let (t, l) = self
            .locate(z)
            .ok_or_else(|| Error::Domain(format!("{z} is not covered by the mesh")))?;
        let tri = self.triangles[t];
        Ok((0..3).map(|i| l[i] * field.at_node(self, tri[i])).sum())
    }

    /// Average a per-node function over each class.
    pub fn class_average<T, F>(&self, f: F) -> SurfaceField<T>
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Div<f64, Output = T>,
        F: Fn(usize) -> T,
    {
        let values = self
            .classes
            .iter()
            .map(|members| {
                let mut acc = f(members[0]);
                for &v in &members[1..] {
                    acc = acc + f(v);
                }
                acc / members.len() as f64
            })
            .collect();
        SurfaceField { values }
    }

    /// Plain-text serialization; see [`SurfaceMesh::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "nodes {} triangles {} classes {}",
            self.nodes.len(),
            self.triangles.len(),
            self.classes.len()
        );
        let _ = writeln!(
            s,
            "version {MESH_FORMAT_VERSION} h {:?} vertex_radius {:?} rings {}",
            self.h, self.vertex_radius, self.rings
        );
        for p in &self.nodes {
            let _ = writeln!(s, "{:?} {:?}", p.re, p.im);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for c in &self.classes {
            let members: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", members.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<SurfaceMesh> {
        let bad = |d: &str| Error::parse("mesh file", d);
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if header.len() != 6 || header[0] != "nodes" || header[2] != "triangles" || header[4] != "classes" {
            return Err(bad("bad header"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| bad(&e.to_string()));
        let float = |s: &str| s.parse::<f64>().map_err(|e| bad(&e.to_string()));
        let (nv, nt, nc) = (num(header[1])?, num(header[3])?, num(header[5])?);
        let meta: Vec<&str> = lines.next().ok_or_else(|| bad("missing metadata"))?.split_whitespace().collect();
        if meta.len() != 8 || meta[0] != "version" || num(meta[1])? != MESH_FORMAT_VERSION as usize {
            return Err(bad("unsupported version line"));
        }
        let (h, vertex_radius, rings) = (float(meta[3])?, float(meta[5])?, num(meta[7])?);
        let mut nodes = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l: Vec<&str> = lines.next().ok_or_else(|| bad("truncated nodes"))?.split_whitespace().collect();
            if l.len() != 2 {
                return Err(bad("node line"));
            }
            nodes.push(C64::new(float(l[0])?, float(l[1])?));
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l: Vec<&str> = lines.next().ok_or_else(|| bad("truncated triangles"))?.split_whitespace().collect();
            if l.len() != 3 {
                return Err(bad("triangle line"));
            }
            let t = [num(l[0])?, num(l[1])?, num(l[2])?];
            if t.iter().any(|&v| v >= nv) {
                return Err(bad("triangle index out of range"));
            }
            triangles.push(t);
        }
        let mut classes = Vec::with_capacity(nc);
        let mut class_of = vec![usize::MAX; nv];
        for c in 0..nc {
            let l = lines.next().ok_or_else(|| bad("truncated classes"))?;
            let members = l.split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
            for &v in &members {
                if v >= nv || class_of[v] != usize::MAX {
                    return Err(bad("class member out of range or repeated"));
                }
                class_of[v] = c;
            }
            classes.push(members);
        }
        if class_of.contains(&usize::MAX) || lines.any(|l| !l.trim().is_empty()) {
            return Err(bad("classes do not partition the nodes"));
        }
        if rings < 2 || nodes.len() != ring_start(rings + 1) {
            return Err(bad("ring count inconsistent with node count"));
        }
        let boundary_edges = (0..8)
            .flat_map(|k| {
                (0..rings).map(move |j| BoundaryEdge {
                    nodes: [node_index(rings, k, j), node_index(rings, k, j + 1)],
                    side: k,
                })
            })
            .collect();
        let locator = Locator::new(&nodes, &triangles);
        Ok(SurfaceMesh {
            h,
            vertex_radius,
            rings,
            nodes,
            triangles,
            class_of,
            classes,
            boundary_edges,
            locator,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<SurfaceMesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SurfaceMesh::from_text(&text)
    }
}

/// Uniform bucket grid over the unit square `[-1, 1]²`.
#[derive(Clone, Debug)]
struct Locator {
    cells: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    fn cell(&self, x: f64) -> usize {
        (((x + 1.0) * 0.5 * self.cells as f64).floor().max(0.0) as usize).min(self.cells - 1)
    }

    fn new(nodes: &[C64], triangles: &[[usize; 3]]) -> Self {
        let cells = ((triangles.len() as f64).sqrt().ceil() as usize).clamp(4, 512);
        let mut loc = Locator {
            cells,
            buckets: vec![Vec::new(); cells * cells],
        };
        for (t, tri) in triangles.iter().enumerate() {
            let p = tri.map(|v| nodes[v]);
            let (x0, x1) = (p.iter().map(|q| q.re).fold(f64::INFINITY, f64::min), p.iter().map(|q| q.re).fold(f64::NEG_INFINITY, f64::max));
            let (y0, y1) = (p.iter().map(|q| q.im).fold(f64::INFINITY, f64::min), p.iter().map(|q| q.im).fold(f64::NEG_INFINITY, f64::max));
            for cx in loc.cell(x0)..=loc.cell(x1) {
                for cy in loc.cell(y0)..=loc.cell(y1) {
                    loc.buckets[cx * cells + cy].push(t);
                }
            }
        }
        loc
    }

    fn locate(&self, nodes: &[C64], triangles: &[[usize; 3]], z: C64) -> Option<(usize, [f64; 3])> {
        if !(z.re.abs() < 1.0 && z.im.abs() < 1.0) {
            return None;
        }
        let (cx, cy) = (self.cell(z.re), self.cell(z.im));
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                let (x, y) = (cx as i64 + dx, cy as i64 + dy);
                if x < 0 || y < 0 || x >= self.cells as i64 || y >= self.cells as i64 {
                    continue;
                }
                for &t in &self.buckets[x as usize * self.cells + y as usize] {
                    let l = barycentric(triangles[t].map(|v| nodes[v]), z);
                    let worst = l[0].min(l[1]).min(l[2]);
                    if best.map_or(true, |(w, _, _)| worst > w) {
                        best = Some((worst, t, l));
                    }
                }
            }
        }
        // Accept points inside a triangle or within a boundary lens (a sliver of width
        // far below one cell).
        best.filter(|(w, _, _)| *w > -0.25).map(|(_, t, l)| (t, l))
    }
}

pub fn barycentric(p: [C64; 3], z: C64) -> [f64; 3] {
    let area = signed_area(p[0], p[1], p[2]);
    let l1 = signed_area(z, p[1], p[2]) / area;
    let l2 = signed_area(p[0], z, p[2]) / area;
    [l1, l2, 1.0 - l1 - l2]
}

/// Degree-5 seven-point rule on the reference triangle: (barycentric point, weight).
const DUNAVANT5: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_3;
    const W1: f64 = 0.132_394_152_788_506_2;
    const W2: f64 = 0.125_939_180_544_827_1;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Gauss–Legendre nodes on [0, 1].
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Quadrature for Euclidean-area integrals over the curved domain. Each point carries the
/// triangle it belongs to and its (possibly extrapolated) barycentric coordinates, so P1
/// fields can be evaluated there.
#[derive(Clone, Debug)]
pub struct SurfaceQuadrature {
    pub points: Vec<C64>,
    pub weights: Vec<f64>,
    pub triangle: Vec<usize>,
    pub bary: Vec<[f64; 3]>,
}

impl SurfaceQuadrature {
    /// Seven-point rule on every straight triangle minus the lens between each boundary
    /// chord and its arc (the arcs bow towards the center, so the polygon overshoots).
    pub fn new(mesh: &SurfaceMesh, domain: &FundamentalDomain) -> Self {
        let mut q = SurfaceQuadrature {
            points: Vec::new(),
            weights: Vec::new(),
            triangle: Vec::new(),
            bary: Vec::new(),
        };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = tri.map(|v| mesh.nodes[v]);
            let area = mesh.triangle_area(t);
            for (l, w) in DUNAVANT5 {
                q.points.push(p[0] * l[0] + p[1] * l[1] + p[2] * l[2]);
                q.weights.push(w * area);
                q.triangle.push(t);
                q.bary.push(l);
            }
        }
        let mut owner = HashMap::new();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                owner.insert((a.min(b), a.max(b)), t);
            }
        }
        for edge in &mesh.boundary_edges {
            let [a, b] = edge.nodes;
            let t = owner[&(a.min(b), a.max(b))];
            let tri = mesh.triangles[t];
            let (p0, p1) = (mesh.nodes[a], mesh.nodes[b]);
            let circle = &domain.sides[edge.side];
            let chord = p1 - p0;
            let len = chord.norm();
            let mut normal = C64::new(-chord.im, chord.re) / len;
            let mid = (p0 + p1) * 0.5;
            let away = mid - circle.center;
            if normal.re * away.re + normal.im * away.im < 0.0 {
                normal = -normal;
            }
            for (s, ws) in GAUSS3 {
                let c = p0 + chord * s;
                let qv = c - circle.center;
                let qn = qv.re * normal.re + qv.im * normal.im;
                let disc = qn * qn + circle.radius * circle.radius - qv.norm_sqr();
                let thickness = (-qn + disc.max(0.0).sqrt()).max(0.0);
                for (tau, wt) in GAUSS3 {
                    let z = c + normal * (tau * thickness);
                    q.points.push(z);
                    q.weights.push(-ws * wt * len * thickness);
                    q.triangle.push(t);
                    q.bary.push(barycentric(tri.map(|v| mesh.nodes[v]), z));
                }
            }
        }
        q
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ w_q f(z_q)` for an analytic integrand.
    pub fn integrate<F: Fn(C64) -> f64>(&self, f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }

    /// Value of a P1 class field at quadrature point `q`.
    pub fn field_at(&self, mesh: &SurfaceMesh, field: &SurfaceField<f64>, q: usize) -> f64 {
        let tri = mesh.triangles[self.triangle[q]];
        let l = self.bary[q];
        (0..3).map(|i| l[i] * field.at_node(mesh, tri[i])).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disk::density;
    use crate::fuchsian::build_genus2_octagon;
    use std::f64::consts::PI;

    fn mesh(h: f64) -> (SurfaceMesh, FundamentalDomain) {
        let (g, d) = build_genus2_octagon().unwrap();
        (mesh_domain(&g, &d, h).unwrap(), d)
    }

    #[test]
    fn euler_characteristic_is_minus_two() {
        for h in [0.3, 0.1, 0.05] {
            assert_eq!(mesh(h).0.euler_characteristic(), -2, "h = {h}");
        }
    }

    #[test]
    fn octagon_vertices_form_one_class() {
        let (m, _) = mesh(0.1);
        let c = m.vertex_class();
        assert_eq!(m.classes[c].len(), 8);
        for k in 0..8 {
            assert_eq!(m.class_of[node_index(m.rings, k, 0)], c);
        }
    }

    #[test]
    fn boundary_classes_are_pairs() {
        let (m, _) = mesh(0.1);
        for (v, &c) in m.class_of.iter().enumerate() {
            let size = m.classes[c].len();
            if !m.is_boundary_node(v) {
                assert_eq!(size, 1);
            } else if c != m.vertex_class() {
                assert_eq!(size, 2);
            }
        }
    }

    #[test]
    fn angles_and_orientation() {
        let (m, _) = mesh(0.05);
        assert!(m.min_angle() >= 15f64.to_radians(), "{}", m.min_angle().to_degrees());
        assert!((0..m.triangles.len()).all(|t| m.triangle_area(t) > 0.0));
    }

    #[test]
    fn node_counts_scale_with_h() {
        let (coarse, _) = mesh(0.1);
        let (fine, _) = mesh(0.05);
        // ceil(r/h) rings: 9 and 17, giving 1 + 4n(n+1) nodes.
        assert_eq!(coarse.nodes.len(), 361);
        assert_eq!(fine.nodes.len(), 1225);
        let ratio = fine.nodes.len() as f64 / coarse.nodes.len() as f64;
        assert!((3.0..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn rejects_out_of_range_h() {
        let (g, d) = build_genus2_octagon().unwrap();
        assert!(mesh_domain(&g, &d, 0.0).is_err());
        assert!(mesh_domain(&g, &d, 0.8).is_err());
    }

    #[test]
    fn quadrature_reproduces_hyperbolic_area() {
        let (m, d) = mesh(0.05);
        let q = SurfaceQuadrature::new(&m, &d);
        let area = q.integrate(density);
        assert!((area - 4.0 * PI).abs() < 1e-3, "{area}");
    }

    #[test]
    fn quadrature_euclidean_area_matches_octagon() {
        // Octagon area = 8 · (sector triangle − circular segment), computed independently.
        let (m, d) = mesh(0.05);
        let q = SurfaceQuadrature::new(&m, &d);
        let area = q.integrate(|_| 1.0);
        let (v0, v1) = (d.vertices[0], d.vertices[1]);
        let tri = 0.5 * (v0.re * v1.im - v0.im * v1.re);
        let rho = d.sides[0].radius;
        let half = ((v1 - v0).norm() / (2.0 * rho)).asin();
        let segment = 0.5 * rho * rho * (2.0 * half - (2.0 * half).sin());
        let exact = 8.0 * (tri - segment);
        assert!((area - exact).abs() < 1e-10, "{area} vs {exact}");
    }

    #[test]
    fn interpolation_is_exact_for_linear_fields() {
        let (m, _) = mesh(0.1);
        // Linear functions are not class-consistent, so check inside one sector only.
        let f: Vec<f64> = m.nodes.iter().map(|p| 2.0 * p.re - p.im + 0.5).collect();
        let z = C64::new(0.21, 0.07);
        let (t, l) = m.locate(z).unwrap();
        let v: f64 = (0..3).map(|i| l[i] * f[m.triangles[t][i]]).sum();
        assert!((v - (2.0 * z.re - z.im + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let (m, _) = mesh(0.2);
        let text = m.to_text();
        assert!(text.starts_with(&format!(
            "nodes {} triangles {} classes {}\n",
            m.nodes.len(),
            m.triangles.len(),
            m.classes.len()
        )));
        let back = SurfaceMesh::from_text(&text).unwrap();
        assert_eq!(back.nodes, m.nodes);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.classes, m.classes);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn malformed_text_is_rejected() {
        let (m, _) = mesh(0.2);
        let text = m.to_text();
        assert!(SurfaceMesh::from_text("").is_err());
        assert!(SurfaceMesh::from_text(&text[..text.len() / 2]).is_err());
        assert!(SurfaceMesh::from_text(&text.replacen("nodes", "vertices", 1)).is_err());
    }
}
