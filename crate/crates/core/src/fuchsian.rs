//! The genus-2 surface as the quotient of the disk by a regular-octagon Fuchsian group.
//!
//! Side `k` of the octagon has its midpoint on the ray at angle `kπ/4` and joins the
//! vertices `v_k` (angle `kπ/4 − π/8`) and `v_{k+1}`. The generators pair sides
//! `a: 2→0`, `b: 1→3`, `c: 6→4`, `d: 5→7`; with these orientations the product
//! `a b a⁻¹ b⁻¹ c d c⁻¹ d⁻¹` is the identity.
//!
//! Words are strings over `abcdABCD` (capitals are inverses). A word `w = l₁l₂…lₙ`
//! denotes the map `l₁ ∘ l₂ ∘ … ∘ lₙ`.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::disk::{DiskIsometry, C64, ISOMETRY_DEDUP_TOL};
use crate::error::{Error, Result};

pub const LETTERS: [char; 8] = ['a', 'b', 'c', 'd', 'A', 'B', 'C', 'D'];
pub const RELATION: &str = "abABcdCD";
pub const DEFAULT_ELEMENT_CAP: usize = 100_000;
const RELATION_TOL: f64 = 1e-9;
const REDUCE_MAX_STEPS: usize = 1000;
const REDUCE_RECOVERY_TOL: f64 = 1e-9;

/// Letter index of the inverse generator.
#[inline]
pub fn inverse_letter(i: usize) -> usize {
    (i + 4) % 8
}

pub fn letter_index(c: char) -> Option<usize> {
    LETTERS.iter().position(|&l| l == c)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FuchsianGroup {
    /// Indexed like [`LETTERS`].
    pub generators: [DiskIsometry; 8],
    pub relation_word: String,
    pub vertex_radius: f64,
}

/// Geodesic side as a circle orthogonal to the unit circle.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SideCircle {
    pub center: C64,
    pub radius: f64,
}

impl SideCircle {
    /// Positive inside the fundamental domain, zero on the side.
    #[inline]
    pub fn clearance(&self, z: C64) -> f64 {
        (z - self.center).norm() - self.radius
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SidePairing {
    pub source: usize,
    pub target: usize,
    /// Generator letter index; the map carries side `source` onto side `target`.
    pub letter: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FundamentalDomain {
    pub vertex_radius: f64,
    pub vertices: [C64; 8],
    pub sides: [SideCircle; 8],
    pub side_pairings: Vec<SidePairing>,
    /// `side_tile[k]` is the letter whose map sends the domain onto the tile across side `k`.
    pub side_tile: [usize; 8],
    /// Hyperbolic distance from the center to each side midpoint.
    pub inradius: f64,
    /// Half the hyperbolic length of a side.
    pub half_side: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub word: String,
    pub map: DiskIsometry,
}

impl FuchsianGroup {
    pub fn generator(&self, letter: usize) -> &DiskIsometry {
        &self.generators[letter]
    }

    pub fn eval_word(&self, word: &str) -> Result<DiskIsometry> {
        let mut m = DiskIsometry::identity();
        for c in word.chars() {
            let i = letter_index(c)
                .ok_or_else(|| Error::parse("group word", format!("unknown letter {c:?}")))?;
            m = m.compose(&self.generators[i]);
        }
        Ok(m)
    }

    /// Distance of the relation word from the identity.
    pub fn relation_residual(&self) -> f64 {
        self.eval_word(&self.relation_word)
            .map(|m| m.distance(&DiskIsometry::identity()))
            .unwrap_or(f64::INFINITY)
    }
}

impl FundamentalDomain {
    pub fn side_midpoint(&self, k: usize) -> C64 {
        let c = self.sides[k].center;
        c * (1.0 - self.sides[k].radius / c.norm())
    }

    /// Point of side `k` at hyperbolic-arclength fraction `s` from `v_k` to `v_{k+1}`.
    pub fn side_point(&self, k: usize, s: f64) -> C64 {
        let along = C64::new(0.0, ((2.0 * s - 1.0) * self.half_side * 0.5).tanh());
        let to_side = DiskIsometry::rotation(side_angle(k))
            .compose(&DiskIsometry::real_translation(self.inradius));
        to_side.map(along)
    }

    /// Interior angle at vertex `v_k` between sides `k−1` and `k`.
    pub fn interior_angle(&self, k: usize) -> f64 {
        let v = self.vertices[k];
        let next = self.vertices[(k + 1) % 8];
        let prev = self.vertices[(k + 7) % 8];
        let tangent = |side: usize, toward: C64| {
            let t = C64::new(0.0, 1.0) * (v - self.sides[side].center);
            let d = toward - v;
            if t.re * d.re + t.im * d.im >= 0.0 {
                t
            } else {
                -t
            }
        };
        let t1 = tangent(k, next);
        let t0 = tangent((k + 7) % 8, prev);
        (t0 / t1).arg().abs()
    }

    /// Closed-domain membership with an absolute clearance tolerance.
    pub fn contains(&self, z: C64, tol: f64) -> bool {
        z.norm() < 1.0 && self.sides.iter().all(|s| s.clearance(z) >= -tol)
    }

    /// Centroid of the octagon (the center of symmetry).
    pub fn centroid(&self) -> C64 {
        C64::new(0.0, 0.0)
    }
}

#[inline]
fn side_angle(k: usize) -> f64 {
    k as f64 * PI / 4.0
}

fn vertex_angle(k: usize) -> f64 {
    side_angle(k) - PI / 8.0
}

/// Side circle through `v_k, v_{k+1}` orthogonal to the unit circle.
fn side_circle(r: f64, k: usize) -> SideCircle {
    let d = (1.0 + r * r) / (2.0 * r * (PI / 8.0).cos());
    SideCircle {
        center: C64::from_polar(d, side_angle(k)),
        radius: (d * d - 1.0).sqrt(),
    }
}

fn octagon_geometry(r: f64) -> ([C64; 8], [SideCircle; 8]) {
    let vertices = std::array::from_fn(|k| C64::from_polar(r, vertex_angle(k)));
    let sides = std::array::from_fn(|k| side_circle(r, k));
    (vertices, sides)
}

fn interior_angle_for_radius(r: f64) -> f64 {
    let (vertices, sides) = octagon_geometry(r);
    let dom = FundamentalDomain {
        vertex_radius: r,
        vertices,
        sides,
        side_pairings: Vec::new(),
        side_tile: [0; 8],
        inradius: 0.0,
        half_side: 0.0,
    };
    dom.interior_angle(0)
}

/// Solve `interior angle(r) = π/4` by bisection; the angle decreases monotonically in `r`.
pub fn solve_vertex_radius() -> f64 {
    let (mut lo, mut hi) = (0.05, 0.999);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if interior_angle_for_radius(mid) > PI / 4.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Map carrying side `source` onto side `target` and the domain onto the tile across `target`.
fn pairing_map(source: usize, target: usize, inradius: f64) -> DiskIsometry {
    DiskIsometry::rotation(side_angle(target))
        .compose(&DiskIsometry::real_translation(2.0 * inradius))
        .compose(&DiskIsometry::rotation(PI - side_angle(source)))
}

/// The regular-octagon genus-2 group and its fundamental domain.
pub fn build_genus2_octagon() -> Result<(FuchsianGroup, FundamentalDomain)> {
    let r = solve_vertex_radius();
    let (vertices, sides) = octagon_geometry(r);
    let vertex_dist = 2.0 * r.atanh();
    let inradius = (vertex_dist.tanh() * (PI / 8.0).cos()).atanh();
    let half_side = (inradius.sinh() * (PI / 8.0).tan()).atanh();

    let pairs = [(2usize, 0usize), (1, 3), (6, 4), (5, 7)];
    let mut generators = [DiskIsometry::identity(); 8];
    let mut side_pairings = Vec::new();
    let mut side_tile = [0usize; 8];
    for (i, &(s, t)) in pairs.iter().enumerate() {
        let g = pairing_map(s, t, inradius);
        generators[i] = g;
        generators[inverse_letter(i)] = g.inverse();
        side_pairings.push(SidePairing {
            source: s,
            target: t,
            letter: i,
        });
        side_tile[t] = i;
        side_tile[s] = inverse_letter(i);
    }
    let group = FuchsianGroup {
        generators,
        relation_word: RELATION.to_string(),
        vertex_radius: r,
    };
    let residual = group.relation_residual();
    if !(residual <= RELATION_TOL) {
        return Err(Error::Construction(format!(
            "relation residual {residual:e} exceeds {RELATION_TOL:e}"
        )));
    }
    let domain = FundamentalDomain {
        vertex_radius: r,
        vertices,
        sides,
        side_pairings,
        side_tile,
        inradius,
        half_side,
    };
    Ok((group, domain))
}

fn quantize(x: f64) -> i64 {
    (x * 1e6).round() as i64
}

/// All group elements of word length at most `max_word_length`, deduplicated, in canonical
/// order (length, then lexicographic in letter index order).
pub fn enumerate_group(
    group: &FuchsianGroup,
    max_word_length: usize,
    cap: usize,
) -> Result<Vec<GroupElement>> {
    let mut out = vec![GroupElement {
        word: String::new(),
        map: DiskIsometry::identity(),
    }];
    let mut last_letter: Vec<Option<usize>> = vec![None];
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let id = DiskIsometry::identity().normalized();
    buckets
        .entry((quantize(id.a.re), quantize(id.a.im)))
        .or_default()
        .push(0);

    let mut frontier = vec![0usize];
    for _len in 1..=max_word_length {
        let mut next = Vec::new();
        for &p in &frontier {
            for (g, gen) in group.generators.iter().enumerate() {
                if last_letter[p] == Some(inverse_letter(g)) {
                    continue;
                }
                let m = out[p].map.compose(gen);
                let (qr, qi) = (quantize(m.a.re), quantize(m.a.im));
                let mut duplicate = false;
                'search: for dr in -1..=1 {
                    for di in -1..=1 {
                        if let Some(ids) = buckets.get(&(qr + dr, qi + di)) {
                            if ids
                                .iter()
                                .any(|&j| out[j].map.distance(&m) < ISOMETRY_DEDUP_TOL)
                            {
                                duplicate = true;
                                break 'search;
                            }
                        }
                    }
                }
                if duplicate {
                    continue;
                }
                if out.len() >= cap {
                    return Err(Error::ResourceLimit {
                        what: format!("group elements up to word length {max_word_length}"),
                        limit: cap,
                    });
                }
                let mut word = out[p].word.clone();
                word.push(LETTERS[g]);
                let idx = out.len();
                out.push(GroupElement { word, map: m });
                last_letter.push(Some(g));
                buckets.entry((qr, qi)).or_default().push(idx);
                next.push(idx);
            }
        }
        frontier = next;
    }
    Ok(out)
}

/// Move `z` into the closed fundamental domain. Returns the reduced point `p` and the word
/// `w` with `w(p) = z`.
pub fn reduce_to_domain(
    group: &FuchsianGroup,
    domain: &FundamentalDomain,
    z: C64,
) -> Result<(C64, String)> {
    if !(z.norm() < 1.0) {
        return Err(Error::Domain(format!("{z}")));
    }
    let mut p = z;
    let mut word = String::new();
    let mut steps = 0;
    while !domain.contains(p, 1e-13) {
        if steps == REDUCE_MAX_STEPS {
            return Err(Error::NonConvergence { iterations: steps });
        }
        steps += 1;
        let mut best: Option<(f64, C64, usize)> = None;
        for (k, side) in domain.sides.iter().enumerate() {
            if side.clearance(p) < 0.0 {
                let letter = domain.side_tile[k];
                let q = group.generators[inverse_letter(letter)].map(p);
                if best.map_or(true, |(n, _, _)| q.norm() < n) {
                    best = Some((q.norm(), q, letter));
                }
            }
        }
        let (_, q, letter) = best.ok_or(Error::NonConvergence { iterations: steps })?;
        if !(q.norm() < p.norm()) {
            return Err(Error::NonConvergence { iterations: steps });
        }
        p = q;
        word.push(LETTERS[letter]);
    }
    let back = group.eval_word(&word)?.map(p);
    if !((back - z).norm() <= REDUCE_RECOVERY_TOL) {
        return Err(Error::NonConvergence { iterations: steps });
    }
    Ok((p, word))
}

/// On-disk form of an enumerated element list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElementRecord {
    #[serde(rename = "a.re")]
    pub a_re: f64,
    #[serde(rename = "a.im")]
    pub a_im: f64,
    #[serde(rename = "b.re")]
    pub b_re: f64,
    #[serde(rename = "b.im")]
    pub b_im: f64,
    pub word: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupCache {
    pub max_word_length: usize,
    pub vertex_radius: f64,
    pub generators: Vec<ElementRecord>,
    pub elements: Vec<ElementRecord>,
}

impl From<&GroupElement> for ElementRecord {
    fn from(e: &GroupElement) -> Self {
        ElementRecord {
            a_re: e.map.a.re,
            a_im: e.map.a.im,
            b_re: e.map.b.re,
            b_im: e.map.b.im,
            word: e.word.clone(),
        }
    }
}

impl From<&ElementRecord> for GroupElement {
    fn from(r: &ElementRecord) -> Self {
        GroupElement {
            word: r.word.clone(),
            map: DiskIsometry {
                a: C64::new(r.a_re, r.a_im),
                b: C64::new(r.b_re, r.b_im),
            },
        }
    }
}

impl GroupCache {
    pub fn new(group: &FuchsianGroup, max_word_length: usize, elements: &[GroupElement]) -> Self {
        let generators = group
            .generators
            .iter()
            .zip(LETTERS)
            .map(|(g, l)| {
                ElementRecord::from(&GroupElement {
                    word: l.to_string(),
                    map: *g,
                })
            })
            .collect();
        GroupCache {
            max_word_length,
            vertex_radius: group.vertex_radius,
            generators,
            elements: elements.iter().map(ElementRecord::from).collect(),
        }
    }

    pub fn elements(&self) -> Vec<GroupElement> {
        self.elements.iter().map(GroupElement::from).collect()
    }
}
