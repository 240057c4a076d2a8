//! Triangular meshes for the SPDE discretization.
//!
//! Points are thinned by a cutoff distance, surrounded by an outer ring
//! offset from their convex hull, Delaunay-triangulated (Bowyer–Watson) and
//! refined by edge-midpoint insertion until no edge is longer than
//! `max_edge`. Geometry predicates are evaluated in `f64` whatever the node
//! scalar type.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Triangulated domain.
///
/// Triangles are stored counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Mesh<T> {
    pub nodes: Vec<[T; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MeshParams<T> {
    pub max_edge: T,
    pub cutoff: T,
    pub extension: T,
    /// Longest edge allowed outside the convex hull of the data; `max_edge`
    /// when absent.
    #[serde(default)]
    pub outer_max_edge: Option<T>,
}

impl<T: Real> MeshParams<T> {
    /// Cutoff at half the median nearest-neighbour distance, an outer ring at
    /// twice the prior range median, and edges no longer than a third of it
    /// inside the data hull (twice that outside).
    pub fn from_data(points: &[[T; 2]], range_median: T) -> Self {
        let nn = nearest_neighbour_distances(points);
        let cutoff = if nn.is_empty() {
            T::zero()
        } else {
            T::lit(0.5 * median(&nn))
        };
        Self {
            max_edge: range_median / T::lit(3.0),
            cutoff,
            extension: range_median * T::lit(2.0),
            outer_max_edge: Some(range_median * T::lit(2.0 / 3.0)),
        }
    }
}

fn nearest_neighbour_distances<T: Real>(points: &[[T; 2]]) -> Vec<f64> {
    let p: Vec<[f64; 2]> = points.iter().map(|q| [q[0].as_f64(), q[1].as_f64()]).collect();
    (0..p.len())
        .filter_map(|i| {
            (0..p.len())
                .filter(|&j| j != i)
                .map(|j| dist(p[i], p[j]))
                .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))))
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[inline]
fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Twice the signed area of `abc`; positive when counter-clockwise.
#[inline]
pub(crate) fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive when `d` lies inside the circumcircle of counter-clockwise `abc`.
fn incircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

/// Counter-clockwise convex hull (Andrew's monotone chain), collinear points removed.
pub(crate) fn convex_hull(points: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    if idx.len() < 3 {
        return idx;
    }
    let turn = |hull: &[usize], i: usize| {
        let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
        orient(points[a], points[b], points[i]) > 0.0
    };
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for &i in &idx {
        while hull.len() >= 2 && !turn(&hull, i) {
            hull.pop();
        }
        hull.push(i);
    }
    // The upper chain must not pop into the lower one.
    let floor = hull.len() + 1;
    for &i in idx.iter().rev().skip(1) {
        while hull.len() >= floor && !turn(&hull, i) {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    hull
}

struct Delaunay {
    pts: Vec<[f64; 2]>,
    tris: Vec<[usize; 3]>,
    alive: Vec<bool>,
    edges: HashMap<(usize, usize), usize>,
    visit: Vec<usize>,
    visit_stamp: usize,
    last: usize,
}

impl Delaunay {
    fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
        let r = 100.0 * span;
        let ang = |deg: f64| {
            let t = deg.to_radians();
            [c[0] + r * t.cos(), c[1] + r * t.sin()]
        };
        let mut d = Self {
            pts: vec![ang(90.0), ang(210.0), ang(330.0)],
            tris: Vec::new(),
            alive: Vec::new(),
            edges: HashMap::new(),
            visit: Vec::new(),
            visit_stamp: 0,
            last: 0,
        };
        d.add_triangle([0, 1, 2]);
        d
    }

    fn add_triangle(&mut self, t: [usize; 3]) -> usize {
        let id = self.tris.len();
        self.tris.push(t);
        self.alive.push(true);
        self.visit.push(0);
        for k in 0..3 {
            self.edges.insert((t[k], t[(k + 1) % 3]), id);
        }
        id
    }

    fn kill(&mut self, id: usize) {
        self.alive[id] = false;
        let t = self.tris[id];
        for k in 0..3 {
            let e = (t[k], t[(k + 1) % 3]);
            if self.edges.get(&e) == Some(&id) {
                self.edges.remove(&e);
            }
        }
    }

    /// `p` strictly right of `a → b`, beyond rounding. Points on an edge
    /// (such as inserted midpoints) count as inside both neighbours.
    fn outside(&self, a: usize, b: usize, p: [f64; 2]) -> bool {
        let (pa, pb) = (self.pts[a], self.pts[b]);
        let scale = (pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2) + (p[0] - pa[0]).powi(2) + (p[1] - pa[1]).powi(2);
        orient(pa, pb, p) < -1e-12 * scale
    }

    fn contains(&self, id: usize, p: [f64; 2]) -> bool {
        let t = self.tris[id];
        (0..3).all(|k| !self.outside(t[k], t[(k + 1) % 3], p))
    }

    fn locate(&self, p: [f64; 2], hint: usize) -> Option<usize> {
        let mut cur = if self.alive.get(hint).copied().unwrap_or(false) {
            hint
        } else {
            self.alive.iter().rposition(|&a| a)?
        };
        for _ in 0..4 * self.tris.len().max(16) {
            let t = self.tris[cur];
            let mut moved = false;
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if self.outside(a, b, p) {
                    if let Some(&n) = self.edges.get(&(b, a)) {
                        cur = n;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                return self.contains(cur, p).then_some(cur);
            }
        }
        (0..self.tris.len()).find(|&i| self.alive[i] && self.contains(i, p))
    }

    /// Inserts point `p`; returns false when it coincides with an existing vertex.
    fn insert(&mut self, p: [f64; 2], hint: usize) -> Result<bool> {
        let start = self
            .locate(p, hint)
            .ok_or_else(|| Error::Geometry(format!("point ({}, {}) outside the triangulation", p[0], p[1])))?;
        if self.tris[start].iter().any(|&v| self.pts[v] == p) {
            return Ok(false);
        }
        let pi = self.pts.len();
        self.pts.push(p);

        self.visit_stamp += 1;
        let stamp = self.visit_stamp;
        let mut cavity = vec![start];
        self.visit[start] = stamp;
        let mut head = 0;
        while head < cavity.len() {
            let t = self.tris[cavity[head]];
            head += 1;
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if let Some(&n) = self.edges.get(&(b, a)) {
                    if self.visit[n] != stamp {
                        let u = self.tris[n];
                        if incircle(self.pts[u[0]], self.pts[u[1]], self.pts[u[2]], p) > 0.0 {
                            self.visit[n] = stamp;
                            cavity.push(n);
                        }
                    }
                }
            }
        }
        let mut rim = Vec::new();
        for &c in &cavity {
            let t = self.tris[c];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let twin_in_cavity = self
                    .edges
                    .get(&(b, a))
                    .is_some_and(|&n| self.visit[n] == stamp);
                if !twin_in_cavity {
                    rim.push((a, b));
                }
            }
        }
        for &c in &cavity {
            self.kill(c);
        }
        for (a, b) in rim {
            if orient(self.pts[a], self.pts[b], p) <= 0.0 {
                return Err(Error::Geometry(format!(
                    "degenerate triangle while inserting ({}, {})",
                    p[0], p[1]
                )));
            }
            self.last = self.add_triangle([a, b, pi]);
        }
        Ok(true)
    }

    /// Edges between real (non-super) vertices longer than allowed, longest
    /// first. `limit` gives the allowed length at an edge midpoint.
    fn long_edges(&self, limit: impl Fn([f64; 2]) -> f64) -> Vec<(usize, usize)> {
        let mut out: Vec<(f64, usize, usize)> = Vec::new();
        for (id, t) in self.tris.iter().enumerate() {
            if !self.alive[id] {
                continue;
            }
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if a < 3 || b < 3 || a > b && self.edges.contains_key(&(b, a)) {
                    continue;
                }
                let (pa, pb) = (self.pts[a], self.pts[b]);
                let len = dist(pa, pb);
                if len > limit([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0]) {
                    out.push((len, a.min(b), a.max(b)));
                }
            }
        }
        out.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        out.into_iter().map(|(_, a, b)| (a, b)).collect()
    }
}

const MAX_NODES: usize = 250_000;

/// Builds a refined Delaunay mesh around `points`.
pub fn build_mesh<T: Real>(points: &[[T; 2]], params: &MeshParams<T>) -> Result<Mesh<T>> {
    let max_edge = params.max_edge.as_f64();
    let cutoff = params.cutoff.as_f64();
    let extension = params.extension.as_f64();
    let outer_edge = params.outer_max_edge.map_or(max_edge, |v| v.as_f64());
    if !(max_edge > 0.0) || cutoff < 0.0 || extension < 0.0 || !(outer_edge >= max_edge) {
        return Err(Error::Parameter(
            "mesh needs max_edge > 0, cutoff >= 0, extension >= 0, outer_max_edge >= max_edge".into(),
        ));
    }
    let raw: Vec<[f64; 2]> = points
        .iter()
        .map(|p| [p[0].as_f64(), p[1].as_f64()])
        .collect();
    if raw.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::Geometry("non-finite coordinate".into()));
    }

    let mut kept: Vec<[f64; 2]> = Vec::new();
    for &p in &raw {
        let far = kept.iter().all(|&q| {
            let d = dist(p, q);
            d > 0.0 && d >= cutoff
        });
        if far {
            kept.push(p);
        }
    }
    let mut hull = convex_hull(&kept);
    if hull.len() < 3 {
        // Thinning collapsed the set; keep every distinct point instead.
        kept.clear();
        for &p in &raw {
            if !kept.contains(&p) {
                kept.push(p);
            }
        }
        hull = convex_hull(&kept);
    }
    if kept.len() < 3 || hull.len() < 3 {
        return Err(Error::Geometry(
            "need at least 3 non-collinear points after thinning".into(),
        ));
    }

    let mut all = kept.clone();
    if extension > 0.0 {
        all.extend(offset_ring(&kept, &hull, extension, outer_edge));
    }

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &all {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut tri = Delaunay::new(lo, hi);
    for &p in &all {
        let hint = tri.last;
        tri.insert(p, hint)?;
    }

    let hull_pts: Vec<[f64; 2]> = hull.iter().map(|&i| kept[i]).collect();
    let inside_hull = |p: [f64; 2]| {
        let k = hull_pts.len();
        (0..k).all(|i| orient(hull_pts[i], hull_pts[(i + 1) % k], p) >= 0.0)
    };
    let limit = |p: [f64; 2]| if inside_hull(p) { max_edge } else { outer_edge };
    loop {
        let long = tri.long_edges(limit);
        if long.is_empty() {
            break;
        }
        for (a, b) in long {
            let Some(&hint) = tri.edges.get(&(a, b)).or_else(|| tri.edges.get(&(b, a))) else {
                continue;
            };
            let (pa, pb) = (tri.pts[a], tri.pts[b]);
            let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
            tri.insert(mid, hint)?;
            if tri.pts.len() > MAX_NODES {
                return Err(Error::Geometry(format!(
                    "refinement exceeded {MAX_NODES} nodes; increase max_edge"
                )));
            }
        }
    }

    finish(&tri)
}

fn offset_ring(points: &[[f64; 2]], hull: &[usize], ext: f64, max_edge: f64) -> Vec<[f64; 2]> {
    let h: Vec<[f64; 2]> = hull.iter().map(|&i| points[i]).collect();
    let k = h.len();
    let normal = |a: [f64; 2], b: [f64; 2]| {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let l = (dx * dx + dy * dy).sqrt();
        [dy / l, -dx / l]
    };
    let mut ring: Vec<[f64; 2]> = Vec::new();
    for i in 0..k {
        let prev = h[(i + k - 1) % k];
        let (cur, next) = (h[i], h[(i + 1) % k]);
        let n1 = normal(prev, cur);
        let n2 = normal(cur, next);
        let denom = 1.0 + n1[0] * n2[0] + n1[1] * n2[1];
        let miter = [(n1[0] + n2[0]) / denom, (n1[1] + n2[1]) / denom];
        if (miter[0] * miter[0] + miter[1] * miter[1]).sqrt() <= 4.0 {
            ring.push([cur[0] + ext * miter[0], cur[1] + ext * miter[1]]);
        } else {
            ring.push([cur[0] + ext * n1[0], cur[1] + ext * n1[1]]);
            ring.push([cur[0] + ext * n2[0], cur[1] + ext * n2[1]]);
        }
    }
    let mut out = Vec::new();
    let r = ring.len();
    for i in 0..r {
        let (a, b) = (ring[i], ring[(i + 1) % r]);
        let segs = (dist(a, b) / max_edge).ceil().max(1.0) as usize;
        for s in 0..segs {
            let t = s as f64 / segs as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn finish<T: Real>(tri: &Delaunay) -> Result<Mesh<T>> {
    let mut remap = vec![usize::MAX; tri.pts.len()];
    let mut nodes = Vec::new();
    let mut triangles = Vec::new();
    for (id, t) in tri.tris.iter().enumerate() {
        if !tri.alive[id] || t.iter().any(|&v| v < 3) {
            continue;
        }
        let mut out = [0usize; 3];
        for k in 0..3 {
            let v = t[k];
            if remap[v] == usize::MAX {
                remap[v] = nodes.len();
                nodes.push(v);
            }
            out[k] = remap[v];
        }
        triangles.push(out);
    }
    // Renumber nodes in insertion order so inputs keep their relative order.
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by_key(|&k| nodes[k]);
    let mut rank = vec![0usize; nodes.len()];
    for (r, &k) in order.iter().enumerate() {
        rank[k] = r;
    }
    for t in &mut triangles {
        for v in t.iter_mut() {
            *v = rank[*v];
        }
    }
    triangles.sort_unstable();
    let coords: Vec<[T; 2]> = order
        .iter()
        .map(|&k| {
            let p = tri.pts[nodes[k]];
            [T::lit(p[0]), T::lit(p[1])]
        })
        .collect();
    let mesh = Mesh::from_parts(coords, triangles)?;
    Ok(mesh)
}

impl<T: Real> Mesh<T> {
    /// Assembles a mesh from nodes and triangles, orienting triangles
    /// counter-clockwise and deriving boundary flags.
    pub fn from_parts(nodes: Vec<[T; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        let m = nodes.len();
        for t in &mut triangles {
            if t.iter().any(|&v| v >= m) {
                return Err(Error::Geometry(format!("triangle {t:?} references a missing node")));
            }
            let [a, b, c] = t.map(|v| [nodes[v][0].as_f64(), nodes[v][1].as_f64()]);
            let o = orient(a, b, c);
            let scale = dist(a, b).max(dist(b, c)).max(dist(a, c)).powi(2);
            if !(o.abs() > 1e-14 * scale) {
                return Err(Error::Geometry(format!("degenerate triangle {t:?}")));
            }
            if o < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
        for (i, p) in nodes.iter().enumerate() {
            let key = (p[0].as_f64().to_bits(), p[1].as_f64().to_bits());
            if let Some(j) = seen.insert(key, i) {
                return Err(Error::Geometry(format!("duplicate nodes {j} and {i}")));
            }
        }
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut boundary = vec![false; m];
        for (&(a, b), &c) in &edge_count {
            if c == 1 {
                boundary[a] = true;
                boundary[b] = true;
            }
        }
        Ok(Self {
            nodes,
            triangles,
            boundary,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub(crate) fn node_f64(&self, i: usize) -> [f64; 2] {
        [self.nodes[i][0].as_f64(), self.nodes[i][1].as_f64()]
    }

    /// Signed area of triangle `t` (positive for valid meshes).
    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t].map(|v| self.node_f64(v));
        T::lit(0.5 * orient(a, b, c))
    }

    pub fn total_area(&self) -> T {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Unique undirected edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// True when `p` lies in some triangle (boundary inclusive).
    pub fn contains_point(&self, p: [T; 2]) -> bool {
        let q = [p[0].as_f64(), p[1].as_f64()];
        self.triangles.iter().any(|t| {
            let [a, b, c] = t.map(|v| self.node_f64(v));
            orient(a, b, q) >= 0.0 && orient(b, c, q) >= 0.0 && orient(c, a, q) >= 0.0
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::format("mesh json", e))
    }

    /// Parses and re-validates a mesh document `{nodes, triangles, boundary}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Mesh<T> = serde_json::from_str(text).map_err(|e| Error::format("mesh json", e))?;
        let mesh = Mesh::from_parts(raw.nodes, raw.triangles)?;
        if mesh.boundary != raw.boundary {
            return Err(Error::format("mesh json", "boundary flags inconsistent with triangles"));
        }
        Ok(mesh)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}
