use crate::error::{Error, Result};
use crate::linalg::CscMatrix;
use crate::scalar::Real;

use super::mesh::{orient, Mesh};

/// Sparse map from mesh nodes to observation locations (barycentric weights).
#[derive(Debug, Clone)]
pub struct Projector<T> {
    pub a: CscMatrix<T>,
}

impl<T: Real> Projector<T> {
    pub fn n_locations(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.a.ncols()
    }

    /// Interpolates nodal values to the locations.
    pub fn apply(&self, nodal: &[T]) -> Vec<T> {
        self.a.mul_vec(nodal)
    }
}

/// Uniform bucket grid over triangle bounding boxes.
struct TriangleIndex {
    lo: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl TriangleIndex {
    fn new<T: Real>(mesh: &Mesh<T>) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for i in 0..mesh.n_nodes() {
            let p = mesh.node_f64(i);
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let side = ((mesh.n_triangles() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(1e-12),
            ((hi[1] - lo[1]) / side as f64).max(1e-12),
        ];
        let mut idx = Self {
            lo,
            cell,
            dims: [side, side],
            buckets: vec![Vec::new(); side * side],
        };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let pts = tri.map(|v| mesh.node_f64(v));
            let (a, b) = pts.iter().fold(
                ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
                |(l, h), p| ([l[0].min(p[0]), l[1].min(p[1])], [h[0].max(p[0]), h[1].max(p[1])]),
            );
            let (c0, c1) = (idx.cell_of(a), idx.cell_of(b));
            for cx in c0[0]..=c1[0] {
                for cy in c0[1]..=c1[1] {
                    idx.buckets[cy * side + cx].push(t);
                }
            }
        }
        idx
    }

    fn cell_of(&self, p: [f64; 2]) -> [usize; 2] {
        std::array::from_fn(|k| {
            let c = ((p[k] - self.lo[k]) / self.cell[k]).floor();
            (c.max(0.0) as usize).min(self.dims[k] - 1)
        })
    }
}

/// Barycentric projector: row `i` holds the weights of location `i` in its
/// containing triangle (lowest triangle index when on a shared edge).
pub fn build_projector<T: Real>(mesh: &Mesh<T>, locations: &[[T; 2]]) -> Result<Projector<T>> {
    let index = TriangleIndex::new(mesh);
    let mut trip = Vec::with_capacity(3 * locations.len());
    for (row, loc) in locations.iter().enumerate() {
        let p = [loc[0].as_f64(), loc[1].as_f64()];
        let c = index.cell_of(p);
        let mut best: Option<(usize, [f64; 3])> = None;
        for &t in &index.buckets[c[1] * index.dims[0] + c[0]] {
            let [a, b, cc] = mesh.triangles[t].map(|v| mesh.node_f64(v));
            let area = orient(a, b, cc);
            let w = [orient(b, cc, p) / area, orient(cc, a, p) / area, orient(a, b, p) / area];
            if w.iter().all(|&x| x >= -1e-12) && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, w));
            }
        }
        let Some((t, mut w)) = best else {
            return Err(Error::Containment {
                index: row,
                x: p[0],
                y: p[1],
            });
        };
        for x in &mut w {
            *x = x.max(0.0);
        }
        let s: f64 = w.iter().sum();
        for k in 0..3 {
            let v = w[k] / s;
            if v > 0.0 {
                trip.push((row, mesh.triangles[t][k], T::lit(v)));
            }
        }
    }
    Ok(Projector {
        a: CscMatrix::from_triplets(locations.len(), mesh.n_nodes(), &trip),
    })
}
