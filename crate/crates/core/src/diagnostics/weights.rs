use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AreaTable, Polygon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum WeightScheme {
    /// `k` nearest centroids, symmetrized by union.
    Knn { k: usize },
    /// Polygons sharing an edge.
    Rook,
    /// Polygons sharing at least a vertex.
    Queen,
}

impl Default for WeightScheme {
    fn default() -> Self {
        WeightScheme::Knn { k: 5 }
    }
}

/// Symmetric binary spatial weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    /// Sorted neighbour lists.
    pub neighbours: Vec<Vec<usize>>,
    /// Rows without neighbours.
    pub islands: Vec<usize>,
}

impl SpatialWeights {
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut sets = vec![BTreeSet::new(); n];
        for (i, j) in pairs {
            if i != j {
                sets[i].insert(j);
                sets[j].insert(i);
            }
        }
        let neighbours: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let islands = (0..n).filter(|&i| neighbours[i].is_empty()).collect();
        Self { neighbours, islands }
    }

    pub fn len(&self) -> usize {
        self.neighbours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbours.is_empty()
    }

    /// Number of undirected links.
    pub fn n_links(&self) -> usize {
        self.neighbours.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// `S0 = Σ w_ij`.
    pub fn s0(&self) -> f64 {
        self.neighbours.iter().map(Vec::len).sum::<usize>() as f64
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if self.neighbours[i].binary_search(&j).is_ok() {
            1.0
        } else {
            0.0
        }
    }
}

fn knn(points: &[[f64; 2]], k: usize) -> Result<SpatialWeights> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("k = {k} must lie in 1..{n}")));
    }
    let mut pairs = Vec::with_capacity(n * k);
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        pairs.extend(d[..k].iter().map(|&(_, j)| (i, j)));
    }
    Ok(SpatialWeights::from_pairs(n, pairs))
}

type Key = (u64, u64);

fn key(p: [f64; 2]) -> Key {
    // Normalize -0.0 so shared vertices hash alike.
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

fn contiguity(polys: &[&Polygon], queen: bool) -> SpatialWeights {
    let mut owners: HashMap<(Key, Key), Vec<usize>> = HashMap::new();
    let mut vertex_owners: HashMap<Key, Vec<usize>> = HashMap::new();
    for (i, p) in polys.iter().enumerate() {
        for ring in &p.rings {
            for w in ring.windows(2) {
                if queen {
                    vertex_owners.entry(key(w[0])).or_default().push(i);
                } else {
                    let (a, b) = (key(w[0]), key(w[1]));
                    owners.entry(if a < b { (a, b) } else { (b, a) }).or_default().push(i);
                }
            }
        }
    }
    let groups: Vec<Vec<usize>> = if queen {
        vertex_owners.into_values().collect()
    } else {
        owners.into_values().collect()
    };
    let mut pairs = Vec::new();
    for g in groups {
        for a in 0..g.len() {
            for b in (a + 1)..g.len() {
                pairs.push((g[a], g[b]));
            }
        }
    }
    SpatialWeights::from_pairs(polys.len(), pairs)
}

/// Builds symmetric weights. Contiguity matches shared vertices and edges
/// by exact coordinates.
pub fn build_spatial_weights(areas: &AreaTable, scheme: WeightScheme) -> Result<SpatialWeights> {
    if areas.len() < 2 {
        return Err(Error::Input("spatial weights need at least two areas".into()));
    }
    match scheme {
        WeightScheme::Knn { k } => knn(&areas.centroids(), k),
        WeightScheme::Rook | WeightScheme::Queen => {
            let polys = areas
                .areas
                .iter()
                .map(|a| {
                    a.polygon
                        .as_ref()
                        .ok_or_else(|| Error::Input(format!("area {} has no polygon", a.area_id)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(contiguity(&polys, scheme == WeightScheme::Queen))
        }
    }
}

/// kNN weights from raw coordinates.
pub fn knn_weights(points: &[[f64; 2]], k: usize) -> Result<SpatialWeights> {
    knn(points, k)
}
