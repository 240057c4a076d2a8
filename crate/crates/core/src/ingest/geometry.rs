use std::collections::HashMap;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

use super::tables::{AreaTable, GridField};

/// Polygon as a set of closed rings filled by the even-odd rule, so holes
/// and multi-part areas need no special casing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon {
    /// Each ring repeats its first vertex at the end.
    pub rings: Vec<Vec<[f64; 2]>>,
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let scale = (b[0] - a[0]).abs().max((b[1] - a[1]).abs()).max(1e-300);
    orient(a, b, p).abs() <= 1e-12 * scale * scale
        && p[0] >= a[0].min(b[0]) - 1e-12 * scale
        && p[0] <= a[0].max(b[0]) + 1e-12 * scale
        && p[1] >= a[1].min(b[1]) - 1e-12 * scale
        && p[1] <= a[1].max(b[1]) + 1e-12 * scale
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

impl Polygon {
    pub fn new(rings: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::Geometry("polygon has no rings".into()));
        }
        for (k, ring) in rings.iter().enumerate() {
            if ring.len() < 4 {
                return Err(Error::Geometry(format!("ring {k} has fewer than 3 distinct vertices")));
            }
            if ring.first() != ring.last() {
                return Err(Error::Geometry(format!("ring {k} is not closed")));
            }
            if ring.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Geometry(format!("ring {k} has non-finite coordinates")));
            }
            if let Some((i, j)) = self_intersection(ring) {
                return Err(Error::Geometry(format!("ring {k} self-intersects at edges {i} and {j}")));
            }
        }
        Ok(Self { rings })
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.rings.iter_mut().flatten() {
            v[0] *= factor;
            v[1] *= factor;
        }
    }

    /// `(min, max)` corners.
    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in self.rings.iter().flatten() {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// Even-odd containment; points on any edge count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            for w in ring.windows(2) {
                let (a, b) = (w[0], w[1]);
                if on_segment(p, a, b) {
                    return true;
                }
                if (a[1] > p[1]) != (b[1] > p[1]) {
                    let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                    if p[0] < x {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }
}

/// First pair of non-adjacent edges that touch, found by a sweep over the
/// edges sorted by their left end.
fn self_intersection(ring: &[[f64; 2]]) -> Option<(usize, usize)> {
    let n = ring.len() - 1;
    let mut order: Vec<usize> = (0..n).collect();
    let lo = |i: usize| ring[i][0].min(ring[i + 1][0]);
    let hi = |i: usize| ring[i][0].max(ring[i + 1][0]);
    order.sort_by(|&a, &b| lo(a).total_cmp(&lo(b)));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if lo(j) > hi(i) {
                break;
            }
            let adjacent = i.abs_diff(j) == 1 || i.abs_diff(j) == n - 1;
            if adjacent {
                continue;
            }
            if segments_cross(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

fn parse_ring(v: &Value) -> Result<Vec<[f64; 2]>> {
    let arr = v.as_array().ok_or_else(|| Error::Geometry("ring is not an array".into()))?;
    arr.iter()
        .map(|pt| {
            let c = pt.as_array().filter(|c| c.len() >= 2);
            match c.and_then(|c| Some([c[0].as_f64()?, c[1].as_f64()?])) {
                Some(p) => Ok(p),
                None => Err(Error::Geometry("coordinate is not a number pair".into())),
            }
        })
        .collect()
}

fn parse_geometry(g: &Value) -> Result<Polygon> {
    let kind = g.get("type").and_then(Value::as_str).unwrap_or_default();
    let coords = g.get("coordinates").ok_or_else(|| Error::Geometry("geometry has no coordinates".into()))?;
    let polys: Vec<&Value> = match kind {
        "Polygon" => vec![coords],
        "MultiPolygon" => coords
            .as_array()
            .ok_or_else(|| Error::Geometry("MultiPolygon coordinates are not an array".into()))?
            .iter()
            .collect(),
        other => return Err(Error::Geometry(format!("unsupported geometry type '{other}'"))),
    };
    let mut rings = Vec::new();
    for p in polys {
        for r in p.as_array().ok_or_else(|| Error::Geometry("polygon is not an array of rings".into()))? {
            rings.push(parse_ring(r)?);
        }
    }
    Polygon::new(rings)
}

/// Parses a GeoJSON FeatureCollection whose features carry an `area_id`
/// property and Polygon or MultiPolygon geometry.
pub fn parse_polygons(text: &str) -> Result<HashMap<String, Polygon>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::format("GeoJSON", e))?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::format("GeoJSON", "expected a FeatureCollection"))?;
    let mut out = HashMap::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let id = match f.get("properties").and_then(|p| p.get("area_id")) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(Error::format("GeoJSON", format!("feature {i} has no area_id property"))),
        };
        let geom = f
            .get("geometry")
            .ok_or_else(|| Error::format("GeoJSON", format!("feature {i} has no geometry")))?;
        let poly = parse_geometry(geom).map_err(|e| Error::format("GeoJSON", format!("feature {id}: {e}")))?;
        if out.insert(id.clone(), poly).is_some() {
            return Err(Error::format("GeoJSON", format!("duplicate area_id {id}")));
        }
    }
    Ok(out)
}

pub fn load_polygons(path: &Path) -> Result<HashMap<String, Polygon>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_polygons(&text).map_err(|e| match e {
        Error::Format { message, .. } => Error::format(path.display().to_string(), message),
        other => other,
    })
}

/// Per-area mean of the grid values whose centroids fall inside the area
/// polygon (edges inclusive). Areas containing no centroid take the value
/// of the nearest centroid, ties going to the earliest grid row.
pub fn grid_to_area_average(grid: &GridField, areas: &AreaTable) -> Result<Vec<f64>> {
    if grid.cells.is_empty() {
        return Err(Error::Input("grid field is empty".into()));
    }
    let mut by_x: Vec<usize> = (0..grid.cells.len()).collect();
    by_x.sort_by(|&a, &b| grid.cells[a].x.total_cmp(&grid.cells[b].x).then(a.cmp(&b)));
    let xs: Vec<f64> = by_x.iter().map(|&i| grid.cells[i].x).collect();
    areas
        .areas
        .iter()
        .map(|a| {
            let poly = a
                .polygon
                .as_ref()
                .ok_or_else(|| Error::Input(format!("area {} has no polygon", a.area_id)))?;
            let (lo, hi) = poly.bbox();
            let start = xs.partition_point(|&x| x < lo[0]);
            let end = xs.partition_point(|&x| x <= hi[0]);
            let (mut sum, mut count) = (0.0, 0usize);
            for &i in &by_x[start..end] {
                let c = &grid.cells[i];
                if c.y >= lo[1] && c.y <= hi[1] && poly.contains([c.x, c.y]) {
                    sum += c.value;
                    count += 1;
                }
            }
            if count > 0 {
                return Ok(sum / count as f64);
            }
            let mut best = (f64::INFINITY, 0usize);
            for (i, c) in grid.cells.iter().enumerate() {
                let d = (c.x - a.x).powi(2) + (c.y - a.y).powi(2);
                if d < best.0 {
                    best = (d, i);
                }
            }
            Ok(grid.cells[best.1].value)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polygon {
        Polygon::new(vec![vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]]).unwrap()
    }

    #[test]
    fn boundary_points_are_inside() {
        let sq = square();
        assert!(sq.contains([0.5, 0.0]));
        assert!(sq.contains([1.0, 0.5]));
        assert!(sq.contains([0.0, 0.0]));
        assert!(sq.contains([0.5, 0.5]));
        assert!(!sq.contains([1.0 + 1e-9, 0.5]));
        assert!(!sq.contains([-0.1, 0.5]));
    }

    #[test]
    fn holes_use_even_odd() {
        let p = Polygon::new(vec![
            vec![[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0], [0.0, 0.0]],
            vec![[1.0, 1.0], [3.0, 1.0], [3.0, 3.0], [1.0, 3.0], [1.0, 1.0]],
        ])
        .unwrap();
        assert!(!p.contains([2.0, 2.0]));
        assert!(p.contains([0.5, 2.0]));
    }

    #[test]
    fn rejects_bow_tie_and_open_ring() {
        assert!(Polygon::new(vec![vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]]).is_err());
        assert!(Polygon::new(vec![vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]]).is_err());
    }

    #[test]
    fn geojson_round() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"area_id":"A"},
             "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}]}"#;
        let polys = parse_polygons(text).unwrap();
        assert_eq!(polys["A"], square());
    }
}
