use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::geometry::Polygon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub area_id: String,
    pub x: f64,
    pub y: f64,
    pub population: u64,
    pub region_id: String,
    #[serde(skip)]
    pub polygon: Option<Polygon>,
}

impl Area {
    pub fn centroid(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, Default)]
pub struct AreaTable {
    pub areas: Vec<Area>,
    index: HashMap<String, usize>,
}

impl AreaTable {
    pub fn new(areas: Vec<Area>) -> Result<Self> {
        let mut index = HashMap::with_capacity(areas.len());
        for (i, a) in areas.iter().enumerate() {
            if a.population < 1 {
                return Err(Error::Range(format!("area {} has population 0", a.area_id)));
            }
            if !a.x.is_finite() || !a.y.is_finite() {
                return Err(Error::Range(format!("area {} has non-finite coordinates", a.area_id)));
            }
            if index.insert(a.area_id.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate area_id {}", a.area_id)));
            }
        }
        Ok(Self { areas, index })
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Area> {
        self.position(id).map(|i| &self.areas[i])
    }

    pub fn centroids(&self) -> Vec<[f64; 2]> {
        self.areas.iter().map(Area::centroid).collect()
    }

    /// Attaches polygons by `area_id`; every area must receive one.
    pub fn attach_polygons(&mut self, mut polygons: HashMap<String, Polygon>) -> Result<()> {
        for a in &mut self.areas {
            let p = polygons
                .remove(&a.area_id)
                .ok_or_else(|| Error::Join(format!("no polygon for area {}", a.area_id)))?;
            a.polygon = Some(p);
        }
        Ok(())
    }

    /// Multiplies all coordinates, including polygons, by `factor`.
    pub fn scale_coordinates(&mut self, factor: f64) {
        for a in &mut self.areas {
            a.x *= factor;
            a.y *= factor;
            if let Some(p) = &mut a.polygon {
                p.scale(factor);
            }
        }
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn row_context(path: &Path, rec: Option<&csv::Position>) -> String {
    match rec {
        Some(p) => format!("{} line {}", path.display(), p.line()),
        None => path.display().to_string(),
    }
}

fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(T, u64)>> {
    let mut rdr = open_csv(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(path.display().to_string(), &e))?
        .clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(row_context(path, e.position()), &e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let v = rec
            .deserialize(Some(&headers))
            .map_err(|e| Error::format(format!("{} line {line}", path.display()), &e))?;
        out.push((v, line));
    }
    Ok(out)
}

/// Reads `area_id,x,y,population,region_id`.
pub fn load_area_table(path: &Path) -> Result<AreaTable> {
    let rows: Vec<(Area, u64)> = read_records(path)?;
    AreaTable::new(rows.into_iter().map(|(a, _)| a).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRow {
    pub area: usize,
    pub week: usize,
    pub cases: u64,
}

/// Reported weekly cases. Cells with no row are censored.
#[derive(Debug, Clone)]
pub struct CaseTable {
    pub area_ids: Vec<String>,
    pub rows: Vec<CaseRow>,
    pub weeks: usize,
}

#[derive(Deserialize)]
struct RawCase {
    area_id: String,
    week: i64,
    cases: i64,
}

/// Smallest count that may be reported; smaller counts are suppressed.
pub const MIN_REPORTED: u64 = 3;

/// Reads `area_id,week,cases` for weeks `1..=weeks`.
pub fn load_case_table(path: &Path, weeks: usize) -> Result<CaseTable> {
    let raw: Vec<(RawCase, u64)> = read_records(path)?;
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(raw.len());
    for (r, line) in raw {
        let ctx = || format!("{} line {line}", path.display());
        if r.week < 1 || r.week as u64 > weeks as u64 {
            return Err(Error::Range(format!("{}: week {} outside 1..{weeks}", ctx(), r.week)));
        }
        if r.cases < MIN_REPORTED as i64 {
            return Err(Error::format(
                ctx(),
                format!("{} cases for {} week {}; counts below {MIN_REPORTED} are suppressed and must be absent", r.cases, r.area_id, r.week),
            ));
        }
        let next = ids.len();
        let area = *index.entry(r.area_id.clone()).or_insert(next);
        if area == next {
            ids.push(r.area_id.clone());
        }
        if !seen.insert((area, r.week as usize)) {
            return Err(Error::format(ctx(), format!("duplicate row for {} week {}", r.area_id, r.week)));
        }
        rows.push(CaseRow {
            area,
            week: r.week as usize,
            cases: r.cases as u64,
        });
    }
    Ok(CaseTable {
        area_ids: ids,
        rows,
        weeks,
    })
}

impl CaseTable {
    /// `n_t`: number of reported rows per week.
    pub fn counts_per_week(&self) -> Vec<usize> {
        let mut n = vec![0; self.weeks];
        for r in &self.rows {
            n[r.week - 1] += 1;
        }
        n
    }

    /// Whether `(area_id, week)` has no reported row.
    pub fn is_censored(&self, area_id: &str, week: usize) -> bool {
        !self
            .rows
            .iter()
            .any(|r| r.week == week && self.area_ids[r.area] == area_id)
    }

    /// All censored `(area_id, week)` cells for the given areas.
    pub fn censored_cells(&self, areas: &AreaTable) -> Vec<(String, usize)> {
        let present: HashSet<(&str, usize)> = self
            .rows
            .iter()
            .map(|r| (self.area_ids[r.area].as_str(), r.week))
            .collect();
        let mut out = Vec::new();
        for week in 1..=self.weeks {
            for a in &areas.areas {
                if !present.contains(&(a.area_id.as_str(), week)) {
                    out.push((a.area_id.clone(), week));
                }
            }
        }
        out
    }
}

/// `θ = ln(Y/N)` for one reported cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRate {
    pub area: usize,
    pub week: usize,
    pub theta: f64,
}

/// Log observed rates, indexed by position in `areas`.
pub fn compute_log_rates(cases: &CaseTable, areas: &AreaTable) -> Result<Vec<LogRate>> {
    cases
        .rows
        .iter()
        .map(|r| {
            let id = &cases.area_ids[r.area];
            let area = areas
                .position(id)
                .ok_or_else(|| Error::Join(format!("case row references unknown area {id}")))?;
            let n = areas.areas[area].population as f64;
            Ok(LogRate {
                area,
                week: r.week,
                theta: (r.cases as f64 / n).ln(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    pub names: Vec<String>,
    pub area_ids: Vec<String>,
    /// One row per area, one column per name.
    pub values: Vec<Vec<f64>>,
}

/// Reads `area_id,<name>...`; every cell must be a finite number.
pub fn load_covariates(path: &Path) -> Result<CovariateTable> {
    let mut rdr = open_csv(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(path.display().to_string(), &e))?
        .clone();
    if headers.get(0) != Some("area_id") {
        return Err(Error::format(path.display().to_string(), "first column must be area_id"));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let unique: BTreeSet<&String> = names.iter().collect();
    if unique.len() != names.len() {
        return Err(Error::format(path.display().to_string(), "duplicate covariate names"));
    }
    let mut area_ids = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(row_context(path, e.position()), &e))?;
        let ctx = row_context(path, rec.position());
        let id = rec.get(0).unwrap_or_default().to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::format(ctx, format!("duplicate row for area {id}")));
        }
        let row = rec
            .iter()
            .skip(1)
            .zip(&names)
            .map(|(cell, name)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::format(ctx.clone(), format!("missing or invalid value '{cell}' for {name}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        area_ids.push(id);
        values.push(row);
    }
    Ok(CovariateTable { names, area_ids, values })
}

impl CovariateTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|r| r[j]).collect())
    }

    /// Rows reordered to match `areas`, restricted to `names`.
    pub fn aligned(&self, areas: &AreaTable, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let cols: Vec<usize> = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::Input(format!("unknown covariate {n}")))
            })
            .collect::<Result<_>>()?;
        let index: HashMap<&str, usize> = self.area_ids.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        areas
            .areas
            .iter()
            .map(|a| {
                let r = index
                    .get(a.area_id.as_str())
                    .ok_or_else(|| Error::Join(format!("no covariates for area {}", a.area_id)))?;
                Ok(cols.iter().map(|&j| self.values[*r][j]).collect())
            })
            .collect()
    }

    /// Adds or replaces a column.
    pub fn set_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::Input(format!("column {name} has the wrong length")));
        }
        match self.names.iter().position(|n| n == name) {
            Some(j) => {
                for (row, v) in self.values.iter_mut().zip(values) {
                    row[j] = v;
                }
            }
            None => {
                self.names.push(name.to_string());
                for (row, v) in self.values.iter_mut().zip(values) {
                    row.push(v);
                }
            }
        }
        Ok(())
    }
}

/// Natural log of a positive density column.
pub fn log_transform_density(density: &[f64]) -> Result<Vec<f64>> {
    density
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > 0.0 && d.is_finite() {
                Ok(d.ln())
            } else {
                Err(Error::Domain(format!("density {d} at row {i} is not positive")))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Gridded concentrations: centroid and value per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridField {
    pub cells: Vec<GridCell>,
}

/// Reads `x,y,value`.
pub fn load_grid(path: &Path) -> Result<GridField> {
    let rows: Vec<(GridCell, u64)> = read_records(path)?;
    let mut seen = HashSet::new();
    for (c, line) in &rows {
        let ctx = format!("{} line {line}", path.display());
        if !(c.value >= 0.0) || !c.x.is_finite() || !c.y.is_finite() {
            return Err(Error::format(ctx, "grid values must be finite and non-negative"));
        }
        if !seen.insert((c.x.to_bits(), c.y.to_bits())) {
            return Err(Error::format(ctx, "duplicate grid centroid"));
        }
    }
    Ok(GridField {
        cells: rows.into_iter().map(|(c, _)| c).collect(),
    })
}
