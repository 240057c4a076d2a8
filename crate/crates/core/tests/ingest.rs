use std::io::Write;

use proptest::prelude::*;
use stmap::error::Error;
use stmap::ingest::*;

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
    p
}

fn areas(rows: &[(&str, f64, f64, u64)]) -> AreaTable {
    AreaTable::new(
        rows.iter()
            .map(|&(id, x, y, population)| Area {
                area_id: id.into(),
                x,
                y,
                population,
                region_id: "R".into(),
                polygon: None,
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn parses_cases_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "cases.csv", "area_id,week,cases\nA,1,28\nA,2,5\n");
    let t = load_case_table(&p, 2).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.counts_per_week(), vec![1, 1]);
}

#[test]
fn suppressed_counts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "cases.csv", "area_id,week,cases\nA,1,2\n");
    match load_case_table(&p, 2) {
        Err(Error::Format { context, .. }) => assert!(context.contains("line 2"), "{context}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn week_out_of_range_and_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "cases.csv", "area_id,week,cases\nA,3,9\n");
    assert!(matches!(load_case_table(&p, 2), Err(Error::Range(_))));
    let p = write(&dir, "bad.csv", "area_id,week,cases\nA,1,many\n");
    assert!(matches!(load_case_table(&p, 2), Err(Error::Format { .. })));
    let p = write(&dir, "dup.csv", "area_id,week,cases\nA,1,9\nA,1,10\n");
    assert!(load_case_table(&p, 2).is_err());
}

#[test]
fn absent_cells_are_censored() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "cases.csv", "area_id,week,cases\nA,1,3\n");
    let t = load_case_table(&p, 2).unwrap();
    assert!(t.is_censored("A", 2));
    assert!(!t.is_censored("A", 1));
    let a = areas(&[("A", 0.0, 0.0, 10)]);
    assert_eq!(t.censored_cells(&a), vec![("A".to_string(), 2)]);
}

#[test]
fn log_rates() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "cases.csv", "area_id,week,cases\nA,1,28\nB,1,3\nC,1,3\n");
    let t = load_case_table(&p, 1).unwrap();
    let a = areas(&[("A", 0.0, 0.0, 8123), ("B", 1.0, 0.0, 3), ("C", 2.0, 0.0, 3)]);
    let r = compute_log_rates(&t, &a).unwrap();
    assert!((r[0].theta - (28.0f64 / 8123.0).ln()).abs() < 1e-15);
    assert!((r[0].theta + 5.6703).abs() < 1e-4);
    assert_eq!(r[1].theta, 0.0);
    assert_eq!(r[1].theta, r[2].theta);
    let missing = areas(&[("A", 0.0, 0.0, 8123)]);
    assert!(matches!(compute_log_rates(&t, &missing), Err(Error::Join(_))));
}

#[test]
fn density_transform() {
    let v = log_transform_density(&[1.0, std::f64::consts::E, 8123.0 / 3.04]).unwrap();
    assert_eq!(v[0], 0.0);
    assert!((v[1] - 1.0).abs() < 1e-15);
    assert!((v[2] - 7.8906).abs() < 1e-4);
    assert!(matches!(log_transform_density(&[0.0]), Err(Error::Domain(_))));
}

fn square(x0: f64, y0: f64, s: f64) -> Polygon {
    Polygon::new(vec![vec![[x0, y0], [x0 + s, y0], [x0 + s, y0 + s], [x0, y0 + s], [x0, y0]]]).unwrap()
}

fn grid(cells: &[(f64, f64, f64)]) -> GridField {
    GridField { cells: cells.iter().map(|&(x, y, value)| GridCell { x, y, value }).collect() }
}

#[test]
fn grid_averaging_rules() {
    let mut a = areas(&[("A", 0.5, 0.5, 10), ("B", 5.5, 0.5, 10), ("C", 10.5, 0.5, 10)]);
    let mut polys = std::collections::HashMap::new();
    polys.insert("A".to_string(), square(0.0, 0.0, 1.0));
    polys.insert("B".to_string(), square(5.0, 0.0, 1.0));
    polys.insert("C".to_string(), square(10.0, 0.0, 1.0));
    a.attach_polygons(polys).unwrap();
    // A holds 4 and 6; B holds nothing and its nearest centroid is 7.2;
    // C has a centroid exactly on its edge.
    let g = grid(&[(0.25, 0.25, 4.0), (0.75, 0.75, 6.0), (7.0, 0.5, 7.2), (10.0, 0.5, 3.0)]);
    let v = grid_to_area_average(&g, &a).unwrap();
    assert_eq!(v, vec![5.0, 7.2, 3.0]);
    assert!(matches!(grid_to_area_average(&GridField::default(), &a), Err(Error::Input(_))));
}

#[test]
fn nearest_grid_tie_goes_to_first_row() {
    let mut a = areas(&[("A", 0.5, 0.5, 10)]);
    a.attach_polygons([("A".to_string(), square(0.0, 0.0, 1.0))].into()).unwrap();
    let g = grid(&[(3.5, 0.5, 1.0), (-2.5, 0.5, 2.0)]);
    assert_eq!(grid_to_area_average(&g, &a).unwrap(), vec![1.0]);
}

#[test]
fn polygons_from_geojson_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "areas.geojson",
        r#"{"type":"FeatureCollection","features":[
        {"type":"Feature","properties":{"area_id":"A"},"geometry":{"type":"MultiPolygon",
         "coordinates":[[[[0,0],[1,0],[1,1],[0,1],[0,0]]],[[[2,0],[3,0],[3,1],[2,1],[2,0]]]]}}]}"#,
    );
    let polys = load_polygons(&p).unwrap();
    assert!(polys["A"].contains([2.5, 0.5]));
    assert!(!polys["A"].contains([1.5, 0.5]));
}

#[test]
fn tables_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "areas.csv", "area_id,x,y,population,region_id\nA,1,2,100,R1\nB,3,4,200,R2\n");
    let t = load_area_table(&p).unwrap();
    assert_eq!(t.get("B").unwrap().population, 200);
    let p = write(&dir, "dup.csv", "area_id,x,y,population,region_id\nA,1,2,100,R1\nA,3,4,200,R2\n");
    assert!(load_area_table(&p).is_err());
    let p = write(&dir, "cov.csv", "area_id,pm25,income\nA,9.5,30\nB,11,\n");
    assert!(matches!(load_covariates(&p), Err(Error::Format { .. })));
    let p = write(&dir, "cov.csv", "area_id,pm25,income\nB,11,25\nA,9.5,30\n");
    let c = load_covariates(&p).unwrap();
    let aligned = c.aligned(&t, &["income".to_string()]).unwrap();
    assert_eq!(aligned, vec![vec![30.0], vec![25.0]]);
    let p = write(&dir, "grid.csv", "x,y,value\n0,0,1\n1,0,2\n");
    assert_eq!(load_grid(&p).unwrap().cells.len(), 2);
    let missing = dir.path().join("nope.csv");
    assert!(matches!(load_area_table(&missing), Err(Error::Io { .. })));
}

proptest! {
    #[test]
    fn constant_field_averages_to_constant(c in 0.0f64..100.0, pts in prop::collection::vec((-1.0f64..3.0, -1.0f64..3.0), 1..30)) {
        let mut a = areas(&[("A", 0.5, 0.5, 1), ("B", 2.5, 2.5, 1)]);
        a.attach_polygons([("A".to_string(), square(0.0, 0.0, 1.0)), ("B".to_string(), square(2.0, 2.0, 1.0))].into()).unwrap();
        let cells: Vec<(f64, f64, f64)> = pts.iter().map(|&(x, y)| (x, y, c)).collect();
        let v = grid_to_area_average(&grid(&cells), &a).unwrap();
        for x in v {
            prop_assert!((x - c).abs() <= 1e-12 * c.max(1.0));
        }
    }

    #[test]
    fn log_rate_monotone_in_cases(y1 in 3u64..10_000, dy in 1u64..1000, n in 10_000u64..100_000) {
        let a = areas(&[("A", 0.0, 0.0, n)]);
        let t = |y: u64| CaseTable { area_ids: vec!["A".into()], rows: vec![CaseRow { area: 0, week: 1, cases: y }], weeks: 1 };
        let lo = compute_log_rates(&t(y1), &a).unwrap()[0].theta;
        let hi = compute_log_rates(&t(y1 + dy), &a).unwrap()[0].theta;
        prop_assert!(hi > lo);
    }
}
