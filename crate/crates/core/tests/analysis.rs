use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use stmap::analysis::*;
use stmap::error::Error;
use stmap::ingest::{Area, AreaTable};
use stmap::model::Observation;

fn obs(cells: &[(usize, usize, f64)]) -> Vec<Observation> {
    cells.iter().map(|&(area, week, theta)| Observation { area, week, theta }).collect()
}

fn z(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[test]
fn accuracy_metrics() {
    let o = obs(&[(0, 1, -5.0), (1, 1, -4.0), (0, 2, -6.0)]);
    let a = rmse_mae(&o, &o).unwrap();
    assert_eq!((a.rmse, a.mae, a.n), (0.0, 0.0, 3));
    let shifted: Vec<Observation> = o.iter().map(|c| Observation { theta: c.theta + 0.003, ..*c }).collect();
    let a = rmse_mae(&shifted, &o).unwrap();
    assert!((a.rmse - 0.003).abs() < 1e-12 && (a.mae - 0.003).abs() < 1e-12);
    // Only matched cells count.
    let a = rmse_mae(&obs(&[(0, 1, -4.0), (5, 5, 0.0)]), &o).unwrap();
    assert_eq!((a.rmse, a.n), (1.0, 1));
    assert!(matches!(rmse_mae(&obs(&[(9, 9, 0.0)]), &o), Err(Error::Input(_))));
}

#[test]
fn standardization() {
    let rates = vec![vec![1.0, 10.0, 5.0], vec![3.0, 20.0, 5.0]];
    let s = standardize_interval(&rates, 1..=2, StandardizeAxis::PerWeek).unwrap();
    let h = 1.0 / 2f64.sqrt();
    assert!((s[0][0] + h).abs() < 1e-15 && (s[1][0] - h).abs() < 1e-15);
    assert!((s[0][1] + h).abs() < 1e-15 && (s[1][1] - h).abs() < 1e-15);
    assert!(matches!(
        standardize_interval(&rates, 2..=3, StandardizeAxis::PerWeek),
        Err(Error::DegenerateVariance(_))
    ));
    assert!(matches!(standardize_interval(&rates, 2..=4, StandardizeAxis::PerWeek), Err(Error::Range(_))));
    let per_area = standardize_interval(&rates, 1..=3, StandardizeAxis::PerArea).unwrap();
    assert!(per_area.iter().all(|r| r.iter().sum::<f64>().abs() < 1e-12));
    let unit = vec![vec![-1.0], vec![0.0], vec![1.0]];
    assert_eq!(standardize_interval(&unit, 1..=1, StandardizeAxis::PerWeek).unwrap(), unit);
}

#[test]
fn kmeans_edge_cases() {
    let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
    assert_eq!(kmeans(&pts, 6, 3, 1).unwrap().wss, 0.0);
    assert!(matches!(kmeans(&pts, 7, 3, 1), Err(Error::Parameter(_))));
    let same = vec![vec![2.0, 2.0]; 5];
    let r = kmeans(&same, 2, 4, 9).unwrap();
    assert_eq!(r.wss, 0.0);
    assert_eq!(r.labels, vec![0; 5]);
    assert_eq!(r, kmeans(&same, 2, 4, 9).unwrap());
}

/// Points in `dim` dimensions around three random centres, 20 each.
fn blobs(seed: u64, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| 4.0 * z(&mut rng)).collect()).collect();
    let mut pts = Vec::new();
    let mut truth = Vec::new();
    for i in 0..60 {
        let c = i % 3;
        pts.push(centres[c].iter().map(|m| m + 0.5 * z(&mut rng)).collect());
        truth.push(c);
    }
    (pts, truth)
}

#[test]
fn kmeans_recovers_blobs() {
    for seed in 0..5 {
        let (pts, truth) = blobs(seed, 4);
        let r = kmeans(&pts, 3, 10, seed).unwrap();
        assert!(adjusted_rand_index(&r.labels, &truth).unwrap() > 0.95);
    }
}

#[test]
fn elbow_rule() {
    // Second differences at k = 2 and 3 are 30 and 29.
    let wss = [100.0, 40.0, 10.0, 9.0, 8.5, 8.2, 8.0, 7.9, 7.85, 7.8];
    assert_eq!(elbow_select(&wss).unwrap(), 2);
    let sharp = [100.0, 70.0, 10.0, 9.0, 8.5, 8.2, 8.0, 7.9, 7.85, 7.8];
    assert_eq!(elbow_select(&sharp).unwrap(), 3);
    let linear: Vec<f64> = (0..10).map(|k| 100.0 - 10.0 * k as f64).collect();
    assert_eq!(elbow_select(&linear).unwrap(), 2);
    let mut bad = wss;
    bad[5] = 9.5;
    assert!(matches!(elbow_select(&bad), Err(Error::Input(_))));
}

#[test]
fn levels_follow_centre_means() {
    let centers = vec![vec![0.0, 0.0], vec![2.0, 2.0], vec![-2.0, -2.0]];
    let l = label_levels(&centers, &[0, 1, 2, 1]).unwrap();
    assert_eq!(l, vec![Level::Medium, Level::High, Level::Low, Level::High]);
    let tied = vec![vec![1.0], vec![1.0], vec![1.0]];
    assert_eq!(label_levels(&tied, &[0, 1, 2]).unwrap(), vec![Level::High, Level::Medium, Level::Low]);
    // Relabelling clusters leaves point levels alone.
    let perm = [2usize, 0, 1];
    let mut pc = vec![vec![]; 3];
    for (c, &p) in perm.iter().enumerate() {
        pc[p] = centers[c].clone();
    }
    let labels: Vec<usize> = [0, 1, 2, 1].iter().map(|&c| perm[c]).collect();
    assert_eq!(label_levels(&pc, &labels).unwrap(), l);
    assert!(matches!(label_levels(&centers[..2], &[0]), Err(Error::Parameter(_))));
}

#[test]
fn eighteen_week_tiling() {
    let t = interval_tiling(108, 18).unwrap();
    assert_eq!(t.len(), 6);
    let weeks: Vec<usize> = t.into_iter().flatten().collect();
    assert_eq!(weeks, (1..=108).collect::<Vec<_>>());
    assert_eq!(interval_tiling(20, 18).unwrap(), vec![1..=18, 19..=20]);
}

fn area_table(pops: &[(u64, &str)]) -> AreaTable {
    AreaTable::new(
        pops.iter()
            .enumerate()
            .map(|(i, &(population, region))| Area {
                area_id: format!("A{i}"),
                x: i as f64,
                y: 0.0,
                population,
                region_id: region.into(),
                polygon: None,
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn regional_weighted_means() {
    let areas = area_table(&[(1, "R1"), (2, "R1"), (3, "R1"), (7, "R2")]);
    let rates = vec![vec![0.1, 0.2], vec![0.4, 0.2], vec![0.7, 0.2], vec![0.05, 0.3]];
    let r = region_aggregate(&rates, &areas).unwrap();
    assert_eq!(r[0].region_id, "R1");
    assert!((r[0].phi[0] - (0.1 + 0.8 + 2.1) / 6.0).abs() < 1e-15);
    assert!((r[0].phi[1] - 0.2).abs() < 1e-15);
    assert_eq!(r[1].phi, vec![0.05, 0.3]);
    let equal = area_table(&[(5, "R"), (5, "R")]);
    let r = region_aggregate(&[vec![0.2], vec![0.4]], &equal).unwrap();
    assert!((r[0].phi[0] - 0.3).abs() < 1e-15);
    assert!(matches!(region_aggregate(&rates[..2], &areas), Err(Error::Input(_))));
}

#[test]
fn interval_pipeline_labels_every_area() {
    let (pts, _) = blobs(3, 18);
    let rates: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| (v / 10.0 - 6.0).exp()).collect()).collect();
    let res = cluster_intervals(&rates, &ClusterOptions::default()).unwrap();
    assert_eq!(res.len(), 1);
    assert_eq!(res[0].levels.len(), 60);
    assert!(res[0].wss.windows(2).all(|w| w[1] <= w[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rmse_dominates_mae(errs in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let zero = vec![0.0; errs.len()];
        let a = rmse_mae_aligned(&errs, &zero).unwrap();
        prop_assert!(a.rmse >= a.mae - 1e-12 && a.mae >= 0.0);
    }

    #[test]
    fn standardized_columns(seed in 0u64..10_000, n in 3usize..30, t in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(3.0, 2.0).unwrap();
        let rates: Vec<Vec<f64>> = (0..n).map(|_| (0..t).map(|_| d.sample(&mut rng)).collect()).collect();
        let s = standardize_interval(&rates, 1..=t, StandardizeAxis::PerWeek).unwrap();
        for c in 0..t {
            let mean = s.iter().map(|r| r[c]).sum::<f64>() / n as f64;
            let sd = (s.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            prop_assert!(mean.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wss_path_non_increasing(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..25).map(|_| vec![z(&mut rng), z(&mut rng)]).collect();
        let path = kmeans_path(&pts, 10, 2, seed).unwrap();
        prop_assert!(path.windows(2).all(|w| w[1].wss <= w[0].wss));
    }

    #[test]
    fn constant_rates_aggregate_to_constant(c in 1e-6f64..1.0, pops in prop::collection::vec(1u64..100_000, 1..10)) {
        let spec: Vec<(u64, &str)> = pops.iter().enumerate().map(|(i, &p)| (p, if i % 2 == 0 { "E" } else { "W" })).collect();
        let areas = area_table(&spec);
        let rates = vec![vec![c; 3]; pops.len()];
        for r in region_aggregate(&rates, &areas).unwrap() {
            for v in r.phi {
                prop_assert!((v - c).abs() <= 1e-14 * c.max(1.0) * 4.0);
            }
        }
    }
}
