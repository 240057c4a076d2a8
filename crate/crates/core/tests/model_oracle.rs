mod common;

use common::{random_fixture, random_hyper, DenseOracle};
use stmap::model::{st_precision, Hyper, LatentModel, PriorSpec, SigmaConvention};

fn model(data: &stmap::model::StDataset) -> LatentModel<'_> {
    LatentModel::new(data, PriorSpec::default(), SigmaConvention::Innovation).unwrap()
}

#[test]
fn log_marginal_matches_dense_m2_t2() {
    let mut data = random_fixture(1, 2, 2, 0);
    data.observations = [(0, 1, -5.1), (1, 1, -4.2), (0, 2, -4.8), (1, 2, -3.9)]
        .iter()
        .map(|&(area, week, theta)| stmap::model::Observation { area, week, theta })
        .collect();
    let h = Hyper { rho: 0.8, sigma_omega: 0.4, alpha: 0.7, sigma_e: 0.2 };
    let got = model(&data).log_marginal_likelihood(&h).unwrap();
    let want = DenseOracle::new(&data, &h).log_marginal();
    assert!((got - want).abs() < 1e-8, "{got} vs {want}");
}

#[test]
fn random_fixtures_match_dense_algebra() {
    for seed in 0..30u64 {
        let m = 1 + (seed as usize % 6);
        let weeks = 1 + (seed as usize / 6) % 4;
        let p = seed as usize % 3;
        let data = random_fixture(seed, m, weeks, p);
        let h = random_hyper(seed);
        let lm = model(&data);
        let cond = lm.conditional(&h).unwrap();
        let oracle = DenseOracle::new(&data, &h);
        let want = oracle.log_marginal();
        assert!(
            (cond.log_marginal_likelihood - want).abs() < 1e-8,
            "seed {seed}: {} vs {want}",
            cond.log_marginal_likelihood
        );
        let (mean, _) = oracle.conditional();
        for (i, (a, b)) in cond.mean.iter().zip(mean.iter()).enumerate() {
            assert!((a - b).abs() < 1e-8, "seed {seed} coord {i}: {a} vs {b}");
        }
    }
}

#[test]
fn row_order_does_not_matter() {
    let data = random_fixture(7, 4, 3, 2);
    let h = random_hyper(7);
    let a = model(&data).log_hyper_posterior(&h).unwrap();
    let mut shuffled = data.clone();
    shuffled.observations.reverse();
    let b = model(&shuffled).log_hyper_posterior(&h).unwrap();
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn marginal_convention_rescales_field() {
    // Under the marginal convention σ_ω is the stationary SD, which equals the
    // innovation convention with σ_ω·sqrt(1-α²).
    let data = random_fixture(3, 3, 3, 1);
    let h = Hyper { rho: 1.1, sigma_omega: 0.5, alpha: 0.8, sigma_e: 0.3 };
    let marg = LatentModel::new(&data, PriorSpec::default(), SigmaConvention::Marginal).unwrap();
    let inner = Hyper { sigma_omega: 0.5 * (1.0f64 - 0.64).sqrt(), ..h };
    let a = marg.log_marginal_likelihood(&h).unwrap();
    let b = model(&data).log_marginal_likelihood(&inner).unwrap();
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn st_precision_inverts_recursion_covariance() {
    let data = random_fixture(11, 2, 2, 0);
    let h = Hyper { rho: 0.9, sigma_omega: 0.6, alpha: 0.55, sigma_e: 1.0 };
    let lm = model(&data);
    let qs = lm.spatial_precision(&h).unwrap();
    let q = st_precision(&qs, h.alpha, 2).unwrap().to_dense();
    let q = nalgebra::DMatrix::from_fn(4, 4, |i, j| q[i][j]);
    let cov = q.try_inverse().unwrap();
    let oracle = DenseOracle::new(&data, &h);
    for i in 0..4 {
        for j in 0..4 {
            assert!((cov[(i, j)] - oracle.prior_cov[(1 + i, 1 + j)]).abs() < 1e-10);
        }
    }
}

#[test]
fn posterior_finite_over_broad_box() {
    let data = random_fixture(5, 5, 3, 2);
    let lm = model(&data);
    for &rho in &[0.01, 1.0, 100.0] {
        for &alpha in &[-0.99, 0.0, 0.99] {
            for &s in &[1e-3, 1.0, 10.0] {
                let h = Hyper { rho, sigma_omega: s, alpha, sigma_e: s };
                let v = lm.log_hyper_posterior(&h).unwrap();
                assert!(v.is_finite(), "{h}");
            }
        }
    }
}

#[test]
fn large_noise_approaches_pure_noise_model() {
    // As σ_e grows the likelihood approaches N(y; 0, σ_e² I).
    let data = random_fixture(9, 3, 2, 1);
    let lm = model(&data);
    let y = data.y();
    let n = y.len() as f64;
    let mut last = f64::INFINITY;
    for &s in &[1e2, 1e3, 1e4] {
        let h = Hyper { rho: 1.0, sigma_omega: 0.5, alpha: 0.5, sigma_e: s };
        let v = lm.log_marginal_likelihood(&h).unwrap();
        let pure = -0.5 * n * (2.0 * std::f64::consts::PI * s * s).ln()
            - 0.5 * y.iter().map(|v| v * v).sum::<f64>() / (s * s);
        let gap = (v - pure).abs();
        assert!(gap < last);
        last = gap;
    }
    assert!(last < 1e-3);
}

#[test]
fn scalar_conjugate_update() {
    let mut data = random_fixture(2, 1, 1, 0);
    data.observations = vec![stmap::model::Observation { area: 0, week: 1, theta: -4.5 }];
    let h = Hyper { rho: 1.3, sigma_omega: 0.7, alpha: 0.4, sigma_e: 0.3 };
    let lm = model(&data);
    let post = stmap::model::latent_posterior(&lm, &h, 100, 1).unwrap();
    // The single cell sees intercept + a·ξ, a scalar Gaussian with prior variance v.
    let qs = lm.spatial_precision(&h).unwrap().get(0, 0) * (1.0 - h.alpha * h.alpha);
    let a = data.projector.get(0, 0);
    let v = common::BETA_VAR + a * a / qs;
    let s2 = h.sigma_e * h.sigma_e;
    let want = (-4.5 / s2) / (1.0 / v + 1.0 / s2);
    let got = post.prediction(0, 1).unwrap().theta_hat;
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn noiseless_limit_interpolates() {
    let data = random_fixture(4, 4, 2, 1);
    let h = Hyper { rho: 1.0, sigma_omega: 0.5, alpha: 0.6, sigma_e: 1e-8 };
    let post = stmap::model::latent_posterior(&model(&data), &h, 10, 1).unwrap();
    for o in &data.observations {
        let p = post.prediction(o.area, o.week).unwrap();
        assert!((p.theta_hat - o.theta).abs() < 1e-4, "{} vs {}", p.theta_hat, o.theta);
    }
}

#[test]
fn sampled_sds_match_dense_conditioning() {
    let data = random_fixture(21, 3, 2, 1);
    let h = Hyper { rho: 0.9, sigma_omega: 0.8, alpha: 0.5, sigma_e: 0.25 };
    let lm = model(&data);
    let n = 10_000;
    let post = stmap::model::latent_posterior(&lm, &h, n, 99).unwrap();
    let (mean, cov) = DenseOracle::new(&data, &h).conditional();
    let p1 = data.n_coef();
    for (j, c) in post.coefficients.iter().enumerate() {
        assert!((c.mean - mean[j]).abs() < 1e-8);
        let sd = cov[(j, j)].sqrt();
        assert!((c.sd - sd).abs() < 3.0 * sd / (2.0 * n as f64).sqrt(), "coef {j}");
    }
    for (k, (&m, &s)) in post.field_mean.iter().zip(&post.field_sd).enumerate() {
        assert!((m - mean[p1 + k]).abs() < 1e-8);
        let sd = cov[(p1 + k, p1 + k)].sqrt();
        assert!((s - sd).abs() < 3.0 * sd / (2.0 * n as f64).sqrt(), "node {k}: {s} vs {sd}");
    }
}

#[test]
fn mean_scales_linearly_with_data_under_flat_coefficient_prior() {
    let data = random_fixture(8, 4, 3, 2);
    let mut scaled = data.clone();
    for o in scaled.observations.iter_mut() {
        o.theta *= 3.0;
    }
    let priors = PriorSpec { beta_variance: 1e8, ..PriorSpec::default() };
    let h = random_hyper(8);
    let a = LatentModel::new(&data, priors, SigmaConvention::Innovation).unwrap().conditional(&h).unwrap();
    let b = LatentModel::new(&scaled, priors, SigmaConvention::Innovation).unwrap().conditional(&h).unwrap();
    for (x, y) in a.mean.iter().zip(&b.mean) {
        assert!((3.0 * x - y).abs() < 1e-4);
    }
}

#[test]
fn cell_intervals_bracket_the_mean() {
    let data = random_fixture(12, 5, 3, 1);
    let post = stmap::model::latent_posterior(&model(&data), &random_hyper(12), 50, 3).unwrap();
    assert_eq!(post.predictions.len(), data.n_areas() * data.weeks);
    let censored = post.predictions.iter().filter(|p| p.censored).count();
    assert_eq!(censored, data.n_areas() * data.weeks - data.n_obs());
    for p in &post.predictions {
        assert!(p.rate > 0.0 && p.rate_lo95 <= p.rate && p.rate <= p.rate_hi95);
    }
    for c in &post.coefficients {
        assert!(c.lo95 <= c.mean && c.mean <= c.hi95);
    }
}

#[test]
fn optimizer_ascends() {
    let data = random_fixture(13, 6, 4, 1);
    let lm = model(&data);
    let init = Hyper { rho: 1.0, sigma_omega: 0.5, alpha: 0.5, sigma_e: 0.5 };
    let fit = stmap::model::optimize_hyper(&lm, &init, &Default::default()).unwrap();
    let z = init.to_internal();
    let start = lm.internal_objective(&z).unwrap();
    let end = lm.internal_objective(&fit.mode.to_internal()).unwrap();
    assert!(end >= start);
    for r in &fit.rows {
        assert!(r.q025 <= r.q975, "{r:?}");
    }
    let again = stmap::model::optimize_hyper(&lm, &init, &Default::default()).unwrap();
    assert_eq!(fit.mode, again.mode);
}

#[test]
fn structured_path_matches_general_factorization() {
    for seed in 100..130u64 {
        let data = random_fixture(seed, 2 + seed as usize % 5, 1 + seed as usize % 7, seed as usize % 3);
        let h = random_hyper(seed);
        let fast = model(&data).conditional(&h).unwrap();
        assert!(fast.is_structured(), "seed {seed}");
        let mut lm = model(&data);
        lm.disable_structured();
        let slow = lm.conditional(&h).unwrap();
        let scale = slow.log_marginal_likelihood.abs().max(1.0);
        assert!((fast.log_marginal_likelihood - slow.log_marginal_likelihood).abs() < 1e-9 * scale, "seed {seed}");
        for (a, b) in fast.mean.iter().zip(&slow.mean) {
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn structured_draws_have_dense_covariance() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let data = random_fixture(31, 4, 5, 1);
    assert!(data.observations.len() < data.n_areas() * data.weeks);
    let h = Hyper { rho: 0.9, sigma_omega: 0.8, alpha: 0.7, sigma_e: 0.3 };
    let cond = model(&data).conditional(&h).unwrap();
    assert!(cond.is_structured());
    let (_, cov) = DenseOracle::new(&data, &h).conditional();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let n = 20_000;
    let dim = data.latent_dim();
    let mut second = vec![0.0; dim];
    for _ in 0..n {
        let z: Vec<f64> = (0..cond.normals_needed()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = cond.sample_deviation(&z);
        for (s, v) in second.iter_mut().zip(&d) {
            *s += v * v;
        }
    }
    for i in 0..dim {
        let want = cov[(i, i)];
        let got = second[i] / n as f64;
        assert!((got - want).abs() < 4.0 * want * (2.0 / n as f64).sqrt(), "coord {i}: {got} vs {want}");
    }
}
