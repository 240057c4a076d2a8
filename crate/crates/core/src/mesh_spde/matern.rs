//! Matérn correlation with smoothness 1 and the (range, SD) ↔ (κ, τ) map.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smoothness of the Matérn field. Fixed: only the order-2 SPDE is built.
pub const NU: f64 = 1.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modified Bessel function of the second kind, order 1.
///
/// Power series below 2; above, the trapezoid rule on
/// `K1(x) = ∫₀^∞ exp(-x cosh t) cosh t dt`, which converges geometrically
/// for this entire integrand.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k1 needs x > 0");
    if x <= 2.0 {
        k1_series(x)
    } else {
        (-x).exp() * k1_scaled_quadrature(x)
    }
}

/// `x K1(x)`, continuous at zero with value 1.
fn x_k1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x <= 2.0 {
        x * k1_series(x)
    } else {
        x * (-x).exp() * k1_scaled_quadrature(x)
    }
}

fn k1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let half = 0.5 * x;
    let mut i1 = 0.0;
    let mut tail = 0.0;
    // term_k = q^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut h_k = 0.0; // harmonic number H_k
    for k in 0..40 {
        let kf = k as f64;
        let h_k1 = h_k + 1.0 / (kf + 1.0);
        i1 += term;
        tail += (h_k + h_k1 - 2.0 * EULER_GAMMA) * term;
        h_k = h_k1;
        term *= q / ((kf + 1.0) * (kf + 2.0));
        if term < 1e-18 * i1 {
            break;
        }
    }
    1.0 / x + (half.ln()) * half * i1 - 0.5 * half * tail
}

fn k1_scaled_quadrature(x: f64) -> f64 {
    const H: f64 = 0.125;
    let f = |t: f64| (-x * (t.cosh() - 1.0)).exp() * t.cosh();
    let mut sum = 0.5 * f(0.0);
    let mut j = 1;
    loop {
        let v = f(j as f64 * H);
        sum += v;
        if v < 1e-18 * sum {
            break;
        }
        j += 1;
    }
    H * sum
}

/// Matérn correlation `(κd) K₁(κd)`; equals 1 at `d = 0`.
pub fn matern_correlation<T: Real>(d: T, kappa: T) -> T {
    T::lit(x_k1((kappa * d).as_f64().abs()))
}

/// `(ρ, σ) → (κ, τ)` with `κ = √(8ν)/ρ` and `τ` chosen so that the field's
/// stationary marginal SD is `σ`, i.e. `σ² = 1 / (4π κ² τ²)`.
pub fn convert_params<T: Real>(rho: T, sigma: T) -> Result<(T, T)> {
    if !(rho > T::zero()) || !(sigma > T::zero()) {
        return Err(Error::Parameter(format!(
            "range and SD must be positive (rho={rho}, sigma={sigma})"
        )));
    }
    let kappa = T::lit((8.0 * NU).sqrt()) / rho;
    let tau = T::one() / (T::lit((4.0 * PI).sqrt()) * kappa * sigma);
    Ok((kappa, tau))
}

/// Inverse of [`convert_params`].
pub fn range_and_sd<T: Real>(kappa: T, tau: T) -> Result<(T, T)> {
    if !(kappa > T::zero()) || !(tau > T::zero()) {
        return Err(Error::Parameter(format!(
            "kappa and tau must be positive (kappa={kappa}, tau={tau})"
        )));
    }
    let rho = T::lit((8.0 * NU).sqrt()) / kappa;
    let sigma = T::one() / (T::lit((4.0 * PI).sqrt()) * kappa * tau);
    Ok((rho, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent route: K1(x) = x ∫₁^∞ e^{-xt} √(t²-1) dt with t = 1 + u²,
    // integrated by composite Simpson.
    fn k1_oracle(x: f64) -> f64 {
        let g = |u: f64| (-x * u * u).exp() * 2.0 * u * u * (u * u + 2.0).sqrt();
        let upper = (40.0 / x).sqrt();
        let n = 20_000;
        let h = upper / n as f64;
        let mut s = g(0.0) + g(upper);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        x * (-x).exp() * s * h / 3.0
    }

    #[test]
    fn k1_matches_integral_oracle() {
        for &x in &[0.05, 0.3, 1.0, 1.9, 2.0, 2.1, 3.5, 8.0, 20.0] {
            let (a, b) = (bessel_k1(x), k1_oracle(x));
            assert!((a - b).abs() < 1e-9 * b.max(1e-300), "x={x}: {a} vs {b}");
        }
        assert!((bessel_k1(1.0) - 0.601_907_230_197_234_6).abs() < 1e-13);
    }

    #[test]
    fn correlation_at_range() {
        let kappa = 1.7;
        let rho = 8f64.sqrt() / kappa;
        let c = matern_correlation(rho, kappa);
        let oracle = 8f64.sqrt() * k1_oracle(8f64.sqrt());
        assert!((c - oracle).abs() < 1e-9);
        assert!((c - 0.139).abs() < 0.005, "{c}");
        assert_eq!(matern_correlation(0.0, kappa), 1.0);
    }

    #[test]
    fn correlation_decreases() {
        let mut prev = 1.0;
        for i in 1..=100 {
            let c = matern_correlation(i as f64 * 0.05, 2.0);
            assert!(c < prev);
            prev = c;
        }
        assert!(matern_correlation(1e-9f64, 1.0) > 1.0 - 1e-12);
    }

    #[test]
    fn params_round_trip() {
        let (k, _) = convert_params(8f64.sqrt(), 1.0f64).unwrap();
        assert!((k - 1.0).abs() < 1e-15);
        let (k, _) = convert_params(0.568f64, 1.0).unwrap();
        assert!((k - 4.9797).abs() < 5e-4);
        for &(r, s) in &[(0.3f64, 0.2f64), (5.0, 3.0)] {
            let (k, tau) = convert_params(r, s).unwrap();
            let (r2, s2) = range_and_sd(k, tau).unwrap();
            assert!((r - r2).abs() < 1e-12 && (s - s2).abs() < 1e-12);
        }
        assert!(convert_params(0.0, 1.0).is_err());
    }
}
