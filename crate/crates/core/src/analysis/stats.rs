//! Two-sample tests and multiplicity correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::AnalysisError;

/// Smallest sample size accepted by [`ks_two_sample`].
pub const MIN_KS_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sided two-sample Kolmogorov–Smirnov test with the asymptotic
/// Kolmogorov p-value. Ties are handled by stepping over equal values in
/// both samples at once, so discrete data gives a conservative test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult, AnalysisError> {
    if a.len() < MIN_KS_SAMPLES || b.len() < MIN_KS_SAMPLES {
        return Err(AnalysisError::InsufficientSamples {
            got: a.len().min(b.len()),
            need: MIN_KS_SAMPLES,
        });
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(AnalysisError::InvalidInput("NaN in KS sample".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let p = kolmogorov_sf((en + 0.12 + 0.11 / en) * d);
    Ok(TestResult {
        statistic: d,
        p_value: p,
    })
}

/// One-sample Kolmogorov–Smirnov test of `sample` against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult, AnalysisError> {
    if sample.len() < MIN_KS_SAMPLES {
        return Err(AnalysisError::InsufficientSamples {
            got: sample.len(),
            need: MIN_KS_SAMPLES,
        });
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let en = n.sqrt();
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
    })
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series, fast for small λ.
        let pi2 = std::f64::consts::PI.powi(2);
        let y = -pi2 / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| ((2 * k - 1) as f64).powi(2) * y)
            .map(f64::exp)
            .sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Pearson chi-square test of equal proportions in a 2×2 table (one degree
/// of freedom). Tables with an empty margin give `p = 1`.
pub fn chi_square_2x2(hits_a: usize, n_a: usize, hits_b: usize, n_b: usize) -> TestResult {
    let a = hits_a as f64;
    let b = (n_a - hits_a) as f64;
    let c = hits_b as f64;
    let d = (n_b - hits_b) as f64;
    let n = a + b + c + d;
    let margins = (a + b) * (c + d) * (a + c) * (b + d);
    if margins == 0.0 {
        return TestResult {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let x = n * (a * d - b * c).powi(2) / margins;
    TestResult {
        statistic: x,
        p_value: erfc((x / 2.0).sqrt()).clamp(0.0, 1.0),
    }
}

/// Holm step-down adjusted p-values, returned in input order.
pub fn holm_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * p[i]).min(1.0));
        adjusted[i] = running;
    }
    adjusted
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_samples() {
        let a: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn shifted_uniforms_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..5000).map(|_| 0.5 + rng.random::<f64>()).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert!(r.statistic >= 0.45);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn one_sample_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_one_sample(&a, |x| x.clamp(0.0, 1.0)).unwrap().p_value > 0.01);
        let shifted: Vec<f64> = a.iter().map(|x| x * 0.9).collect();
        assert!(ks_one_sample(&shifted, |x| x.clamp(0.0, 1.0)).unwrap().p_value < 1e-6);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            ks_two_sample(&[1.0; 19], &[1.0; 30]),
            Err(AnalysisError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn ks_null_calibration() {
        // Rejection rate at α = 0.05 under the null over 1000 repetitions.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let reps = 1000;
        let rejections = (0..reps)
            .filter(|_| {
                let a: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
                let b: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
                ks_two_sample(&a, &b).unwrap().p_value < 0.05
            })
            .count();
        let rate = rejections as f64 / reps as f64;
        assert!((rate - 0.05).abs() <= 0.02, "rejection rate {rate}");
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Q(λ) reference points of the Kolmogorov distribution.
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 5e-4);
        assert!((kolmogorov_sf(0.5) - 0.9639).abs() < 5e-4);
        // Branches agree at the switch point.
        let lo = kolmogorov_sf(1.18 - 1e-12);
        let hi = kolmogorov_sf(1.18);
        assert!((lo - hi).abs() < 1e-9);
    }

    #[test]
    fn chi_square_cases() {
        let r = chi_square_2x2(50, 100, 50, 100);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(chi_square_2x2(0, 100, 0, 100).p_value, 1.0);
        // 60/100 vs 40/100: X² = 8, p = erfc(2) ≈ 0.004678.
        let r = chi_square_2x2(60, 100, 40, 100);
        assert!((r.statistic - 8.0).abs() < 1e-12);
        assert!((r.p_value - 0.004677734981047266).abs() < 1e-12);
    }

    #[test]
    fn holm_example() {
        let adj = holm_adjust(&[0.01, 0.04, 0.03, 0.5]);
        for (x, y) in adj.iter().zip([0.04, 0.09, 0.09, 0.5]) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
