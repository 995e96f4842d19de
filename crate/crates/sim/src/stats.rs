//! Goodness-of-fit statistics used by the studies.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GofResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of cell counts against cell probabilities.
/// Cells with zero probability must have zero counts and are dropped.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> GofResult {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            if o > 0 {
                statistic = f64::INFINITY;
            }
            continue;
        }
        let e = p * n as f64;
        statistic += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let df = cells.saturating_sub(1).max(1);
    let p_value = if statistic.is_finite() {
        ChiSquared::new(df as f64).expect("positive df").sf(statistic)
    } else {
        0.0
    };
    GofResult { statistic, df, p_value }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function `Pr(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(statistic: f64, effective_n: f64) -> f64 {
    let root = effective_n.sqrt();
    kolmogorov_sf((root + 0.12 + 0.11 / root) * statistic)
}

/// One-sample Kolmogorov-Smirnov test against `U[0, 1]`.
pub fn ks_uniform(sample: &[f64]) -> KsResult {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let statistic = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            (x - i as f64 / n).max((i + 1) as f64 / n - x)
        })
        .fold(0.0, f64::max);
    KsResult {
        statistic,
        p_value: ks_p_value(statistic, n),
    }
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut statistic) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        statistic = statistic.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsResult {
        statistic,
        p_value: ks_p_value(statistic, na * nb / (na + nb)),
    }
}

/// Standard error of a binomial proportion.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn chi_square_of_exact_counts_is_zero() {
        let r = chi_square_gof(&[25, 25, 50], &[0.25, 0.25, 0.5]);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.df, 2);
        assert_abs_diff_eq!(r.p_value, 1.0);
        assert_eq!(chi_square_gof(&[1, 9], &[0.0, 1.0]).p_value, 0.0);
    }

    #[test]
    fn chi_square_tail_matches_table() {
        // 95th percentile of chi-square with 15 degrees of freedom
        let probs = vec![1.0 / 16.0; 16];
        let r = chi_square_gof(&[0; 16], &probs);
        assert_eq!(r.df, 15);
        let sf = ChiSquared::new(15.0).unwrap().sf(24.9958);
        assert_abs_diff_eq!(sf, 0.05, epsilon = 1e-4);
    }

    #[test]
    fn kolmogorov_critical_values() {
        assert_abs_diff_eq!(kolmogorov_sf(1.3581), 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(kolmogorov_sf(1.6276), 0.01, epsilon = 1e-4);
    }

    #[test]
    fn ks_accepts_uniform_and_rejects_shifted() {
        let mut rng = stream_rng(1, 0);
        let u: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        assert!(ks_uniform(&u).p_value > 0.01);
        let squashed: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(ks_uniform(&squashed).p_value < 1e-6);
        let v: Vec<f64> = (0..1500).map(|_| rng.random()).collect();
        assert!(ks_two_sample(&u, &v).p_value > 0.01);
        assert!(ks_two_sample(&u, &squashed).p_value < 1e-6);
        assert_abs_diff_eq!(ks_two_sample(&u, &u).statistic, 0.0);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
