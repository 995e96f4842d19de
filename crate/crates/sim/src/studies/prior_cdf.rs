//! Prior draws of the leaf CDF on `[0, 1]` for several concentrations.

use polyamix::hbeta::sample_phi_prior;
use serde_json::{json, Value};

use super::Report;
use crate::output::Table;
use crate::{stream_rng, SimResult};

#[derive(Clone, Debug)]
pub struct PriorCdfReport {
    pub a0s: Vec<f64>,
    pub levels: usize,
    pub seed: u64,
    /// `curves[a][k]`: CDF of draw `k` under `a0s[a]` at the right edge of
    /// every leaf.
    pub curves: Vec<Vec<Vec<f64>>>,
    /// Mean absolute deviation of the leaf probabilities from `2^-L`.
    pub dispersion: Vec<f64>,
}

impl PriorCdfReport {
    /// Largest distance between any drawn CDF and the diagonal, per `a0`.
    pub fn max_diagonal_gap(&self) -> Vec<f64> {
        let n = 1usize << self.levels;
        self.curves
            .iter()
            .map(|draws| {
                draws
                    .iter()
                    .flat_map(|c| c.iter().enumerate().map(move |(k, &v)| (v - (k + 1) as f64 / n as f64).abs()))
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

pub fn run_prior_cdf(a0s: &[f64], draws: usize, levels: usize, seed: u64) -> SimResult<PriorCdfReport> {
    let n = 1usize << levels;
    let mut curves = Vec::with_capacity(a0s.len());
    let mut dispersion = Vec::with_capacity(a0s.len());
    for (a, &a0) in a0s.iter().enumerate() {
        let mut rng = stream_rng(seed, a as u64);
        let mut cdfs = Vec::with_capacity(draws);
        let mut deviation = 0.0;
        for _ in 0..draws {
            let pi = sample_phi_prior(levels, a0, &mut rng)?.probabilities();
            deviation += pi.as_slice().iter().map(|p| (p - 1.0 / n as f64).abs()).sum::<f64>() / n as f64;
            let cdf = pi
                .as_slice()
                .iter()
                .scan(0.0, |acc, p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect();
            cdfs.push(cdf);
        }
        curves.push(cdfs);
        dispersion.push(deviation / draws as f64);
    }
    Ok(PriorCdfReport {
        a0s: a0s.to_vec(),
        levels,
        seed,
        curves,
        dispersion,
    })
}

impl Report for PriorCdfReport {
    fn meta(&self) -> Value {
        json!({"study": "prior-cdf", "a0": self.a0s, "levels": self.levels, "seed": self.seed})
    }

    fn tables(&self) -> Vec<(&'static str, Table)> {
        let n = 1usize << self.levels;
        let mut curves = Table::new(&["a0", "draw", "u", "cdf"]);
        for (a, draws) in self.curves.iter().enumerate() {
            for (k, cdf) in draws.iter().enumerate() {
                for (j, v) in cdf.iter().enumerate() {
                    curves.push([
                        self.a0s[a].to_string(),
                        k.to_string(),
                        ((j + 1) as f64 / n as f64).to_string(),
                        v.to_string(),
                    ]);
                }
            }
        }
        let mut summary = Table::new(&["a0", "dispersion", "max_diagonal_gap"]);
        for ((a0, d), g) in self.a0s.iter().zip(&self.dispersion).zip(self.max_diagonal_gap()) {
            summary.push([a0.to_string(), d.to_string(), g.to_string()]);
        }
        vec![("prior_cdf_curves", curves), ("prior_cdf_summary", summary)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispersion_decreases_and_huge_a0_is_diagonal() {
        let r = run_prior_cdf(&[0.1, 1.0, 10.0, 1e6], 50, 10, 3).unwrap();
        assert!(r.dispersion.windows(2).all(|w| w[0] > w[1]), "{:?}", r.dispersion);
        assert!(r.max_diagonal_gap()[3] < 1e-2);
        assert_eq!(r.curves[0].len(), 50);
        assert!((r.curves[1][7][1023] - 1.0).abs() < 1e-9);
    }
}
