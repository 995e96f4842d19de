//! Two-dimensional study on the logistic density: approximation error of
//! four depth-4 segmentations, Pearson residuals of the posterior predictive
//! leaf probabilities and the posterior weights of the segmentations.

use polyamix::hbeta::predictive_leaf_probabilities;
use polyamix::{PosteriorModel, Segmentation, SegmentationFamily};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::Report;
use crate::output::Table;
use crate::stats::median;
use crate::truth::{Logistic2D, TrueDensity};
use crate::{stream_rng, SimError, SimResult};

/// `(X,X,X,X)`, `(Y,Y,Y,Y)`, `(X,X,Y,Y)`, `(Y,Y,X,X)`.
pub const SIM2D_MEMBERS: [[usize; 4]; 4] = [[1, 1, 1, 1], [2, 2, 2, 2], [1, 1, 2, 2], [2, 2, 1, 1]];

pub fn sim2d_family() -> SegmentationFamily {
    SegmentationFamily::new(
        SIM2D_MEMBERS
            .iter()
            .map(|d| Segmentation::new(d.to_vec(), 2).expect("valid member"))
            .collect(),
    )
    .expect("distinct members")
}

/// Root mean squared difference between the truth and its leaf average,
/// integrated on an `n x n` midpoint grid.
pub fn approximation_error<T: TrueDensity>(truth: &T, seg: &Segmentation, n: usize) -> f64 {
    let leaf_density: Vec<f64> = (0..seg.leaf_count())
        .map(|leaf| {
            let b = seg.leaf_box(leaf);
            truth.box_mass(&b) / b.volume()
        })
        .collect();
    let step = 1.0 / n as f64;
    let sum: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = (i as f64 + 0.5) * step;
            (0..n)
                .map(|j| {
                    let u = [x, (j as f64 + 0.5) * step];
                    let leaf = seg.leaf_index(&u).expect("grid point inside the cube");
                    (leaf_density[leaf] - truth.density(&u)).powi(2)
                })
                .sum::<f64>()
        })
        .sum();
    (sum * step * step).sqrt()
}

/// Approximation errors of the four members on the default logistic truth.
pub fn approximation_errors(n: usize) -> Vec<f64> {
    let truth = Logistic2D::default();
    sim2d_family()
        .members()
        .iter()
        .map(|seg| approximation_error(&truth, seg, n))
        .collect()
}

/// Pearson residuals `sqrt(m) (p_hat - p) / sqrt(p)` of leaf probabilities.
pub fn pearson_residuals(estimate: &[f64], truth: &[f64], m: usize) -> Vec<f64> {
    let scale = (m as f64).sqrt();
    estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| scale * (e - t) / t.sqrt())
        .collect()
}

#[derive(Clone, Debug)]
pub struct Sim2dConfig {
    pub m: usize,
    pub a0: f64,
    pub runs: usize,
    pub seed: u64,
    /// Side of the midpoint grid used for the approximation errors.
    pub grid: usize,
}

impl Default for Sim2dConfig {
    fn default() -> Self {
        Self {
            m: 50,
            a0: 1.0,
            runs: 500,
            seed: 1,
            grid: 1024,
        }
    }
}

/// Per-run outcome for one segmentation.
#[derive(Clone, Copy, Debug)]
pub struct MemberRun {
    pub x2: f64,
    pub mean_abs_residual: f64,
    /// `X^2` of the interval-counts estimator for comparison.
    pub x2_counts: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct Sim2dReport {
    pub config: Sim2dConfig,
    pub labels: Vec<String>,
    pub approximation: Vec<f64>,
    /// `runs[r][j]`: outcome of member `j` in run `r`.
    pub runs: Vec<Vec<MemberRun>>,
}

impl Sim2dReport {
    fn column(&self, j: usize, f: impl Fn(&MemberRun) -> f64) -> Vec<f64> {
        self.runs.iter().map(|r| f(&r[j])).collect()
    }

    pub fn median_weights(&self) -> Vec<f64> {
        (0..self.labels.len()).map(|j| median(&self.column(j, |r| r.weight))).collect()
    }

    pub fn median_x2(&self) -> Vec<f64> {
        (0..self.labels.len()).map(|j| median(&self.column(j, |r| r.x2))).collect()
    }
}

pub fn run_sim2d(config: &Sim2dConfig) -> SimResult<Sim2dReport> {
    if config.runs == 0 || config.m == 0 {
        return Err(SimError::Validation("runs and m must be positive".into()));
    }
    let truth = Logistic2D::default();
    let family = sim2d_family();
    let true_probs: Vec<Vec<f64>> = family
        .members()
        .iter()
        .map(|seg| (0..seg.leaf_count()).map(|leaf| truth.box_mass(&seg.leaf_box(leaf))).collect())
        .collect();
    let runs = (0..config.runs)
        .into_par_iter()
        .map(|run| -> SimResult<Vec<MemberRun>> {
            let mut rng = stream_rng(config.seed, run as u64);
            let data: Vec<Vec<f64>> = (0..config.m).map(|_| truth.sample(&mut rng)).collect();
            let model = PosteriorModel::fit(&data, &family, config.a0)?;
            let weights = model.weights();
            (0..family.len())
                .map(|j| {
                    let counts = model.counts(j);
                    let probs = predictive_leaf_probabilities(counts, config.a0)?;
                    let r = pearson_residuals(probs.as_slice(), &true_probs[j], config.m);
                    let empirical: Vec<f64> =
                        counts.leaves().iter().map(|&c| c as f64 / config.m as f64).collect();
                    let rc = pearson_residuals(&empirical, &true_probs[j], config.m);
                    Ok(MemberRun {
                        x2: r.iter().map(|v| v * v).sum(),
                        mean_abs_residual: r.iter().map(|v| v.abs()).sum::<f64>() / r.len() as f64,
                        x2_counts: rc.iter().map(|v| v * v).sum(),
                        weight: weights[j],
                    })
                })
                .collect()
        })
        .collect::<SimResult<Vec<_>>>()?;
    Ok(Sim2dReport {
        config: config.clone(),
        labels: family.members().iter().map(ToString::to_string).collect(),
        approximation: family
            .members()
            .iter()
            .map(|seg| approximation_error(&truth, seg, config.grid))
            .collect(),
        runs,
    })
}

impl Report for Sim2dReport {
    fn meta(&self) -> Value {
        let c = &self.config;
        json!({"study": "sim2d", "m": c.m, "a0": c.a0, "runs": c.runs, "seed": c.seed, "grid": c.grid})
    }

    fn tables(&self) -> Vec<(&'static str, Table)> {
        let mut per_run = Table::new(&["run", "segmentation", "x2", "mean_abs_residual", "x2_counts", "weight"]);
        for (r, run) in self.runs.iter().enumerate() {
            for (j, o) in run.iter().enumerate() {
                per_run.push([
                    r.to_string(),
                    self.labels[j].clone(),
                    o.x2.to_string(),
                    o.mean_abs_residual.to_string(),
                    o.x2_counts.to_string(),
                    o.weight.to_string(),
                ]);
            }
        }
        let mut summary = Table::new(&["segmentation", "approximation_rmse", "median_x2", "median_weight"]);
        let (x2, w) = (self.median_x2(), self.median_weights());
        for j in 0..self.labels.len() {
            summary.push([
                self.labels[j].clone(),
                self.approximation[j].to_string(),
                x2[j].to_string(),
                w[j].to_string(),
            ]);
        }
        vec![("sim2d_runs", per_run), ("sim2d_summary", summary)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x2_is_the_sum_of_squared_residuals() {
        let r = pearson_residuals(&[0.3, 0.7], &[0.5, 0.5], 10);
        let x2: f64 = r.iter().map(|v| v * v).sum();
        // 10 * (0.04/0.5 + 0.04/0.5)
        assert!((x2 - 1.6).abs() < 1e-12);
    }

    #[test]
    fn small_run_is_reproducible() {
        let config = Sim2dConfig { runs: 4, grid: 64, ..Default::default() };
        let a = run_sim2d(&config).unwrap();
        let b = run_sim2d(&config).unwrap();
        assert_eq!(a.median_weights(), b.median_weights());
        assert_eq!(a.labels, ["(X,X,X,X)", "(Y,Y,Y,Y)", "(X,X,Y,Y)", "(Y,Y,X,X)"]);
    }
}
