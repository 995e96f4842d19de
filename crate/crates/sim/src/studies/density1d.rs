//! One-dimensional density estimation: hBeta posterior predictive against the
//! interval-counts histogram on canonical segmentations of several depths.

use polyamix::hbeta::{predictive_leaf_probabilities, CountsTree};
use polyamix::{CubeBox, Segmentation};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::Report;
use crate::output::Table;
use crate::truth::{Piecewise1D, TrueDensity};
use crate::{stream_rng, SimResult, SimError};

#[derive(Clone, Debug)]
pub struct Sim1dConfig {
    pub m: usize,
    pub a0: f64,
    pub runs: usize,
    pub levels: Vec<usize>,
    /// Number of midpoints on which errors are evaluated.
    pub grid: usize,
    pub seed: u64,
}

impl Default for Sim1dConfig {
    fn default() -> Self {
        Self {
            m: 50,
            a0: 1.0,
            runs: 500,
            levels: vec![3, 5, 10],
            grid: 1024,
            seed: 1,
        }
    }
}

/// Pointwise summaries of both estimators at one depth.
#[derive(Clone, Debug)]
pub struct LevelErrors {
    pub level: usize,
    pub mean_hbeta: Vec<f64>,
    pub rmse_hbeta: Vec<f64>,
    pub mean_counts: Vec<f64>,
    pub rmse_counts: Vec<f64>,
    /// Leaf average of the true density, the best any depth-`L` step function can do.
    pub projection: Vec<f64>,
}

impl LevelErrors {
    /// Grid average of `rmse_counts / rmse_hbeta`.
    pub fn mean_rmse_ratio(&self) -> f64 {
        let ratios: Vec<f64> = self
            .rmse_counts
            .iter()
            .zip(&self.rmse_hbeta)
            .filter(|(_, h)| **h > 0.0)
            .map(|(c, h)| c / h)
            .collect();
        ratios.iter().sum::<f64>() / ratios.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct Sim1dReport {
    pub config: Sim1dConfig,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub levels: Vec<LevelErrors>,
    truth_model: Piecewise1D,
}

impl Sim1dReport {
    pub fn level(&self, level: usize) -> Option<&LevelErrors> {
        self.levels.iter().find(|e| e.level == level)
    }

    /// Largest `|projection - truth|` over grid points whose leaf lies in a
    /// constant piece of the true density.
    pub fn constant_region_approximation_error(&self, level: usize) -> Option<f64> {
        let errors = self.level(level)?;
        let n = (1usize << level) as f64;
        let worst = self
            .grid
            .iter()
            .enumerate()
            .filter(|(_, &u)| {
                let leaf = (u * n).floor();
                self.truth_model.is_constant_on(leaf / n, (leaf + 1.0) / n)
            })
            .map(|(i, _)| (errors.projection[i] - self.truth[i]).abs())
            .fold(0.0, f64::max);
        Some(worst)
    }
}

#[derive(Clone)]
struct Accumulator {
    sum_h: Vec<f64>,
    sq_h: Vec<f64>,
    sum_c: Vec<f64>,
    sq_c: Vec<f64>,
}

impl Accumulator {
    fn zeros(n: usize) -> Self {
        Self {
            sum_h: vec![0.0; n],
            sq_h: vec![0.0; n],
            sum_c: vec![0.0; n],
            sq_c: vec![0.0; n],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in [
            (&mut self.sum_h, &other.sum_h),
            (&mut self.sq_h, &other.sq_h),
            (&mut self.sum_c, &other.sum_c),
            (&mut self.sq_c, &other.sq_c),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self
    }
}

pub fn run_sim1d(config: &Sim1dConfig) -> SimResult<Sim1dReport> {
    if config.runs == 0 || config.m == 0 || config.grid == 0 || config.levels.is_empty() {
        return Err(SimError::Validation("runs, m, grid and levels must be positive".into()));
    }
    let truth_model = Piecewise1D::default();
    let grid: Vec<f64> = (0..config.grid).map(|i| (i as f64 + 0.5) / config.grid as f64).collect();
    let truth: Vec<f64> = grid.iter().map(|&u| truth_model.density(&[u])).collect();
    let segs: Vec<Segmentation> = config
        .levels
        .iter()
        .map(|&l| Segmentation::new(vec![1; l], 1))
        .collect::<polyamix::Result<_>>()?;
    let g = grid.len();

    let per_level: Vec<Accumulator> = (0..config.runs)
        .into_par_iter()
        .map(|run| -> SimResult<Vec<Accumulator>> {
            let mut rng = stream_rng(config.seed, run as u64);
            let data: Vec<Vec<f64>> = (0..config.m).map(|_| truth_model.sample(&mut rng)).collect();
            segs.iter()
                .map(|seg| {
                    let counts = CountsTree::from_points(&data, seg)?;
                    let probs = predictive_leaf_probabilities(&counts, config.a0)?;
                    let n = seg.leaf_count() as f64;
                    let mut acc = Accumulator::zeros(g);
                    for (i, &u) in grid.iter().enumerate() {
                        let leaf = ((u * n) as usize).min(seg.leaf_count() - 1);
                        let h = probs.as_slice()[leaf] * n;
                        let c = counts.leaves()[leaf] as f64 * n / config.m as f64;
                        acc.sum_h[i] += h;
                        acc.sq_h[i] += (h - truth[i]).powi(2);
                        acc.sum_c[i] += c;
                        acc.sq_c[i] += (c - truth[i]).powi(2);
                    }
                    Ok(acc)
                })
                .collect()
        })
        .try_reduce(
            || vec![Accumulator::zeros(g); segs.len()],
            |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()),
        )?;

    let runs = config.runs as f64;
    let levels = config
        .levels
        .iter()
        .zip(&segs)
        .zip(per_level)
        .map(|((&level, seg), acc)| {
            let n = seg.leaf_count() as f64;
            let projection = grid
                .iter()
                .map(|&u| {
                    let leaf = (u * n).floor();
                    let b = CubeBox { lo: vec![leaf / n], hi: vec![(leaf + 1.0) / n] };
                    truth_model.box_mass(&b) * n
                })
                .collect();
            LevelErrors {
                level,
                mean_hbeta: acc.sum_h.iter().map(|s| s / runs).collect(),
                rmse_hbeta: acc.sq_h.iter().map(|s| (s / runs).sqrt()).collect(),
                mean_counts: acc.sum_c.iter().map(|s| s / runs).collect(),
                rmse_counts: acc.sq_c.iter().map(|s| (s / runs).sqrt()).collect(),
                projection,
            }
        })
        .collect();
    Ok(Sim1dReport {
        config: config.clone(),
        grid,
        truth,
        levels,
        truth_model,
    })
}

impl Report for Sim1dReport {
    fn meta(&self) -> Value {
        let c = &self.config;
        json!({"study": "sim1d", "m": c.m, "a0": c.a0, "runs": c.runs, "levels": c.levels, "grid": c.grid, "seed": c.seed})
    }

    fn tables(&self) -> Vec<(&'static str, Table)> {
        let mut curves = Table::new(&[
            "level", "u", "truth", "projection", "mean_hbeta", "rmse_hbeta", "mean_counts", "rmse_counts",
        ]);
        for e in &self.levels {
            for (i, u) in self.grid.iter().enumerate() {
                curves.push([
                    e.level.to_string(),
                    u.to_string(),
                    self.truth[i].to_string(),
                    e.projection[i].to_string(),
                    e.mean_hbeta[i].to_string(),
                    e.rmse_hbeta[i].to_string(),
                    e.mean_counts[i].to_string(),
                    e.rmse_counts[i].to_string(),
                ]);
            }
        }
        let mut summary = Table::new(&["level", "mean_rmse_ratio", "constant_region_error"]);
        for e in &self.levels {
            summary.push([
                e.level.to_string(),
                e.mean_rmse_ratio().to_string(),
                self.constant_region_approximation_error(e.level).unwrap_or(f64::NAN).to_string(),
            ]);
        }
        vec![("sim1d_curves", curves), ("sim1d_summary", summary)]
    }
}
