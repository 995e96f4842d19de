//! Bivariate quantile regression: posterior predictive quantile curves,
//! credible bands, conformity scores and conformal bands, plus a Monte Carlo
//! check of conformal coverage.

use std::collections::BTreeMap;

use polyamix::conformal::{ConformalBand, ConformalConfig, ConformalPredictor, Tail};
use polyamix::predictive::{sample_predictive, MixtureApproximation, PredictiveGrid};
use polyamix::{CredibleBand, SegmentationFamily};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::Report;
use crate::output::Table;
use crate::stats::{binomial_se, ks_uniform, KsResult};
use crate::truth::{QuantRegTruth, TrueDensity};
use crate::{stream_rng, SimError, SimResult};

/// Quantile levels of the reported curves.
pub const CURVE_LEVELS: [f64; 3] = [0.05, 0.5, 0.95];

/// All orderings of four `X` and four `Y` splits.
pub fn quantreg_family() -> SegmentationFamily {
    let splits = BTreeMap::from([(1, 4), (2, 4)]);
    SegmentationFamily::balanced(2, &splits, &[]).expect("valid family")
}

#[derive(Clone, Debug)]
pub struct QuantregConfig {
    pub m: usize,
    pub a0: f64,
    pub draws_per_seg: usize,
    pub n_pred: usize,
    /// Level of the equal-tail credible band.
    pub alpha_credible: f64,
    /// Per-side level of the conformal band.
    pub alpha_conformal: f64,
    /// Points of the `y` grid searched for conformal endpoints; the finest
    /// bin boundaries and midpoints when `None`.
    pub y_grid: Option<usize>,
    /// Whether to compute conformity scores and the conformal band.
    pub conformal: bool,
    pub seed: u64,
}

impl Default for QuantregConfig {
    fn default() -> Self {
        Self {
            m: 100,
            a0: 1.0,
            draws_per_seg: 50,
            n_pred: 2000,
            alpha_credible: 0.10,
            alpha_conformal: 0.05,
            y_grid: None,
            conformal: true,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConformalSummary {
    pub loo_scores: Vec<f64>,
    pub ks: KsResult,
    pub band: ConformalBand,
    /// Largest distance between a conformal endpoint and the matching
    /// credible-band endpoint; infinite if some interval is empty.
    pub max_endpoint_gap: f64,
}

#[derive(Clone, Debug)]
pub struct QuantregReport {
    pub config: QuantregConfig,
    pub observations: Vec<Vec<f64>>,
    pub samples: Vec<Vec<f64>>,
    pub grid: PredictiveGrid,
    /// `CURVE_LEVELS` quantile of each column.
    pub posterior_curves: Vec<Vec<f64>>,
    /// The same curves under the exact posterior predictive.
    pub exact_curves: Vec<Vec<f64>>,
    pub credible: CredibleBand,
    /// Predictive samples per column and how many fall inside the band.
    pub column_totals: Vec<usize>,
    pub column_inside: Vec<usize>,
    pub conformal: Option<ConformalSummary>,
}

impl QuantregReport {
    pub fn inside(&self) -> usize {
        self.column_inside.iter().sum()
    }

    /// Size of one `Y` bin of the predictive grid.
    pub fn cell_height(&self) -> f64 {
        1.0 / self.grid.ny() as f64
    }

    pub fn column_centers(&self) -> Vec<f64> {
        (0..self.grid.nx()).map(|ix| (ix as f64 + 0.5) / self.grid.nx() as f64).collect()
    }
}

pub fn run_quantreg(config: &QuantregConfig) -> SimResult<QuantregReport> {
    if config.draws_per_seg == 0 || config.n_pred == 0 {
        return Err(SimError::Validation("draws per segmentation and sample size must be positive".into()));
    }
    let truth = QuantRegTruth::default();
    let family = quantreg_family();
    let mut rng = stream_rng(config.seed, 0);
    let observations: Vec<Vec<f64>> = (0..config.m).map(|_| truth.sample(&mut rng)).collect();
    let model = polyamix::PosteriorModel::fit(&observations, &family, config.a0)?;
    let mix = MixtureApproximation::build(&model, config.draws_per_seg, &mut rng)?;
    let grid = PredictiveGrid::from_mixture(&mix)?;
    let samples = sample_predictive(&mix, config.n_pred, &mut rng)?.points;
    let posterior_curves = CURVE_LEVELS
        .iter()
        .map(|&q| grid.quantile_curve(q))
        .collect::<polyamix::Result<Vec<_>>>()?;
    let exact = PredictiveGrid::from_model(&model)?;
    let exact_curves = CURVE_LEVELS
        .iter()
        .map(|&q| exact.quantile_curve(q))
        .collect::<polyamix::Result<Vec<_>>>()?;
    let credible = grid.credible_band(config.alpha_credible)?;
    let mut column_totals = vec![0; grid.nx()];
    let mut column_inside = vec![0; grid.nx()];
    for u in &samples {
        let ix = grid.column_of(u[0])?;
        column_totals[ix] += 1;
        column_inside[ix] += usize::from(credible.contains(u));
    }

    let conformal = if config.conformal && config.m > 0 {
        let predictor = ConformalPredictor::new(&observations, ConformalConfig::new(family, config.a0))?;
        let loo_scores = predictor.leave_one_out_scores(Tail::Lower);
        let ks = ks_uniform(&loo_scores);
        let y_grid = match config.y_grid {
            Some(n) if n >= 2 => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
            Some(_) => return Err(SimError::Validation("y grid needs at least 2 points".into())),
            None => predictor.default_y_grid(),
        };
        let centers: Vec<f64> = (0..grid.nx()).map(|ix| (ix as f64 + 0.5) / grid.nx() as f64).collect();
        let band = predictor.band(&centers, config.alpha_conformal, &y_grid)?;
        let max_endpoint_gap = band
            .columns
            .iter()
            .zip(&credible.columns)
            .map(|(c, b)| match (c.lower, c.upper) {
                (Some(lo), Some(hi)) if !c.is_empty() => (lo - b.y_lo).abs().max((hi - b.y_hi).abs()),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max);
        Some(ConformalSummary { loo_scores, ks, band, max_endpoint_gap })
    } else {
        None
    };

    Ok(QuantregReport {
        config: config.clone(),
        observations,
        samples,
        grid,
        posterior_curves,
        exact_curves,
        credible,
        column_totals,
        column_inside,
        conformal,
    })
}

fn point_table(points: &[Vec<f64>]) -> Table {
    let mut t = Table::new(&["u_x", "u_y"]);
    for u in points {
        t.push([u[0].to_string(), u[1].to_string()]);
    }
    t
}

impl Report for QuantregReport {
    fn meta(&self) -> Value {
        let c = &self.config;
        json!({
            "study": "quantreg", "m": c.m, "a0": c.a0, "draws_per_seg": c.draws_per_seg,
            "n_pred": c.n_pred, "alpha_credible": c.alpha_credible,
            "alpha_conformal": c.alpha_conformal, "seed": c.seed,
        })
    }

    fn tables(&self) -> Vec<(&'static str, Table)> {
        let truth = QuantRegTruth::default();
        let mut true_curves = Table::new(&["u_x", "q05", "q50", "q95"]);
        for i in 0..200 {
            let x = (i as f64 + 0.5) / 200.0;
            let q = CURVE_LEVELS.map(|q| truth.conditional_quantile(x, q).to_string());
            true_curves.push([x.to_string(), q[0].clone(), q[1].clone(), q[2].clone()]);
        }
        let mut posterior = Table::new(&["x_lo", "x_hi", "q05", "q50", "q95", "exact_q05", "exact_q50", "exact_q95", "band_lo", "band_hi", "samples", "inside"]);
        for (ix, col) in self.credible.columns.iter().enumerate() {
            posterior.push([
                col.x_lo.to_string(),
                col.x_hi.to_string(),
                self.posterior_curves[0][ix].to_string(),
                self.posterior_curves[1][ix].to_string(),
                self.posterior_curves[2][ix].to_string(),
                self.exact_curves[0][ix].to_string(),
                self.exact_curves[1][ix].to_string(),
                self.exact_curves[2][ix].to_string(),
                col.y_lo.to_string(),
                col.y_hi.to_string(),
                self.column_totals[ix].to_string(),
                self.column_inside[ix].to_string(),
            ]);
        }
        let mut tables = vec![
            ("quantreg_observations", point_table(&self.observations)),
            ("quantreg_samples", point_table(&self.samples)),
            ("quantreg_true_quantiles", true_curves),
            ("quantreg_posterior_quantiles", posterior),
        ];
        if let Some(c) = &self.conformal {
            let mut sorted = c.loo_scores.clone();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len() as f64;
            let mut qq = Table::new(&["uniform", "score"]);
            for (i, s) in sorted.iter().enumerate() {
                qq.push([((i as f64 + 0.5) / n).to_string(), s.to_string()]);
            }
            let mut band = Table::new(&["x", "y_lower", "y_upper", "alpha"]);
            let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            for col in &c.band.columns {
                band.push([col.x.to_string(), fmt(col.lower), fmt(col.upper), c.band.alpha.to_string()]);
            }
            tables.push(("quantreg_score_qq", qq));
            tables.push(("quantreg_conformal_band", band));
        }
        tables
    }
}

#[derive(Clone, Debug)]
pub struct CoverageConfig {
    pub m: usize,
    pub alpha: f64,
    pub trials: usize,
    pub a0: f64,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            m: 100,
            alpha: 0.10,
            trials: 400,
            a0: 1.0,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoverageReport {
    pub config: CoverageConfig,
    /// Lower-tail p-value of the held-out point in each trial.
    pub pvalues: Vec<f64>,
    /// Rank counts behind the p-values.
    pub counts: Vec<usize>,
}

impl CoverageReport {
    /// Share of trials whose held-out point lies in the prediction set.
    pub fn coverage(&self) -> f64 {
        let covered = self.pvalues.iter().filter(|&&p| p > self.config.alpha).count();
        covered as f64 / self.pvalues.len() as f64
    }

    pub fn std_error(&self) -> f64 {
        binomial_se(1.0 - self.config.alpha, self.pvalues.len())
    }

    /// Whether every p-value is `k / (m + 1)` for an integer `k`.
    pub fn on_lattice(&self) -> bool {
        let n = (self.config.m + 1) as f64;
        self.pvalues
            .iter()
            .zip(&self.counts)
            .all(|(p, &k)| k <= self.config.m && (p * n - k as f64).abs() < 1e-9)
    }
}

/// Fits on `m` fresh points per trial and records the lower-tail p-value of
/// one more independent point.
pub fn run_conformal_coverage(config: &CoverageConfig) -> SimResult<CoverageReport> {
    if config.trials == 0 || config.m == 0 {
        return Err(SimError::Validation("trials and m must be positive".into()));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(SimError::Validation(format!("alpha must lie in (0, 1), got {}", config.alpha)));
    }
    let truth = QuantRegTruth::default();
    let family = quantreg_family();
    let results = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> SimResult<(f64, usize)> {
            let mut rng = stream_rng(config.seed, trial as u64);
            let train: Vec<Vec<f64>> = (0..config.m).map(|_| truth.sample(&mut rng)).collect();
            let test = truth.sample(&mut rng);
            let predictor = ConformalPredictor::new(&train, ConformalConfig::new(family.clone(), config.a0))?;
            let p = predictor.pvalue(&test, Tail::Lower)?;
            Ok((p.value(), p.count))
        })
        .collect::<SimResult<Vec<_>>>()?;
    let (pvalues, counts) = results.into_iter().unzip();
    Ok(CoverageReport { config: config.clone(), pvalues, counts })
}

impl Report for CoverageReport {
    fn meta(&self) -> Value {
        let c = &self.config;
        json!({"study": "conformal", "m": c.m, "alpha": c.alpha, "trials": c.trials, "a0": c.a0, "seed": c.seed})
    }

    fn tables(&self) -> Vec<(&'static str, Table)> {
        let mut trials = Table::new(&["trial", "count", "p_value", "covered"]);
        for (i, (p, k)) in self.pvalues.iter().zip(&self.counts).enumerate() {
            trials.push([i.to_string(), k.to_string(), p.to_string(), (*p > self.config.alpha).to_string()]);
        }
        let mut summary = Table::new(&["coverage", "std_error", "on_lattice"]);
        summary.push([self.coverage().to_string(), self.std_error().to_string(), self.on_lattice().to_string()]);
        vec![("conformal_trials", trials), ("conformal_summary", summary)]
    }
}
