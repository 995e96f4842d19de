//! Full conformal prediction sets for `Y` given `X` in two dimensions.
//!
//! The conformity score of a point `u = (u_x, u_y)` against a training set is
//! the posterior predictive conditional CDF `Pr(U_y <= u_y | U_x = u_x)`
//! ([`Tail::Lower`]) or its complement `Pr(U_y >= u_y | U_x = u_x)`
//! ([`Tail::Upper`]). The p-value of a candidate compares its score on the
//! training set with the score of each training point `u_i` on the training
//! set where `u_i` is replaced by the candidate:
//!
//! ```text
//! p = #{ i <= m : a_i <= a_{m+1} } / (m + 1)
//! ```
//!
//! Every swapped training set is obtained from the fitted model by an
//! incremental count edit, so a p-value costs `O(m * L * |family|)` plus the
//! score evaluations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::PosteriorModel;
use crate::predictive::{column_cdf, MixtureApproximation, DEFAULT_DRAWS_PER_MEMBER};
use crate::segmentation::{check_point, SegmentationFamily};

/// Which side of the conditional distribution the score measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    /// `Pr(U_y <= u_y | U_x = u_x)`; small for points low in their column.
    Lower,
    /// `Pr(U_y >= u_y | U_x = u_x)`; small for points high in their column.
    Upper,
}

/// How the predictive conditional CDF is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    /// Exact posterior predictive (posterior means of the branch
    /// probabilities); the limit of the mixture as draws per member grow.
    Exact,
    /// Monte Carlo mixture with `draws_per_member` draws; every training set
    /// is scored with a mixture built from the same `seed`.
    Mixture { draws_per_member: usize, seed: u64 },
}

impl ScoreMethod {
    pub fn mixture(seed: u64) -> Self {
        Self::Mixture {
            draws_per_member: DEFAULT_DRAWS_PER_MEMBER,
            seed,
        }
    }
}

/// How band endpoints are read off the `y` grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointMode {
    /// Extreme grid points with `p > alpha`.
    #[default]
    GridPoint,
    /// Linear interpolation of `p` between the last excluded and the first
    /// included grid point.
    Interpolated,
}

#[derive(Clone, Debug)]
pub struct ConformalConfig {
    pub family: SegmentationFamily,
    pub a0: f64,
    pub method: ScoreMethod,
    pub endpoints: EndpointMode,
}

impl ConformalConfig {
    pub fn new(family: SegmentationFamily, a0: f64) -> Self {
        Self {
            family,
            a0,
            method: ScoreMethod::Exact,
            endpoints: EndpointMode::GridPoint,
        }
    }
}

/// A conformity score in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ConformityScore(pub f64);

impl ConformityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Rank statistic `count / (m + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PValue {
    pub count: usize,
    pub m: usize,
}

impl PValue {
    pub fn value(self) -> f64 {
        if self.m == 0 {
            // nothing to rank against: every candidate is conforming
            1.0
        } else {
            self.count as f64 / (self.m + 1) as f64
        }
    }
}

/// Conformal interval at one `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalColumn {
    pub x: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub p_lower: Vec<f64>,
    pub p_upper: Vec<f64>,
}

impl ConformalColumn {
    pub fn is_empty(&self) -> bool {
        self.lower.is_none() || self.upper.is_none()
    }

    pub fn contains(&self, y: f64) -> bool {
        matches!((self.lower, self.upper), (Some(lo), Some(hi)) if lo <= y && y <= hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalBand {
    pub alpha: f64,
    pub y_grid: Vec<f64>,
    pub columns: Vec<ConformalColumn>,
}

impl ConformalBand {
    /// Writes `x,y_lower,y_upper,alpha`; empty intervals leave both blank.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
        wtr.write_record(["x", "y_lower", "y_upper", "alpha"]).map_err(io)?;
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for c in &self.columns {
            let (lo, hi) = if c.is_empty() { (None, None) } else { (c.lower, c.upper) };
            wtr.write_record([c.x.to_string(), fmt(lo), fmt(hi), self.alpha.to_string()])
                .map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// Conformal machinery around one fitted training set.
#[derive(Clone, Debug)]
pub struct ConformalPredictor {
    config: ConformalConfig,
    model: PosteriorModel,
    points: Vec<Vec<f64>>,
    leaves: Vec<Vec<usize>>,
    nx: usize,
    ny: usize,
}

impl ConformalPredictor {
    pub fn new<P: AsRef<[f64]> + Sync>(train: &[P], config: ConformalConfig) -> Result<Self> {
        if config.family.ambient_dim() != 2 {
            return Err(Error::NotBivariate(config.family.ambient_dim()));
        }
        if let ScoreMethod::Mixture { draws_per_member: 0, .. } = config.method {
            return Err(Error::InvalidArgument("draws per member must be at least 1".into()));
        }
        let model = PosteriorModel::fit(train, &config.family, config.a0)?;
        let points: Vec<Vec<f64>> = train.iter().map(|u| u.as_ref().to_vec()).collect();
        let leaves = points
            .iter()
            .map(|u| model.leaves_of(u))
            .collect::<Result<Vec<_>>>()?;
        let splits = config.family.common_refinement();
        Ok(Self {
            nx: 1 << splits[0],
            ny: 1 << splits[1],
            config,
            model,
            points,
            leaves,
        })
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn model(&self) -> &PosteriorModel {
        &self.model
    }

    /// Bin boundaries and midpoints of the finest `Y` grid: `2 * ny + 1` points.
    pub fn default_y_grid(&self) -> Vec<f64> {
        let n = 2 * self.ny;
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }

    /// Score of `u` against the training set.
    pub fn score(&self, u: &[f64], tail: Tail) -> Result<ConformityScore> {
        check_point(u, 2)?;
        let cdf = conditional_cdf(&self.model, &self.config.method, u, self.nx, self.ny);
        Ok(ConformityScore(oriented(cdf, tail)))
    }

    /// Lower- and upper-tail p-values of `candidate`.
    pub fn pvalues(&self, candidate: &[f64]) -> Result<(PValue, PValue)> {
        let mut model = self.model.clone();
        self.pvalues_with(&mut model, candidate)
    }

    pub fn pvalue(&self, candidate: &[f64], tail: Tail) -> Result<PValue> {
        let (lower, upper) = self.pvalues(candidate)?;
        Ok(match tail {
            Tail::Lower => lower,
            Tail::Upper => upper,
        })
    }

    /// Candidate CDF value and the CDF value of every training point on its
    /// swapped training set.
    fn swapped_cdfs(&self, model: &mut PosteriorModel, candidate: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_point(candidate, 2)?;
        let (nx, ny, method) = (self.nx, self.ny, &self.config.method);
        let own = conditional_cdf(model, method, candidate, nx, ny);
        let cand_leaves = model.leaves_of(candidate)?;
        let others = self
            .points
            .iter()
            .zip(&self.leaves)
            .map(|(u, leaves)| {
                model.with_edit(Some(leaves), Some(&cand_leaves), |swapped| {
                    conditional_cdf(swapped, method, u, nx, ny)
                })
            })
            .collect();
        Ok((own, others))
    }

    fn pvalues_with(&self, model: &mut PosteriorModel, candidate: &[f64]) -> Result<(PValue, PValue)> {
        let (own, others) = self.swapped_cdfs(model, candidate)?;
        let m = self.m();
        let count = |tail| {
            let a = oriented(own, tail);
            others.iter().filter(|&&c| oriented(c, tail) <= a).count()
        };
        Ok((
            PValue { count: count(Tail::Lower), m },
            PValue { count: count(Tail::Upper), m },
        ))
    }

    /// Score of every training point on the training set without it.
    pub fn leave_one_out_scores(&self, tail: Tail) -> Vec<f64> {
        let (nx, ny, method) = (self.nx, self.ny, &self.config.method);
        (0..self.m())
            .into_par_iter()
            .map_init(
                || self.model.clone(),
                |model, i| {
                    model.with_edit(Some(&self.leaves[i]), None, |rest| {
                        oriented(conditional_cdf(rest, method, &self.points[i], nx, ny), tail)
                    })
                },
            )
            .collect()
    }

    /// Two-sided band: lower endpoints from [`Tail::Lower`] p-values, upper
    /// endpoints from [`Tail::Upper`] p-values, each at level `alpha`.
    pub fn band(&self, x_values: &[f64], alpha: f64, y_grid: &[f64]) -> Result<ConformalBand> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidLevel(alpha));
        }
        if y_grid.is_empty() || y_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("y grid must be nonempty and increasing".into()));
        }
        for &x in x_values {
            check_point(&[x, 0.0], 2)?;
        }
        for &y in y_grid {
            check_point(&[0.0, y], 2)?;
        }
        let items: Vec<(usize, usize)> = (0..x_values.len())
            .flat_map(|i| (0..y_grid.len()).map(move |k| (i, k)))
            .collect();
        let pvals = items
            .par_iter()
            .map_init(
                || self.model.clone(),
                |model, &(i, k)| {
                    self.pvalues_with(model, &[x_values[i], y_grid[k]])
                        .map(|(lo, hi)| (lo.value(), hi.value()))
                },
            )
            .collect::<Result<Vec<_>>>()?;
        let columns = x_values
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let row = &pvals[i * y_grid.len()..(i + 1) * y_grid.len()];
                let p_lower: Vec<f64> = row.iter().map(|p| p.0).collect();
                let p_upper: Vec<f64> = row.iter().map(|p| p.1).collect();
                let mode = self.config.endpoints;
                let mut lower = lower_endpoint(y_grid, &p_lower, alpha, mode);
                let mut upper = upper_endpoint(y_grid, &p_upper, alpha, mode);
                if matches!((lower, upper), (Some(lo), Some(hi)) if lo > hi) {
                    lower = None;
                    upper = None;
                }
                ConformalColumn { x, lower, upper, p_lower, p_upper }
            })
            .collect();
        Ok(ConformalBand {
            alpha,
            y_grid: y_grid.to_vec(),
            columns,
        })
    }
}

fn oriented(cdf: f64, tail: Tail) -> f64 {
    match tail {
        Tail::Lower => cdf,
        Tail::Upper => 1.0 - cdf,
    }
}

fn lower_endpoint(ys: &[f64], p: &[f64], alpha: f64, mode: EndpointMode) -> Option<f64> {
    let k = p.iter().position(|&v| v > alpha)?;
    Some(match mode {
        EndpointMode::Interpolated if k > 0 => crossing(ys[k - 1], ys[k], p[k - 1], p[k], alpha),
        _ => ys[k],
    })
}

fn upper_endpoint(ys: &[f64], p: &[f64], alpha: f64, mode: EndpointMode) -> Option<f64> {
    let k = p.iter().rposition(|&v| v > alpha)?;
    Some(match mode {
        EndpointMode::Interpolated if k + 1 < ys.len() => {
            crossing(ys[k + 1], ys[k], p[k + 1], p[k], alpha)
        }
        _ => ys[k],
    })
}

/// Point between `y_out` (p at most alpha) and `y_in` (p above alpha) where
/// the linear interpolant of p reaches alpha.
fn crossing(y_out: f64, y_in: f64, p_out: f64, p_in: f64, alpha: f64) -> f64 {
    let t = ((alpha - p_out) / (p_in - p_out)).clamp(0.0, 1.0);
    y_out + t * (y_in - y_out)
}

/// `Pr(U_y <= u_y | U_x in the column of u_x)` under `model`.
fn conditional_cdf(model: &PosteriorModel, method: &ScoreMethod, u: &[f64], nx: usize, ny: usize) -> f64 {
    let ix = ((u[0] * nx as f64) as usize).min(nx - 1);
    let profile = match *method {
        ScoreMethod::Exact => exact_column(model, ix, nx, ny),
        ScoreMethod::Mixture { draws_per_member, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mix = MixtureApproximation::build(model, draws_per_member, &mut rng)
                .expect("draw count validated");
            mixture_column(&mix, ix, nx, ny)
        }
    };
    column_cdf(&profile, u[1]).expect("positive concentration keeps every column occupied")
}

/// Predictive cell masses in column `ix` of the `nx x ny` grid.
pub(crate) fn exact_column(model: &PosteriorModel, ix: usize, nx: usize, ny: usize) -> Vec<f64> {
    let mut out = vec![0.0; ny];
    let a0 = model.a0();
    for (i, seg) in model.family().members().iter().enumerate() {
        let w = model.log_weights()[i].exp();
        if w == 0.0 {
            continue;
        }
        let counts = model.counts(i);
        let depth = seg.depth();
        let mut stack = vec![(0usize, 0usize, w, 0usize, nx, 0usize, ny)];
        while let Some((level, node, mass, x0, xl, y0, yl)) = stack.pop() {
            let n = counts.get(level, node);
            if level == depth || n == 0 {
                // uniform below an empty node
                let share = mass / (xl * yl) as f64;
                out[y0..y0 + yl].iter_mut().for_each(|c| *c += share);
                continue;
            }
            let denom = n as f64 + 2.0 * a0;
            let left = counts.get(level + 1, 2 * node) as f64;
            let (ml, mr) = (mass * (left + a0) / denom, mass * (n as f64 - left + a0) / denom);
            let (l, r) = (2 * node, 2 * node + 1);
            if seg.axis(level + 1) == 0 {
                let half = xl / 2;
                if ix < x0 + half {
                    stack.push((level + 1, l, ml, x0, half, y0, yl));
                } else {
                    stack.push((level + 1, r, mr, x0 + half, half, y0, yl));
                }
            } else {
                let half = yl / 2;
                stack.push((level + 1, l, ml, x0, xl, y0, half));
                stack.push((level + 1, r, mr, x0, xl, y0 + half, half));
            }
        }
    }
    out
}

fn mixture_column(mix: &MixtureApproximation, ix: usize, nx: usize, ny: usize) -> Vec<f64> {
    let splits = [nx.trailing_zeros() as usize, ny.trailing_zeros() as usize];
    let mut out = vec![0.0; ny];
    for (i, seg) in mix.family().members().iter().enumerate() {
        let w = mix.member_weights()[i];
        let probs = mix.member_mean_probs(i);
        for (leaf, &p) in probs.iter().enumerate() {
            let r = seg.leaf_cell_ranges(leaf, &splits);
            if ix < r[0].0 || ix >= r[0].1 {
                continue;
            }
            let share = w * p / ((r[0].1 - r[0].0) * (r[1].1 - r[1].0)) as f64;
            out[r[1].0..r[1].1].iter_mut().for_each(|c| *c += share);
        }
    }
    out
}

/// Score of `u` against `train`.
pub fn conformity_score<P: AsRef<[f64]> + Sync>(
    train: &[P],
    u: &[f64],
    tail: Tail,
    config: &ConformalConfig,
) -> Result<ConformityScore> {
    ConformalPredictor::new(train, config.clone())?.score(u, tail)
}

/// p-value of `candidate` against `train`.
pub fn conformal_pvalue<P: AsRef<[f64]> + Sync>(
    train: &[P],
    candidate: &[f64],
    tail: Tail,
    config: &ConformalConfig,
) -> Result<PValue> {
    ConformalPredictor::new(train, config.clone())?.pvalue(candidate, tail)
}

/// Band at every `x` on a `y_grid_size`-point uniform grid including both
/// ends, or on the default grid when `y_grid_size` is `None`.
pub fn conformal_band<P: AsRef<[f64]> + Sync>(
    train: &[P],
    x_values: &[f64],
    alpha: f64,
    y_grid_size: Option<usize>,
    config: &ConformalConfig,
) -> Result<ConformalBand> {
    let predictor = ConformalPredictor::new(train, config.clone())?;
    let grid = match y_grid_size {
        None => predictor.default_y_grid(),
        Some(n) if n >= 2 => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
        Some(n) => return Err(Error::InvalidArgument(format!("y grid of {n} points"))),
    };
    predictor.band(x_values, alpha, &grid)
}

/// Leave-one-out scores of every training point.
pub fn leave_one_out_scores<P: AsRef<[f64]> + Sync>(
    train: &[P],
    tail: Tail,
    config: &ConformalConfig,
) -> Result<Vec<f64>> {
    Ok(ConformalPredictor::new(train, config.clone())?.leave_one_out_scores(tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictive::PredictiveGrid;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn family(splits: usize) -> SegmentationFamily {
        SegmentationFamily::balanced(2, &BTreeMap::from([(1, splits), (2, splits)]), &[]).unwrap()
    }

    fn sample(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let x: f64 = rng.random();
                let y = (0.3 + 0.4 * x + 0.2 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
                vec![x, y]
            })
            .collect()
    }

    #[test]
    fn empty_training_set_scores_uniformly() {
        let cfg = ConformalConfig::new(family(2), 1.0);
        let none: Vec<Vec<f64>> = vec![];
        for y in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let s = conformity_score(&none, &[0.4, y], Tail::Lower, &cfg).unwrap();
            assert_abs_diff_eq!(s.value(), y, epsilon = 1e-12);
        }
        let band = conformal_band(&none, &[0.1, 0.9], 0.1, None, &cfg).unwrap();
        for c in &band.columns {
            assert_eq!((c.lower, c.upper), (Some(0.0), Some(1.0)));
        }
    }

    #[test]
    fn top_of_column_scores_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = sample(40, &mut rng);
        let p = ConformalPredictor::new(&data, ConformalConfig::new(family(3), 1.0)).unwrap();
        assert_abs_diff_eq!(p.score(&[0.3, 1.0], Tail::Lower).unwrap().value(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.score(&[0.3, 0.0], Tail::Lower).unwrap().value(), 0.0, epsilon = 1e-12);
        assert!(p.score(&[0.3, 1.1], Tail::Lower).is_err());
    }

    #[test]
    fn exact_column_matches_predictive_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = sample(60, &mut rng);
        let fam = family(3);
        let model = PosteriorModel::fit(&data, &fam, 0.7).unwrap();
        let grid = PredictiveGrid::from_model(&model).unwrap();
        for ix in 0..8 {
            let col = exact_column(&model, ix, 8, 8);
            for iy in 0..8 {
                assert_abs_diff_eq!(col[iy], grid.cell(ix, iy), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn mixture_scores_approach_exact_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = sample(50, &mut rng);
        let mut cfg = ConformalConfig::new(family(2), 1.0);
        let exact = ConformalPredictor::new(&data, cfg.clone()).unwrap();
        cfg.method = ScoreMethod::Mixture { draws_per_member: 2000, seed: 5 };
        let mixed = ConformalPredictor::new(&data, cfg).unwrap();
        for u in [[0.2, 0.4], [0.6, 0.55], [0.9, 0.8]] {
            let a = exact.score(&u, Tail::Lower).unwrap().value();
            let b = mixed.score(&u, Tail::Lower).unwrap().value();
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
    }

    #[test]
    fn pvalue_matches_refit_from_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = sample(25, &mut rng);
        let cfg = ConformalConfig::new(family(2), 1.0);
        let candidate = [0.55, 0.62];
        let fast = conformal_pvalue(&data, &candidate, Tail::Lower, &cfg).unwrap();
        let own = conformity_score(&data, &candidate, Tail::Lower, &cfg).unwrap();
        let mut count = 0;
        for i in 0..data.len() {
            let mut swapped = data.clone();
            swapped[i] = candidate.to_vec();
            let a = conformity_score(&swapped, &data[i], Tail::Lower, &cfg).unwrap();
            // refits can differ from incremental edits in the last bits
            if a.value() <= own.value() + 1e-12 {
                count += 1;
            }
        }
        assert_eq!(fast.count, count);
        assert_eq!(fast.m, 25);
    }

    #[test]
    fn ties_count_toward_inclusion() {
        // every point and the candidate share one column and one Y value
        let data = vec![vec![0.1, 0.5]; 9];
        let cfg = ConformalConfig::new(family(2), 1.0);
        let p = conformal_pvalue(&data, &[0.1, 0.5], Tail::Lower, &cfg).unwrap();
        assert_eq!(p.count, 9);
        assert_abs_diff_eq!(p.value(), 0.9);
    }

    #[test]
    fn strictly_smallest_candidate_gets_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random(), 0.3 + 0.6 * rng.random::<f64>()]).collect();
        let cfg = ConformalConfig::new(family(2), 1.0);
        let p = conformal_pvalue(&data, &[0.5, 0.0], Tail::Lower, &cfg).unwrap();
        assert_eq!(p.count, 0);
        let p = conformal_pvalue(&data, &[0.5, 1.0], Tail::Upper, &cfg).unwrap();
        assert_eq!(p.count, 0);
    }

    #[test]
    fn band_nesting_and_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = sample(80, &mut rng);
        let p = ConformalPredictor::new(&data, ConformalConfig::new(family(2), 1.0)).unwrap();
        let grid = p.default_y_grid();
        assert_eq!(grid.len(), 9);
        let xs = [0.1, 0.5, 0.9];
        let wide = p.band(&xs, 0.10, &grid).unwrap();
        let narrow = p.band(&xs, 0.20, &grid).unwrap();
        for (w, n) in wide.columns.iter().zip(&narrow.columns) {
            if let (Some(lo), Some(hi)) = (n.lower, n.upper) {
                assert!(w.lower.unwrap() <= lo && hi <= w.upper.unwrap());
            }
            for v in w.p_lower.iter().chain(&w.p_upper) {
                let k = v * 81.0;
                assert_abs_diff_eq!(k, k.round(), epsilon = 1e-9);
            }
        }
        assert!(p.band(&xs, 0.0, &grid).is_err());
        let mut csv = Vec::new();
        wide.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
    }

    #[test]
    fn interpolated_endpoints_lie_inside_grid_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = sample(60, &mut rng);
        let mut cfg = ConformalConfig::new(family(2), 1.0);
        let grid_band = conformal_band(&data, &[0.3, 0.7], 0.1, None, &cfg).unwrap();
        cfg.endpoints = EndpointMode::Interpolated;
        let interp = conformal_band(&data, &[0.3, 0.7], 0.1, None, &cfg).unwrap();
        for (g, i) in grid_band.columns.iter().zip(&interp.columns) {
            assert!(i.lower.unwrap() <= g.lower.unwrap() && g.upper.unwrap() <= i.upper.unwrap());
            assert!(g.lower.unwrap() - i.lower.unwrap() <= 1.0 / 8.0 + 1e-12);
        }
    }

    #[test]
    fn leave_one_out_matches_refit() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = sample(15, &mut rng);
        let cfg = ConformalConfig::new(family(2), 1.0);
        let loo = leave_one_out_scores(&data, Tail::Upper, &cfg).unwrap();
        for i in 0..data.len() {
            let mut rest = data.clone();
            let u = rest.remove(i);
            let s = conformity_score(&rest, &u, Tail::Upper, &cfg).unwrap();
            assert_abs_diff_eq!(loo[i], s.value(), epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_non_bivariate_families() {
        let fam = SegmentationFamily::single(crate::Segmentation::new(vec![1, 2, 3], 3).unwrap());
        let none: Vec<Vec<f64>> = vec![];
        assert!(matches!(
            ConformalPredictor::new(&none, ConformalConfig::new(fam, 1.0)),
            Err(Error::NotBivariate(3))
        ));
    }
}
