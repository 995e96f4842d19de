//! Posterior predictive quantities.
//!
//! [`MixtureApproximation`] replaces the posterior predictive density by a
//! finite mixture: for every member `d_j` it holds `H` conjugate posterior
//! draws of the leaf probabilities, each weighted `Pr(d_j | u) / H`. From it
//! we draw predictive samples, evaluate region probabilities and, in two
//! dimensions, conditional quantiles of `Y` given `X` and equal-tail credible
//! bands on the common refinement grid of the family.
//!
//! [`PredictiveGrid::from_model`] gives the same grid quantities for the
//! exact posterior predictive (the `H -> infinity` limit).

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hbeta::{log_predictive_leaf_density, sample_phi_posterior, ProbVector};
use crate::posterior::PosteriorModel;
use crate::segmentation::{check_point, CubeBox, SegmentationFamily};

/// Draws per segmentation used unless configured otherwise.
pub const DEFAULT_DRAWS_PER_MEMBER: usize = 50;

/// Finite mixture of posterior step densities.
#[derive(Clone, Debug)]
pub struct MixtureApproximation {
    family: SegmentationFamily,
    weights: Vec<f64>,
    draws: Vec<Vec<ProbVector>>,
    /// Average of the draws per member; the mixture density only needs these.
    mean_probs: Vec<Vec<f64>>,
}

impl MixtureApproximation {
    /// `draws_per_member` posterior draws for every member of `model`.
    ///
    /// Members are processed in parallel; each gets its own ChaCha stream
    /// derived from one seed drawn from `rng`, so the result is reproducible.
    pub fn build<R: Rng + ?Sized>(
        model: &PosteriorModel,
        draws_per_member: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if draws_per_member == 0 {
            return Err(Error::InvalidArgument("draws per member must be at least 1".into()));
        }
        let base_seed: u64 = rng.random();
        let family = model.family().clone();
        let a0 = model.a0();
        let draws: Vec<Vec<ProbVector>> = (0..family.len())
            .into_par_iter()
            .map(|member| {
                let mut stream = ChaCha8Rng::seed_from_u64(base_seed);
                stream.set_stream(member as u64);
                (0..draws_per_member)
                    .map(|_| {
                        sample_phi_posterior(model.counts(member), a0, &mut stream)
                            .expect("validated concentration")
                            .probabilities()
                    })
                    .collect()
            })
            .collect();
        let mean_probs = draws
            .iter()
            .map(|member_draws| {
                let mut mean = vec![0.0; member_draws[0].len()];
                for pi in member_draws {
                    for (m, p) in mean.iter_mut().zip(pi.as_slice()) {
                        *m += p;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= draws_per_member as f64);
                mean
            })
            .collect();
        Ok(Self {
            family,
            weights: model.weights(),
            draws,
            mean_probs,
        })
    }

    pub fn family(&self) -> &SegmentationFamily {
        &self.family
    }

    /// Posterior segmentation probabilities.
    pub fn member_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn draws_per_member(&self) -> usize {
        self.draws[0].len()
    }

    pub fn component_count(&self) -> usize {
        self.draws.len() * self.draws_per_member()
    }

    pub fn draw(&self, member: usize, draw: usize) -> &ProbVector {
        &self.draws[member][draw]
    }

    /// Mixture density at `u`.
    pub fn density(&self, u: &[f64]) -> Result<f64> {
        check_point(u, self.family.ambient_dim())?;
        let scale = self.family.get(0).leaf_count() as f64;
        Ok(self
            .family
            .members()
            .iter()
            .enumerate()
            .map(|(i, seg)| self.weights[i] * self.mean_probs[i][seg.leaf_index_unchecked(u)])
            .sum::<f64>()
            * scale)
    }

    /// Mean leaf probabilities of one member over its draws.
    pub fn member_mean_probs(&self, member: usize) -> &[f64] {
        &self.mean_probs[member]
    }
}

/// Free-function form of [`MixtureApproximation::build`].
pub fn build_mixture<R: Rng + ?Sized>(
    model: &PosteriorModel,
    draws_per_member: usize,
    rng: &mut R,
) -> Result<MixtureApproximation> {
    MixtureApproximation::build(model, draws_per_member, rng)
}

/// Mixture component a predictive point came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub member: usize,
    /// Posterior draw within the member; 0 for exact sampling.
    pub draw: usize,
}

/// Points drawn from a predictive distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveSample {
    pub points: Vec<Vec<f64>>,
    pub provenance: Vec<Provenance>,
}

impl PredictiveSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn uniform_in<R: Rng + ?Sized>(b: &CubeBox, rng: &mut R) -> Vec<f64> {
    b.lo
        .iter()
        .zip(&b.hi)
        .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

/// Draws `n` points: a component with probability `Pr(d_j | u) / H`, a leaf
/// with probability `pi`, then a uniform point in the leaf box.
pub fn sample_predictive<R: Rng + ?Sized>(
    mix: &MixtureApproximation,
    n: usize,
    rng: &mut R,
) -> Result<PredictiveSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let member_dist = WeightedIndex::new(&mix.weights)
        .map_err(|e| Error::InvalidArgument(format!("mixture weights: {e}")))?;
    let h = mix.draws_per_member();
    let cumulative: Vec<Vec<Vec<f64>>> = mix
        .draws
        .iter()
        .map(|member| member.iter().map(|pi| cumsum(pi.as_slice())).collect())
        .collect();
    let mut points = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for _ in 0..n {
        let member = member_dist.sample(rng);
        let draw = rng.random_range(0..h);
        let cum = &cumulative[member][draw];
        let target = rng.random::<f64>() * cum[cum.len() - 1];
        let leaf = cum.partition_point(|&c| c <= target).min(cum.len() - 1);
        points.push(uniform_in(&mix.family.get(member).leaf_box(leaf), rng));
        provenance.push(Provenance { member, draw });
    }
    Ok(PredictiveSample { points, provenance })
}

fn cumsum(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Exact posterior predictive sampling: each point gets a fresh member and a
/// fresh conjugate draw, which only needs the posterior means along the path
/// taken, so nothing is stored per member.
pub fn sample_posterior_predictive<R: Rng + ?Sized>(
    model: &PosteriorModel,
    n: usize,
    rng: &mut R,
) -> Result<PredictiveSample> {
    let member_dist = WeightedIndex::new(model.weights())
        .map_err(|e| Error::InvalidArgument(format!("posterior weights: {e}")))?;
    let a0 = model.a0();
    let mut points = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for _ in 0..n {
        let member = member_dist.sample(rng);
        let counts = model.counts(member);
        let depth = counts.depth();
        let mut node = 0usize;
        for level in 0..depth {
            let parent = counts.get(level, node) as f64;
            let left = counts.get(level + 1, 2 * node) as f64;
            let go_left = rng.random::<f64>() < (left + a0) / (parent + 2.0 * a0);
            node = 2 * node + usize::from(!go_left);
        }
        points.push(uniform_in(&model.family().get(member).leaf_box(node), rng));
        provenance.push(Provenance { member, draw: 0 });
    }
    Ok(PredictiveSample { points, provenance })
}

/// Union of pairwise disjoint axis-aligned boxes in the unit cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CubeBox>", into = "Vec<CubeBox>")]
pub struct Region {
    boxes: Vec<CubeBox>,
}

impl Region {
    pub fn new(boxes: Vec<CubeBox>) -> Result<Self> {
        let bad = |msg: String| Err(Error::MalformedRegion(msg));
        let Some(first) = boxes.first() else {
            return bad("region has no boxes".into());
        };
        let dim = first.dim();
        for b in &boxes {
            if b.dim() != dim || b.hi.len() != dim {
                return bad("boxes disagree on dimension".into());
            }
            for k in 0..dim {
                if !(0.0 <= b.lo[k] && b.lo[k] <= b.hi[k] && b.hi[k] <= 1.0) {
                    return bad(format!("box {b:?} is not inside the unit cube"));
                }
            }
        }
        for (i, a) in boxes.iter().enumerate() {
            for b in &boxes[i + 1..] {
                if a.overlap(b) > 0.0 {
                    return bad("boxes overlap".into());
                }
            }
        }
        Ok(Self { boxes })
    }

    pub fn cube(ambient: usize) -> Self {
        Self {
            boxes: vec![CubeBox::unit(ambient)],
        }
    }

    pub fn boxes(&self) -> &[CubeBox] {
        &self.boxes
    }

    pub fn dim(&self) -> usize {
        self.boxes[0].dim()
    }

    pub fn volume(&self) -> f64 {
        self.boxes.iter().map(CubeBox::volume).sum()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(u))
    }
}

impl TryFrom<Vec<CubeBox>> for Region {
    type Error = Error;

    fn try_from(boxes: Vec<CubeBox>) -> Result<Self> {
        Self::new(boxes)
    }
}

impl From<Region> for Vec<CubeBox> {
    fn from(r: Region) -> Self {
        r.boxes
    }
}

/// Analytic predictive probability of a box union: each leaf contributes its
/// mixture mass times the fraction of its volume inside the region.
pub fn predictive_probability(region: &Region, mix: &MixtureApproximation) -> Result<f64> {
    if region.dim() != mix.family.ambient_dim() {
        return Err(Error::MalformedRegion(format!(
            "region has dimension {}, model has {}",
            region.dim(),
            mix.family.ambient_dim()
        )));
    }
    let total = mix
        .family
        .members()
        .par_iter()
        .enumerate()
        .map(|(i, seg)| {
            let leaf_volume = 1.0 / seg.leaf_count() as f64;
            let mass: f64 = (0..seg.leaf_count())
                .map(|leaf| {
                    let lb = seg.leaf_box(leaf);
                    let inside: f64 = region.boxes.iter().map(|b| lb.overlap(b)).sum();
                    mix.mean_probs[i][leaf] * inside / leaf_volume
                })
                .sum();
            mix.weights[i] * mass
        })
        .sum::<f64>();
    Ok(total.min(1.0))
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Proportion of `n` predictive samples falling in `region`.
pub fn predictive_probability_mc<R: Rng + ?Sized>(
    region: &Region,
    mix: &MixtureApproximation,
    n: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let sample = sample_predictive(mix, n, rng)?;
    let hits = sample.points.iter().filter(|u| region.contains(u)).count();
    let value = hits as f64 / n as f64;
    Ok(Estimate {
        value,
        std_error: (value * (1.0 - value) / n as f64).sqrt(),
    })
}

/// Predictive cell masses of a bivariate model on the common refinement grid
/// of its family. Axis 1 is `X`, axis 2 is `Y`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveGrid {
    nx: usize,
    ny: usize,
    /// Column-major by `x`: cell `(ix, iy)` at `ix * ny + iy`.
    mass: Vec<f64>,
}

impl PredictiveGrid {
    fn accumulate(
        family: &SegmentationFamily,
        leaf_mass: impl Fn(usize, usize) -> f64 + Sync,
    ) -> Result<Self> {
        if family.ambient_dim() != 2 {
            return Err(Error::NotBivariate(family.ambient_dim()));
        }
        let splits = family.common_refinement();
        let (nx, ny) = (1usize << splits[0], 1usize << splits[1]);
        let mass = family
            .members()
            .par_iter()
            .enumerate()
            .map(|(i, seg)| {
                let mut grid = vec![0.0; nx * ny];
                for leaf in 0..seg.leaf_count() {
                    let m = leaf_mass(i, leaf);
                    let r = seg.leaf_cell_ranges(leaf, &splits);
                    let share = m / ((r[0].1 - r[0].0) * (r[1].1 - r[1].0)) as f64;
                    for ix in r[0].0..r[0].1 {
                        for iy in r[1].0..r[1].1 {
                            grid[ix * ny + iy] += share;
                        }
                    }
                }
                grid
            })
            .reduce(
                || vec![0.0; nx * ny],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        Ok(Self { nx, ny, mass })
    }

    /// Grid of the Monte Carlo mixture.
    pub fn from_mixture(mix: &MixtureApproximation) -> Result<Self> {
        Self::accumulate(&mix.family, |i, leaf| mix.weights[i] * mix.mean_probs[i][leaf])
    }

    /// Grid of the exact posterior predictive distribution.
    pub fn from_model(model: &PosteriorModel) -> Result<Self> {
        let weights = model.weights();
        let a0 = model.concentration();
        let scale = 1.0 / model.family().get(0).leaf_count() as f64;
        Self::accumulate(model.family(), |i, leaf| {
            weights[i] * log_predictive_leaf_density(model.counts(i), leaf, a0).exp() * scale
        })
    }

    /// Builds a grid from explicit cell masses, column-major by `x`.
    pub fn from_cells(nx: usize, ny: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != nx * ny || mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidArgument("bad grid cell masses".into()));
        }
        Ok(Self { nx, ny, mass })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn cell(&self, ix: usize, iy: usize) -> f64 {
        self.mass[ix * self.ny + iy]
    }

    pub fn column(&self, ix: usize) -> &[f64] {
        &self.mass[ix * self.ny..(ix + 1) * self.ny]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Column holding `x`, top edge included in the last column.
    pub fn column_of(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutsideCube { index: 0, value: x });
        }
        Ok(((x * self.nx as f64) as usize).min(self.nx - 1))
    }

    /// `x` range `[lo, hi]` of column `ix`.
    pub fn column_bounds(&self, ix: usize) -> (f64, f64) {
        (ix as f64 / self.nx as f64, (ix + 1) as f64 / self.nx as f64)
    }

    /// `Pr(Y <= y | X in column ix)`, linear within bins.
    pub fn conditional_cdf(&self, ix: usize, y: f64) -> Result<f64> {
        column_cdf(self.column(ix), y).ok_or(Error::ZeroColumnMass(ix))
    }

    /// `q`-quantile of `Y` given the column of `x`.
    pub fn conditional_quantile(&self, x: f64, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidLevel(q));
        }
        let ix = self.column_of(x)?;
        column_quantile(self.column(ix), q).ok_or(Error::ZeroColumnMass(ix))
    }

    /// One quantile per column.
    pub fn quantile_curve(&self, q: f64) -> Result<Vec<f64>> {
        (0..self.nx)
            .map(|ix| self.conditional_quantile((ix as f64 + 0.5) / self.nx as f64, q))
            .collect()
    }

    /// Equal-tail band between the `alpha/2` and `1 - alpha/2` conditional
    /// quantiles in every column.
    pub fn credible_band(&self, alpha: f64) -> Result<CredibleBand> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidLevel(alpha));
        }
        let columns = (0..self.nx)
            .map(|ix| {
                let (x_lo, x_hi) = self.column_bounds(ix);
                let (y_lo, y_hi) = if alpha == 0.0 {
                    (0.0, 1.0)
                } else {
                    let col = self.column(ix);
                    let err = || Error::ZeroColumnMass(ix);
                    (
                        column_quantile(col, alpha / 2.0).ok_or_else(err)?,
                        column_quantile(col, 1.0 - alpha / 2.0).ok_or_else(err)?,
                    )
                };
                Ok(BandColumn { x_lo, x_hi, y_lo, y_hi })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CredibleBand { alpha, columns })
    }

    /// Predictive mass of a band under this grid, uniform within cells.
    pub fn band_mass(&self, band: &CredibleBand) -> f64 {
        let mut total = 0.0;
        for (ix, col) in band.columns.iter().enumerate() {
            let (x_lo, x_hi) = self.column_bounds(ix);
            let xfrac = ((col.x_hi.min(x_hi) - col.x_lo.max(x_lo)) * self.nx as f64).max(0.0);
            for iy in 0..self.ny {
                let (c_lo, c_hi) = (iy as f64 / self.ny as f64, (iy + 1) as f64 / self.ny as f64);
                let yfrac = ((col.y_hi.min(c_hi) - col.y_lo.max(c_lo)) * self.ny as f64).max(0.0);
                total += self.cell(ix, iy) * xfrac * yfrac;
            }
        }
        total
    }
}

/// CDF of a column profile at `y`; `None` when the column is empty.
pub(crate) fn column_cdf(col: &[f64], y: f64) -> Option<f64> {
    let total: f64 = col.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let ny = col.len() as f64;
    let scaled = (y.clamp(0.0, 1.0) * ny).min(ny);
    let bin = (scaled as usize).min(col.len() - 1);
    let below: f64 = col[..bin].iter().sum();
    let partial = col[bin] * (scaled - bin as f64);
    Some(((below + partial) / total).clamp(0.0, 1.0))
}

pub(crate) fn column_quantile(col: &[f64], q: f64) -> Option<f64> {
    let total: f64 = col.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let target = q * total;
    let mut cum = 0.0;
    let ny = col.len();
    for (k, &b) in col.iter().enumerate() {
        if b > 0.0 && cum + b >= target {
            let frac = ((target - cum) / b).clamp(0.0, 1.0);
            return Some((k as f64 + frac) / ny as f64);
        }
        cum += b;
    }
    // rounding left target just above the total
    let last = col.iter().rposition(|&b| b > 0.0)?;
    Some((last + 1) as f64 / ny as f64)
}

/// Free-function form of [`PredictiveGrid::conditional_quantile`] on a mixture.
pub fn conditional_quantile(x: f64, q: f64, mix: &MixtureApproximation) -> Result<f64> {
    PredictiveGrid::from_mixture(mix)?.conditional_quantile(x, q)
}

/// Free-function form of [`PredictiveGrid::credible_band`] on a mixture.
pub fn credible_prediction_set(mix: &MixtureApproximation, alpha: f64) -> Result<CredibleBand> {
    PredictiveGrid::from_mixture(mix)?.credible_band(alpha)
}

/// `Y` interval over one `X` column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandColumn {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

/// Per-column `Y` intervals forming a bivariate prediction set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CredibleBand {
    pub alpha: f64,
    pub columns: Vec<BandColumn>,
}

impl CredibleBand {
    pub fn contains(&self, u: &[f64]) -> bool {
        let n = self.columns.len();
        let ix = ((u[0] * n as f64) as usize).min(n - 1);
        let c = &self.columns[ix];
        c.y_lo <= u[1] && u[1] <= c.y_hi
    }

    pub fn to_region(&self) -> Result<Region> {
        Region::new(
            self.columns
                .iter()
                .map(|c| CubeBox {
                    lo: vec![c.x_lo, c.y_lo],
                    hi: vec![c.x_hi, c.y_hi],
                })
                .collect(),
        )
    }
}
