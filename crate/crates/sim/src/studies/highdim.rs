//! Mixed continuous/categorical data in ten encoded dimensions: which pairs
//! of continuous variables the posterior selects, what the categorical
//! prefix is worth, and whether decoded predictive draws look like the data.

use std::collections::BTreeSet;

use polyamix::encoding::{fit_encoding, ColumnKind, ColumnSchema, EncodingOptions, EncodingSpec, RawValue, Schema};
use polyamix::posterior::log_unnormalized_weight;
use polyamix::predictive::sample_posterior_predictive;
use polyamix::{CountsTree, PosteriorModel, Segmentation, SegmentationFamily};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::Report;
use crate::output::Table;
use crate::stats::{binomial_se, ks_two_sample, KsResult};
use crate::truth::{MixedTruth, MIXED_CONTINUOUS, MIXED_LEVELS};
use crate::{stream_rng, SimError, SimResult};

/// Encoded dimension: eight continuous coordinates and two dummies.
pub const HIGHDIM_DIM: usize = MIXED_CONTINUOUS + MIXED_LEVELS.len() - 1;
/// Both categorical dummies, split first.
pub const CATEGORICAL_PREFIX: [usize; 2] = [10, 9];
/// Splits given to each chosen continuous variable.
pub const SPLITS_PER_VARIABLE: usize = 4;

pub fn mixed_schema() -> Schema {
    let mut columns: Vec<ColumnSchema> = (1..=MIXED_CONTINUOUS)
        .map(|j| ColumnSchema { name: format!("y{j}"), kind: ColumnKind::Continuous })
        .collect();
    columns.push(ColumnSchema {
        name: "x".into(),
        kind: ColumnKind::Categorical { levels: MIXED_LEVELS.iter().map(|s| s.to_string()).collect() },
    });
    Schema { columns }
}

/// Categorical prefix followed by all orderings of four splits on each of
/// two continuous variables, over every pair of them.
pub fn highdim_family() -> SegmentationFamily {
    let candidates: Vec<usize> = (1..=MIXED_CONTINUOUS).collect();
    SegmentationFamily::subset_union(HIGHDIM_DIM, &CATEGORICAL_PREFIX, &candidates, 2, SPLITS_PER_VARIABLE)
        .expect("valid family")
}

/// Continuous variables split by `seg`, excluding the prefix.
pub fn variable_pair(seg: &Segmentation) -> Vec<usize> {
    let set: BTreeSet<usize> = seg.dims().iter().copied().filter(|d| !CATEGORICAL_PREFIX.contains(d)).collect();
    set.into_iter().collect()
}

/// `seg` with its two leading splits moved to the end.
pub fn prefix_swapped(seg: &Segmentation) -> polyamix::Result<Segmentation> {
    let dims = seg.dims();
    let mut swapped = dims[2..].to_vec();
    swapped.extend_from_slice(&dims[..2]);
    Segmentation::new(swapped, seg.ambient_dim())
}

#[derive(Clone, Debug)]
pub struct HighdimConfig {
    pub m: usize,
    pub n: usize,
    pub a0: f64,
    pub seed: u64,
}

impl Default for HighdimConfig {
    fn default() -> Self {
        Self { m: 400, n: 1000, a0: 1.0, seed: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct MemberSummary {
    pub dims: Vec<usize>,
    pub pair: Vec<usize>,
    pub log_unnormalized: f64,
    pub log_unnormalized_swapped: f64,
}

#[derive(Clone, Debug)]
pub struct HighdimReport {
    pub config: HighdimConfig,
    pub encoding: EncodingSpec,
    pub members: Vec<MemberSummary>,
    pub train_levels: Vec<usize>,
    pub train_y: Vec<[f64; MIXED_CONTINUOUS]>,
    pub predictive_levels: Vec<usize>,
    pub predictive_y: Vec<[f64; MIXED_CONTINUOUS]>,
    /// Encoded draws with both dummies on, which decode to no level and were redrawn.
    pub rejected: usize,
    pub clamped: usize,
}

impl HighdimReport {
    /// Variable pair of the member with the largest log weight.
    pub fn top_pair(&self) -> Vec<usize> {
        self.members
            .iter()
            .max_by(|a, b| a.log_unnormalized.total_cmp(&b.log_unnormalized))
            .map(|s| s.pair.clone())
            .unwrap_or_default()
    }

    /// Smallest decrease of the log weight caused by moving the prefix to the end.
    pub fn min_swap_decrease(&self) -> f64 {
        self.members
            .iter()
            .map(|s| s.log_unnormalized - s.log_unnormalized_swapped)
            .fold(f64::INFINITY, f64::min)
    }

    fn proportions(levels: &[usize]) -> Vec<f64> {
        let mut counts = vec![0usize; MIXED_LEVELS.len()];
        levels.iter().for_each(|&l| counts[l] += 1);
        counts.iter().map(|&c| c as f64 / levels.len() as f64).collect()
    }

    pub fn train_proportions(&self) -> Vec<f64> {
        Self::proportions(&self.train_levels)
    }

    pub fn predictive_proportions(&self) -> Vec<f64> {
        Self::proportions(&self.predictive_levels)
    }

    /// Largest `|predictive - train| / se` over the levels, with the
    /// binomial standard error of `n` draws at the training proportion.
    pub fn max_proportion_z(&self) -> f64 {
        self.train_proportions()
            .iter()
            .zip(self.predictive_proportions())
            .map(|(&t, p)| (p - t).abs() / binomial_se(t, self.predictive_levels.len()))
            .fold(0.0, f64::max)
    }

    /// Two-sample KS test of decoded predictive `y_j` against the training `y_j`; `j` is 1-based.
    pub fn marginal_ks(&self, j: usize) -> KsResult {
        let a: Vec<f64> = self.predictive_y.iter().map(|y| y[j - 1]).collect();
        let b: Vec<f64> = self.train_y.iter().map(|y| y[j - 1]).collect();
        ks_two_sample(&a, &b)
    }
}

fn raw_row(level: usize, y: &[f64; MIXED_CONTINUOUS]) -> Vec<RawValue> {
    let mut row: Vec<RawValue> = y.iter().map(|&v| RawValue::Num(v)).collect();
    row.push(RawValue::Cat(MIXED_LEVELS[level].to_string()));
    row
}

fn from_raw(row: &[RawValue]) -> SimResult<(usize, [f64; MIXED_CONTINUOUS])> {
    let mut y = [0.0; MIXED_CONTINUOUS];
    for (slot, v) in y.iter_mut().zip(row) {
        *slot = v.as_num().ok_or_else(|| SimError::Validation("decoded continuous value missing".into()))?;
    }
    let level = row[MIXED_CONTINUOUS]
        .as_cat()
        .and_then(|c| MIXED_LEVELS.iter().position(|l| *l == c))
        .ok_or_else(|| SimError::Validation("decoded level missing".into()))?;
    Ok((level, y))
}

pub fn run_highdim(config: &HighdimConfig) -> SimResult<HighdimReport> {
    if config.m == 0 || config.n == 0 {
        return Err(SimError::Validation("m and n must be positive".into()));
    }
    let truth = MixedTruth::default();
    let mut rng = stream_rng(config.seed, 0);
    let (train_levels, train_y): (Vec<usize>, Vec<[f64; MIXED_CONTINUOUS]>) =
        (0..config.m).map(|_| truth.sample(&mut rng)).unzip();
    let rows: Vec<Vec<RawValue>> = train_levels.iter().zip(&train_y).map(|(&l, y)| raw_row(l, y)).collect();
    let encoding = fit_encoding(&rows, &mixed_schema(), EncodingOptions::default())?;
    let mut clamped = 0;
    let mut points = Vec::with_capacity(rows.len());
    for row in &rows {
        let e = encoding.encode(row)?;
        clamped += e.clamped.len();
        points.push(e.point);
    }

    let family = highdim_family();
    let model = PosteriorModel::fit(&points, &family, config.a0)?;
    let members = family
        .members()
        .par_iter()
        .zip(model.log_unnormalized().par_iter())
        .map(|(seg, &log_unnormalized)| -> SimResult<MemberSummary> {
            let swapped = prefix_swapped(seg)?;
            let counts = CountsTree::from_points(&points, &swapped)?;
            Ok(MemberSummary {
                dims: seg.dims().to_vec(),
                pair: variable_pair(seg),
                log_unnormalized,
                log_unnormalized_swapped: log_unnormalized_weight(&counts, config.a0)?,
            })
        })
        .collect::<SimResult<Vec<_>>>()?;

    let mut predictive_levels = Vec::with_capacity(config.n);
    let mut predictive_y = Vec::with_capacity(config.n);
    let mut rejected = 0;
    while predictive_levels.len() < config.n {
        let draw = sample_posterior_predictive(&model, 1, &mut rng)?;
        match encoding.decode(&draw.points[0], &mut rng) {
            Ok(row) => {
                let (level, y) = from_raw(&row)?;
                predictive_levels.push(level);
                predictive_y.push(y);
            }
            Err(polyamix::Error::Encoding(_)) => rejected += 1,
            Err(e) => return Err(e.into()),
        }
    }

    Ok(HighdimReport {
        config: config.clone(),
        encoding,
        members,
        train_levels,
        train_y,
        predictive_levels,
        predictive_y,
        rejected,
        clamped,
    })
}

fn raw_table(levels: &[usize], ys: &[[f64; MIXED_CONTINUOUS]]) -> Table {
    let mut header: Vec<String> = (1..=MIXED_CONTINUOUS).map(|j| format!("y{j}")).collect();
    header.push("x".into());
    let mut t = Table::new(&header);
    for (l, y) in levels.iter().zip(ys) {
        let mut row: Vec<String> = y.iter().map(f64::to_string).collect();
        row.push(MIXED_LEVELS[*l].to_string());
        t.push(row);
    }
    t
}

impl Report for HighdimReport {
    fn meta(&self) -> Value {
        let c = &self.config;
        json!({
            "study": "highdim", "m": c.m, "n": c.n, "a0": c.a0, "seed": c.seed,
            "members": self.members.len(), "rejected": self.rejected, "clamped": self.clamped,
        })
    }

    fn tables(&self) -> Vec<(&'static str, Table)> {
        let mut weights = Table::new(&["member", "dims", "pair", "log_unnormalized", "log_unnormalized_swapped"]);
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        for (i, s) in self.members.iter().enumerate() {
            weights.push([
                i.to_string(),
                join(&s.dims),
                join(&s.pair),
                s.log_unnormalized.to_string(),
                s.log_unnormalized_swapped.to_string(),
            ]);
        }
        let mut summary = Table::new(&["level", "train_proportion", "predictive_proportion"]);
        for (l, (t, p)) in self.train_proportions().iter().zip(self.predictive_proportions()).enumerate() {
            summary.push([MIXED_LEVELS[l].to_string(), t.to_string(), p.to_string()]);
        }
        vec![
            ("highdim_weights", weights),
            ("highdim_train", raw_table(&self.train_levels, &self.train_y)),
            ("highdim_predictive", raw_table(&self.predictive_levels, &self.predictive_y)),
            ("highdim_levels", summary),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_has_seventy_members_per_pair() {
        let fam = highdim_family();
        assert_eq!(fam.len(), 28 * 70);
        assert_eq!(variable_pair(fam.get(0)), [1, 2]);
        assert_eq!(variable_pair(fam.get(69)), [1, 2]);
        assert_eq!(variable_pair(fam.get(70)), [1, 3]);
        assert_eq!(fam.get(0).dims()[..2], CATEGORICAL_PREFIX);
    }

    #[test]
    fn swap_moves_the_prefix_to_the_end() {
        let seg = Segmentation::new(vec![10, 9, 1, 2, 1, 2, 1, 2, 1, 2], 10).unwrap();
        assert_eq!(prefix_swapped(&seg).unwrap().dims(), [1, 2, 1, 2, 1, 2, 1, 2, 10, 9]);
    }

    #[test]
    fn schema_places_dummies_last() {
        let schema = mixed_schema();
        assert_eq!(schema.columns.len(), 9);
        let rows: Vec<Vec<RawValue>> = (0..40)
            .map(|i| raw_row(i % 3, &[i as f64; MIXED_CONTINUOUS]))
            .collect();
        let spec = fit_encoding(&rows, &schema, EncodingOptions::default()).unwrap();
        assert_eq!(spec.dim, HIGHDIM_DIM);
    }
}
