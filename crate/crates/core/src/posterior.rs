//! Posterior probabilities of the segmentations in a family.
//!
//! Under a uniform prior on the family, `Pr(d | u)` is proportional to
//!
//! ```text
//! (prod_j N_{L,j}!) / m!  *  prod_{internal nodes} BetaBinomial(N_left; N_parent, a0, a0)
//! ```
//!
//! evaluated in log space with cached log-gamma values and normalized with
//! log-sum-exp. Nodes with an empty parent contribute nothing, so the cost per
//! segmentation is `O(m L)` rather than `O(2^L)`.
//!
//! The model also supports moving a single observation in `O(L)` per member,
//! which the conformal module uses for its leave-one-out refits.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::hbeta::{log_predictive_leaf_density, node_offset, Concentration, CountsTree};
use crate::segmentation::{check_point, FamilyDoc, Segmentation, SegmentationFamily};

/// Log-gamma values at the arguments the weight formula needs for a fixed `a0`.
#[derive(Clone, Debug)]
pub struct LogGammaCache {
    a0: f64,
    ln_factorial: Vec<f64>,
    /// `ln Gamma(k + a0)`
    ln_gamma_a0: Vec<f64>,
    /// `ln Gamma(n + 2 a0)`
    ln_gamma_2a0: Vec<f64>,
    /// `ln B(a0, a0)`
    ln_beta_prior: f64,
}

impl LogGammaCache {
    pub fn new(a0: Concentration, capacity: usize) -> Self {
        let a0 = a0.get();
        let mut cache = Self {
            a0,
            ln_factorial: Vec::new(),
            ln_gamma_a0: Vec::new(),
            ln_gamma_2a0: Vec::new(),
            ln_beta_prior: 2.0 * ln_gamma(a0) - ln_gamma(2.0 * a0),
        };
        cache.reserve(capacity);
        cache
    }

    /// Makes every count up to `n` available.
    pub fn reserve(&mut self, n: usize) {
        for k in self.ln_factorial.len()..=n {
            let k = k as f64;
            self.ln_factorial.push(ln_gamma(k + 1.0));
            self.ln_gamma_a0.push(ln_gamma(k + self.a0));
            self.ln_gamma_2a0.push(ln_gamma(k + 2.0 * self.a0));
        }
    }

    pub fn capacity(&self) -> usize {
        self.ln_factorial.len() - 1
    }

    #[inline]
    pub fn ln_factorial(&self, n: u32) -> f64 {
        self.ln_factorial[n as usize]
    }

    /// `ln BetaBinomial(k; n, a0, a0)`.
    #[inline]
    pub fn ln_beta_binomial(&self, k: u32, n: u32) -> f64 {
        let (k, n) = (k as usize, n as usize);
        self.ln_factorial[n] - self.ln_factorial[k] - self.ln_factorial[n - k]
            + self.ln_gamma_a0[k]
            + self.ln_gamma_a0[n - k]
            - self.ln_gamma_2a0[n]
            - self.ln_beta_prior
    }
}

/// Log of the unnormalized posterior weight of the segmentation whose counts
/// are `counts`.
pub fn log_unnormalized_weight(counts: &CountsTree, a0: f64) -> Result<f64> {
    let a0 = Concentration::new(a0)?;
    let cache = LogGammaCache::new(a0, counts.total() as usize);
    Ok(log_weight_with(counts, &cache))
}

fn log_weight_with(counts: &CountsTree, cache: &LogGammaCache) -> f64 {
    let depth = counts.depth();
    let m = counts.total();
    let mut total = -cache.ln_factorial(m);
    if m == 0 {
        return 0.0;
    }
    let mut stack = vec![(0usize, 0usize)];
    while let Some((level, j)) = stack.pop() {
        let n = counts.get(level, j);
        if level == depth {
            total += cache.ln_factorial(n);
            continue;
        }
        let left = counts.get(level + 1, 2 * j);
        total += cache.ln_beta_binomial(left, n);
        if left > 0 {
            stack.push((level + 1, 2 * j));
        }
        if n > left {
            stack.push((level + 1, 2 * j + 1));
        }
    }
    total
}

/// Contribution of the node at flat index `k` on `level`.
#[inline]
fn node_term(counts: &CountsTree, level: usize, k: usize, cache: &LogGammaCache) -> f64 {
    let n = counts.flat(k);
    if level == counts.depth() {
        cache.ln_factorial(n)
    } else if n == 0 {
        0.0
    } else {
        let j = k - node_offset(level);
        let left = counts.flat(node_offset(level + 1) + 2 * j);
        cache.ln_beta_binomial(left, n)
    }
}

/// Sum of node terms over the union of the root paths of `leaves`.
fn path_terms(counts: &CountsTree, leaves: &[usize], cache: &LogGammaCache) -> f64 {
    let depth = counts.depth();
    let mut total = 0.0;
    for level in 0..=depth {
        let mut seen = [usize::MAX; 2];
        for (slot, &leaf) in leaves.iter().enumerate() {
            let k = node_offset(level) + (leaf >> (depth - level));
            if seen[..slot].contains(&k) {
                continue;
            }
            seen[slot] = k;
            total += node_term(counts, level, k, cache);
        }
    }
    total
}

/// Log-sum-exp normalization.
pub fn normalize_log_weights(log_unnormalized: &[f64]) -> Vec<f64> {
    let max = log_unnormalized
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + log_unnormalized
            .iter()
            .map(|w| (w - max).exp())
            .sum::<f64>()
            .ln();
    log_unnormalized.iter().map(|w| w - lse).collect()
}

/// Fitted posterior over a segmentation family.
#[derive(Clone, Debug)]
pub struct PosteriorModel {
    family: SegmentationFamily,
    a0: Concentration,
    counts: Vec<CountsTree>,
    log_unnormalized: Vec<f64>,
    log_weights: Vec<f64>,
    cache: LogGammaCache,
}

impl PosteriorModel {
    /// Counts `data` on every member and computes the normalized weights.
    pub fn fit<P: AsRef<[f64]> + Sync>(
        data: &[P],
        family: &SegmentationFamily,
        a0: f64,
    ) -> Result<Self> {
        let a0 = Concentration::new(a0)?;
        let ambient = family.ambient_dim();
        for u in data {
            check_point(u.as_ref(), ambient)?;
        }
        let cache = LogGammaCache::new(a0, data.len() + 2);
        let (counts, log_unnormalized): (Vec<_>, Vec<_>) = family
            .members()
            .par_iter()
            .map(|seg| {
                let counts = CountsTree::from_points(data, seg).expect("points validated");
                let w = log_weight_with(&counts, &cache);
                (counts, w)
            })
            .unzip();
        Self::assemble(family.clone(), a0, counts, log_unnormalized, cache)
    }

    /// Rebuilds a model from per-member counts.
    pub fn from_counts(
        family: SegmentationFamily,
        a0: f64,
        counts: Vec<CountsTree>,
    ) -> Result<Self> {
        let a0 = Concentration::new(a0)?;
        if counts.len() != family.len() {
            return Err(Error::InvalidArgument(format!(
                "{} count trees for {} segmentations",
                counts.len(),
                family.len()
            )));
        }
        let m = counts.first().map_or(0, CountsTree::total);
        for c in &counts {
            if c.depth() != family.depth() || c.total() != m || !c.is_consistent() {
                return Err(Error::InvalidArgument(
                    "count trees disagree with the family or with each other".into(),
                ));
            }
        }
        let cache = LogGammaCache::new(a0, m as usize + 2);
        let log_unnormalized = counts.iter().map(|c| log_weight_with(c, &cache)).collect();
        Self::assemble(family, a0, counts, log_unnormalized, cache)
    }

    fn assemble(
        family: SegmentationFamily,
        a0: Concentration,
        counts: Vec<CountsTree>,
        log_unnormalized: Vec<f64>,
        cache: LogGammaCache,
    ) -> Result<Self> {
        let log_weights = normalize_log_weights(&log_unnormalized);
        Ok(Self {
            family,
            a0,
            counts,
            log_unnormalized,
            log_weights,
            cache,
        })
    }

    pub fn family(&self) -> &SegmentationFamily {
        &self.family
    }

    pub fn a0(&self) -> f64 {
        self.a0.get()
    }

    pub fn concentration(&self) -> Concentration {
        self.a0
    }

    pub fn ambient_dim(&self) -> usize {
        self.family.ambient_dim()
    }

    /// Number of observations.
    pub fn m(&self) -> u32 {
        self.counts[0].total()
    }

    pub fn counts(&self, member: usize) -> &CountsTree {
        &self.counts[member]
    }

    /// Normalized `log Pr(d | u)` in family order.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Logs of the weight numerators before normalization.
    pub fn log_unnormalized(&self) -> &[f64] {
        &self.log_unnormalized
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// Leaf of `u` in every member.
    pub fn leaves_of(&self, u: &[f64]) -> Result<Vec<usize>> {
        check_point(u, self.ambient_dim())?;
        Ok(self
            .family
            .members()
            .iter()
            .map(|s| s.leaf_index_unchecked(u))
            .collect())
    }

    /// `sum_d Pr(d | u) f(u | N(d), d)`.
    pub fn mixture_predictive_density(&self, u: &[f64]) -> Result<f64> {
        let leaves = self.leaves_of(u)?;
        Ok(leaves
            .iter()
            .enumerate()
            .map(|(i, &leaf)| {
                (self.log_weights[i] + log_predictive_leaf_density(&self.counts[i], leaf, self.a0))
                    .exp()
            })
            .sum())
    }

    /// Conditional predictive density of a single member.
    pub fn member_predictive_density(&self, member: usize, u: &[f64]) -> Result<f64> {
        let seg = self.family.get(member);
        let leaf = seg.leaf_index(u)?;
        Ok(log_predictive_leaf_density(&self.counts[member], leaf, self.a0).exp())
    }

    /// Adds one observation.
    pub fn add_point(&mut self, u: &[f64]) -> Result<()> {
        let leaves = self.leaves_of(u)?;
        self.edit(None, Some(&leaves));
        Ok(())
    }

    /// Removes one observation previously added at `u`.
    pub fn remove_point(&mut self, u: &[f64]) -> Result<()> {
        let leaves = self.leaves_of(u)?;
        if self.counts.iter().zip(&leaves).any(|(c, &l)| c.leaves()[l] == 0) {
            return Err(Error::InvalidArgument(
                "no observation to remove at this point".into(),
            ));
        }
        self.edit(Some(&leaves), None);
        Ok(())
    }

    /// Runs `f` on the model with one observation removed and/or added, then
    /// restores the model bit for bit. Leaves are given per member, as
    /// returned by [`Self::leaves_of`].
    ///
    /// # Panics
    /// If a removed leaf is empty in some member.
    pub fn with_edit<T>(
        &mut self,
        remove: Option<&[usize]>,
        add: Option<&[usize]>,
        f: impl FnOnce(&Self) -> T,
    ) -> T {
        let saved_unnormalized = self.log_unnormalized.clone();
        let saved_weights = self.log_weights.clone();
        self.edit(remove, add);
        let out = f(self);
        // counts are integers, so reversing the edit is exact
        self.edit_counts_only(add, remove);
        self.log_unnormalized = saved_unnormalized;
        self.log_weights = saved_weights;
        out
    }

    fn edit_counts_only(&mut self, remove: Option<&[usize]>, add: Option<&[usize]>) {
        for (i, counts) in self.counts.iter_mut().enumerate() {
            if let Some(r) = remove {
                counts.remove_leaf(r[i]);
            }
            if let Some(a) = add {
                counts.add_leaf(a[i]);
            }
        }
    }

    fn edit(&mut self, remove: Option<&[usize]>, add: Option<&[usize]>) {
        let m_before = self.m();
        let m_after = m_before + add.is_some() as u32 - remove.is_some() as u32;
        self.cache.reserve(m_after as usize + 1);
        let cache = &self.cache;
        let factorial_shift = cache.ln_factorial(m_before) - cache.ln_factorial(m_after);
        for (i, counts) in self.counts.iter_mut().enumerate() {
            let mut path = [0usize; 2];
            let mut len = 0;
            for leaves in [remove, add].into_iter().flatten() {
                path[len] = leaves[i];
                len += 1;
            }
            let before = path_terms(counts, &path[..len], cache);
            if let Some(r) = remove {
                counts.remove_leaf(r[i]);
            }
            if let Some(a) = add {
                counts.add_leaf(a[i]);
            }
            let after = path_terms(counts, &path[..len], cache);
            self.log_unnormalized[i] = if m_after == 0 {
                0.0
            } else if m_before == 0 {
                log_weight_with(counts, cache)
            } else {
                self.log_unnormalized[i] + (after - before) + factorial_shift
            };
        }
        self.log_weights = normalize_log_weights(&self.log_unnormalized);
    }

    pub fn to_doc(&self) -> ModelDoc {
        ModelDoc {
            family: FamilyDoc::from(&self.family),
            a0: self.a0.get(),
            m: self.m(),
            log_weights: self.log_weights.clone(),
            log_unnormalized: self.log_unnormalized.clone(),
            counts: self.counts.clone(),
        }
    }

    /// Writes `segmentation,log_unnormalized,log_weight` rows.
    pub fn write_weights_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
        wtr.write_record(["segmentation", "log_unnormalized", "log_weight"])
            .map_err(io)?;
        for (i, seg) in self.family.members().iter().enumerate() {
            wtr.write_record([
                serde_json::to_string(seg).expect("serializable"),
                self.log_unnormalized[i].to_string(),
                self.log_weights[i].to_string(),
            ])
            .map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// JSON export of a fitted model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelDoc {
    pub family: FamilyDoc,
    pub a0: f64,
    pub m: u32,
    pub log_weights: Vec<f64>,
    pub log_unnormalized: Vec<f64>,
    pub counts: Vec<CountsTree>,
}

impl TryFrom<ModelDoc> for PosteriorModel {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        let family = SegmentationFamily::try_from(doc.family)?;
        let model = PosteriorModel::from_counts(family, doc.a0, doc.counts)?;
        if model.m() != doc.m {
            return Err(Error::InvalidArgument("m disagrees with the counts".into()));
        }
        Ok(model)
    }
}

/// Free-function form of [`PosteriorModel::fit`].
pub fn fit<P: AsRef<[f64]> + Sync>(
    data: &[P],
    family: &SegmentationFamily,
    a0: f64,
) -> Result<PosteriorModel> {
    PosteriorModel::fit(data, family, a0)
}

/// Free-function form of [`PosteriorModel::mixture_predictive_density`].
pub fn mixture_predictive_density(u: &[f64], model: &PosteriorModel) -> Result<f64> {
    model.mixture_predictive_density(u)
}

/// Counts tree of a segmentation from its leaf counts alone, for building
/// models without point data.
pub fn counts_from_leaves(seg: &Segmentation, leaf_counts: &[u32]) -> Result<CountsTree> {
    if leaf_counts.len() != seg.leaf_count() {
        return Err(Error::InvalidArgument(format!(
            "{} leaf counts for {} leaves",
            leaf_counts.len(),
            seg.leaf_count()
        )));
    }
    let mut tree = CountsTree::empty(seg.depth());
    for (leaf, &n) in leaf_counts.iter().enumerate() {
        for _ in 0..n {
            tree.add_leaf(leaf);
        }
    }
    Ok(tree)
}
