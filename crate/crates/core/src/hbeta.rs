//! Hierarchical Beta (finite Polya tree) model on one segmentation.
//!
//! Every internal node `(l-1, j)` carries a conditional probability
//! `phi ~ Beta(a0, a0)` of sending mass to its lower child. Leaf probabilities
//! are products of `phi` / `1 - phi` along the root path and define a step
//! density that is constant on each level-`L` box.
//!
//! Node storage is heap-ordered: level `l` occupies the flat range
//! `[2^l - 1, 2^(l+1) - 1)`, so `phi` for the split of node `k` sits at the
//! same flat index `k` as the node's count.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::{check_point, Segmentation};

/// Deepest tree stored densely.
pub const MAX_DEPTH: usize = 16;

/// Symmetric Beta hyperparameter `a0 > 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Concentration(f64);

impl Concentration {
    pub fn new(a0: f64) -> Result<Self> {
        if a0.is_finite() && a0 > 0.0 {
            Ok(Self(a0))
        } else {
            Err(Error::InvalidConcentration(a0))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Concentration {
    fn default() -> Self {
        Self(1.0)
    }
}

impl TryFrom<f64> for Concentration {
    type Error = Error;

    fn try_from(a0: f64) -> Result<Self> {
        Self::new(a0)
    }
}

impl From<Concentration> for f64 {
    fn from(c: Concentration) -> f64 {
        c.0
    }
}

#[inline]
pub(crate) fn node_offset(level: usize) -> usize {
    (1 << level) - 1
}

/// Observation counts `N_{l,j}` at every node of one segmentation tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountsTree {
    depth: usize,
    nodes: Vec<u32>,
}

impl CountsTree {
    pub fn empty(depth: usize) -> Self {
        Self {
            depth,
            nodes: vec![0; (1 << (depth + 1)) - 1],
        }
    }

    /// Counts of `points` in the boxes of `seg`.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P], seg: &Segmentation) -> Result<Self> {
        let mut tree = Self::empty(seg.depth());
        for u in points {
            let leaf = seg.leaf_index(u.as_ref())?;
            tree.add_leaf(leaf);
        }
        Ok(tree)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total number of observations `N_{0,1}`.
    pub fn total(&self) -> u32 {
        self.nodes[0]
    }

    /// Count of 0-based node `j` at `level`.
    #[inline]
    pub fn get(&self, level: usize, j: usize) -> u32 {
        self.nodes[node_offset(level) + j]
    }

    pub fn level(&self, level: usize) -> &[u32] {
        &self.nodes[node_offset(level)..node_offset(level + 1)]
    }

    pub fn leaves(&self) -> &[u32] {
        self.level(self.depth)
    }

    #[inline]
    pub(crate) fn flat(&self, index: usize) -> u32 {
        self.nodes[index]
    }

    /// Adds one observation in the 0-based `leaf`.
    pub fn add_leaf(&mut self, leaf: usize) {
        for level in 0..=self.depth {
            self.nodes[node_offset(level) + (leaf >> (self.depth - level))] += 1;
        }
    }

    /// Removes one observation from `leaf`.
    ///
    /// # Panics
    /// If the leaf is empty.
    pub fn remove_leaf(&mut self, leaf: usize) {
        for level in 0..=self.depth {
            let slot = &mut self.nodes[node_offset(level) + (leaf >> (self.depth - level))];
            *slot = slot.checked_sub(1).expect("removing from an empty leaf");
        }
    }

    /// Parent counts equal the sum of their children everywhere.
    pub fn is_consistent(&self) -> bool {
        (0..self.depth).all(|l| {
            (0..1usize << l)
                .all(|j| self.get(l, j) == self.get(l + 1, 2 * j) + self.get(l + 1, 2 * j + 1))
        })
    }

    /// Deepest level along the path of `leaf` with a nonzero count.
    pub fn occupied_depth(&self, leaf: usize) -> usize {
        (0..=self.depth)
            .rev()
            .find(|&l| self.get(l, leaf >> (self.depth - l)) > 0)
            .unwrap_or(0)
    }
}

/// JSON form `{"m": .., "levels": [[m], [..], ...]}` with levels `0..=L`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CountsDoc {
    pub m: u32,
    pub levels: Vec<Vec<u32>>,
}

impl From<&CountsTree> for CountsDoc {
    fn from(t: &CountsTree) -> Self {
        Self {
            m: t.total(),
            levels: (0..=t.depth).map(|l| t.level(l).to_vec()).collect(),
        }
    }
}

impl TryFrom<CountsDoc> for CountsTree {
    type Error = Error;

    fn try_from(doc: CountsDoc) -> Result<Self> {
        let depth = doc
            .levels
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::InvalidArgument("counts tree has no levels".into()))?;
        if depth > MAX_DEPTH {
            return Err(Error::DepthTooLarge(depth));
        }
        let mut nodes = Vec::with_capacity((1 << (depth + 1)) - 1);
        for (l, level) in doc.levels.iter().enumerate() {
            if level.len() != 1 << l {
                return Err(Error::InvalidArgument(format!(
                    "counts level {l} has {} entries, expected {}",
                    level.len(),
                    1 << l
                )));
            }
            nodes.extend_from_slice(level);
        }
        let tree = Self { depth, nodes };
        if tree.total() != doc.m || !tree.is_consistent() {
            return Err(Error::InvalidArgument(
                "counts tree violates the parent-sum invariant".into(),
            ));
        }
        Ok(tree)
    }
}

impl Serialize for CountsTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CountsDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CountsTree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = CountsDoc::deserialize(d)?;
        CountsTree::try_from(doc).map_err(serde::de::Error::custom)
    }
}

/// Conditional split probabilities `phi` for every internal node.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaTree {
    depth: usize,
    phi: Vec<f64>,
}

impl BetaTree {
    /// Tree with explicit `phi` values in heap order (length `2^L - 1`).
    pub fn from_phi(depth: usize, phi: Vec<f64>) -> Result<Self> {
        if phi.len() != (1 << depth) - 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} phi values for depth {depth}, got {}",
                (1 << depth) - 1,
                phi.len()
            )));
        }
        if phi.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("phi values must lie in [0, 1]".into()));
        }
        Ok(Self { depth, phi })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `phi` for the split of 0-based node `j` at `level - 1`, i.e. `phi_{level, j+1}`.
    pub fn phi(&self, level: usize, j: usize) -> f64 {
        self.phi[node_offset(level - 1) + j]
    }

    /// Leaf probabilities as path products.
    pub fn probabilities(&self) -> ProbVector {
        let mut current = vec![1.0];
        for level in 0..self.depth {
            let offset = node_offset(level);
            let mut next = Vec::with_capacity(current.len() * 2);
            for (j, &mass) in current.iter().enumerate() {
                let phi = self.phi[offset + j];
                next.push(phi * mass);
                next.push((1.0 - phi) * mass);
            }
            current = next;
        }
        ProbVector(current)
    }
}

/// Free-function form of [`BetaTree::probabilities`].
pub fn pi_from_phi(tree: &BetaTree) -> ProbVector {
    tree.probabilities()
}

/// Leaf probabilities `pi_{L,1..2^L}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbVector(pub Vec<f64>);

impl ProbVector {
    pub fn uniform(depth: usize) -> Self {
        let n = 1usize << depth;
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.0.len().trailing_zeros() as usize
    }
}

fn draw_tree<R: Rng + ?Sized>(counts: &CountsTree, a0: Concentration, rng: &mut R) -> BetaTree {
    let a0 = a0.get();
    let depth = counts.depth();
    let mut phi = Vec::with_capacity((1 << depth) - 1);
    for level in 0..depth {
        for j in 0..1usize << level {
            let left = counts.get(level + 1, 2 * j) as f64;
            let right = counts.get(level + 1, 2 * j + 1) as f64;
            let beta = Beta::new(a0 + left, a0 + right).expect("positive Beta parameters");
            phi.push(beta.sample(rng));
        }
    }
    BetaTree { depth, phi }
}

/// Independent `Beta(a0, a0)` draws at every node.
pub fn sample_phi_prior<R: Rng + ?Sized>(depth: usize, a0: f64, rng: &mut R) -> Result<BetaTree> {
    let a0 = Concentration::new(a0)?;
    if depth > MAX_DEPTH {
        return Err(Error::DepthTooLarge(depth));
    }
    Ok(draw_tree(&CountsTree::empty(depth), a0, rng))
}

/// Conjugate draws `phi_{l,j} ~ Beta(a0 + N_left, a0 + N_right)`.
pub fn sample_phi_posterior<R: Rng + ?Sized>(
    counts: &CountsTree,
    a0: f64,
    rng: &mut R,
) -> Result<BetaTree> {
    Ok(draw_tree(counts, Concentration::new(a0)?, rng))
}

/// Step density `2^L * pi[j'(L)]` at `u`.
pub fn step_density(u: &[f64], seg: &Segmentation, pi: &ProbVector) -> Result<f64> {
    check_depth(seg, pi.len())?;
    let leaf = seg.leaf_index(u)?;
    Ok(pi.0[leaf] * pi.len() as f64)
}

fn check_depth(seg: &Segmentation, leaves: usize) -> Result<()> {
    if leaves != seg.leaf_count() {
        return Err(Error::InvalidArgument(format!(
            "probability vector has {leaves} leaves, segmentation has {}",
            seg.leaf_count()
        )));
    }
    Ok(())
}

/// Counts of `data` on the tree of `seg`.
pub fn accumulate_counts<P: AsRef<[f64]>>(data: &[P], seg: &Segmentation) -> Result<CountsTree> {
    CountsTree::from_points(data, seg)
}

/// Posterior predictive density of one segmentation given its counts:
/// `2^L * prod_l (N_l + a0) / (N_{l-1} + 2 a0)` along the path of `u`.
/// Below the first level whose parent count is zero every factor is `1/2`,
/// so the product stops there. Equals 1 without data.
pub fn conditional_predictive_density(
    u: &[f64],
    counts: &CountsTree,
    seg: &Segmentation,
    a0: f64,
) -> Result<f64> {
    let a0 = Concentration::new(a0)?;
    check_point(u, seg.ambient_dim())?;
    if counts.depth() != seg.depth() {
        return Err(Error::InvalidArgument(format!(
            "counts depth {} does not match segmentation depth {}",
            counts.depth(),
            seg.depth()
        )));
    }
    let leaf = seg.leaf_index_unchecked(u);
    Ok(log_predictive_leaf_density(counts, leaf, a0).exp())
}

/// Posterior predictive probability of every leaf box.
pub fn predictive_leaf_probabilities(counts: &CountsTree, a0: f64) -> Result<ProbVector> {
    let a0 = Concentration::new(a0)?;
    let scale = 1.0 / (1usize << counts.depth()) as f64;
    Ok(ProbVector(
        (0..1usize << counts.depth())
            .map(|leaf| log_predictive_leaf_density(counts, leaf, a0).exp() * scale)
            .collect(),
    ))
}

/// Log of the conditional predictive density on the box of `leaf`.
pub(crate) fn log_predictive_leaf_density(counts: &CountsTree, leaf: usize, a0: Concentration) -> f64 {
    let a0 = a0.get();
    let depth = counts.depth();
    let mut log_density = 0.0;
    let mut parent = counts.total();
    for level in 1..=depth {
        let n = counts.get(level, leaf >> (depth - level));
        if parent == 0 {
            break;
        }
        // each retained level doubles the density and multiplies by the posterior mean
        log_density += std::f64::consts::LN_2 + (n as f64 + a0).ln() - (parent as f64 + 2.0 * a0).ln();
        parent = n;
    }
    log_density
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn canonical(depth: usize) -> Segmentation {
        Segmentation::new(vec![1; depth], 1).unwrap()
    }

    fn four_points() -> Vec<Vec<f64>> {
        vec![vec![0.1], vec![0.2], vec![0.6], vec![0.9]]
    }

    #[test]
    fn concentration_validation() {
        assert!(Concentration::new(0.0).is_err());
        assert!(Concentration::new(-1.0).is_err());
        assert!(Concentration::new(f64::NAN).is_err());
        assert!(Concentration::new(f64::INFINITY).is_err());
        assert_eq!(Concentration::new(0.5).unwrap().get(), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_phi_prior(3, 0.0, &mut rng).is_err());
        assert!(sample_phi_posterior(&CountsTree::empty(2), -1.0, &mut rng).is_err());
    }

    #[test]
    fn counts_of_four_points() {
        let t = accumulate_counts(&four_points(), &canonical(2)).unwrap();
        assert_eq!(t.total(), 4);
        assert_eq!(t.level(1), &[2, 2]);
        assert_eq!(t.level(2), &[2, 0, 1, 1]);
        assert!(t.is_consistent());
        let empty: Vec<Vec<f64>> = vec![];
        let t = accumulate_counts(&empty, &canonical(3)).unwrap();
        assert_eq!(t.total(), 0);
        assert!(t.leaves().iter().all(|&n| n == 0));
        assert!(accumulate_counts(&[vec![1.5]], &canonical(2)).is_err());
    }

    #[test]
    fn add_then_remove_restores_counts() {
        let mut t = accumulate_counts(&four_points(), &canonical(3)).unwrap();
        let before = t.clone();
        t.add_leaf(5);
        assert_eq!(t.total(), 5);
        assert!(t.is_consistent());
        t.remove_leaf(5);
        assert_eq!(t, before);
    }

    #[test]
    fn counts_json() {
        let t = accumulate_counts(&four_points(), &canonical(2)).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"m":4,"levels":[[4],[2,2],[2,0,1,1]]}"#);
        let back: CountsTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<CountsTree>(r#"{"m":4,"levels":[[4],[2,1]]}"#).is_err());
    }

    #[test]
    fn pi_from_constant_phi() {
        let tree = BetaTree::from_phi(2, vec![0.5; 3]).unwrap();
        assert_eq!(tree.probabilities().0, vec![0.25; 4]);
        let tree = BetaTree::from_phi(2, vec![1.0, 0.3, 0.5]).unwrap();
        let pi = tree.probabilities();
        assert_eq!(pi.0[2] + pi.0[3], 0.0);
        assert_abs_diff_eq!(pi.0[0] + pi.0[1], 1.0);
        assert!(BetaTree::from_phi(2, vec![0.5; 2]).is_err());
    }

    #[test]
    fn pi_matches_path_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let depth = 6;
        let tree = sample_phi_prior(depth, 0.7, &mut rng).unwrap();
        let pi = tree.probabilities();
        assert_abs_diff_eq!(pi.0.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        for leaf in 0..1usize << depth {
            let mut product = 1.0;
            for level in 1..=depth {
                let j = leaf >> (depth - level + 1);
                let phi = tree.phi(level, j);
                let lower = (leaf >> (depth - level)) & 1 == 0;
                product *= if lower { phi } else { 1.0 - phi };
            }
            assert_abs_diff_eq!(pi.0[leaf], product, epsilon = 1e-14);
        }
    }

    #[test]
    fn step_density_examples() {
        let seg = Segmentation::new(vec![1, 2], 2).unwrap();
        assert_eq!(step_density(&[0.3, 0.9], &seg, &ProbVector::uniform(2)).unwrap(), 1.0);
        let pi = ProbVector(vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(step_density(&[0.1, 0.1], &seg, &pi).unwrap(), 2.0);
        assert_eq!(step_density(&[0.9, 0.1], &seg, &pi).unwrap(), 0.0);
        assert!(step_density(&[0.1, 1.1], &seg, &pi).is_err());
        assert!(step_density(&[0.1, 0.1], &seg, &ProbVector::uniform(3)).is_err());
    }

    #[test]
    fn step_density_box_sum_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seg = Segmentation::new(vec![2, 1, 1, 2, 2], 2).unwrap();
        for _ in 0..20 {
            let pi = sample_phi_prior(5, 0.3, &mut rng).unwrap().probabilities();
            let integral: f64 = (0..seg.leaf_count())
                .map(|leaf| {
                    let b = seg.leaf_box(leaf);
                    step_density(&b.center(), &seg, &pi).unwrap() * b.volume()
                })
                .sum();
            assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn predictive_density_closed_form() {
        let seg = canonical(2);
        let counts = accumulate_counts(&four_points(), &seg).unwrap();
        let f = conditional_predictive_density(&[0.1], &counts, &seg, 1.0).unwrap();
        assert_abs_diff_eq!(f, 1.5, epsilon = 1e-12);
        // empty box [0.25, 0.5): the first empty level still contributes a0 / (N + 2 a0)
        let f = conditional_predictive_density(&[0.3], &counts, &seg, 1.0).unwrap();
        assert_abs_diff_eq!(f, 4.0 * (3.0 / 6.0) * (1.0 / 4.0), epsilon = 1e-12);
        let total: f64 = [0.1, 0.3, 0.6, 0.9]
            .iter()
            .map(|&u| conditional_predictive_density(&[u], &counts, &seg, 1.0).unwrap() / 4.0)
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let empty = CountsTree::empty(2);
        assert_eq!(conditional_predictive_density(&[0.7], &empty, &seg, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn leaf_probabilities_sum_to_one() {
        let seg = canonical(2);
        let counts = accumulate_counts(&four_points(), &seg).unwrap();
        let p = predictive_leaf_probabilities(&counts, 1.0).unwrap();
        assert_abs_diff_eq!(p.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.as_slice()[0], 1.5 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn predictive_density_limits() {
        let seg = canonical(2);
        let counts = accumulate_counts(&four_points(), &seg).unwrap();
        let small = conditional_predictive_density(&[0.1], &counts, &seg, 1e-9).unwrap();
        assert_abs_diff_eq!(small, 2.0, epsilon = 1e-6);
        let large = conditional_predictive_density(&[0.1], &counts, &seg, 1e9).unwrap();
        assert_abs_diff_eq!(large, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn predictive_density_matches_posterior_draw_average() {
        let seg = canonical(2);
        let counts = accumulate_counts(&four_points(), &seg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let values: Vec<f64> = (0..draws)
            .map(|_| {
                let pi = sample_phi_posterior(&counts, 1.0, &mut rng).unwrap().probabilities();
                step_density(&[0.1], &seg, &pi).unwrap()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / draws as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn posterior_phi_mean_for_two_zero_split() {
        // one node with N_left = 2, N_right = 0
        let counts = accumulate_counts(&[vec![0.1], vec![0.2]], &canonical(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        let xs: Vec<f64> = (0..draws)
            .map(|_| sample_phi_posterior(&counts, 1.0, &mut rng).unwrap().phi(1, 0))
            .collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        // Beta(3, 1): variance 3 / (16 * 5)
        let se = (3.0 / 80.0 / draws as f64).sqrt();
        assert!((mean - 0.75).abs() < 3.0 * se);
    }

    #[test]
    fn prior_leaf_mass_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let depth = 3;
        let draws = 100_000;
        for a0 in [0.1, 1.0, 10.0] {
            let mut sum = [0.0; 8];
            let mut sum_sq = [0.0; 8];
            for _ in 0..draws {
                let pi = sample_phi_prior(depth, a0, &mut rng).unwrap().probabilities();
                for (k, p) in pi.0.iter().enumerate() {
                    sum[k] += p;
                    sum_sq[k] += p * p;
                }
            }
            for k in 0..8 {
                let mean = sum[k] / draws as f64;
                let var = sum_sq[k] / draws as f64 - mean * mean;
                let se = (var / draws as f64).sqrt();
                assert!((mean - 0.125).abs() < 3.0 * se, "a0={a0} leaf {k}: {mean}");
            }
        }
    }

    #[test]
    fn huge_concentration_gives_uniform_leaves() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pi = sample_phi_prior(6, 1e9, &mut rng).unwrap().probabilities();
        for p in pi.0 {
            assert_abs_diff_eq!(p, 1.0 / 64.0, epsilon = 1e-5);
        }
    }

    fn gini(p: &[f64]) -> f64 {
        let mut v = p.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let weighted: f64 = v.iter().enumerate().map(|(i, x)| (i as f64 + 1.0) * x).sum();
        (2.0 * weighted) / (n * v.iter().sum::<f64>()) - (n + 1.0) / n
    }

    #[test]
    fn dispersion_decreases_with_concentration() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let medians: Vec<f64> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&a0| {
                let mut g: Vec<f64> = (0..50)
                    .map(|_| gini(&sample_phi_prior(10, a0, &mut rng).unwrap().probabilities().0))
                    .collect();
                g.sort_by(f64::total_cmp);
                0.5 * (g[24] + g[25])
            })
            .collect();
        assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
    }

    #[test]
    fn occupied_depth_tracks_last_nonzero_level() {
        let counts = accumulate_counts(&four_points(), &canonical(3)).unwrap();
        // leaf [0.25, 0.375) is empty at level 2 but its parent holds two points
        assert_eq!(counts.occupied_depth(2), 1);
        assert_eq!(counts.occupied_depth(0), 3);
        assert_eq!(CountsTree::empty(3).occupied_depth(0), 0);
    }
}
