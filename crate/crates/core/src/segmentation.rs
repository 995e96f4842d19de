//! Dyadic segmentations of the unit cube `[0,1]^P`.
//!
//! A segmentation of depth `L` halves the cube `L` times. Level `l` splits
//! every level-`(l-1)` box along the same dimension `d_l`, the lower half
//! (small coordinate values) receiving the odd index `2j-1` and the upper half
//! the even index `2j`. The `2^L` level-`L` boxes tile the cube and each has
//! volume `2^-L`.
//!
//! Boundary convention: every split interval is half-open `[lo, mid)` except
//! the last one along an axis, which is closed at `1.0`. This makes
//! [`Segmentation::locate`] total on the closed cube.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box inside the unit cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CubeBox {
    pub fn unit(ambient: usize) -> Self {
        Self {
            lo: vec![0.0; ambient],
            hi: vec![1.0; ambient],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(lo, hi)| (hi - lo).max(0.0))
            .product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Volume of the intersection with `other`.
    pub fn overlap(&self, other: &CubeBox) -> f64 {
        let mut vol = 1.0;
        for k in 0..self.dim() {
            let lo = self.lo[k].max(other.lo[k]);
            let hi = self.hi[k].min(other.hi[k]);
            if hi <= lo {
                return 0.0;
            }
            vol *= hi - lo;
        }
        vol
    }

    /// Membership under the half-open convention with a closed top face.
    pub fn contains(&self, u: &[f64]) -> bool {
        u.iter().enumerate().all(|(k, &x)| {
            x >= self.lo[k] && (x < self.hi[k] || (self.hi[k] >= 1.0 && x <= 1.0))
        })
    }
}

/// Validates that `u` is a point of `[0,1]^ambient`.
pub fn check_point(u: &[f64], ambient: usize) -> Result<()> {
    if u.len() != ambient {
        return Err(Error::DimensionMismatch {
            expected: ambient,
            got: u.len(),
        });
    }
    for (index, &value) in u.iter().enumerate() {
        // written to reject NaN as well
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutsideCube { index, value });
        }
    }
    Ok(())
}

/// A dyadic segmentation defined by its per-level splitting dimensions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Segmentation {
    /// 1-based splitting dimension for each level.
    dims: Vec<usize>,
    ambient: usize,
    /// Number of splits of each axis over all levels.
    total_splits: Vec<u32>,
    /// For level `l` (0-based), how many earlier levels split the same axis.
    split_rank: Vec<u32>,
}

impl Segmentation {
    /// Builds a segmentation from 1-based splitting dimensions.
    pub fn new(dims: Vec<usize>, ambient: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::EmptySegmentation);
        }
        if dims.len() > crate::hbeta::MAX_DEPTH {
            return Err(Error::DepthTooLarge(dims.len()));
        }
        let mut total_splits = vec![0u32; ambient];
        let mut split_rank = Vec::with_capacity(dims.len());
        for &d in &dims {
            if d == 0 || d > ambient {
                return Err(Error::DimensionOutOfRange { dim: d, ambient });
            }
            split_rank.push(total_splits[d - 1]);
            total_splits[d - 1] += 1;
        }
        Ok(Self {
            dims,
            ambient,
            total_splits,
            split_rank,
        })
    }

    pub fn depth(&self) -> usize {
        self.dims.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    /// 1-based splitting dimensions, one per level.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// 0-based axis split at `level` (1-based).
    pub fn axis(&self, level: usize) -> usize {
        self.dims[level - 1] - 1
    }

    pub fn leaf_count(&self) -> usize {
        1 << self.depth()
    }

    /// How many times each axis is halved.
    pub fn splits_per_dim(&self) -> Vec<usize> {
        self.total_splits.iter().map(|&s| s as usize).collect()
    }

    /// Segmentation with extra levels appended.
    pub fn refine(&self, extra: &[usize]) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(extra);
        Self::new(dims, self.ambient)
    }

    /// 0-based index of the level-`L` box containing `u`.
    pub fn leaf_index(&self, u: &[f64]) -> Result<usize> {
        check_point(u, self.ambient)?;
        Ok(self.leaf_index_unchecked(u))
    }

    /// Like [`Self::leaf_index`] for points already known to be in the cube.
    pub(crate) fn leaf_index_unchecked(&self, u: &[f64]) -> usize {
        let mut leaf = 0usize;
        for (level, &d) in self.dims.iter().enumerate() {
            let axis = d - 1;
            let splits = self.total_splits[axis];
            let cells = (1u64 << splits) as f64;
            let cell = ((u[axis] * cells).floor() as u64).min((1u64 << splits) - 1);
            let bit = (cell >> (splits - 1 - self.split_rank[level])) & 1;
            leaf = (leaf << 1) | bit as usize;
        }
        leaf
    }

    /// The chain of boxes containing `u`, from level 1 down to level `L`.
    pub fn locate(&self, u: &[f64]) -> Result<SubintervalPath> {
        let leaf = self.leaf_index(u)?;
        let depth = self.depth();
        let indices = (1..=depth).map(|l| (leaf >> (depth - l)) + 1).collect();
        let boxes = (1..=depth)
            .map(|l| self.node_box(l, leaf >> (depth - l)))
            .collect();
        Ok(SubintervalPath { indices, boxes })
    }

    /// Box of node `node` (0-based) at `level` (0 is the whole cube).
    pub fn node_box(&self, level: usize, node: usize) -> CubeBox {
        let mut b = CubeBox::unit(self.ambient);
        for l in 1..=level {
            let axis = self.axis(l);
            let mid = 0.5 * (b.lo[axis] + b.hi[axis]);
            if (node >> (level - l)) & 1 == 0 {
                b.hi[axis] = mid;
            } else {
                b.lo[axis] = mid;
            }
        }
        b
    }

    /// Box of the 0-based level-`L` leaf.
    pub fn leaf_box(&self, leaf: usize) -> CubeBox {
        self.node_box(self.depth(), leaf)
    }

    /// Integer cell ranges `[start, end)` of a leaf on a grid with
    /// `grid_splits[k]` halvings along axis `k`. The grid must be at least as
    /// fine as this segmentation along every axis.
    pub fn leaf_cell_ranges(&self, leaf: usize, grid_splits: &[usize]) -> Vec<(usize, usize)> {
        let depth = self.depth();
        let mut coord = vec![0usize; self.ambient];
        let mut used = vec![0usize; self.ambient];
        for l in 1..=depth {
            let axis = self.axis(l);
            let bit = (leaf >> (depth - l)) & 1;
            coord[axis] = (coord[axis] << 1) | bit;
            used[axis] += 1;
        }
        (0..self.ambient)
            .map(|k| {
                let shift = grid_splits[k] - used[k];
                let start = coord[k] << shift;
                (start, start + (1 << shift))
            })
            .collect()
    }
}

impl fmt::Debug for Segmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Segmentation{:?}", self.dims)
    }
}

impl fmt::Display for Segmentation {
    /// `X`/`Y` labels in two dimensions, 1-based indices otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self
            .dims
            .iter()
            .map(|&d| match (self.ambient, d) {
                (2, 1) => "X".to_string(),
                (2, 2) => "Y".to_string(),
                _ => d.to_string(),
            })
            .collect();
        write!(f, "({})", labels.join(","))
    }
}

impl Serialize for Segmentation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.dims.serialize(serializer)
    }
}

/// The chain of nested boxes containing a point.
#[derive(Clone, Debug, PartialEq)]
pub struct SubintervalPath {
    /// 1-based box index `j'(l)` for levels `l = 1..=L`.
    pub indices: Vec<usize>,
    /// Box at each level, same order as `indices`.
    pub boxes: Vec<CubeBox>,
}

impl SubintervalPath {
    /// 0-based leaf index.
    pub fn leaf(&self) -> usize {
        self.indices.last().copied().unwrap_or(1) - 1
    }
}

/// A finite set of segmentations with a uniform prior.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationFamily {
    members: Vec<Segmentation>,
}

impl SegmentationFamily {
    /// Members must share the ambient dimension and depth and be distinct.
    pub fn new(members: Vec<Segmentation>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyFamily)?;
        let (ambient, depth) = (first.ambient_dim(), first.depth());
        let mut seen = HashSet::with_capacity(members.len());
        for seg in &members {
            if seg.ambient_dim() != ambient || seg.depth() != depth {
                return Err(Error::InconsistentFamily(format!(
                    "{seg} does not match ambient dimension {ambient} and depth {depth}"
                )));
            }
            if !seen.insert(seg.dims().to_vec()) {
                return Err(Error::InconsistentFamily(format!("duplicate member {seg}")));
            }
        }
        Ok(Self { members })
    }

    pub fn single(seg: Segmentation) -> Self {
        Self { members: vec![seg] }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Segmentation] {
        &self.members
    }

    pub fn get(&self, i: usize) -> &Segmentation {
        &self.members[i]
    }

    pub fn ambient_dim(&self) -> usize {
        self.members[0].ambient_dim()
    }

    pub fn depth(&self) -> usize {
        self.members[0].depth()
    }

    pub fn prior_mass(&self) -> f64 {
        1.0 / self.members.len() as f64
    }

    pub fn position(&self, seg: &Segmentation) -> Option<usize> {
        self.members.iter().position(|s| s == seg)
    }

    /// Per-axis halvings of the coarsest grid refining every member.
    pub fn common_refinement(&self) -> Vec<usize> {
        let mut grid = vec![0usize; self.ambient_dim()];
        for seg in &self.members {
            for (g, s) in grid.iter_mut().zip(seg.splits_per_dim()) {
                *g = (*g).max(s);
            }
        }
        grid
    }

    /// Every distinct ordering of a multiset of splits after a fixed prefix,
    /// in lexicographic order.
    ///
    /// `splits` maps a 1-based dimension to the number of times it is halved
    /// after the prefix.
    pub fn balanced(
        ambient: usize,
        splits: &BTreeMap<usize, usize>,
        prefix: &[usize],
    ) -> Result<Self> {
        let members = balanced_orderings(ambient, splits, prefix)?
            .into_iter()
            .map(|dims| Segmentation::new(dims, ambient))
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }

    /// Union of balanced families over every `choose`-subset of `candidates`,
    /// each chosen dimension halved `splits_each` times after `prefix`.
    ///
    /// Groups appear in lexicographic subset order. With ten dimensions,
    /// prefix `(10, 9)`, candidates `1..=8`, pairs and four splits each this
    /// gives 28 groups of 70 segmentations.
    pub fn subset_union(
        ambient: usize,
        prefix: &[usize],
        candidates: &[usize],
        choose: usize,
        splits_each: usize,
    ) -> Result<Self> {
        if choose == 0 || choose > candidates.len() {
            return Err(Error::InconsistentFamily(format!(
                "cannot choose {choose} of {} candidate dimensions",
                candidates.len()
            )));
        }
        let mut members = Vec::new();
        for subset in combinations(candidates, choose) {
            let splits: BTreeMap<usize, usize> =
                subset.iter().map(|&d| (d, splits_each)).collect();
            for dims in balanced_orderings(ambient, &splits, prefix)? {
                members.push(Segmentation::new(dims, ambient)?);
            }
        }
        Self::new(members)
    }
}

/// Free-function form of [`SegmentationFamily::balanced`].
pub fn enumerate_balanced_family(
    ambient: usize,
    splits: &BTreeMap<usize, usize>,
    prefix: &[usize],
) -> Result<SegmentationFamily> {
    SegmentationFamily::balanced(ambient, splits, prefix)
}

fn balanced_orderings(
    ambient: usize,
    splits: &BTreeMap<usize, usize>,
    prefix: &[usize],
) -> Result<Vec<Vec<usize>>> {
    for &d in splits.keys().chain(prefix) {
        if d == 0 || d > ambient {
            return Err(Error::DimensionOutOfRange { dim: d, ambient });
        }
    }
    let mut tail: Vec<usize> = splits
        .iter()
        .flat_map(|(&d, &n)| std::iter::repeat_n(d, n))
        .collect();
    if tail.is_empty() && prefix.is_empty() {
        return Err(Error::EmptySegmentation);
    }
    tail.sort_unstable();
    let mut out = Vec::new();
    loop {
        let mut dims = prefix.to_vec();
        dims.extend_from_slice(&tail);
        out.push(dims);
        if !next_permutation(&mut tail) {
            break;
        }
    }
    Ok(out)
}

/// Advances to the next lexicographic permutation; false after the last one.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).unwrap();
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    let n = items.len();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let Some(pos) = (0..k).rev().find(|&p| idx[p] != p + n - k) else {
            return out;
        };
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// JSON form of a family: `{"dim": P, "members": [[1,1,2,2], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyDoc {
    pub dim: usize,
    pub members: Vec<Vec<usize>>,
}

impl From<&SegmentationFamily> for FamilyDoc {
    fn from(family: &SegmentationFamily) -> Self {
        Self {
            dim: family.ambient_dim(),
            members: family.members.iter().map(|s| s.dims.clone()).collect(),
        }
    }
}

impl TryFrom<FamilyDoc> for SegmentationFamily {
    type Error = Error;

    fn try_from(doc: FamilyDoc) -> Result<Self> {
        let members = doc
            .members
            .into_iter()
            .map(|dims| Segmentation::new(dims, doc.dim))
            .collect::<Result<Vec<_>>>()?;
        SegmentationFamily::new(members)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(dims: &[usize], p: usize) -> Segmentation {
        Segmentation::new(dims.to_vec(), p).unwrap()
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(Segmentation::new(vec![], 2), Err(Error::EmptySegmentation));
        assert_eq!(
            Segmentation::new(vec![1, 3], 2),
            Err(Error::DimensionOutOfRange { dim: 3, ambient: 2 })
        );
        assert!(Segmentation::new(vec![0], 1).is_err());
    }

    #[test]
    fn single_split_halves_the_interval() {
        let s = seg(&[1], 1);
        assert_eq!(s.leaf_box(0), CubeBox { lo: vec![0.0], hi: vec![0.5] });
        assert_eq!(s.leaf_box(1), CubeBox { lo: vec![0.5], hi: vec![1.0] });
    }

    #[test]
    fn quadrants_follow_small_values_first() {
        let s = seg(&[1, 2], 2);
        let expect = [
            ([0.0, 0.0], [0.5, 0.5]),
            ([0.0, 0.5], [0.5, 1.0]),
            ([0.5, 0.0], [1.0, 0.5]),
            ([0.5, 0.5], [1.0, 1.0]),
        ];
        for (leaf, (lo, hi)) in expect.iter().enumerate() {
            assert_eq!(s.leaf_box(leaf), CubeBox { lo: lo.to_vec(), hi: hi.to_vec() });
        }
    }

    #[test]
    fn xxxx_gives_vertical_strips() {
        let s = seg(&[1, 1, 1, 1], 2);
        for leaf in 0..16 {
            let b = s.leaf_box(leaf);
            assert_eq!(b.lo, vec![leaf as f64 / 16.0, 0.0]);
            assert_eq!(b.hi, vec![(leaf + 1) as f64 / 16.0, 1.0]);
        }
    }

    #[test]
    fn locate_examples() {
        let s = seg(&[1, 1], 1);
        assert_eq!(s.locate(&[0.3]).unwrap().indices, vec![1, 2]);
        assert_eq!(s.locate(&[1.0]).unwrap().indices, vec![2, 4]);
        assert_eq!(s.locate(&[0.5]).unwrap().indices, vec![2, 3]);
        let s = seg(&[2, 1, 1, 2, 3], 3);
        assert_eq!(s.locate(&[0.0, 0.0, 0.0]).unwrap().indices, vec![1, 1, 1, 1, 1]);
        assert!(matches!(s.locate(&[0.1, 1.2, 0.0]), Err(Error::OutsideCube { index: 1, .. })));
        assert!(s.locate(&[0.1, f64::NAN, 0.0]).is_err());
        assert!(matches!(s.locate(&[0.1]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn path_boxes_are_nested() {
        let s = seg(&[2, 1, 2, 1], 2);
        let path = s.locate(&[0.7, 0.2]).unwrap();
        for w in path.boxes.windows(2) {
            assert!(w[1].volume() * 2.0 == w[0].volume());
            assert!(w[0].overlap(&w[1]) == w[1].volume());
        }
        assert!(path.boxes.last().unwrap().contains(&[0.7, 0.2]));
    }

    #[test]
    fn cell_ranges_match_leaf_boxes() {
        let s = seg(&[2, 1, 1], 2);
        let grid = [3, 2];
        for leaf in 0..s.leaf_count() {
            let b = s.leaf_box(leaf);
            let r = s.leaf_cell_ranges(leaf, &grid);
            for k in 0..2 {
                let n = (1 << grid[k]) as f64;
                assert_eq!(r[k].0 as f64 / n, b.lo[k]);
                assert_eq!(r[k].1 as f64 / n, b.hi[k]);
            }
        }
    }

    #[test]
    fn balanced_family_sizes() {
        let splits = BTreeMap::from([(1, 4), (2, 4)]);
        let fam = enumerate_balanced_family(2, &splits, &[]).unwrap();
        assert_eq!(fam.len(), 70);
        assert_eq!(fam.get(0).dims(), &[1, 1, 1, 1, 2, 2, 2, 2]);
        assert_eq!(fam.get(69).dims(), &[2, 2, 2, 2, 1, 1, 1, 1]);
        for w in fam.members().windows(2) {
            assert!(w[0].dims() < w[1].dims());
        }
        assert_eq!(fam.common_refinement(), vec![4, 4]);

        let fam = enumerate_balanced_family(1, &BTreeMap::from([(1, 10)]), &[]).unwrap();
        assert_eq!(fam.len(), 1);

        let fam = SegmentationFamily::subset_union(10, &[10, 9], &[1, 2, 3, 4, 5, 6, 7, 8], 2, 4)
            .unwrap();
        assert_eq!(fam.len(), 1960);
        assert_eq!(fam.depth(), 10);
        assert!(fam.members().iter().all(|s| s.dims()[..2] == [10, 9]));
    }

    #[test]
    fn balanced_family_errors() {
        assert!(enumerate_balanced_family(2, &BTreeMap::from([(3, 1)]), &[]).is_err());
        assert!(enumerate_balanced_family(2, &BTreeMap::new(), &[]).is_err());
        assert!(enumerate_balanced_family(2, &BTreeMap::from([(1, 1)]), &[5]).is_err());
        assert!(SegmentationFamily::new(vec![]).is_err());
        assert!(SegmentationFamily::new(vec![seg(&[1], 2), seg(&[1], 2)]).is_err());
        assert!(SegmentationFamily::new(vec![seg(&[1], 2), seg(&[1, 2], 2)]).is_err());
    }

    #[test]
    fn family_json_round_trip() {
        let fam = SegmentationFamily::new(vec![seg(&[1, 1, 2, 2], 2), seg(&[2, 1, 2, 1], 2)]).unwrap();
        let json = serde_json::to_string(&FamilyDoc::from(&fam)).unwrap();
        assert_eq!(json, r#"{"dim":2,"members":[[1,1,2,2],[2,1,2,1]]}"#);
        let back: FamilyDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(SegmentationFamily::try_from(back).unwrap(), fam);
        assert_eq!(serde_json::to_string(fam.get(0)).unwrap(), "[1,1,2,2]");
    }

    #[test]
    fn display_labels() {
        assert_eq!(seg(&[1, 1, 2, 2], 2).to_string(), "(X,X,Y,Y)");
        assert_eq!(seg(&[10, 9, 1], 10).to_string(), "(10,9,1)");
    }
}
