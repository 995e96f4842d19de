//! Segmentation probabilities of five depth-2 segmentations on four points.
//!
//! The points live in `[0,1]^5` and sit at `1/4` or `3/4` on each axis, so
//! every member sees one of the count vectors
//! `(1,1,1,1), (0,2,0,2), (0,0,2,2), (0,0,0,4), (0,0,4,0)`.

use polyamix::{PosteriorModel, Segmentation, SegmentationFamily};
use serde_json::{json, Value};

use super::Report;
use crate::output::Table;
use crate::SimResult;

const MEMBERS: [[usize; 2]; 5] = [[4, 5], [4, 2], [1, 4], [1, 2], [1, 3]];

fn points() -> Vec<Vec<f64>> {
    let (lo, hi) = (0.25, 0.75);
    vec![
        vec![hi, hi, lo, lo, lo],
        vec![hi, hi, lo, lo, hi],
        vec![hi, hi, lo, hi, lo],
        vec![hi, hi, lo, hi, hi],
    ]
}

pub fn family() -> SegmentationFamily {
    SegmentationFamily::new(
        MEMBERS
            .iter()
            .map(|d| Segmentation::new(d.to_vec(), 5).expect("valid member"))
            .collect(),
    )
    .expect("distinct members")
}

#[derive(Clone, Debug)]
pub struct Table1Report {
    pub a0s: Vec<f64>,
    /// Leaf counts of each member.
    pub counts: Vec<Vec<u32>>,
    /// `weights[a][j]`: probability of member `j` under `a0s[a]`.
    pub weights: Vec<Vec<f64>>,
}

pub fn run_table1(a0s: &[f64]) -> SimResult<Table1Report> {
    let data = points();
    let fam = family();
    let mut counts = Vec::new();
    let mut weights = Vec::new();
    for &a0 in a0s {
        let model = PosteriorModel::fit(&data, &fam, a0)?;
        if counts.is_empty() {
            counts = (0..fam.len()).map(|j| model.counts(j).leaves().to_vec()).collect();
        }
        weights.push(model.weights());
    }
    Ok(Table1Report {
        a0s: a0s.to_vec(),
        counts,
        weights,
    })
}

impl Report for Table1Report {
    fn meta(&self) -> Value {
        json!({"study": "table1", "a0": self.a0s, "m": 4})
    }

    fn tables(&self) -> Vec<(&'static str, Table)> {
        let mut header = vec!["segmentation".to_string(), "counts".to_string()];
        header.extend(self.a0s.iter().map(|a| format!("a0={a}")));
        let mut t = Table::new(&header);
        let fam = family();
        for (j, seg) in fam.members().iter().enumerate() {
            let counts: Vec<String> = self.counts[j].iter().map(u32::to_string).collect();
            let mut row = vec![seg.to_string(), format!("({})", counts.join(","))];
            row.extend(self.weights.iter().map(|w| format!("{:.6}", w[j])));
            t.push(row);
        }
        vec![("table1", t)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn members_see_the_intended_counts() {
        let r = run_table1(&[1.0]).unwrap();
        let expected: Vec<Vec<u32>> = vec![
            vec![1, 1, 1, 1],
            vec![0, 2, 0, 2],
            vec![0, 0, 2, 2],
            vec![0, 0, 0, 4],
            vec![0, 0, 4, 0],
        ];
        assert_eq!(r.counts, expected);
        assert_eq!(r.tables()[0].1.rows.len(), 5);
    }
}
