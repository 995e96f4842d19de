//! Mapping mixed continuous/categorical rows into the unit cube and back.
//!
//! A continuous column is cut into `B` bins at its empirical `l/B`
//! quantiles, with the outer edges pushed out by one percent of the range on
//! each side; a value in bin `k` (1-based) is encoded as `(2k - 1) / (2B)`.
//! A categorical column with levels `c_0, ..., c_{k-1}` uses `k - 1` dummy
//! coordinates: `c_0` is all `1/4`, `c_i` sets dummy `i` to `3/4`.
//!
//! Decoding accepts any point of the cube: a continuous coordinate selects
//! its bin and a value is drawn uniformly inside it; a dummy is "on" when it
//! is at least `1/2`.

use std::collections::BTreeSet;
use std::io::Read;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 16;
const DUMMY_OFF: f64 = 0.25;
const DUMMY_ON: f64 = 0.75;

/// A raw table cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Num(f64),
    Cat(String),
}

impl RawValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Self::Num(v) => Some(*v),
            Self::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Self::Cat(s) => Some(s),
            Self::Num(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical { levels: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

/// Column types of a raw table, usually read from a JSON sidecar:
/// `{"columns": [{"name": "y1", "type": "continuous"},
/// {"name": "x", "type": "categorical", "levels": ["a", "b", "c"]}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Self = serde_json::from_str(text).map_err(|e| Error::Encoding(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Encoding("schema has no columns".into()));
        }
        let names: BTreeSet<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        if names.len() != self.columns.len() {
            return Err(Error::Encoding("duplicate column names".into()));
        }
        for c in &self.columns {
            if let ColumnKind::Categorical { levels } = &c.kind {
                let distinct: BTreeSet<&String> = levels.iter().collect();
                if levels.len() < 2 || distinct.len() != levels.len() {
                    return Err(Error::Encoding(format!(
                        "column {} needs at least two distinct levels",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads a CSV table whose header names the schema columns (any order,
    /// extra columns ignored).
    pub fn read_csv<R: Read>(&self, input: R) -> Result<Vec<Vec<RawValue>>> {
        let err = |e: csv::Error| Error::Encoding(e.to_string());
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers().map_err(err)?.clone();
        let positions = self
            .columns
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h.trim() == c.name)
                    .ok_or_else(|| Error::Encoding(format!("column {} missing from table", c.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(err)?;
            let row = self
                .columns
                .iter()
                .zip(&positions)
                .map(|(c, &p)| {
                    let cell = record.get(p).unwrap_or("").trim();
                    match c.kind {
                        ColumnKind::Continuous => cell.parse().map(RawValue::Num).map_err(|_| {
                            Error::Encoding(format!("row {}: {} is not a number: {cell:?}", line + 1, c.name))
                        }),
                        ColumnKind::Categorical { .. } => Ok(RawValue::Cat(cell.to_string())),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(rows)
    }
}

/// How continuous bin edges are placed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binning {
    /// Empirical quantiles: encoded marginals are uniform on the midpoints.
    #[default]
    Quantile,
    /// Equal-width bins over the inflated range.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingOptions {
    pub bins: usize,
    pub binning: Binning,
}

impl Default for EncodingOptions {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            binning: Binning::Quantile,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ColumnEncoding {
    Continuous {
        name: String,
        /// `B + 1` strictly increasing edges, outer ones inflated.
        edges: Vec<f64>,
        /// 0-based cube coordinate.
        coord: usize,
    },
    Categorical {
        name: String,
        levels: Vec<String>,
        /// Cube coordinates of the dummies for `levels[1..]`.
        coords: Vec<usize>,
    },
}

/// Fitted mapping between raw rows and `[0,1]^P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub columns: Vec<ColumnEncoding>,
    pub dim: usize,
}

/// Result of encoding one row.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub point: Vec<f64>,
    /// Names of continuous columns whose value fell outside the inflated
    /// support and was clamped into the boundary bin.
    pub clamped: Vec<String>,
}

/// `l/B` sample quantiles, `l = 0..=B`, averaging the two neighbouring order
/// statistics when `n l / B` is an integer.
pub fn quantile_edges(sorted: &[f64], bins: usize) -> Vec<f64> {
    let n = sorted.len();
    (0..=bins)
        .map(|l| {
            if l == 0 {
                return sorted[0];
            }
            if l == bins {
                return sorted[n - 1];
            }
            let (num, den) = (n * l, bins);
            if num % den == 0 {
                let j = num / den;
                0.5 * (sorted[j - 1] + sorted[j])
            } else {
                sorted[num / den]
            }
        })
        .collect()
}

fn check_bins(bins: usize) -> Result<()> {
    if bins < 2 || !bins.is_power_of_two() {
        return Err(Error::Encoding(format!("bin count {bins} is not a power of two >= 2")));
    }
    Ok(())
}

/// Fits bin edges for every continuous column and assigns cube coordinates
/// in schema order.
pub fn fit_encoding(rows: &[Vec<RawValue>], schema: &Schema, options: EncodingOptions) -> Result<EncodingSpec> {
    schema.validate()?;
    check_bins(options.bins)?;
    let bins = options.bins;
    let mut coord = 0;
    let mut columns = Vec::with_capacity(schema.columns.len());
    for (j, col) in schema.columns.iter().enumerate() {
        match &col.kind {
            ColumnKind::Continuous => {
                let mut values = rows
                    .iter()
                    .map(|r| {
                        r.get(j)
                            .and_then(RawValue::as_num)
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| Error::Encoding(format!("column {} needs finite numbers", col.name)))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                values.sort_by(f64::total_cmp);
                let distinct = values.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(!values.is_empty());
                if distinct < bins {
                    return Err(Error::Encoding(format!(
                        "column {} has {distinct} distinct values, needs at least {bins}",
                        col.name
                    )));
                }
                let (lo, hi) = (values[0], values[values.len() - 1]);
                let delta = (hi - lo) / 100.0;
                let mut edges = match options.binning {
                    Binning::Quantile => quantile_edges(&values, bins),
                    Binning::Linear => (0..=bins)
                        .map(|l| (lo - delta) + (hi - lo + 2.0 * delta) * l as f64 / bins as f64)
                        .collect(),
                };
                edges[0] = lo - delta;
                edges[bins] = hi + delta;
                if edges.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Encoding(format!("column {} has tied quantiles", col.name)));
                }
                columns.push(ColumnEncoding::Continuous {
                    name: col.name.clone(),
                    edges,
                    coord,
                });
                coord += 1;
            }
            ColumnKind::Categorical { levels } => {
                for r in rows {
                    let v = r.get(j).and_then(RawValue::as_cat);
                    if !v.is_some_and(|v| levels.iter().any(|l| l == v)) {
                        return Err(Error::Encoding(format!("column {}: unknown level {:?}", col.name, r.get(j))));
                    }
                }
                let coords: Vec<usize> = (coord..coord + levels.len() - 1).collect();
                coord += coords.len();
                columns.push(ColumnEncoding::Categorical {
                    name: col.name.clone(),
                    levels: levels.clone(),
                    coords,
                });
            }
        }
    }
    Ok(EncodingSpec { columns, dim: coord })
}

impl EncodingSpec {
    pub fn bins(&self) -> Option<usize> {
        self.columns.iter().find_map(|c| match c {
            ColumnEncoding::Continuous { edges, .. } => Some(edges.len() - 1),
            ColumnEncoding::Categorical { .. } => None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Encoding(e.to_string()))?;
        let mut seen = BTreeSet::new();
        for c in &spec.columns {
            let coords = match c {
                ColumnEncoding::Continuous { edges, coord, .. } => {
                    check_bins(edges.len().saturating_sub(1))?;
                    if edges.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::Encoding("edges must increase strictly".into()));
                    }
                    vec![*coord]
                }
                ColumnEncoding::Categorical { levels, coords, .. } => {
                    if coords.len() + 1 != levels.len() {
                        return Err(Error::Encoding("need one dummy per non-base level".into()));
                    }
                    coords.clone()
                }
            };
            for k in coords {
                if k >= spec.dim || !seen.insert(k) {
                    return Err(Error::Encoding(format!("bad coordinate {k}")));
                }
            }
        }
        if seen.len() != spec.dim {
            return Err(Error::Encoding("coordinates do not cover the cube".into()));
        }
        Ok(spec)
    }

    /// Maps one raw row to the cube.
    pub fn encode(&self, row: &[RawValue]) -> Result<Encoded> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        let mut point = vec![0.0; self.dim];
        let mut clamped = Vec::new();
        for (col, value) in self.columns.iter().zip(row) {
            match col {
                ColumnEncoding::Continuous { name, edges, coord } => {
                    let v = value
                        .as_num()
                        .filter(|v| !v.is_nan())
                        .ok_or_else(|| Error::Encoding(format!("column {name} expects a number")))?;
                    let bins = edges.len() - 1;
                    if v < edges[0] || v > edges[bins] {
                        clamped.push(name.clone());
                    }
                    let k = edges[1..bins].partition_point(|&e| e <= v);
                    point[*coord] = (2 * k + 1) as f64 / (2 * bins) as f64;
                }
                ColumnEncoding::Categorical { name, levels, coords } => {
                    let v = value
                        .as_cat()
                        .ok_or_else(|| Error::Encoding(format!("column {name} expects a level")))?;
                    let level = levels
                        .iter()
                        .position(|l| l == v)
                        .ok_or_else(|| Error::Encoding(format!("column {name}: unknown level {v:?}")))?;
                    for (i, &c) in coords.iter().enumerate() {
                        point[c] = if level == i + 1 { DUMMY_ON } else { DUMMY_OFF };
                    }
                }
            }
        }
        Ok(Encoded { point, clamped })
    }

    /// Maps a cube point back to a raw row, drawing continuous values
    /// uniformly within their bins.
    pub fn decode<R: Rng + ?Sized>(&self, point: &[f64], rng: &mut R) -> Result<Vec<RawValue>> {
        crate::segmentation::check_point(point, self.dim)?;
        self.columns
            .iter()
            .map(|col| match col {
                ColumnEncoding::Continuous { edges, coord, .. } => {
                    let bins = edges.len() - 1;
                    let k = ((point[*coord] * bins as f64) as usize).min(bins - 1);
                    let (lo, hi) = (edges[k], edges[k + 1]);
                    Ok(RawValue::Num(lo + (hi - lo) * rng.random::<f64>()))
                }
                ColumnEncoding::Categorical { name, levels, coords } => {
                    let on: Vec<usize> = (0..coords.len()).filter(|&i| point[coords[i]] >= 0.5).collect();
                    match on.as_slice() {
                        [] => Ok(RawValue::Cat(levels[0].clone())),
                        [i] => Ok(RawValue::Cat(levels[i + 1].clone())),
                        _ => Err(Error::Encoding(format!("column {name}: more than one dummy is on"))),
                    }
                }
            })
            .collect()
    }

    /// 1-based bin of a continuous value, clamped to the boundary bins.
    pub fn bin_of(&self, column: usize, value: f64) -> Option<usize> {
        match &self.columns[column] {
            ColumnEncoding::Continuous { edges, .. } => {
                let bins = edges.len() - 1;
                Some(edges[1..bins].partition_point(|&e| e <= value) + 1)
            }
            ColumnEncoding::Categorical { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn schema() -> Schema {
        Schema::from_json(
            r#"{"columns": [
                {"name": "y", "type": "continuous"},
                {"name": "x", "type": "categorical", "levels": ["a", "b", "c"]}
            ]}"#,
        )
        .unwrap()
    }

    fn table(values: &[f64], cats: &[&str]) -> Vec<Vec<RawValue>> {
        values
            .iter()
            .zip(cats.iter().cycle())
            .map(|(&v, &c)| vec![RawValue::Num(v), RawValue::Cat(c.into())])
            .collect()
    }

    #[test]
    fn one_point_per_bin_lands_on_midpoints() {
        let values: Vec<f64> = (0..16).map(|k| (k * k) as f64).collect();
        let rows = table(&values, &["a"]);
        let spec = fit_encoding(&rows, &schema(), EncodingOptions::default()).unwrap();
        assert_eq!(spec.dim, 3);
        for (k, row) in rows.iter().enumerate() {
            let e = spec.encode(row).unwrap();
            assert_eq!(e.point[0], (2 * k + 1) as f64 / 32.0);
            assert!(e.clamped.is_empty());
        }
    }

    #[test]
    fn dummy_scheme() {
        let rows = table(&(0..16).map(f64::from).collect::<Vec<_>>(), &["a", "b", "c"]);
        let spec = fit_encoding(&rows, &schema(), EncodingOptions::default()).unwrap();
        let enc = |c: &str| spec.encode(&[RawValue::Num(3.0), RawValue::Cat(c.into())]).unwrap().point;
        assert_eq!(enc("a")[1..], [0.25, 0.25]);
        assert_eq!(enc("b")[1..], [0.75, 0.25]);
        assert_eq!(enc("c")[1..], [0.25, 0.75]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for c in ["a", "b", "c"] {
            let back = spec.decode(&enc(c), &mut rng).unwrap();
            assert_eq!(back[1], RawValue::Cat(c.into()));
        }
        assert!(spec.decode(&[0.5, 0.75, 0.75], &mut rng).is_err());
        assert!(spec.encode(&[RawValue::Num(3.0), RawValue::Cat("d".into())]).is_err());
    }

    #[test]
    fn inflation_and_clamping() {
        let values: Vec<f64> = (0..32).map(f64::from).collect();
        let rows = table(&values, &["a"]);
        let spec = fit_encoding(&rows, &schema(), EncodingOptions::default()).unwrap();
        let ColumnEncoding::Continuous { edges, .. } = &spec.columns[0] else { unreachable!() };
        assert!((edges[0] + 0.31).abs() < 1e-12 && (edges[16] - 31.31).abs() < 1e-12);
        let e = spec.encode(&[RawValue::Num(-0.2), RawValue::Cat("a".into())]).unwrap();
        assert_eq!((e.point[0], e.clamped.len()), (1.0 / 32.0, 0));
        let e = spec.encode(&[RawValue::Num(-5.0), RawValue::Cat("a".into())]).unwrap();
        assert_eq!((e.point[0], e.clamped.as_slice()), (1.0 / 32.0, &["y".to_string()][..]));
        let e = spec.encode(&[RawValue::Num(99.0), RawValue::Cat("a".into())]).unwrap();
        assert_eq!((e.point[0], e.clamped.len()), (31.0 / 32.0, 1));
    }

    #[test]
    fn decode_draws_inside_bin() {
        let values: Vec<f64> = (0..64).map(|k| (k as f64).sqrt()).collect();
        let rows = table(&values, &["a"]);
        let spec = fit_encoding(&rows, &schema(), EncodingOptions::default()).unwrap();
        let ColumnEncoding::Continuous { edges, .. } = &spec.columns[0] else { unreachable!() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let v = spec.decode(&[1.0 / 32.0, 0.25, 0.25], &mut rng).unwrap()[0].as_num().unwrap();
            assert!(edges[0] <= v && v < edges[1]);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let rows = table(&[1.0, 2.0, 3.0], &["a"]);
        assert!(fit_encoding(&rows, &schema(), EncodingOptions::default()).is_err());
        let rows = table(&(0..16).map(f64::from).collect::<Vec<_>>(), &["z"]);
        assert!(fit_encoding(&rows, &schema(), EncodingOptions::default()).is_err());
        let opts = EncodingOptions { bins: 12, ..Default::default() };
        assert!(fit_encoding(&table(&[0.0; 16], &["a"]), &schema(), opts).is_err());
        assert!(Schema::from_json(r#"{"columns": [{"name": "x", "type": "categorical", "levels": ["a"]}]}"#).is_err());
    }

    #[test]
    fn linear_binning_has_equal_widths() {
        let values: Vec<f64> = (0..40).map(|k| ((k * 7919) % 97) as f64).collect();
        let opts = EncodingOptions { bins: 8, binning: Binning::Linear };
        let spec = fit_encoding(&table(&values, &["b"]), &schema(), opts).unwrap();
        let ColumnEncoding::Continuous { edges, .. } = &spec.columns[0] else { unreachable!() };
        let w = edges[1] - edges[0];
        assert!(edges.windows(2).all(|e| ((e[1] - e[0]) - w).abs() < 1e-9));
    }

    #[test]
    fn json_and_csv_round_trip() {
        let rows = table(&(0..20).map(|k| k as f64 * 0.5).collect::<Vec<_>>(), &["a", "c"]);
        let spec = fit_encoding(&rows, &schema(), EncodingOptions::default()).unwrap();
        assert_eq!(EncodingSpec::from_json(&spec.to_json()).unwrap(), spec);

        let csv = "id,x,y\n1,b,0.5\n2,a,-1.25\n";
        let parsed = schema().read_csv(csv.as_bytes()).unwrap();
        assert_eq!(parsed[1], vec![RawValue::Num(-1.25), RawValue::Cat("a".into())]);
        assert!(schema().read_csv("x,y\nb,oops\n".as_bytes()).is_err());
        assert!(schema().read_csv("x\nb\n".as_bytes()).is_err());
    }
}
