//! Tabular ingestion, label encoding, feature relevance weights and
//! controlled label-noise injection.
//!
//! A [`Dataset`] is a dense feature matrix with one ±1 [`Label`] per row and
//! a split index: rows before `split` are the *past* instances the detector
//! learns from, rows from `split` on are the *recent* instances to be checked.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::seed;
use crate::stats;

/// Binary class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }

    /// Binarizes a scaled response: `y := y_r >= 0`, so an exact zero maps
    /// to [`Label::Positive`].
    pub fn from_response(y_r: f64) -> Label {
        if y_r >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

pub fn label_values(labels: &[Label]) -> Vec<f64> {
    labels.iter().map(|l| l.value()).collect()
}

/// Dense row-major matrix of feature values.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature values must be finite"));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len(cols, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        FeatureMatrix::new(rows.len(), cols, data)
    }

    pub fn empty(cols: usize) -> Self {
        FeatureMatrix {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copies the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> FeatureMatrix {
        FeatureMatrix {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        check_len(self.cols, other.cols)?;
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(FeatureMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    fn map_columns(&self, f: impl Fn(usize, f64) -> f64) -> FeatureMatrix {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(idx, &v)| f(idx % self.cols, v))
            .collect();
        FeatureMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

/// Instances with features, labels and the past/recent split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: FeatureMatrix,
    labels: Vec<Label>,
    split: usize,
    feature_names: Vec<String>,
    response: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(features: FeatureMatrix, labels: Vec<Label>, split: usize) -> Result<Self> {
        check_len(features.rows(), labels.len())?;
        if split > labels.len() {
            return Err(Error::invalid(format!(
                "split {split} exceeds row count {}",
                labels.len()
            )));
        }
        let feature_names = (0..features.cols()).map(|j| format!("x{j}")).collect();
        Ok(Dataset {
            features,
            labels,
            split,
            feature_names,
            response: None,
        })
    }

    /// All rows are past instances.
    pub fn past_only(features: FeatureMatrix, labels: Vec<Label>) -> Result<Self> {
        let n = labels.len();
        Dataset::new(features, labels, n)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        check_len(self.features.cols(), names.len())?;
        self.feature_names = names;
        Ok(self)
    }

    /// Attaches the scaled ordinal response `y_r` the labels were derived from.
    pub fn with_response(mut self, response: Vec<f64>) -> Result<Self> {
        check_len(self.len(), response.len())?;
        if response.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::invalid("response values must lie in [-1, 1]"));
        }
        self.response = Some(response);
        Ok(self)
    }

    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Self> {
        check_len(self.len(), labels.len())?;
        Ok(Dataset { labels, ..self.clone() })
    }

    pub fn with_split(&self, split: usize) -> Result<Self> {
        let mut out = Dataset::new(self.features.clone(), self.labels.clone(), split)?;
        out.feature_names = self.feature_names.clone();
        out.response = self.response.clone();
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn response(&self) -> Option<&[f64]> {
        self.response.as_deref()
    }

    pub fn past_features(&self) -> FeatureMatrix {
        self.features.slice_rows(0..self.split)
    }

    pub fn recent_features(&self) -> FeatureMatrix {
        self.features.slice_rows(self.split..self.len())
    }

    pub fn past_labels(&self) -> &[Label] {
        &self.labels[..self.split]
    }

    pub fn recent_labels(&self) -> &[Label] {
        &self.labels[self.split..]
    }

    /// Copies the given rows; the result treats every row as past.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split: indices.len(),
            feature_names: self.feature_names.clone(),
            response: self.response.as_ref().map(|r| indices.iter().map(|&i| r[i]).collect()),
        }
    }

    /// Standardizes every column with statistics from the past rows only.
    pub fn standardized(&self) -> Result<(Dataset, Standardizer)> {
        let scaler = Standardizer::fit(&self.past_features())?;
        let features = scaler.transform(&self.features)?;
        Ok((
            Dataset {
                features,
                ..self.clone()
            },
            scaler,
        ))
    }
}

/// Per-column affine standardization fitted on past rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(past: &FeatureMatrix) -> Result<Self> {
        if past.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = past.rows() as f64;
        let mut mean = vec![0.0; past.cols()];
        let mut scale = vec![1.0; past.cols()];
        let mut constant = vec![false; past.cols()];
        for j in 0..past.cols() {
            let col = past.column(j);
            let mu = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean[j] = mu;
            // Constant over the past rows: the column is zeroed everywhere.
            if sd <= 1e-12 * mu.abs().max(1.0) {
                constant[j] = true;
            } else {
                scale[j] = sd;
            }
        }
        Ok(Standardizer { mean, scale, constant })
    }

    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        check_len(self.mean.len(), m.cols())?;
        Ok(m.map_columns(|j, v| {
            if self.constant[j] {
                0.0
            } else {
                (v - self.mean[j]) / self.scale[j]
            }
        }))
    }
}

/// How label-column values become ±1 labels.
#[derive(Clone, Debug, PartialEq)]
pub enum LabelRule {
    /// Values must read as `1`, `+1` or `-1`.
    Signed,
    /// Explicit value → label table; anything else is an error.
    Mapping(BTreeMap<String, Label>),
    /// Numeric values `>= threshold` are positive.
    Threshold(f64),
    /// Ordinal response: min-max scaled to `[-1, 1]`, then `y := y_r >= 0`.
    /// The scaled response is kept on the dataset.
    ScaledResponse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    Reject,
    /// Replace missing feature values by the column mean over past rows.
    MeanImpute,
}

#[derive(Clone, Debug)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub label_rule: LabelRule,
    pub missing: MissingPolicy,
    /// Columns excluded from the feature matrix besides the label column.
    pub ignore_columns: Vec<String>,
    /// Number of leading rows that are past instances; `None` means all.
    pub past_rows: Option<usize>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            label_rule: LabelRule::Signed,
            missing: MissingPolicy::Reject,
            ignore_columns: Vec::new(),
            past_rows: None,
        }
    }
}

const MISSING_TOKENS: [&str; 6] = ["", "na", "nan", "?", "null", "none"];

fn is_missing(field: &str) -> bool {
    let t = field.trim().to_ascii_lowercase();
    MISSING_TOKENS.contains(&t.as_str())
}

/// Loads a CSV with a header row and standardizes the features with past-row
/// statistics.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_reader(file, label_column, options)
}

pub fn load_csv_reader<R: Read>(reader: R, label_column: &str, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    for ignored in &options.ignore_columns {
        if !header.contains(ignored) {
            return Err(Error::MissingColumn(ignored.clone()));
        }
    }
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&j| j != label_idx && !options.ignore_columns.contains(&header[j]))
        .collect();

    let mut raw: Vec<Vec<Option<f64>>> = Vec::new();
    let mut raw_labels: Vec<(usize, String)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(raw.len() + 2, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::Parse {
                row: line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(feature_idx.len());
        for &j in &feature_idx {
            let field = &record[j];
            if is_missing(field) {
                if options.missing == MissingPolicy::Reject {
                    return Err(Error::MissingValue {
                        row: line,
                        column: header[j].clone(),
                    });
                }
                row.push(None);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row: line,
                    message: format!("column `{}`: cannot parse `{field}` as a number", header[j]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: line,
                        message: format!("column `{}`: non-finite value", header[j]),
                    });
                }
                row.push(Some(v));
            }
        }
        raw.push(row);
        raw_labels.push((line, record[label_idx].to_string()));
    }
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = raw.len();
    let split = options.past_rows.unwrap_or(n);
    if split > n {
        return Err(Error::invalid(format!("past_rows {split} exceeds row count {n}")));
    }

    let (labels, response) = encode_labels(&raw_labels, &options.label_rule)?;

    let cols = feature_idx.len();
    if options.missing == MissingPolicy::MeanImpute {
        for j in 0..cols {
            let present: Vec<f64> = raw[..split].iter().filter_map(|r| r[j]).collect();
            if present.is_empty() && raw.iter().any(|r| r[j].is_none()) {
                return Err(Error::Degenerate(format!(
                    "column `{}` has no observed past values to impute from",
                    header[feature_idx[j]]
                )));
            }
            let mean = present.iter().sum::<f64>() / present.len().max(1) as f64;
            for r in raw.iter_mut() {
                r[j].get_or_insert(mean);
            }
        }
    }
    let data: Vec<f64> = raw.into_iter().flatten().map(|v| v.unwrap_or(0.0)).collect();
    let features = FeatureMatrix::new(n, cols, data)?;
    let mut ds = Dataset::new(features, labels, split)?
        .with_feature_names(feature_idx.iter().map(|&j| header[j].clone()).collect())?;
    if let Some(r) = response {
        ds = ds.with_response(r)?;
    }
    if split == 0 {
        return Ok(ds);
    }
    Ok(ds.standardized()?.0)
}

fn encode_labels(raw: &[(usize, String)], rule: &LabelRule) -> Result<(Vec<Label>, Option<Vec<f64>>)> {
    let parse_num = |line: usize, v: &str| -> Result<f64> {
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::UnknownLabel {
                row: line,
                value: v.to_string(),
            })
    };
    match rule {
        LabelRule::Signed => raw
            .iter()
            .map(|(line, v)| match parse_num(*line, v)? {
                1.0 => Ok(Label::Positive),
                -1.0 => Ok(Label::Negative),
                _ => Err(Error::UnknownLabel {
                    row: *line,
                    value: v.clone(),
                }),
            })
            .collect::<Result<_>>()
            .map(|l| (l, None)),
        LabelRule::Mapping(map) => raw
            .iter()
            .map(|(line, v)| {
                map.get(v).copied().ok_or_else(|| Error::UnknownLabel {
                    row: *line,
                    value: v.clone(),
                })
            })
            .collect::<Result<_>>()
            .map(|l| (l, None)),
        LabelRule::Threshold(t) => raw
            .iter()
            .map(|(line, v)| {
                Ok(if parse_num(*line, v)? >= *t {
                    Label::Positive
                } else {
                    Label::Negative
                })
            })
            .collect::<Result<_>>()
            .map(|l| (l, None)),
        LabelRule::ScaledResponse => {
            let values = raw
                .iter()
                .map(|(line, v)| parse_num(*line, v))
                .collect::<Result<Vec<_>>>()?;
            let scaled = scale_response(&values)?;
            let labels = scaled.iter().map(|&y| Label::from_response(y)).collect();
            Ok((labels, Some(scaled)))
        }
    }
}

/// Min-max scales an ordinal response onto `[-1, 1]`.
pub fn scale_response(values: &[f64]) -> Result<Vec<f64>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || hi - lo <= 0.0 {
        return Err(Error::Degenerate("response has no spread".into()));
    }
    Ok(values
        .iter()
        .map(|v| (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
        .collect())
}

/// Per-feature relevance `psi`, one entry in `[0, 1]` per column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureWeights(Vec<f64>);

impl FeatureWeights {
    pub fn new(psi: Vec<f64>) -> Result<Self> {
        if psi.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("feature weights must lie in [0, 1]"));
        }
        Ok(FeatureWeights(psi))
    }

    pub fn uniform(cols: usize) -> Self {
        FeatureWeights(vec![1.0; cols])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Wilcoxon relevance of each feature over the past rows: `psi_j = |2 AUC_j - 1|`
/// where `AUC_j` is the area under the ROC curve of column `j` ranking
/// positives above negatives, ties counted one half.
pub fn wilcoxon_weights(data: &Dataset) -> Result<FeatureWeights> {
    let labels = data.past_labels();
    let positive: Vec<bool> = labels.iter().map(|l| l.is_positive()).collect();
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 || n_pos == positive.len() {
        return Err(Error::SingleClass);
    }
    let past = data.past_features();
    let psi = (0..past.cols())
        .map(|j| {
            let auc = stats::rank_auc(&past.column(j), &positive);
            (2.0 * auc - 1.0).abs().min(1.0)
        })
        .collect();
    FeatureWeights::new(psi)
}

/// Ground truth produced by [`inject_flips`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipRecord {
    /// Sorted ascending.
    pub flipped_indices: Vec<usize>,
    pub original_response: Vec<f64>,
    /// `|original_response[i] - label[i]|` with the post-flip labels.
    pub true_anomaly_score: Vec<f64>,
}

impl FlipRecord {
    pub fn flipped_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.original_response.len()];
        for &i in &self.flipped_indices {
            mask[i] = true;
        }
        mask
    }
}

/// `floor(fraction * count)`, tolerant of representation error such as
/// `0.29 * 100 = 28.999999999999996`.
pub fn flip_count(fraction: f64, count: usize) -> usize {
    ((fraction * count as f64) + 1e-9).floor() as usize
}

/// Negates the labels of a uniformly random `floor(fraction * rows)` subset.
pub fn inject_flips(data: &Dataset, response: &[f64], fraction: f64, seed: u64) -> Result<(Dataset, FlipRecord)> {
    let pool: Vec<usize> = (0..data.len()).collect();
    inject_flips_within(data, response, fraction, seed, &pool)
}

/// Like [`inject_flips`] but draws the flipped subset from `pool` only, with
/// `floor(fraction * pool.len())` flips.
pub fn inject_flips_within(
    data: &Dataset,
    response: &[f64],
    fraction: f64,
    seed: u64,
    pool: &[usize],
) -> Result<(Dataset, FlipRecord)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("flip fraction {fraction} outside [0, 1]")));
    }
    check_len(data.len(), response.len())?;
    if response.iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return Err(Error::invalid("response values must lie in [-1, 1]"));
    }
    if let Some(&bad) = pool.iter().find(|&&i| i >= data.len()) {
        return Err(Error::invalid(format!("pool index {bad} out of range")));
    }
    let count = flip_count(fraction, pool.len());
    let mut rng = seed::rng(seed, seed::stream::FLIPS);
    let mut flipped: Vec<usize> = index::sample(&mut rng, pool.len(), count)
        .into_iter()
        .map(|p| pool[p])
        .collect();
    flipped.sort_unstable();

    let mut labels = data.labels().to_vec();
    for &i in &flipped {
        labels[i] = labels[i].flipped();
    }
    let true_anomaly_score = response
        .iter()
        .zip(&labels)
        .map(|(r, l)| (r - l.value()).abs())
        .collect();
    let record = FlipRecord {
        flipped_indices: flipped,
        original_response: response.to_vec(),
        true_anomaly_score,
    };
    Ok((data.with_labels(labels)?, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(cols: &[&[f64]], labels: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let labels = labels.iter().map(|&l| Label::from_response(l)).collect();
        Dataset::past_only(FeatureMatrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    /// Brute force over all positive-negative pairs.
    fn pair_auc(x: &[f64], pos: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..x.len() {
            for j in 0..x.len() {
                if pos[i] && !pos[j] {
                    den += 1.0;
                    num += if x[i] > x[j] {
                        1.0
                    } else if x[i] == x[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn mapping_labels() {
        let csv = "f1,f2,cls\n1,2,a\n2,3,b\n3,1,a\n4,0,b\n";
        let map = BTreeMap::from([("a".to_string(), Label::Positive), ("b".to_string(), Label::Negative)]);
        let opts = CsvOptions {
            label_rule: LabelRule::Mapping(map),
            ..Default::default()
        };
        let d = load_csv_reader(csv.as_bytes(), "cls", &opts).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(
            d.labels(),
            &[Label::Positive, Label::Negative, Label::Positive, Label::Negative]
        );
        assert_eq!(d.feature_names(), &["f1", "f2"]);
    }

    #[test]
    fn constant_column_standardizes_to_zero() {
        let csv = "a,b,y\n0.1,1,1\n0.1,2,-1\n0.1,5,1\n";
        let d = load_csv_reader(csv.as_bytes(), "y", &CsvOptions::default()).unwrap();
        assert!(d.features().column(0).iter().all(|&v| v == 0.0));
        let b = d.features().column(1);
        assert!(b.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn recent_rows_use_past_statistics() {
        let csv = "a,y\n0,1\n2,-1\n10,1\n";
        let opts = CsvOptions {
            past_rows: Some(2),
            ..Default::default()
        };
        let d = load_csv_reader(csv.as_bytes(), "y", &opts).unwrap();
        assert_eq!(d.split(), 2);
        // past mean 1, sd 1
        assert_eq!(d.features().column(0), vec![-1.0, 1.0, 9.0]);
    }

    #[test]
    fn scaled_response_protocol() {
        let csv = "x,medv\n1,5\n2,27.5\n3,50\n4,20\n";
        let opts = CsvOptions {
            label_rule: LabelRule::ScaledResponse,
            ..Default::default()
        };
        let d = load_csv_reader(csv.as_bytes(), "medv", &opts).unwrap();
        let expected = [-1.0, 0.0, 1.0, -1.0 / 3.0];
        for (r, e) in d.response().unwrap().iter().zip(expected) {
            assert!((r - e).abs() < 1e-15);
        }
        // y_r = 0 binarizes as positive
        assert_eq!(
            d.labels(),
            &[Label::Negative, Label::Positive, Label::Positive, Label::Negative]
        );
    }

    #[test]
    fn ingestion_errors() {
        let opts = CsvOptions::default();
        let err = load_csv_reader("a,y\n1,1\nfoo,-1\n".as_bytes(), "y", &opts).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
        let err = load_csv_reader("a,y\n1,1\n2,7\n".as_bytes(), "y", &opts).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { row: 3, .. }), "{err}");
        let err = load_csv_reader("a,y\n".as_bytes(), "y", &opts).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
        let err = load_csv_reader("a,y\n1,1\n".as_bytes(), "label", &opts).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "label"));
        let err = load_csv_reader("a,y\n1,1\n,-1\n".as_bytes(), "y", &opts).unwrap_err();
        assert!(matches!(err, Error::MissingValue { row: 3, .. }), "{err}");
    }

    #[test]
    fn mean_imputation() {
        let opts = CsvOptions {
            missing: MissingPolicy::MeanImpute,
            ..Default::default()
        };
        let d = load_csv_reader("a,y\n1,1\nNA,-1\n3,1\n".as_bytes(), "y", &opts).unwrap();
        // imputed value equals the mean, so it standardizes to 0
        assert_eq!(d.features().get(1, 0), 0.0);
    }

    #[test]
    fn wilcoxon_examples() {
        let perfect = ds(&[&[2.0, 3.0, 0.0, 1.0]], &[1.0, 1.0, -1.0, -1.0]);
        assert_eq!(wilcoxon_weights(&perfect).unwrap().as_slice(), &[1.0]);

        let flat = ds(&[&[4.0, 4.0, 4.0, 4.0]], &[1.0, 1.0, -1.0, -1.0]);
        assert_eq!(wilcoxon_weights(&flat).unwrap().as_slice(), &[0.0]);

        let x = [1.0, 3.0, 2.0, 4.0];
        let pos = [true, true, false, false];
        let auc = pair_auc(&x, &pos);
        assert_eq!(auc, 0.25);
        let mixed = ds(&[&x], &[1.0, 1.0, -1.0, -1.0]);
        let psi = wilcoxon_weights(&mixed).unwrap();
        assert!((psi.as_slice()[0] - (2.0 * auc - 1.0).abs()).abs() < 1e-15);
        assert_eq!(psi.as_slice()[0], 0.5);
    }

    #[test]
    fn wilcoxon_single_class() {
        let d = ds(&[&[1.0, 2.0]], &[1.0, 1.0]);
        assert!(matches!(wilcoxon_weights(&d), Err(Error::SingleClass)));
    }

    #[test]
    fn flip_examples() {
        let d = ds(&[&[0.0, 1.0, 2.0]], &[0.8, -0.5, 0.1]);
        let r = [0.8, -0.5, 0.1];
        let (same, rec) = inject_flips(&d, &r, 0.0, 3).unwrap();
        assert_eq!(same.labels(), d.labels());
        assert!(rec.flipped_indices.is_empty());
        for i in 0..3 {
            assert!((rec.true_anomaly_score[i] - (r[i] - d.labels()[i].value()).abs()).abs() < 1e-15);
        }

        let (all, rec) = inject_flips(&d, &r, 1.0, 3).unwrap();
        assert_eq!(rec.flipped_indices, vec![0, 1, 2]);
        assert_eq!(all.labels()[0], Label::Negative);
        assert!((rec.true_anomaly_score[0] - 1.8).abs() < 1e-15);

        assert!(inject_flips(&d, &r, 1.5, 3).is_err());
        assert!(inject_flips(&d, &r, -0.1, 3).is_err());
    }

    #[test]
    fn three_percent_of_thousand() {
        assert_eq!(flip_count(0.03, 1000), 30);
        assert_eq!(flip_count(0.29, 100), 29);
        let rows: Vec<Vec<f64>> = (0..1000).map(|i| vec![i as f64]).collect();
        let r: Vec<f64> = (0..1000).map(|i| (i as f64 / 999.0) * 2.0 - 1.0).collect();
        let labels = r.iter().map(|&v| Label::from_response(v)).collect();
        let d = Dataset::past_only(FeatureMatrix::from_rows(&rows).unwrap(), labels).unwrap();
        let (flipped, rec) = inject_flips(&d, &r, 0.03, 11).unwrap();
        assert_eq!(rec.flipped_indices.len(), 30);
        let changed = flipped.labels().iter().zip(d.labels()).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 30);
        for &i in &rec.flipped_indices {
            assert_eq!(flipped.labels()[i], Label::from_response(r[i]).flipped());
        }
    }

    #[test]
    fn flips_within_pool() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let d = Dataset::past_only(FeatureMatrix::from_rows(&rows).unwrap(), vec![Label::Positive; 10]).unwrap();
        let r = vec![0.5; 10];
        let (_, rec) = inject_flips_within(&d, &r, 0.5, 1, &[6, 7, 8, 9]).unwrap();
        assert_eq!(rec.flipped_indices.len(), 2);
        assert!(rec.flipped_indices.iter().all(|&i| i >= 6));
    }
}
