//! Label-flip evaluation harness.
//!
//! Each run splits a dataset with an ordinal response into train and test
//! parts, flips a fraction of the labels, fits the detectors on the training
//! part and scores the test part. Two metrics are reported and kept apart:
//!
//! * `flip_detection_auc`: ROC area of the scores as a detector of the
//!   flipped instances;
//! * `score_concordance`: fraction of instance pairs ordered the same way by
//!   the scores and by the true anomaly score `|y_r - y|`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backbone::{build_backbone, BackboneConfig};
use crate::baseline::KnnModel;
use crate::data::{
    inject_flips, inject_flips_within, wilcoxon_weights, Dataset, FeatureMatrix, FeatureWeights, FlipRecord, Label,
    Standardizer,
};
use crate::error::{check_len, Error, Result};
use crate::graph::{choose_sigma, SigmaMode, DEFAULT_PAIR_SAMPLE};
use crate::harmonic::{score_backbone, score_recent, HarmonicConfig, ScoringConfig, ScoringMode};
use crate::seed;
use crate::stats;

pub const METRIC_AUC: &str = "flip_detection_auc";
pub const METRIC_CONCORDANCE: &str = "score_concordance";

/// ROC area of `scores` separating flipped from unflipped instances, ties
/// counted one half.
pub fn flip_detection_auc(scores: &[f64], flipped: &[bool]) -> Result<f64> {
    check_len(scores.len(), flipped.len())?;
    let n_flipped = flipped.iter().filter(|&&f| f).count();
    if n_flipped == 0 || n_flipped == flipped.len() {
        return Err(Error::Degenerate(
            "flip detection AUC needs both flipped and unflipped instances".into(),
        ));
    }
    Ok(stats::rank_auc(scores, flipped))
}

/// Over pairs with distinct true scores, the fraction whose predicted order
/// matches; predicted ties count one half.
pub fn score_concordance(scores: &[f64], true_scores: &[f64]) -> Result<f64> {
    check_len(true_scores.len(), scores.len())?;
    let n = scores.len();
    if n < 2 {
        return Err(Error::invalid("concordance needs at least two instances"));
    }
    let mut agree = 0.0;
    let mut pairs = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            let t = true_scores[i].total_cmp(&true_scores[j]);
            if t.is_eq() {
                continue;
            }
            pairs += 1;
            let s = scores[i].partial_cmp(&scores[j]).unwrap_or(std::cmp::Ordering::Equal);
            if s.is_eq() {
                agree += 0.5;
            } else if s == t {
                agree += 1.0;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::Degenerate("true scores are all equal".into()));
    }
    Ok(agree / pairs as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipScope {
    /// Flips drawn from every instance before splitting.
    #[default]
    Global,
    /// Flips drawn from the test instances only.
    TestOnly,
}

/// One SoftHAD configuration in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftHadVariant {
    pub gamma_g: f64,
    /// `None` keeps every training instance in the graph.
    pub backbone_size: Option<usize>,
}

impl SoftHadVariant {
    pub fn label(&self) -> String {
        match self.backbone_size {
            Some(s) => format!("softhad[gamma_g={};backbone={s}]", self.gamma_g),
            None => format!("softhad[gamma_g={}]", self.gamma_g),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Free-form description of the data source, echoed in reports.
    pub dataset: String,
    pub flip_fraction: f64,
    pub flip_scope: FlipScope,
    pub train_fraction: f64,
    pub runs: usize,
    pub seed: u64,
    pub graph_k: usize,
    pub sigma: SigmaMode,
    pub pair_sample: usize,
    /// `gamma_g` here is overridden by each variant.
    pub harmonic: HarmonicConfig,
    pub mode: ScoringMode,
    pub multiplicity_weighting: bool,
    pub balanced: bool,
    pub variants: Vec<SoftHadVariant>,
    /// Neighbourhood size of the weighted k-NN baseline; `None` skips it.
    pub knn_k: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            dataset: String::new(),
            flip_fraction: 0.03,
            flip_scope: FlipScope::Global,
            train_fraction: 2.0 / 3.0,
            runs: 100,
            seed: 0,
            graph_k: 75,
            sigma: SigmaMode::default(),
            pair_sample: DEFAULT_PAIR_SAMPLE,
            harmonic: HarmonicConfig::default(),
            mode: ScoringMode::Withheld,
            multiplicity_weighting: true,
            balanced: false,
            variants: vec![SoftHadVariant {
                gamma_g: 1.0,
                backbone_size: None,
            }],
            knn_k: Some(75),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_fraction) {
            return Err(Error::invalid(format!(
                "flip fraction {} outside [0, 1]",
                self.flip_fraction
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.graph_k == 0 {
            return Err(Error::invalid("graph k must be at least 1"));
        }
        self.harmonic.validate()?;
        for v in &self.variants {
            if !(v.gamma_g.is_finite() && v.gamma_g >= 0.0) {
                return Err(Error::invalid(format!(
                    "gamma_g must be non-negative, got {}",
                    v.gamma_g
                )));
            }
            if v.backbone_size.is_some_and(|s| s < 2) {
                return Err(Error::invalid("backbone size must be at least 2"));
            }
        }
        if self.knn_k == Some(0) {
            return Err(Error::invalid("k-NN k must be at least 1"));
        }
        Ok(())
    }

    pub fn method_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.variants.iter().map(SoftHadVariant::label).collect();
        if let Some(k) = self.knn_k {
            labels.push(format!("wknn[k={k}]"));
        }
        labels
    }
}

/// Metric values of one run, one entry per method in
/// [`ExperimentSpec::method_labels`] order. `None` marks an undefined metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub auc: Vec<Option<f64>>,
    pub concordance: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub metric: String,
    pub mean: f64,
    /// Sample variance across the runs where the metric was defined.
    pub variance: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub rows: Vec<SummaryRow>,
}

impl MetricSummary {
    pub fn get(&self, method: &str, metric: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.method == method && r.metric == metric)
    }

    /// `method,metric,mean,variance,runs`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "metric", "mean", "variance", "runs"])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.metric.clone(),
                r.mean.to_string(),
                r.variance.to_string(),
                r.runs.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn summarize(labels: &[String], runs: &[RunResult]) -> MetricSummary {
    let mut rows = Vec::new();
    for (m, method) in labels.iter().enumerate() {
        for (metric, pick) in [
            (
                METRIC_AUC,
                (|r: &RunResult, m: usize| r.auc[m]) as fn(&RunResult, usize) -> Option<f64>,
            ),
            (METRIC_CONCORDANCE, |r: &RunResult, m: usize| r.concordance[m]),
        ] {
            let values: Vec<f64> = runs.iter().filter_map(|r| pick(r, m)).collect();
            let (mean, variance) = if values.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (stats::mean(&values), stats::sample_variance(&values))
            };
            rows.push(SummaryRow {
                method: method.clone(),
                metric: metric.to_string(),
                mean,
                variance,
                runs: values.len(),
            });
        }
    }
    MetricSummary { rows }
}

/// Runs the protocol and aggregates per-method metrics.
pub fn run_experiment(data: &Dataset, spec: &ExperimentSpec) -> Result<MetricSummary> {
    Ok(run_experiment_detailed(data, spec)?.0)
}

/// Like [`run_experiment`] but also returns the per-run metrics, in run order.
pub fn run_experiment_detailed(data: &Dataset, spec: &ExperimentSpec) -> Result<(MetricSummary, Vec<RunResult>)> {
    spec.validate()?;
    let response = data
        .response()
        .ok_or_else(|| Error::invalid("the experiment needs a dataset with an ordinal response"))?;
    if data.len() < 4 {
        return Err(Error::invalid("the experiment needs at least four instances"));
    }
    let runs: Vec<RunResult> = (0..spec.runs)
        .into_par_iter()
        .map(|r| single_run(data, response, spec, r))
        .collect::<Result<_>>()?;
    Ok((summarize(&spec.method_labels(), &runs), runs))
}

fn single_run(data: &Dataset, response: &[f64], spec: &ExperimentSpec, run: usize) -> Result<RunResult> {
    let run_seed = spec.seed.wrapping_add(run as u64);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(run_seed, seed::stream::SPLIT));
    let n_train = ((n as f64 * spec.train_fraction).round() as usize).clamp(2, n - 1);
    let (train_idx, test_idx) = order.split_at(n_train);

    let (flipped, record) = match spec.flip_scope {
        FlipScope::Global => inject_flips(data, response, spec.flip_fraction, run_seed)?,
        FlipScope::TestOnly => inject_flips_within(data, response, spec.flip_fraction, run_seed, test_idx)?,
    };
    let train_raw = flipped.select(train_idx);
    let test_raw = flipped.select(test_idx);
    let scaler = Standardizer::fit(train_raw.features())?;
    let train = Dataset::past_only(scaler.transform(train_raw.features())?, train_raw.labels().to_vec())?;
    let test_x = scaler.transform(test_raw.features())?;
    let test_y = test_raw.labels();

    let psi = wilcoxon_weights(&train)?;
    let sigma = choose_sigma(train.features(), &psi, spec.sigma, spec.pair_sample, run_seed)?;

    let mask = record.flipped_mask();
    let test_flipped: Vec<bool> = test_idx.iter().map(|&i| mask[i]).collect();
    let test_true: Vec<f64> = test_idx.iter().map(|&i| record.true_anomaly_score[i]).collect();
    let metrics = |scores: &[f64]| {
        (
            flip_detection_auc(scores, &test_flipped).ok(),
            score_concordance(scores, &test_true).ok(),
        )
    };

    let mut auc = Vec::new();
    let mut concordance = Vec::new();
    for v in &spec.variants {
        let bcfg = BackboneConfig {
            size: v.backbone_size,
            graph_k: spec.graph_k,
            sigma: SigmaMode::Fixed(sigma),
            balanced: spec.balanced,
            pair_sample: spec.pair_sample,
        };
        let bb = build_backbone(&train, &psi, &bcfg, run_seed)?;
        let scfg = ScoringConfig {
            harmonic: HarmonicConfig {
                gamma_g: v.gamma_g,
                ..spec.harmonic.clone()
            },
            graph_k: spec.graph_k.min(bb.len() - 1),
            mode: spec.mode,
            multiplicity_weighting: spec.multiplicity_weighting,
            recent_edges: false,
        };
        let report = score_recent(&bb, &test_x, test_y, &psi, &scfg)?;
        let (a, c) = metrics(&report.raw_score);
        auc.push(a);
        concordance.push(c);
    }
    if let Some(k) = spec.knn_k {
        let model = KnnModel::new(
            train.features().clone(),
            train.labels().to_vec(),
            k.min(train.len()),
            psi,
            sigma,
        )?;
        let raw: Vec<f64> = (0..test_x.rows())
            .map(|i| model.anomaly_score(test_x.row(i), test_y[i]))
            .collect::<Result<_>>()?;
        let (a, c) = metrics(&raw);
        auc.push(a);
        concordance.push(c);
    }
    Ok(RunResult { run, auc, concordance })
}

/// Two Gaussian classes plus a tight cluster of mislabeled instances sitting
/// inside the region of the opposite class.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedScenario {
    pub dataset: Dataset,
    pub record: FlipRecord,
    pub cluster: Vec<usize>,
}

pub const PLANTED_CLASS_SIZE: usize = 100;
pub const PLANTED_CLUSTER_SIZE: usize = 5;
const PLANTED_CLUSTER_CENTER: [f64; 2] = [2.5, 0.5];
const PLANTED_CLUSTER_RADIUS: f64 = 0.1;
const PLANTED_EXCLUSION_RADIUS: f64 = 0.6;

/// Positives around `(-2, 0)`, negatives around `(2, 0)` (unit variance,
/// 100 each), and five instances within 0.1 of `(2.5, 0.5)` labeled
/// positive although they belong to the negative region. Class points are
/// kept at least 0.6 away from the cluster center, so the cluster members
/// are each other's nearest neighbours. The cluster occupies the last five
/// rows.
pub fn planted_cluster_scenario(seed: u64) -> PlantedScenario {
    let mut rng = seed::rng(seed, seed::stream::SCENARIO);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let tight = Normal::new(0.0, PLANTED_CLUSTER_RADIUS / 3.0).expect("valid normal");
    let dist_to_center =
        |p: &[f64; 2]| ((p[0] - PLANTED_CLUSTER_CENTER[0]).powi(2) + (p[1] - PLANTED_CLUSTER_CENTER[1]).powi(2)).sqrt();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (cx, label) in [(-2.0, Label::Positive), (2.0, Label::Negative)] {
        let mut added = 0;
        while added < PLANTED_CLASS_SIZE {
            let p = [cx + unit.sample(&mut rng), unit.sample(&mut rng)];
            if dist_to_center(&p) >= PLANTED_EXCLUSION_RADIUS {
                rows.push(p.to_vec());
                labels.push(label);
                added += 1;
            }
        }
    }
    let mut cluster = Vec::new();
    while cluster.len() < PLANTED_CLUSTER_SIZE {
        let p = [
            PLANTED_CLUSTER_CENTER[0] + tight.sample(&mut rng),
            PLANTED_CLUSTER_CENTER[1] + tight.sample(&mut rng),
        ];
        if dist_to_center(&p) <= PLANTED_CLUSTER_RADIUS {
            cluster.push(rows.len());
            rows.push(p.to_vec());
            labels.push(Label::Negative);
        }
    }
    let original: Vec<f64> = labels.iter().map(|l| l.value()).collect();
    for &i in &cluster {
        labels[i] = Label::Positive;
    }
    let true_anomaly_score = original
        .iter()
        .zip(&labels)
        .map(|(r, l)| (r - l.value()).abs())
        .collect();
    let features = FeatureMatrix::from_rows(&rows).expect("rectangular rows");
    PlantedScenario {
        dataset: Dataset::past_only(features, labels).expect("consistent lengths"),
        record: FlipRecord {
            flipped_indices: cluster.clone(),
            original_response: original,
            true_anomaly_score,
        },
        cluster,
    }
}

/// Settings for scoring a planted scenario transductively with both methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedComparison {
    pub graph_k: usize,
    pub knn_k: usize,
    pub harmonic: HarmonicConfig,
}

impl Default for PlantedComparison {
    fn default() -> Self {
        PlantedComparison {
            graph_k: 10,
            knn_k: 3,
            harmonic: HarmonicConfig::default(),
        }
    }
}

/// Scores of the cluster members under SoftHAD (every instance a labeled
/// graph node) and leave-one-out weighted k-NN, on the same σ.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedScores {
    pub softhad: Vec<f64>,
    pub knn: Vec<f64>,
}

impl PlantedScores {
    pub fn softhad_median(&self) -> f64 {
        stats::median(&self.softhad)
    }

    pub fn knn_median(&self) -> f64 {
        stats::median(&self.knn)
    }
}

pub fn score_planted(scenario: &PlantedScenario, cmp: &PlantedComparison, seed: u64) -> Result<PlantedScores> {
    let data = &scenario.dataset;
    let psi = FeatureWeights::uniform(data.features().cols());
    let sigma = choose_sigma(data.features(), &psi, SigmaMode::default(), DEFAULT_PAIR_SAMPLE, seed)?;
    let bcfg = BackboneConfig {
        size: None,
        graph_k: cmp.graph_k,
        sigma: SigmaMode::Fixed(sigma),
        balanced: false,
        pair_sample: DEFAULT_PAIR_SAMPLE,
    };
    let bb = build_backbone(data, &psi, &bcfg, seed)?;
    let scfg = ScoringConfig {
        harmonic: cmp.harmonic.clone(),
        graph_k: cmp.graph_k,
        mode: ScoringMode::Included,
        multiplicity_weighting: true,
        recent_edges: false,
    };
    let all = score_backbone(&bb, &scfg)?;
    let model = KnnModel::new(data.features().clone(), data.labels().to_vec(), cmp.knn_k, psi, sigma)?;
    let knn = scenario
        .cluster
        .iter()
        .map(|&i| Ok((model.soft_label_leave_one_out(i)? - data.labels()[i].value()).abs()))
        .collect::<Result<_>>()?;
    Ok(PlantedScores {
        softhad: scenario.cluster.iter().map(|&i| all.raw_score[i]).collect(),
        knn,
    })
}
