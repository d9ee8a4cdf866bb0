//! Soft harmonic solution, SoftHAD anomaly scores and per-task score scaling.
//!
//! The soft labels minimize
//!
//! ```text
//! (ℓ - y)ᵀ C (ℓ - y) + ℓᵀ K ℓ,    K = L + γ_g I,   C = diag(c)
//! ```
//!
//! whose minimizer is `ℓ* = (C⁻¹K + I)⁻¹ y`. The solver works on the
//! equivalent symmetric positive definite system `(L + γ_g I + C) ℓ = C y`
//! with Jacobi-preconditioned conjugate gradients. When every entry of `c`
//! equals `c_l` this is the regularized system
//! `(L / c_l + (1 + γ_g / c_l) I) ℓ = y` scaled by `c_l`.
//!
//! The anomaly score of a node is `s_i = |ℓ*_i - y_i|`: large when the
//! propagated label confidently disagrees with the observed one. The
//! diagonal regularizer `γ_g` pulls poorly connected nodes towards zero, so
//! an isolated node never looks confidently mislabeled.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::backbone::{attach_recent, BackboneGraph};
use crate::data::{FeatureMatrix, FeatureWeights, Label};
use crate::error::{check_len, Error, Result};
use crate::graph::SimilarityGraph;

/// Largest node count accepted by [`closed_form_oracle`].
pub const DENSE_ORACLE_LIMIT: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicConfig {
    /// Empirical weight of labeled nodes.
    pub c_l: f64,
    /// Empirical weight of nodes whose label is withheld.
    pub c_u: f64,
    /// Diagonal regularizer added to the Laplacian.
    pub gamma_g: f64,
    /// Target relative residual `|b - A ℓ| / |b|`.
    pub solver_tol: f64,
    /// Iteration cap; `None` means ten times the node count.
    pub solver_max_iter: Option<usize>,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        HarmonicConfig {
            c_l: 1.0,
            c_u: 1.0,
            gamma_g: 1.0,
            solver_tol: 1e-10,
            solver_max_iter: None,
        }
    }
}

impl HarmonicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_l.is_finite() && self.c_l > 0.0) {
            return Err(Error::invalid(format!("c_l must be positive, got {}", self.c_l)));
        }
        if !(self.c_u.is_finite() && self.c_u >= 0.0) {
            return Err(Error::invalid(format!("c_u must be non-negative, got {}", self.c_u)));
        }
        if !(self.gamma_g.is_finite() && self.gamma_g >= 0.0) {
            return Err(Error::invalid(format!(
                "gamma_g must be non-negative, got {}",
                self.gamma_g
            )));
        }
        if !(self.solver_tol.is_finite() && self.solver_tol > 0.0) {
            return Err(Error::invalid(format!(
                "solver_tol must be positive, got {}",
                self.solver_tol
            )));
        }
        if self.solver_max_iter == Some(0) {
            return Err(Error::invalid("solver_max_iter must be positive"));
        }
        Ok(())
    }

    fn max_iter(&self, n: usize) -> usize {
        self.solver_max_iter.unwrap_or(10 * n.max(1))
    }
}

/// Soft labels `ℓ*` with their confidence/sign decomposition
/// `ℓ*_i = |ℓ*_i| · sgn(ℓ*_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftLabels {
    pub ell: Vec<f64>,
    pub confidence: Vec<f64>,
    /// `sgn(ℓ*_i)` with `sgn(0) = 0`.
    pub predicted_sign: Vec<i8>,
}

impl SoftLabels {
    pub fn from_ell(ell: Vec<f64>) -> Self {
        let confidence = ell.iter().map(|v| v.abs()).collect();
        let predicted_sign = ell
            .iter()
            .map(|&v| {
                if v > 0.0 {
                    1
                } else if v < 0.0 {
                    -1
                } else {
                    0
                }
            })
            .collect();
        SoftLabels {
            ell,
            confidence,
            predicted_sign,
        }
    }

    pub fn len(&self) -> usize {
        self.ell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ell.is_empty()
    }
}

/// Convergence details of one solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn check_inputs(graph: &SimilarityGraph, y: &[f64], weights: &[f64]) -> Result<()> {
    check_len(graph.node_count(), y.len())?;
    check_len(graph.node_count(), weights.len())?;
    if let Some(v) = y.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("pseudo-target {v} outside [-1, 1]")));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::invalid(format!("empirical weight {w} must be positive")));
    }
    Ok(())
}

pub fn solve_soft_harmonic(
    graph: &SimilarityGraph,
    y: &[f64],
    empirical_weights: &[f64],
    cfg: &HarmonicConfig,
) -> Result<SoftLabels> {
    solve_soft_harmonic_with_stats(graph, y, empirical_weights, cfg).map(|(s, _)| s)
}

/// Solves `(L + γ_g I + C) ℓ = C y` by preconditioned conjugate gradients.
pub fn solve_soft_harmonic_with_stats(
    graph: &SimilarityGraph,
    y: &[f64],
    empirical_weights: &[f64],
    cfg: &HarmonicConfig,
) -> Result<(SoftLabels, SolveStats)> {
    cfg.validate()?;
    check_inputs(graph, y, empirical_weights)?;
    let lap = graph.laplacian();
    let diag: Vec<f64> = graph
        .degrees()
        .iter()
        .zip(empirical_weights)
        .map(|(d, c)| d + cfg.gamma_g + c)
        .collect();
    let shift: Vec<f64> = empirical_weights.iter().map(|c| cfg.gamma_g + c).collect();
    let apply = |v: &[f64], out: &mut [f64]| {
        lap.apply_into(v, out);
        for ((o, s), vi) in out.iter_mut().zip(&shift).zip(v) {
            *o += s * vi;
        }
    };
    let rhs: Vec<f64> = empirical_weights.iter().zip(y).map(|(c, v)| c * v).collect();
    let (ell, stats) = preconditioned_cg(apply, &diag, &rhs, cfg.solver_tol, cfg.max_iter(y.len()))?;
    Ok((SoftLabels::from_ell(ell), stats))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator.
///
/// Converged when the true residual satisfies `|b - A x| <= tol |b|`; the
/// recurrence is restarted from the true residual if the two disagree.
pub fn preconditioned_cg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut rel = 1.0;
    while iterations < max_iter {
        let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            iterations += 1;
            apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            rel = dot(&r, &r).sqrt() / b_norm;
            if rel <= tol {
                break;
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        // true residual
        apply(&x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations,
                    relative_residual: rel,
                },
            ));
        }
    }
    Err(Error::NotConverged {
        iterations,
        residual: rel,
    })
}

/// Dense evaluation of `(C⁻¹K + I)⁻¹ y` by LU factorization of the literal
/// unsymmetric matrix. Used to cross-check the iterative solver.
pub fn closed_form_oracle(
    graph: &SimilarityGraph,
    y: &[f64],
    empirical_weights: &[f64],
    cfg: &HarmonicConfig,
) -> Result<SoftLabels> {
    let n = graph.node_count();
    if n > DENSE_ORACLE_LIMIT {
        return Err(Error::TooLarge {
            nodes: n,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    cfg.validate()?;
    check_inputs(graph, y, empirical_weights)?;
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = graph.degree(i) + cfg.gamma_g;
        for &(j, w) in graph.neighbors(i) {
            k[(i, j)] -= w;
        }
    }
    let mut m = k;
    for i in 0..n {
        let inv_c = 1.0 / empirical_weights[i];
        for j in 0..n {
            m[(i, j)] *= inv_c;
        }
        m[(i, i)] += 1.0;
    }
    let ell = m
        .lu()
        .solve(&DVector::from_column_slice(y))
        .ok_or_else(|| Error::Degenerate("closed-form system is singular".into()))?;
    Ok(SoftLabels::from_ell(ell.iter().copied().collect()))
}

/// `(ℓ - y)ᵀ C (ℓ - y) + ℓᵀ (L + γ_g I) ℓ`.
pub fn objective_value(
    graph: &SimilarityGraph,
    y: &[f64],
    empirical_weights: &[f64],
    cfg: &HarmonicConfig,
    ell: &[f64],
) -> f64 {
    let fit: f64 = ell
        .iter()
        .zip(y)
        .zip(empirical_weights)
        .map(|((l, t), c)| c * (l - t) * (l - t))
        .sum();
    let smooth = graph.laplacian().quadratic_form(ell);
    let ridge: f64 = cfg.gamma_g * ell.iter().map(|l| l * l).sum::<f64>();
    fit + smooth + ridge
}

/// Training-score range used to map scores onto `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub min: f64,
    pub max: f64,
}

pub fn fit_scaling(train_scores: &[f64]) -> Result<Calibration> {
    if train_scores.is_empty() {
        return Err(Error::invalid("cannot calibrate on an empty score set"));
    }
    let min = train_scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = train_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Calibration { min, max })
}

/// `clamp((s - min) / (max - min), 0, 1)`; all zeros when the range is
/// below `1e-12`.
pub fn apply_scaling(scores: &[f64], calibration: &Calibration) -> Vec<f64> {
    let range = calibration.max - calibration.min;
    if range < 1e-12 {
        return vec![0.0; scores.len()];
    }
    scores
        .iter()
        .map(|s| ((s - calibration.min) / range).clamp(0.0, 1.0))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Softhad,
    WeightedKnn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Softhad => "softhad",
            Method::WeightedKnn => "wknn",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub method: Method,
    pub node_ids: Vec<usize>,
    pub raw_score: Vec<f64>,
    /// Empty until a calibration is applied.
    pub scaled_score: Vec<f64>,
    pub calibration: Option<Calibration>,
}

impl AnomalyReport {
    pub fn new(method: Method, raw_score: Vec<f64>) -> Self {
        AnomalyReport {
            method,
            node_ids: (0..raw_score.len()).collect(),
            raw_score,
            scaled_score: Vec::new(),
            calibration: None,
        }
    }

    pub fn with_calibration(mut self, calibration: Calibration) -> Self {
        self.scaled_score = apply_scaling(&self.raw_score, &calibration);
        self.calibration = Some(calibration);
        self
    }

    pub fn with_node_ids(mut self, ids: Vec<usize>) -> Result<Self> {
        check_len(self.raw_score.len(), ids.len())?;
        self.node_ids = ids;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.raw_score.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_score.is_empty()
    }

    /// Node ids ordered from most to least anomalous: scaled score, then raw
    /// score (scaled scores saturate), then node id.
    pub fn ranking(&self) -> Vec<usize> {
        let key = if self.scaled_score.is_empty() {
            &self.raw_score
        } else {
            &self.scaled_score
        };
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            key[b]
                .total_cmp(&key[a])
                .then(self.raw_score[b].total_cmp(&self.raw_score[a]))
                .then(self.node_ids[a].cmp(&self.node_ids[b]))
        });
        order.into_iter().map(|i| self.node_ids[i]).collect()
    }

    /// `node_id,raw_score,scaled_score` rows; the scaled column is empty when
    /// no calibration was applied.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "raw_score", "scaled_score"])?;
        for i in 0..self.len() {
            let scaled = self.scaled_score.get(i).map(|s| s.to_string()).unwrap_or_default();
            w.write_record([self.node_ids[i].to_string(), self.raw_score[i].to_string(), scaled])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

/// `s_i = |ℓ*_i - y_i|`.
pub fn anomaly_scores(soft: &SoftLabels, y_observed: &[Label]) -> Result<AnomalyReport> {
    check_len(soft.len(), y_observed.len())?;
    let raw = soft
        .ell
        .iter()
        .zip(y_observed)
        .map(|(l, y)| (l - y.value()).abs())
        .collect();
    Ok(AnomalyReport::new(Method::Softhad, raw))
}

/// Whether a recent instance's own label takes part in propagation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Pseudo-target 0 with weight `c_u`; the label only enters the score.
    #[default]
    Withheld,
    /// Observed label as pseudo-target with weight `c_l`.
    Included,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub harmonic: HarmonicConfig,
    pub graph_k: usize,
    pub mode: ScoringMode,
    /// Scale each centroid's empirical weight by its cluster size.
    pub multiplicity_weighting: bool,
    /// Let recent instances link to each other as well as to centroids.
    pub recent_edges: bool,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            harmonic: HarmonicConfig::default(),
            graph_k: 75,
            mode: ScoringMode::Withheld,
            multiplicity_weighting: true,
            recent_edges: false,
        }
    }
}

/// Empirical weights of the backbone nodes.
pub fn backbone_weights(bb: &BackboneGraph, cfg: &ScoringConfig) -> Vec<f64> {
    bb.multiplicity
        .iter()
        .map(|&m| {
            if cfg.multiplicity_weighting {
                cfg.harmonic.c_l * m as f64
            } else {
                cfg.harmonic.c_l
            }
        })
        .collect()
}

/// Scores the backbone nodes themselves, each against its own pseudo-target,
/// with every node's target taking part in the solve.
pub fn score_backbone(bb: &BackboneGraph, cfg: &ScoringConfig) -> Result<AnomalyReport> {
    let graph = bb.graph()?;
    let weights = backbone_weights(bb, cfg);
    let soft = solve_soft_harmonic(graph, &bb.pseudo_target, &weights, &cfg.harmonic)?;
    let raw = soft
        .ell
        .iter()
        .zip(&bb.pseudo_target)
        .map(|(l, t)| (l - t).abs())
        .collect();
    Ok(AnomalyReport::new(Method::Softhad, raw))
}

/// Calibration from the backbone alone (see [`score_backbone`]).
pub fn backbone_calibration(bb: &BackboneGraph, cfg: &ScoringConfig) -> Result<Calibration> {
    fit_scaling(&score_backbone(bb, cfg)?.raw_score)
}

/// Scores recent instances against a backbone.
///
/// The recent rows are attached to their `graph_k` nearest centroids, the
/// soft harmonic system is solved over `[centroids; recent]`, and each recent
/// instance gets `|ℓ*_i - y_i|`. Scaled scores use [`backbone_calibration`].
pub fn score_recent(
    bb: &BackboneGraph,
    recent: &FeatureMatrix,
    recent_labels: &[Label],
    psi: &FeatureWeights,
    cfg: &ScoringConfig,
) -> Result<AnomalyReport> {
    check_len(recent.rows(), recent_labels.len())?;
    check_len(bb.centroids.cols(), recent.cols())?;
    cfg.harmonic.validate()?;
    let backbone = bb.graph()?;
    let graph = attach_recent(bb, recent, cfg.graph_k, backbone.sigma(), psi, cfg.recent_edges)?;

    let k = bb.len();
    let m = recent.rows();
    let mut y = bb.pseudo_target.clone();
    let mut weights = backbone_weights(bb, cfg);
    y.reserve(m);
    weights.reserve(m);
    for label in recent_labels {
        match cfg.mode {
            ScoringMode::Withheld => {
                y.push(0.0);
                weights.push(cfg.harmonic.c_u);
            }
            ScoringMode::Included => {
                y.push(label.value());
                weights.push(cfg.harmonic.c_l);
            }
        }
    }
    let soft = solve_soft_harmonic(&graph, &y, &weights, &cfg.harmonic)?;
    let raw = soft.ell[k..]
        .iter()
        .zip(recent_labels)
        .map(|(l, y)| (l - y.value()).abs())
        .collect();
    let calibration = backbone_calibration(bb, cfg)?;
    Ok(AnomalyReport::new(Method::Softhad, raw).with_calibration(calibration))
}
