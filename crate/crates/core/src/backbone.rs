//! Backbone graphs: the past instances are quantized into `k` centroids and
//! the harmonic system is solved over the centroids instead of every
//! instance, bounding the solve by the backbone size.
//!
//! Each centroid carries its cluster size (`multiplicity`) and the mean label
//! of its members (`pseudo_target`, in `[-1, 1]`), so a mixed cluster
//! propagates weak evidence rather than a hard vote.

use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix, FeatureWeights, Label};
use crate::error::{check_len, Error, Result};
use crate::graph::{self, choose_sigma, wdist2, SigmaMode, SimilarityGraph};
use crate::seed;

pub const KMEANS_MAX_ITER: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct BackboneGraph {
    pub centroids: FeatureMatrix,
    pub multiplicity: Vec<usize>,
    pub pseudo_target: Vec<f64>,
    /// Centroid of each past instance; `None` for instances left out by
    /// class balancing.
    pub assignment: Vec<Option<usize>>,
    graph: Option<SimilarityGraph>,
}

impl BackboneGraph {
    pub fn new(centroids: FeatureMatrix, multiplicity: Vec<usize>, pseudo_target: Vec<f64>) -> Result<Self> {
        check_len(centroids.rows(), multiplicity.len())?;
        check_len(centroids.rows(), pseudo_target.len())?;
        if multiplicity.contains(&0) {
            return Err(Error::invalid("centroid multiplicity must be positive"));
        }
        if pseudo_target.iter().any(|t| !(-1.0..=1.0).contains(t)) {
            return Err(Error::invalid("pseudo-targets must lie in [-1, 1]"));
        }
        Ok(BackboneGraph {
            centroids,
            multiplicity,
            pseudo_target,
            assignment: Vec::new(),
            graph: None,
        })
    }

    /// Number of centroids.
    pub fn len(&self) -> usize {
        self.multiplicity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multiplicity.is_empty()
    }

    pub fn quantized_count(&self) -> usize {
        self.multiplicity.iter().sum()
    }

    pub fn graph(&self) -> Result<&SimilarityGraph> {
        self.graph
            .as_ref()
            .ok_or_else(|| Error::invalid("backbone graph has not been built"))
    }

    pub fn has_graph(&self) -> bool {
        self.graph.is_some()
    }

    pub fn with_graph(mut self, graph: SimilarityGraph) -> Result<Self> {
        check_len(self.len(), graph.node_count())?;
        self.graph = Some(graph);
        Ok(self)
    }

    /// Writes `<prefix>.centroids.csv` (one centroid row per line, header
    /// `x0,x1,...`) and `<prefix>.backbone.csv`
    /// (`centroid,multiplicity,pseudo_target`).
    pub fn save(&self, prefix: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let (cpath, spath) = backbone_paths(prefix.as_ref());
        let mut w = csv::Writer::from_path(&cpath)?;
        w.write_record((0..self.centroids.cols()).map(|j| format!("x{j}")))?;
        for row in self.centroids.iter_rows() {
            w.write_record(row.iter().map(f64::to_string))?;
        }
        w.flush().map_err(|e| Error::io(&cpath, e))?;

        let mut w = csv::Writer::from_path(&spath)?;
        w.write_record(["centroid", "multiplicity", "pseudo_target"])?;
        for c in 0..self.len() {
            w.write_record([
                c.to_string(),
                self.multiplicity[c].to_string(),
                self.pseudo_target[c].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&spath, e))?;
        Ok((cpath, spath))
    }

    /// Reads the files written by [`BackboneGraph::save`]. The graph and the
    /// instance assignment are not persisted.
    pub fn load(prefix: impl AsRef<Path>) -> Result<Self> {
        let (cpath, spath) = backbone_paths(prefix.as_ref());
        if !cpath.exists() {
            return Err(Error::io(&cpath, std::io::ErrorKind::NotFound.into()));
        }
        let mut rows = Vec::new();
        for (line, rec) in csv::Reader::from_path(&cpath)?.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format {
                    what: "centroid file",
                    line: line + 2,
                    message: e.to_string(),
                })?;
            rows.push(row);
        }
        let mut multiplicity = Vec::new();
        let mut pseudo_target = Vec::new();
        for (line, rec) in csv::Reader::from_path(&spath)?.records().enumerate() {
            let rec = rec?;
            let bad = |m: String| Error::Format {
                what: "backbone sidecar",
                line: line + 2,
                message: m,
            };
            if rec.len() != 3 || rec[0].parse::<usize>().ok() != Some(line) {
                return Err(bad("expected `centroid,multiplicity,pseudo_target` in order".into()));
            }
            multiplicity.push(rec[1].parse::<usize>().map_err(|e| bad(e.to_string()))?);
            pseudo_target.push(rec[2].parse::<f64>().map_err(|e| bad(e.to_string()))?);
        }
        BackboneGraph::new(FeatureMatrix::from_rows(&rows)?, multiplicity, pseudo_target)
    }
}

fn backbone_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let base = prefix.as_os_str().to_string_lossy();
    (
        PathBuf::from(format!("{base}.centroids.csv")),
        PathBuf::from(format!("{base}.backbone.csv")),
    )
}

/// Result of Lloyd iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centers: FeatureMatrix,
    pub assignment: Vec<usize>,
    /// Objective `Σ_i |x_i - c_{a(i)}|²_ψ` after each assignment step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

fn nearest_center(x: &[f64], centers: &[Vec<f64>], psi: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = wdist2(x, center, psi);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means under ψ-weighted squared distance with D²-weighted seeding.
///
/// Stops when an assignment step changes nothing or after
/// [`KMEANS_MAX_ITER`] steps. An empty cluster is re-seeded at the point
/// farthest from its current center.
pub fn kmeans(points: &FeatureMatrix, k: usize, psi: &FeatureWeights, seed: u64) -> Result<KMeans> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k-means needs 1 <= k <= {n}, got {k}")));
    }
    check_len(points.cols(), psi.len())?;
    let psi = psi.as_slice();
    let mut rng = seed::rng(seed, seed::stream::KMEANS);

    // seeding
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers: Vec<Vec<f64>> = vec![points.row(first).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| wdist2(points.row(i), &centers[0], psi)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total implies a positive entry")
        } else {
            // only duplicates of existing centers remain
            (0..n).find(|&i| !chosen[i]).expect("k <= n")
        };
        chosen[pick] = true;
        let c = points.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(wdist2(points.row(i), &c, psi));
        }
        centers.push(c);
    }

    let mut assignment: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let step: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| nearest_center(points.row(i), &centers, psi))
            .collect();
        trace.push(step.iter().map(|s| s.1).sum());
        let next: Vec<usize> = step.iter().map(|s| s.0).collect();
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
        let mut dist: Vec<f64> = step.iter().map(|s| s.1).collect();
        update_centers(points, &assignment, &mut centers, &mut dist);
    }
    if !converged {
        // keep centers consistent with the final assignment
        let mut dist = vec![0.0; n];
        update_centers(points, &assignment, &mut centers, &mut dist);
    }
    let data = centers.concat();
    Ok(KMeans {
        centers: FeatureMatrix::new(k, points.cols(), data)?,
        assignment,
        objective_trace: trace,
        iterations,
    })
}

/// Means in index order; empty clusters move to the farthest point.
fn update_centers(points: &FeatureMatrix, assignment: &[usize], centers: &mut [Vec<f64>], dist: &mut [f64]) {
    let cols = points.cols();
    let mut sums = vec![vec![0.0; cols]; centers.len()];
    let mut counts = vec![0usize; centers.len()];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    for c in 0..centers.len() {
        if counts[c] > 0 {
            let inv = counts[c] as f64;
            centers[c] = sums[c].iter().map(|s| s / inv).collect();
        } else {
            let far = (0..dist.len())
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("non-empty");
            centers[c] = points.row(far).to_vec();
            dist[far] = 0.0;
        }
    }
}

/// Quantizes the past instances into at most `k` centroids.
///
/// With `balanced`, the pool is first subsampled to equal class counts.
/// When `k` equals the pool size every instance becomes its own centroid, in
/// pool order.
pub fn quantize(data: &Dataset, k: usize, psi: &FeatureWeights, balanced: bool, seed: u64) -> Result<BackboneGraph> {
    let past = data.past_features();
    let labels = data.past_labels();
    if past.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pool: Vec<usize> = if balanced {
        balanced_pool(labels, seed)?
    } else {
        (0..labels.len()).collect()
    };
    if k == 0 || k > pool.len() {
        return Err(Error::invalid(format!(
            "backbone size must satisfy 1 <= k <= {} instances, got {k}",
            pool.len()
        )));
    }
    let points = past.select(&pool);
    let mut assignment = vec![None; labels.len()];

    if k == pool.len() {
        for (c, &i) in pool.iter().enumerate() {
            assignment[i] = Some(c);
        }
        let pseudo = pool.iter().map(|&i| labels[i].value()).collect();
        let mut bb = BackboneGraph::new(points, vec![1; k], pseudo)?;
        bb.assignment = assignment;
        return Ok(bb);
    }

    let km = kmeans(&points, k, psi, seed)?;
    let mut multiplicity = vec![0usize; k];
    let mut label_sum = vec![0.0; k];
    for (p, &c) in km.assignment.iter().enumerate() {
        multiplicity[c] += 1;
        label_sum[c] += labels[pool[p]].value();
    }
    // drop clusters that ended empty and renumber the rest
    let mut remap = vec![usize::MAX; k];
    let mut kept = Vec::new();
    for c in 0..k {
        if multiplicity[c] > 0 {
            remap[c] = kept.len();
            kept.push(c);
        }
    }
    for (p, &c) in km.assignment.iter().enumerate() {
        assignment[pool[p]] = Some(remap[c]);
    }
    let centroids = km.centers.select(&kept);
    let pseudo = kept
        .iter()
        .map(|&c| (label_sum[c] / multiplicity[c] as f64).clamp(-1.0, 1.0))
        .collect();
    let mult = kept.iter().map(|&c| multiplicity[c]).collect();
    let mut bb = BackboneGraph::new(centroids, mult, pseudo)?;
    bb.assignment = assignment;
    Ok(bb)
}

fn balanced_pool(labels: &[Label], seed: u64) -> Result<Vec<usize>> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_positive()).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_positive()).collect();
    let m = pos.len().min(neg.len());
    if m == 0 {
        return Err(Error::SingleClass);
    }
    let mut rng = seed::rng(seed, seed::stream::BALANCE);
    let mut pool: Vec<usize> = index::sample(&mut rng, pos.len(), m)
        .into_iter()
        .map(|i| pos[i])
        .chain(index::sample(&mut rng, neg.len(), m).into_iter().map(|i| neg[i]))
        .collect();
    pool.sort_unstable();
    Ok(pool)
}

/// Builds the k-NN similarity graph over the centroids.
pub fn backbone_graph(bb: BackboneGraph, graph_k: usize, sigma: f64, psi: &FeatureWeights) -> Result<BackboneGraph> {
    if graph_k >= bb.len() {
        return Err(Error::invalid(format!(
            "graph k = {graph_k} must be smaller than the backbone size {}",
            bb.len()
        )));
    }
    let g = graph::build_knn_graph(&bb.centroids, psi, graph_k, sigma)?;
    bb.with_graph(g)
}

/// Graph over `[centroids; recent]`: the backbone edges plus, for each recent
/// row, edges to its `graph_k` nearest centroids (or nearest among centroids
/// and other recent rows when `recent_edges` is set).
pub fn attach_recent(
    bb: &BackboneGraph,
    recent: &FeatureMatrix,
    graph_k: usize,
    sigma: f64,
    psi: &FeatureWeights,
    recent_edges: bool,
) -> Result<SimilarityGraph> {
    if recent.is_empty() {
        return Err(Error::invalid("no recent instances to attach"));
    }
    if graph_k == 0 {
        return Err(Error::invalid("graph k must be at least 1"));
    }
    check_len(bb.centroids.cols(), recent.cols())?;
    check_len(recent.cols(), psi.len())?;
    let base = bb.graph()?;
    let k = bb.len();
    let m = recent.rows();
    let psi = psi.as_slice();
    let point = |idx: usize| {
        if idx < k {
            bb.centroids.row(idx)
        } else {
            recent.row(idx - k)
        }
    };
    let candidate_count = if recent_edges { k + m } else { k };
    let new_edges: Vec<(usize, usize, f64)> = (0..m)
        .into_par_iter()
        .map(|r| {
            let node = k + r;
            let candidates = (0..candidate_count)
                .filter(|&j| j != node)
                .map(|j| (wdist2(recent.row(r), point(j), psi), j))
                .collect();
            graph::k_smallest(candidates, graph_k)
                .into_iter()
                .map(|(d, j)| (node, j, graph::gaussian_weight(d, sigma)))
                .filter(|&(_, _, w)| w > 0.0)
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    SimilarityGraph::from_edges(k + m, sigma, base.edges().chain(new_edges))
}

/// End-to-end backbone settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    /// Number of centroids; `None` keeps every instance.
    pub size: Option<usize>,
    pub graph_k: usize,
    pub sigma: SigmaMode,
    pub balanced: bool,
    pub pair_sample: usize,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            size: None,
            graph_k: 75,
            sigma: SigmaMode::default(),
            balanced: false,
            pair_sample: graph::DEFAULT_PAIR_SAMPLE,
        }
    }
}

/// Quantizes, picks σ over the centroids (unless fixed) and builds the graph.
/// The graph k is capped at `size - 1` so small backbones stay valid.
pub fn build_backbone(data: &Dataset, psi: &FeatureWeights, cfg: &BackboneConfig, seed: u64) -> Result<BackboneGraph> {
    let pool = if cfg.balanced {
        balanced_pool(data.past_labels(), seed)?.len()
    } else {
        data.split()
    };
    let size = cfg.size.unwrap_or(pool).min(pool);
    let bb = quantize(data, size, psi, cfg.balanced, seed)?;
    if bb.len() < 2 {
        return Err(Error::invalid("a backbone needs at least two centroids"));
    }
    let sigma = choose_sigma(&bb.centroids, psi, cfg.sigma, cfg.pair_sample, seed)?;
    let graph_k = cfg.graph_k.min(bb.len() - 1);
    backbone_graph(bb, graph_k, sigma, psi)
}
