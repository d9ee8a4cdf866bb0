//! Weighted k-nearest-neighbour similarity graphs.
//!
//! Edge weights follow the Gaussian kernel on ψ-weighted squared distances,
//! `w_ij = exp(-|x_i - x_j|²_ψ / σ²)`. Each node selects its `k` nearest
//! neighbours (ties at equal distance go to the lower index) and the edge set
//! is symmetrized by union, so a fringe point that nobody selects still keeps
//! the edges it selected itself.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, FeatureWeights};
use crate::error::{check_len, Error, Result};
use crate::seed;

/// Fraction of the pairwise-distance variance used by the bandwidth rule.
pub const VARIANCE_FRACTION: f64 = 0.1;
/// Upper bound on the number of pairs sampled to estimate that variance.
pub const DEFAULT_PAIR_SAMPLE: usize = 100_000;

/// `Σ_j psi_j (a_j - b_j)²`.
pub fn weighted_distance_sq(a: &[f64], b: &[f64], psi: &FeatureWeights) -> Result<f64> {
    check_len(a.len(), b.len())?;
    check_len(a.len(), psi.len())?;
    Ok(wdist2(a, b, psi.as_slice()))
}

#[inline]
pub(crate) fn wdist2(a: &[f64], b: &[f64], psi: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(psi)
        .map(|((x, y), p)| {
            let d = x - y;
            p * d * d
        })
        .sum()
}

#[inline]
pub fn gaussian_weight(distance_sq: f64, sigma: f64) -> f64 {
    (-distance_sq / (sigma * sigma)).exp()
}

/// Which quantity the "10% of the variance of pairwise distances" rule sets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRule {
    /// `σ² = 0.1 · Var(d)`; keeps the kernel exponent dimensionless.
    #[default]
    SigmaSquared,
    /// `σ = 0.1 · Var(d)`.
    Sigma,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    Auto(SigmaRule),
    Fixed(f64),
}

impl Default for SigmaMode {
    fn default() -> Self {
        SigmaMode::Auto(SigmaRule::default())
    }
}

/// Picks the kernel bandwidth.
///
/// In auto mode the population variance of ψ-weighted Euclidean distances is
/// taken over every pair when there are at most `pair_sample` pairs, and over
/// `pair_sample` uniformly drawn pairs otherwise.
pub fn choose_sigma(
    points: &FeatureMatrix,
    psi: &FeatureWeights,
    mode: SigmaMode,
    pair_sample: usize,
    seed: u64,
) -> Result<f64> {
    let rule = match mode {
        SigmaMode::Fixed(s) if s.is_finite() && s > 0.0 => return Ok(s),
        SigmaMode::Fixed(s) => return Err(Error::invalid(format!("sigma must be positive, got {s}"))),
        SigmaMode::Auto(rule) => rule,
    };
    let n = points.rows();
    if n < 2 {
        return Err(Error::invalid("sigma selection needs at least two instances"));
    }
    check_len(points.cols(), psi.len())?;
    if pair_sample == 0 {
        return Err(Error::invalid("pair sample size must be positive"));
    }
    let psi = psi.as_slice();
    let dist = |i: usize, j: usize| wdist2(points.row(i), points.row(j), psi).sqrt();

    let total_pairs = n * (n - 1) / 2;
    let distances: Vec<f64> = if total_pairs <= pair_sample {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| dist(i, j))
            .collect()
    } else {
        let mut rng = seed::rng(seed, seed::stream::SIGMA);
        (0..pair_sample)
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                dist(i, j)
            })
            .collect()
    };
    if distances.iter().all(|&d| d == 0.0) {
        return Err(Error::Degenerate("all pairwise distances are zero".into()));
    }
    let m = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / m;
    let var = distances.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / m;
    if var <= 0.0 {
        return Err(Error::Degenerate("pairwise distances have zero variance".into()));
    }
    Ok(match rule {
        SigmaRule::SigmaSquared => (VARIANCE_FRACTION * var).sqrt(),
        SigmaRule::Sigma => VARIANCE_FRACTION * var,
    })
}

/// Sparse symmetric weighted graph without self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
    degrees: Vec<f64>,
    sigma: f64,
}

impl SimilarityGraph {
    /// Builds a graph from (possibly one-directional, possibly repeated)
    /// weighted pairs; the edge set is the union of both directions.
    pub fn from_edges(
        node_count: usize,
        sigma: f64,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); node_count];
        for (i, j, w) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) out of range for {node_count} nodes"
                )));
            }
            if i == j {
                return Err(Error::invalid(format!("self-loop at node {i}")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::invalid(format!("edge ({i}, {j}) weight {w} outside (0, 1]")));
            }
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for (i, row) in adjacency.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mut conflict = None;
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    if a.1 != b.1 {
                        conflict = Some(a.0);
                    }
                    true
                } else {
                    false
                }
            });
            if let Some(j) = conflict {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) given with two different weights"
                )));
            }
        }
        let degrees = adjacency.iter().map(|row| row.iter().map(|&(_, w)| w).sum()).collect();
        Ok(SimilarityGraph {
            adjacency,
            degrees,
            sigma,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Neighbours of `i` sorted by index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Weight of edge `(i, j)`, zero when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let row = &self.adjacency[i];
        row.binary_search_by_key(&j, |&(n, _)| n).map_or(0.0, |p| row[p].1)
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges as `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |&&(j, _)| j > i).map(move |&(j, w)| (i, j, w)))
    }

    pub fn laplacian(&self) -> LaplacianView<'_> {
        LaplacianView { graph: self }
    }

    /// Plain-text edge list: `nodes <N> sigma <σ>` then one `i j w` line per
    /// undirected edge. Floats use the shortest representation that parses
    /// back to the same value.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(self.to_edge_list().as_bytes())
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("nodes {} sigma {:e}\n", self.node_count(), self.sigma);
        for (i, j, w) in self.edges() {
            let _ = writeln!(s, "{i} {j} {w:e}");
        }
        s
    }

    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let fmt_err = |line: usize, message: String| Error::Format {
            what: "edge list",
            line,
            message,
        };
        let mut lines = input.lines().enumerate();
        let (nodes, sigma) = loop {
            let Some((idx, line)) = lines.next() else {
                return Err(fmt_err(1, "missing header".into()));
            };
            let line = line.map_err(|e| fmt_err(idx + 1, e.to_string()))?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            match parts.as_slice() {
                ["nodes", n, "sigma", s] => {
                    let n = n.parse::<usize>().map_err(|e| fmt_err(idx + 1, e.to_string()))?;
                    let s = s.parse::<f64>().map_err(|e| fmt_err(idx + 1, e.to_string()))?;
                    break (n, s);
                }
                _ => return Err(fmt_err(idx + 1, format!("expected `nodes <N> sigma <σ>`, found `{t}`"))),
            }
        };
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| fmt_err(idx + 1, e.to_string()))?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            let [i, j, w] = parts.as_slice() else {
                return Err(fmt_err(idx + 1, format!("expected `i j w`, found `{t}`")));
            };
            let i = i.parse::<usize>().map_err(|e| fmt_err(idx + 1, e.to_string()))?;
            let j = j.parse::<usize>().map_err(|e| fmt_err(idx + 1, e.to_string()))?;
            let w = w.parse::<f64>().map_err(|e| fmt_err(idx + 1, e.to_string()))?;
            edges.push((i, j, w));
        }
        SimilarityGraph::from_edges(nodes, sigma, edges)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        SimilarityGraph::read_edge_list(std::io::BufReader::new(file))
    }
}

/// Matrix-free access to `L = D - W`.
#[derive(Clone, Copy, Debug)]
pub struct LaplacianView<'a> {
    graph: &'a SimilarityGraph,
}

impl LaplacianView<'_> {
    pub fn dim(&self) -> usize {
        self.graph.node_count()
    }

    /// `out = D v - W v`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let wv: f64 = self.graph.adjacency[i].iter().map(|&(j, w)| w * v[j]).sum();
            *o = self.graph.degrees[i] * v[i] - wv;
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    /// `vᵀ L v = Σ_{i<j} w_ij (v_i - v_j)²`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.graph.edges().map(|(i, j, w)| w * (v[i] - v[j]).powi(2)).sum()
    }
}

/// The `k` smallest `(distance, index)` pairs, ordered by distance then index.
pub(crate) fn k_smallest(mut candidates: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k, cmp);
        candidates.truncate(k);
    }
    candidates.sort_by(cmp);
    candidates
}

/// Directed k-NN selections of every point, with Gaussian weights. Pairs
/// whose weight underflows to zero are dropped.
pub(crate) fn knn_selections(points: &FeatureMatrix, psi: &[f64], k: usize, sigma: f64) -> Vec<(usize, usize, f64)> {
    let n = points.rows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let candidates = (0..n)
                .filter(|&j| j != i)
                .map(|j| (wdist2(points.row(i), points.row(j), psi), j))
                .collect();
            k_smallest(candidates, k)
                .into_iter()
                .map(|(d, j)| (i, j, gaussian_weight(d, sigma)))
                .filter(|&(_, _, w)| w > 0.0)
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Union-symmetrized k-NN graph with Gaussian weights.
pub fn build_knn_graph(points: &FeatureMatrix, psi: &FeatureWeights, k: usize, sigma: f64) -> Result<SimilarityGraph> {
    let n = points.rows();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k >= n {
        return Err(Error::invalid(format!(
            "k = {k} must be smaller than the node count {n}"
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    check_len(points.cols(), psi.len())?;
    let edges = knn_selections(points, psi.as_slice(), k, sigma);
    SimilarityGraph::from_edges(n, sigma, edges)
}
