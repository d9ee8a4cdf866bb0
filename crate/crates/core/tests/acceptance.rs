//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use softhad::backbone::{build_backbone, BackboneConfig};
use softhad::baseline::KnnModel;
use softhad::data::{load_csv, CsvOptions, Dataset, FeatureMatrix, FeatureWeights, Label, LabelRule};
use softhad::eval::{planted_cluster_scenario, run_experiment, score_planted, ExperimentSpec, PlantedComparison};
use softhad::graph::{build_knn_graph, choose_sigma, gaussian_weight, SigmaMode, SimilarityGraph};
use softhad::harmonic::{
    anomaly_scores, apply_scaling, closed_form_oracle, score_backbone, score_recent, solve_soft_harmonic,
    HarmonicConfig, ScoringConfig, ScoringMode,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let data = (0..n * d).map(|_| normal.sample(rng)).collect();
    FeatureMatrix::new(n, d, data).unwrap()
}

fn random_psi(rng: &mut ChaCha8Rng, d: usize) -> FeatureWeights {
    FeatureWeights::new((0..d).map(|_| rng.random_range(0.2..=1.0)).collect()).unwrap()
}

fn random_graph(rng: &mut ChaCha8Rng, max_n: usize) -> SimilarityGraph {
    let n = rng.random_range(3..=max_n);
    let d = rng.random_range(1..=5);
    let x = random_points(rng, n, d);
    let psi = random_psi(rng, d);
    let k = rng.random_range(1..n.min(12));
    let sigma = choose_sigma(&x, &psi, SigmaMode::default(), 100_000, rng.random()).unwrap();
    build_knn_graph(&x, &psi, k, sigma).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn solver_matches_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let g = random_graph(&mut rng, 200);
        let n = g.node_count();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..=5.0)).collect();
        let cfg = HarmonicConfig {
            gamma_g: rng.random_range(0.0..=2.0),
            ..Default::default()
        };
        let cg = solve_soft_harmonic(&g, &y, &c, &cfg).map_err(|e| e.to_string())?;
        let dense = closed_form_oracle(&g, &y, &c, &cfg).map_err(|e| e.to_string())?;
        let scale = dense
            .ell
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        worst = worst.max(max_abs_diff(&cg.ell, &dense.ell) / scale);
    }
    let elapsed = start.elapsed();
    let detail = format!("worst relative error {worst:.2e}, {:.2} s", elapsed.as_secs_f64());
    if worst <= 1e-8 && elapsed < Duration::from_secs(10) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn analytic_score_laws() -> Outcome {
    let grid_c = [0.1, 0.5, 1.0, 2.0, 10.0];
    let grid_g = [0.0, 0.01, 0.1, 1.0, 10.0];
    let isolated = SimilarityGraph::from_edges(1, 1.0, []).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let connected = random_graph(&mut rng, 60);
    let mut worst_isolated = 0.0_f64;
    let mut worst_constant = 0.0_f64;
    for &c_l in &grid_c {
        for &gamma_g in &grid_g {
            let cfg = HarmonicConfig {
                c_l,
                gamma_g,
                ..Default::default()
            };
            let expected = gamma_g / (c_l + gamma_g);
            for label in [Label::Positive, Label::Negative] {
                let soft = solve_soft_harmonic(&isolated, &[label.value()], &[c_l], &cfg).map_err(|e| e.to_string())?;
                let s = anomaly_scores(&soft, &[label]).map_err(|e| e.to_string())?;
                worst_isolated = worst_isolated.max((s.raw_score[0] - expected).abs());

                let n = connected.node_count();
                let labels = vec![label; n];
                let y = vec![label.value(); n];
                let soft = solve_soft_harmonic(&connected, &y, &vec![c_l; n], &cfg).map_err(|e| e.to_string())?;
                let s = anomaly_scores(&soft, &labels).map_err(|e| e.to_string())?;
                for r in s.raw_score {
                    worst_constant = worst_constant.max((r - expected).abs());
                }
            }
        }
    }
    let detail = format!("isolated {worst_isolated:.1e}, constant labels {worst_constant:.1e}");
    if worst_isolated <= 1e-12 && worst_constant <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// With huge label weights, no ridge and a vanishing weight on the recent
/// pseudo-targets, each recent instance takes the weighted average label of
/// the references it is attached to.
fn hard_clamp_limit() -> Outcome {
    let mut worst = 0.0_f64;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let n = 150;
        let d = 3;
        let x = random_points(&mut rng, n, d);
        let labels: Vec<Label> = (0..n)
            .map(|i| {
                if x.get(i, 0) + 0.5 * rng.random_range(-1.0..1.0) > 0.0 {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect();
        let psi = random_psi(&mut rng, d);
        let data = Dataset::past_only(x.clone(), labels.clone()).unwrap();
        let sigma = 1.5;
        let k = 8;
        let bb = build_backbone(
            &data,
            &psi,
            &BackboneConfig {
                graph_k: k,
                sigma: SigmaMode::Fixed(sigma),
                ..Default::default()
            },
            seed,
        )
        .map_err(|e| e.to_string())?;
        let recent = random_points(&mut rng, 40, d);
        let recent_labels: Vec<Label> = (0..40)
            .map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative })
            .collect();
        let cfg = ScoringConfig {
            harmonic: HarmonicConfig {
                c_l: 1e7,
                c_u: 1e-10,
                gamma_g: 0.0,
                solver_tol: 1e-14,
                ..Default::default()
            },
            graph_k: k,
            mode: ScoringMode::Withheld,
            multiplicity_weighting: true,
            recent_edges: false,
        };
        let report = score_recent(&bb, &recent, &recent_labels, &psi, &cfg).map_err(|e| e.to_string())?;
        let knn = KnnModel::new(x, labels, k, psi, sigma).map_err(|e| e.to_string())?;
        for (i, (&label, raw)) in recent_labels.iter().zip(&report.raw_score).enumerate() {
            let expected = knn.anomaly_score(recent.row(i), label).map_err(|e| e.to_string())?;
            worst = worst.max((raw - expected).abs());
        }
    }
    let detail = format!("worst deviation from the weighted neighbour average {worst:.1e}");
    if worst <= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn norm_shrinkage() -> Outcome {
    let gammas = [0.0, 0.1, 1.0, 10.0, 100.0];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for _ in 0..20 {
        let g = random_graph(&mut rng, 120);
        let n = g.node_count();
        let y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..=3.0)).collect();
        let mut previous = f64::INFINITY;
        for &gamma_g in &gammas {
            let cfg = HarmonicConfig {
                gamma_g,
                ..Default::default()
            };
            let ell = solve_soft_harmonic(&g, &y, &c, &cfg).map_err(|e| e.to_string())?.ell;
            let current = norm(&ell);
            if current > previous + 1e-12 {
                violations += 1;
            }
            previous = current;
        }
    }
    let detail = format!("{violations} violations over 20 instances");
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Scores recent rows on a graph composed by hand: the full k-NN graph over
/// the training rows plus edges from each recent row to its nearest
/// training rows.
#[allow(clippy::too_many_arguments)]
fn full_graph_scores(
    train: &FeatureMatrix,
    labels: &[Label],
    recent: &FeatureMatrix,
    recent_labels: &[Label],
    psi: &FeatureWeights,
    sigma: f64,
    k: usize,
    cfg: &HarmonicConfig,
) -> Vec<f64> {
    let n = train.rows();
    let base = build_knn_graph(train, psi, k, sigma).unwrap();
    let mut edges: Vec<(usize, usize, f64)> = base.edges().collect();
    for r in 0..recent.rows() {
        let mut d: Vec<(f64, usize)> = (0..n)
            .map(|j| {
                let dist = recent
                    .row(r)
                    .iter()
                    .zip(train.row(j))
                    .zip(psi.as_slice())
                    .map(|((a, b), p)| p * (a - b) * (a - b))
                    .sum::<f64>();
                (dist, j)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(dist, j) in &d[..k] {
            let w = gaussian_weight(dist, sigma);
            if w > 0.0 {
                edges.push((n + r, j, w));
            }
        }
    }
    let g = SimilarityGraph::from_edges(n + recent.rows(), sigma, edges).unwrap();
    let mut y: Vec<f64> = labels.iter().map(|l| l.value()).collect();
    let mut c = vec![cfg.c_l; n];
    y.extend(std::iter::repeat_n(0.0, recent.rows()));
    c.extend(std::iter::repeat_n(cfg.c_u, recent.rows()));
    let ell = solve_soft_harmonic(&g, &y, &c, cfg).unwrap().ell;
    ell[n..]
        .iter()
        .zip(recent_labels)
        .map(|(l, y)| (l - y.value()).abs())
        .collect()
}

fn backbone_fidelity() -> Outcome {
    let mut worst = 0.0_f64;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let n = 120;
        let d = 4;
        let x = random_points(&mut rng, n, d);
        let labels: Vec<Label> = (0..n)
            .map(|i| {
                if x.get(i, 1) > 0.0 {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect();
        let psi = random_psi(&mut rng, d);
        let recent = random_points(&mut rng, 30, d);
        let recent_labels: Vec<Label> = (0..30)
            .map(|_| {
                if rng.random_bool(0.5) {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect();
        let k = 10;
        let sigma = choose_sigma(&x, &psi, SigmaMode::default(), 100_000, seed).unwrap();
        let data = Dataset::past_only(x.clone(), labels.clone()).unwrap();
        let bb = build_backbone(
            &data,
            &psi,
            &BackboneConfig {
                size: Some(n),
                graph_k: k,
                sigma: SigmaMode::Fixed(sigma),
                ..Default::default()
            },
            seed,
        )
        .map_err(|e| e.to_string())?;
        let cfg = ScoringConfig {
            graph_k: k,
            ..Default::default()
        };
        let quantized = score_recent(&bb, &recent, &recent_labels, &psi, &cfg).map_err(|e| e.to_string())?;
        let direct = full_graph_scores(&x, &labels, &recent, &recent_labels, &psi, sigma, k, &cfg.harmonic);
        worst = worst.max(max_abs_diff(&quantized.raw_score, &direct));
    }
    let detail = format!("worst score difference {worst:.1e}");
    if worst <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn load_response(name: &str, column: &str) -> Dataset {
    let opts = CsvOptions {
        label_rule: LabelRule::ScaledResponse,
        ..Default::default()
    };
    load_csv(data_path(name), column, &opts).unwrap()
}

fn uci_replication() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, file, column, need_gap) in [
        ("housing", "housing.csv", "medv", true),
        ("auto-mpg", "autompg.csv", "mpg", false),
    ] {
        let data = load_response(file, column);
        let spec = ExperimentSpec {
            dataset: name.to_string(),
            seed: 2012,
            ..Default::default()
        };
        let start = Instant::now();
        let summary = run_experiment(&data, &spec).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        let labels = spec.method_labels();
        let (soft, knn) = (&labels[0], &labels[1]);
        let mut parts = vec![format!("{name} ({:.1} s)", elapsed.as_secs_f64())];
        for metric in ["flip_detection_auc", "score_concordance"] {
            let a = summary.get(soft, metric).unwrap();
            let b = summary.get(knn, metric).unwrap();
            let pooled = ((a.variance + b.variance) / 2.0).sqrt();
            let wins = a.mean > b.mean && (!need_gap || a.mean - b.mean > pooled);
            pass &= wins;
            parts.push(format!(
                "{metric} softhad {:.4} vs wknn {:.4} (pooled sd {:.4})",
                a.mean, b.mean, pooled
            ));
        }
        pass &= elapsed < Duration::from_secs(300);
        lines.push(parts.join(", "));
    }
    let detail = lines.join("; ");
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn planted_cluster() -> Outcome {
    let mut wins = 0;
    for seed in 0..20 {
        let scenario = planted_cluster_scenario(seed);
        let scores = score_planted(&scenario, &PlantedComparison::default(), seed).map_err(|e| e.to_string())?;
        if scores.softhad_median() > scores.knn_median() {
            wins += 1;
        }
    }
    let detail = format!("softhad median above wknn median in {wins}/20 seeds");
    if wins >= 16 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scaling_contract() -> Outcome {
    let data = load_response("housing.csv", "medv");
    let train_idx: Vec<usize> = (0..400).collect();
    let recent_idx: Vec<usize> = (400..data.len()).collect();
    let train = data.select(&train_idx);
    let recent = data.select(&recent_idx);
    let psi = softhad::data::wilcoxon_weights(&train).map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    for size in [None, Some(100)] {
        let bb = build_backbone(
            &train,
            &psi,
            &BackboneConfig {
                size,
                ..Default::default()
            },
            8,
        )
        .map_err(|e| e.to_string())?;
        let cfg = ScoringConfig {
            graph_k: 75.min(bb.len() - 1),
            ..Default::default()
        };
        let report = score_recent(&bb, recent.features(), recent.labels(), &psi, &cfg).map_err(|e| e.to_string())?;
        if report.scaled_score.iter().any(|s| !(0.0..=1.0).contains(s)) {
            problems.push(format!("{size:?}: recent scaled score outside [0, 1]"));
        }
        let cal = report.calibration.unwrap();
        let train_scores = score_backbone(&bb, &cfg).map_err(|e| e.to_string())?.raw_score;
        let scaled = apply_scaling(&train_scores, &cal);
        if scaled.iter().any(|s| !(0.0..=1.0).contains(s)) {
            problems.push(format!("{size:?}: training scaled score outside [0, 1]"));
        }
        if cal.max > cal.min && !(scaled.contains(&0.0) && scaled.contains(&1.0)) {
            problems.push(format!("{size:?}: training scaled scores miss 0 or 1"));
        }
    }
    if problems.is_empty() {
        Ok("scaled scores in [0, 1]; training extremes map to 0 and 1".into())
    } else {
        Err(problems.join("; "))
    }
}

fn eval_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = data_path("housing.csv");
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_softhad"))
            .args([
                "eval",
                "--response-col",
                "medv",
                "--runs",
                "12",
                "--seed",
                "5",
                "--gamma-sweep",
                "0.1,1",
            ])
            .arg("--input")
            .arg(&input)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        outputs.push(std::fs::read(out.join("summary.csv")).map_err(|e| e.to_string())?);
    }
    if outputs[0] == outputs[1] {
        Ok(format!("{} identical bytes across two invocations", outputs[0].len()))
    } else {
        Err("summary CSVs differ".into())
    }
}

fn desk_scale() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let d = 8;
    let x = random_points(&mut rng, 2000, d);
    let labels: Vec<Label> = (0..2000)
        .map(|i| {
            if x.get(i, 0) + x.get(i, 1) > 0.0 {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    let recent = random_points(&mut rng, 500, d);
    let recent_labels: Vec<Label> = (0..500)
        .map(|i| {
            if recent.get(i, 0) > 0.0 {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    let start = Instant::now();
    let data = Dataset::past_only(x, labels).unwrap();
    let psi = softhad::data::wilcoxon_weights(&data).map_err(|e| e.to_string())?;
    let bb = build_backbone(
        &data,
        &psi,
        &BackboneConfig {
            size: Some(500),
            ..Default::default()
        },
        10,
    )
    .map_err(|e| e.to_string())?;
    let report =
        score_recent(&bb, &recent, &recent_labels, &psi, &ScoringConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "{} centroids, {} recent scored in {:.2} s",
        bb.len(),
        report.len(),
        elapsed.as_secs_f64()
    );
    if elapsed < Duration::from_secs(10) && report.len() == 500 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("solver matches dense oracle", solver_matches_oracle),
        ("analytic score laws", analytic_score_laws),
        ("hard-clamp limit is weighted k-NN", hard_clamp_limit),
        ("norm shrinks with gamma_g", norm_shrinkage),
        ("identity backbone matches full graph", backbone_fidelity),
        ("UCI directional replication", uci_replication),
        ("planted cluster", planted_cluster),
        ("scaling contract", scaling_contract),
        ("eval determinism", eval_determinism),
        ("desk-scale performance", desk_scale),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1)
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
