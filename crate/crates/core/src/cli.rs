//! Command-line front end: `score`, `eval` and `graph`.
//!
//! Exit codes are 0 on success, 2 for usage errors (including parameter
//! validation, which happens before any computation) and 1 for runtime
//! failures. Runtime diagnostics name the stage that failed.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::backbone::{build_backbone, BackboneConfig, BackboneGraph};
use crate::data::{load_csv, wilcoxon_weights, CsvOptions, Dataset, FeatureWeights, LabelRule, MissingPolicy};
use crate::eval::{run_experiment, ExperimentSpec, FlipScope, MetricSummary, SoftHadVariant};
use crate::graph::{SigmaMode, SigmaRule, DEFAULT_PAIR_SAMPLE};
use crate::harmonic::{score_recent, AnomalyReport, HarmonicConfig, ScoringConfig, ScoringMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const GRAPH_EDGES: &str = "graph.edges";
pub const GRAPH_JSON: &str = "graph.json";
pub const BACKBONE_PREFIX: &str = "backbone";

#[derive(Debug, Parser)]
#[command(
    name = "softhad",
    version,
    about = "Conditional anomaly detection with soft harmonic functions"
)]
pub struct Cli {
    /// Caps the worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score recent instances against a training set.
    Score(ScoreArgs),
    /// Run the label-flip evaluation protocol.
    Eval(EvalArgs),
    /// Build and export the (backbone) similarity graph.
    Graph(GraphArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Withheld,
    Included,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SigmaRuleArg {
    /// σ² = 0.1 · Var(d)
    SigmaSquared,
    /// σ = 0.1 · Var(d)
    Sigma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FlipScopeArg {
    Global,
    Test,
}

/// `auto` or a positive bandwidth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaArg {
    Auto,
    Fixed(f64),
}

fn parse_sigma(s: &str) -> Result<SigmaArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(SigmaArg::Auto);
    }
    let v = parse_positive(s)?;
    Ok(SigmaArg::Fixed(v))
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("expected a non-negative number, got `{s}`")),
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(format!("expected a number in [0, 1], got `{s}`")),
    }
}

fn parse_open_fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("expected a number in (0, 1), got `{s}`")),
    }
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s.as_bytes() {
        [b] if b.is_ascii() => Ok(*b),
        _ if s == "\\t" => Ok(b'\t'),
        _ => Err(format!("delimiter must be a single ASCII character, got `{s}`")),
    }
}

/// Graph, backbone and solver settings shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Neighbours per node in the k-NN graph.
    #[arg(long, default_value_t = 75, value_parser = clap::value_parser!(u64).range(1..))]
    pub k_graph: u64,
    /// Weight of past (labeled) instances' labels.
    #[arg(long = "cl", default_value_t = 1.0, value_parser = parse_positive)]
    pub c_l: f64,
    /// Weight of recent instances' zero pseudo-targets; defaults to --cl.
    #[arg(long = "cu", value_parser = parse_positive)]
    pub c_u: Option<f64>,
    /// Ridge regularizer of the soft harmonic solve.
    #[arg(long, default_value_t = 1.0, value_parser = parse_non_negative)]
    pub gamma_g: f64,
    /// Number of k-means centroids; omitted keeps every training instance.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub backbone_k: Option<u64>,
    /// Kernel bandwidth: `auto` or a positive value.
    #[arg(long, default_value = "auto", value_parser = parse_sigma)]
    pub sigma: SigmaArg,
    /// Quantity set by the automatic bandwidth rule.
    #[arg(long, value_enum, default_value_t = SigmaRuleArg::SigmaSquared)]
    pub sigma_rule: SigmaRuleArg,
    /// Pairs sampled for the automatic bandwidth.
    #[arg(long, default_value_t = DEFAULT_PAIR_SAMPLE as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub pair_sample: u64,
    /// Subsample the training pool to equal class counts before quantizing.
    #[arg(long)]
    pub balanced: bool,
    /// Scale each centroid's label weight by its cluster size.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub multiplicity_weighting: Switch,
    /// Root seed for every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV field delimiter.
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    pub delimiter: u8,
    /// Columns to leave out of the features (repeatable or comma-separated).
    #[arg(long = "ignore-col", value_delimiter = ',')]
    pub ignore_cols: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    /// Training CSV (past instances).
    #[arg(long)]
    pub input: PathBuf,
    /// CSV of recent instances to score; same columns as --input.
    #[arg(long)]
    pub recent: PathBuf,
    /// Label column, holding 1/-1 unless --label-threshold is given.
    #[arg(long)]
    pub label_col: String,
    /// Numeric labels at or above this value are positive.
    #[arg(long)]
    pub label_threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Withheld)]
    pub mode: ModeArg,
    /// Also link recent instances to each other.
    #[arg(long)]
    pub recent_edges: bool,
    /// Output directory for report.csv and report.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// CSV with an ordinal response column.
    #[arg(long)]
    pub input: PathBuf,
    /// Ordinal response; scaled to [-1, 1] and binarized at 0.
    #[arg(long)]
    pub response_col: String,
    #[arg(long, default_value_t = 0.03, value_parser = parse_fraction)]
    pub flip_frac: f64,
    /// Where flips are drawn from.
    #[arg(long, value_enum, default_value_t = FlipScopeArg::Global)]
    pub flip_scope: FlipScopeArg,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub runs: u64,
    #[arg(long, default_value_t = 2.0 / 3.0, value_parser = parse_open_fraction)]
    pub train_frac: f64,
    /// γ_g values to sweep (comma-separated); defaults to --gamma-g.
    #[arg(long, value_delimiter = ',', value_parser = parse_non_negative)]
    pub gamma_sweep: Vec<f64>,
    /// Backbone sizes to sweep (comma-separated); defaults to --backbone-k.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(2..))]
    pub backbone_sweep: Vec<u64>,
    /// Neighbourhood of the weighted k-NN baseline; defaults to --k-graph.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub knn_k: Option<u64>,
    /// Skip the weighted k-NN baseline.
    #[arg(long, conflicts_with = "knn_k")]
    pub no_knn: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Withheld)]
    pub mode: ModeArg,
    /// Replace missing feature values by the column mean.
    #[arg(long)]
    pub impute: bool,
    /// Output directory for summary.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub label_col: String,
    #[arg(long)]
    pub label_threshold: Option<f64>,
    /// Replace missing feature values by the column mean.
    #[arg(long)]
    pub impute: bool,
    /// Output directory for the edge list and backbone files.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Resolved parameters echoed into every JSON output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub input: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recent: Option<PathBuf>,
    pub label_column: String,
    pub k_graph: usize,
    pub c_l: f64,
    pub c_u: f64,
    pub gamma_g: f64,
    pub backbone_k: Option<usize>,
    pub sigma: SigmaMode,
    pub pair_sample: usize,
    pub balanced: bool,
    pub multiplicity_weighting: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ScoringMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub arguments: Vec<String>,
}

impl Provenance {
    fn new(seed: u64, arguments: &[String]) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            arguments: arguments.to_vec(),
        }
    }
}

impl ModelArgs {
    fn sigma_mode(&self) -> SigmaMode {
        match self.sigma {
            SigmaArg::Auto => SigmaMode::Auto(match self.sigma_rule {
                SigmaRuleArg::SigmaSquared => SigmaRule::SigmaSquared,
                SigmaRuleArg::Sigma => SigmaRule::Sigma,
            }),
            SigmaArg::Fixed(v) => SigmaMode::Fixed(v),
        }
    }

    fn harmonic(&self) -> HarmonicConfig {
        HarmonicConfig {
            c_l: self.c_l,
            c_u: self.c_u.unwrap_or(self.c_l),
            gamma_g: self.gamma_g,
            ..HarmonicConfig::default()
        }
    }

    fn backbone(&self) -> BackboneConfig {
        BackboneConfig {
            size: self.backbone_k.map(|k| k as usize),
            graph_k: self.k_graph as usize,
            sigma: self.sigma_mode(),
            balanced: self.balanced,
            pair_sample: self.pair_sample as usize,
        }
    }

    fn csv_options(&self, label_rule: LabelRule, impute: bool) -> CsvOptions {
        CsvOptions {
            delimiter: self.delimiter,
            label_rule,
            missing: if impute {
                MissingPolicy::MeanImpute
            } else {
                MissingPolicy::Reject
            },
            ignore_columns: self.ignore_cols.clone(),
            past_rows: None,
        }
    }

    fn config(&self, subcommand: &'static str, input: &Path, label_column: &str, out: &Path) -> RunConfig {
        let h = self.harmonic();
        RunConfig {
            subcommand,
            input: input.to_path_buf(),
            recent: None,
            label_column: label_column.to_string(),
            k_graph: self.k_graph as usize,
            c_l: h.c_l,
            c_u: h.c_u,
            gamma_g: h.gamma_g,
            backbone_k: self.backbone_k.map(|k| k as usize),
            sigma: self.sigma_mode(),
            pair_sample: self.pair_sample as usize,
            balanced: self.balanced,
            multiplicity_weighting: self.multiplicity_weighting == Switch::On,
            mode: None,
            flip_fraction: None,
            runs: None,
            seed: self.seed,
            out: out.to_path_buf(),
        }
    }
}

impl From<ModeArg> for ScoringMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Withheld => ScoringMode::Withheld,
            ModeArg::Included => ScoringMode::Included,
        }
    }
}

fn label_rule(threshold: Option<f64>) -> LabelRule {
    threshold.map_or(LabelRule::Signed, LabelRule::Threshold)
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn create_out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

#[derive(Debug, Serialize)]
struct ReportDocument<'a> {
    config: &'a RunConfig,
    provenance: &'a Provenance,
    sigma: f64,
    backbone_size: usize,
    report: &'a AnomalyReport,
}

/// Result of `score`: the report plus the paths written.
#[derive(Debug)]
pub struct ScoreOutput {
    pub config: RunConfig,
    pub report: AnomalyReport,
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// Loads the training and recent files as one dataset, standardized with
/// training statistics, with the recent rows after the split.
fn load_train_recent(args: &ScoreArgs) -> anyhow::Result<Dataset> {
    // past_rows = 0 leaves the features unstandardized
    let raw_opts = CsvOptions {
        past_rows: Some(0),
        ..args.model.csv_options(label_rule(args.label_threshold), false)
    };
    let train = load_csv(&args.input, &args.label_col, &raw_opts)
        .with_context(|| format!("data: loading {}", args.input.display()))?;
    let recent = load_csv(&args.recent, &args.label_col, &raw_opts)
        .with_context(|| format!("data: loading {}", args.recent.display()))?;
    if train.feature_names() != recent.feature_names() {
        bail!(
            "data: {} and {} have different feature columns",
            args.input.display(),
            args.recent.display()
        );
    }
    let features = train.features().vstack(recent.features()).context("data")?;
    let labels = [train.labels(), recent.labels()].concat();
    let combined = Dataset::new(features, labels, train.len())
        .and_then(|d| d.with_feature_names(train.feature_names().to_vec()))
        .context("data")?;
    Ok(combined.standardized().context("data: standardizing")?.0)
}

pub fn cmd_score(args: &ScoreArgs, arguments: &[String]) -> anyhow::Result<ScoreOutput> {
    let mut config = args.model.config("score", &args.input, &args.label_col, &args.out);
    config.recent = Some(args.recent.clone());
    config.mode = Some(args.mode.into());

    let data = load_train_recent(args)?;
    let past = data.select(&(0..data.split()).collect::<Vec<_>>());
    let psi = wilcoxon_weights(&past).context("data: feature weights")?;
    let bb = build_backbone(&past, &psi, &args.model.backbone(), args.model.seed).context("backbone")?;
    let sigma = bb.graph().context("backbone")?.sigma();
    let scoring = ScoringConfig {
        harmonic: args.model.harmonic(),
        graph_k: (args.model.k_graph as usize).min(bb.len()),
        mode: args.mode.into(),
        multiplicity_weighting: args.model.multiplicity_weighting == Switch::On,
        recent_edges: args.recent_edges,
    };
    let report = score_recent(&bb, &data.recent_features(), data.recent_labels(), &psi, &scoring)
        .context("harmonic: scoring recent instances")?;

    create_out_dir(&args.out)?;
    let csv = args.out.join(REPORT_CSV);
    let file = fs::File::create(&csv).with_context(|| format!("cannot write {}", csv.display()))?;
    report.write_csv(file).context("harmonic: writing report")?;
    let json = args.out.join(REPORT_JSON);
    let provenance = Provenance::new(args.model.seed, arguments);
    write_json(
        &json,
        &ReportDocument {
            config: &config,
            provenance: &provenance,
            sigma,
            backbone_size: bb.len(),
            report: &report,
        },
    )?;
    Ok(ScoreOutput {
        config,
        report,
        csv,
        json,
    })
}

#[derive(Debug, Serialize)]
struct SummaryDocument<'a> {
    config: &'a RunConfig,
    provenance: &'a Provenance,
    experiment: &'a ExperimentSpec,
    summary: &'a MetricSummary,
}

#[derive(Debug)]
pub struct EvalOutput {
    pub config: RunConfig,
    pub spec: ExperimentSpec,
    pub summary: MetricSummary,
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// The experiment an `eval` invocation runs; variants are the product of
/// the γ_g and backbone-size sweeps.
pub fn experiment_spec(args: &EvalArgs) -> ExperimentSpec {
    let m = &args.model;
    let gammas = if args.gamma_sweep.is_empty() {
        vec![m.gamma_g]
    } else {
        args.gamma_sweep.clone()
    };
    let sizes: Vec<Option<usize>> = if args.backbone_sweep.is_empty() {
        vec![m.backbone_k.map(|k| k as usize)]
    } else {
        args.backbone_sweep.iter().map(|&s| Some(s as usize)).collect()
    };
    let variants = sizes
        .iter()
        .flat_map(|&backbone_size| {
            gammas
                .iter()
                .map(move |&gamma_g| SoftHadVariant { gamma_g, backbone_size })
        })
        .collect();
    ExperimentSpec {
        dataset: args.input.display().to_string(),
        flip_fraction: args.flip_frac,
        flip_scope: match args.flip_scope {
            FlipScopeArg::Global => FlipScope::Global,
            FlipScopeArg::Test => FlipScope::TestOnly,
        },
        train_fraction: args.train_frac,
        runs: args.runs as usize,
        seed: m.seed,
        graph_k: m.k_graph as usize,
        sigma: m.sigma_mode(),
        pair_sample: m.pair_sample as usize,
        harmonic: m.harmonic(),
        mode: args.mode.into(),
        multiplicity_weighting: m.multiplicity_weighting == Switch::On,
        balanced: m.balanced,
        variants,
        knn_k: if args.no_knn {
            None
        } else {
            Some(args.knn_k.unwrap_or(m.k_graph) as usize)
        },
    }
}

pub fn cmd_eval(args: &EvalArgs, arguments: &[String]) -> anyhow::Result<EvalOutput> {
    let mut config = args.model.config("eval", &args.input, &args.response_col, &args.out);
    config.mode = Some(args.mode.into());
    config.flip_fraction = Some(args.flip_frac);
    config.runs = Some(args.runs as usize);
    let spec = experiment_spec(args);
    spec.validate().context("eval")?;

    let opts = args.model.csv_options(LabelRule::ScaledResponse, args.impute);
    let data = load_csv(&args.input, &args.response_col, &opts)
        .with_context(|| format!("data: loading {}", args.input.display()))?;
    let summary = run_experiment(&data, &spec).context("eval")?;

    create_out_dir(&args.out)?;
    let csv = args.out.join(SUMMARY_CSV);
    let file = fs::File::create(&csv).with_context(|| format!("cannot write {}", csv.display()))?;
    summary.write_csv(file).context("eval: writing summary")?;
    let json = args.out.join(SUMMARY_JSON);
    let provenance = Provenance::new(args.model.seed, arguments);
    write_json(
        &json,
        &SummaryDocument {
            config: &config,
            provenance: &provenance,
            experiment: &spec,
            summary: &summary,
        },
    )?;
    Ok(EvalOutput {
        config,
        spec,
        summary,
        csv,
        json,
    })
}

#[derive(Debug, Serialize)]
struct GraphDocument<'a> {
    config: &'a RunConfig,
    provenance: &'a Provenance,
    nodes: usize,
    edges: usize,
    sigma: f64,
    feature_weights: &'a FeatureWeights,
}

#[derive(Debug)]
pub struct GraphOutput {
    pub config: RunConfig,
    pub backbone: BackboneGraph,
    pub edges: PathBuf,
    pub json: PathBuf,
}

pub fn cmd_graph(args: &GraphArgs, arguments: &[String]) -> anyhow::Result<GraphOutput> {
    let config = args.model.config("graph", &args.input, &args.label_col, &args.out);
    let opts = args.model.csv_options(label_rule(args.label_threshold), args.impute);
    let data = load_csv(&args.input, &args.label_col, &opts)
        .with_context(|| format!("data: loading {}", args.input.display()))?;
    let psi = wilcoxon_weights(&data).context("data: feature weights")?;
    let bb = build_backbone(&data, &psi, &args.model.backbone(), args.model.seed).context("backbone")?;
    let graph = bb.graph().context("backbone")?;

    create_out_dir(&args.out)?;
    let edges = args.out.join(GRAPH_EDGES);
    graph.save(&edges).context("graph: writing edge list")?;
    bb.save(args.out.join(BACKBONE_PREFIX))
        .context("backbone: writing files")?;
    let json = args.out.join(GRAPH_JSON);
    let provenance = Provenance::new(args.model.seed, arguments);
    write_json(
        &json,
        &GraphDocument {
            config: &config,
            provenance: &provenance,
            nodes: graph.node_count(),
            edges: graph.edge_count(),
            sigma: graph.sigma(),
            feature_weights: &psi,
        },
    )?;
    Ok(GraphOutput {
        config,
        backbone: bb,
        edges,
        json,
    })
}

/// Parses and runs a command line, returning the process exit code.
/// Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let arguments: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();

    let pool = match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t as usize).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_RUNTIME;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Score(a) => cmd_score(a, &arguments).map(|o| {
            println!("scored {} recent instances -> {}", o.report.len(), o.csv.display());
        }),
        Command::Eval(a) => cmd_eval(a, &arguments).map(|o| {
            print!("{}", o.summary.to_csv_string());
        }),
        Command::Graph(a) => cmd_graph(a, &arguments).map(|o| {
            let g = o.backbone.graph().expect("built by cmd_graph");
            println!(
                "{} nodes, {} edges -> {}",
                g.node_count(),
                g.edge_count(),
                o.edges.display()
            );
        }),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}
