use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dpgnn_cli::commands::{self, parse_power_bound, AccountantArgs, AuditArgs, BuildGraphArgs, TrainArgs};
use dpgnn_cli::manifest::{Dataset, Manifest, SweepBlock};
use dpgnn_cli::report::report;
use dpgnn_core::gnn::{Architecture, OptimizerKind, Regime, TrainConfig};
use dpgnn_core::graph::{CsvOptions, Metric, SplitSpec, SyntheticSpec};
use dpgnn_core::mia::{ShadowConfig, FPR_GRID};

/// Node-level differentially private GNN experiments.
#[derive(Debug, Parser)]
#[command(name = "dpgnn", version)]
struct Cli {
    /// Master seed (for `run` and `sweep`: restrict the manifest to this seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the manifest's `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Experiment manifest (TOML).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a homophily-controlled synthetic graph directory.
    GenSynthetic(GenSyntheticArgs),
    /// Build a k-NN population graph from feature and label CSVs.
    BuildGraph(BuildGraphCli),
    /// Train one model on a graph directory.
    Train(TrainCli),
    /// Run the shadow-model membership inference attack on a trained model.
    Audit(AuditCli),
    /// Print ε spent for a given noise multiplier.
    Accountant(AccountantCli),
    /// Solve for the noise multiplier meeting a target ε.
    Calibrate(CalibrateCli),
    /// Run every cell of a manifest.
    Run,
    /// Run a synthetic manifest over a list of homophily values.
    Sweep(SweepCli),
    /// Render tables from a results directory.
    Report(ReportCli),
}

#[derive(Debug, Args)]
struct GenSyntheticArgs {
    #[arg(long, default_value_t = 0.9)]
    homophily: f64,
    #[arg(long, default_value_t = 1000)]
    nodes: usize,
    /// Neighbor slots per node.
    #[arg(long, default_value_t = 5)]
    neighbors: usize,
    #[arg(long, default_value_t = 10)]
    feat_dim: usize,
    #[arg(long, default_value_t = 1.75)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
}

#[derive(Debug, Args)]
struct BuildGraphCli {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// The features file has a header row.
    #[arg(long)]
    has_header: bool,
    /// Keep raw feature values instead of standardizing columns.
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
}

#[derive(Debug, Args)]
struct SplitCli {
    #[arg(long, default_value_t = 0.56)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0.14)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0.30)]
    test_fraction: f64,
}

#[derive(Debug, Args)]
struct TrainCli {
    /// Graph directory from gen-synthetic or build-graph.
    #[arg(long)]
    graph: PathBuf,
    /// non_dp, clipping, subgraphing, subgraph_clip or dp.
    #[arg(long, default_value = "non_dp")]
    regime: Regime,
    /// TOML file with training settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Defaults to 1/(10·n_train).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    architecture: Option<Architecture>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    num_layers: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Plain SGD instead of Adam.
    #[arg(long)]
    sgd: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Neighbor cap K.
    #[arg(long)]
    max_degree: Option<usize>,
    /// Occurrence bound T.
    #[arg(long)]
    occurrence_bound: Option<usize>,
    #[command(flatten)]
    split: SplitCli,
}

#[derive(Debug, Args)]
struct AuditCli {
    #[arg(long)]
    graph: PathBuf,
    /// Model directory from `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 128)]
    shadows: usize,
    #[arg(long, default_value_t = 8)]
    min_coverage: usize,
    /// Comma-separated FPR budgets.
    #[arg(long, value_delimiter = ',')]
    fpr: Option<Vec<f64>>,
    /// one_sided or tight.
    #[arg(long, default_value = "one_sided")]
    power_bound: String,
    /// Label for the report (defaults to the regime name).
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Debug, Args)]
struct AccountantCommon {
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Number of training subgraphs N.
    #[arg(long)]
    n_train: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Neighbor cap K.
    #[arg(long, default_value_t = 5)]
    max_degree: usize,
    /// Hops r.
    #[arg(long, default_value_t = 2)]
    hops: usize,
    /// Occurrence bound T (defaults to K·r + 1).
    #[arg(long)]
    occurrence_bound: Option<usize>,
    /// Defaults to 1/(10·N).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    clip_norm: f64,
    #[arg(long, default_value = "one_sided")]
    power_bound: String,
}

impl AccountantCommon {
    fn args(&self) -> Result<AccountantArgs> {
        Ok(AccountantArgs {
            steps: self.steps,
            n_train: self.n_train,
            batch_size: self.batch_size,
            max_degree: self.max_degree,
            hops: self.hops,
            occurrence_bound: self.occurrence_bound,
            delta: self.delta,
            clip_norm: self.clip_norm,
            power_bound: parse_power_bound(&self.power_bound)?,
        })
    }
}

#[derive(Debug, Args)]
struct AccountantCli {
    #[arg(long)]
    sigma: f64,
    #[command(flatten)]
    common: AccountantCommon,
}

#[derive(Debug, Args)]
struct CalibrateCli {
    #[arg(long)]
    epsilon: f64,
    #[command(flatten)]
    common: AccountantCommon,
}

#[derive(Debug, Args)]
struct SweepCli {
    /// Comma-separated homophily values (defaults to the manifest's list).
    #[arg(long, value_delimiter = ',')]
    homophily: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct ReportCli {
    /// Results directory (defaults to --out).
    dir: Option<PathBuf>,
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_manifest(cli: &Cli) -> Result<Manifest> {
    let path = cli.manifest.as_ref().context("this command needs --manifest")?;
    let mut m = Manifest::load(path)?;
    if let Some(seed) = cli.seed {
        m.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        m.output_dir = out.clone();
    }
    Ok(m)
}

fn run_manifest(m: &Manifest) -> Result<i32> {
    let summary = dpgnn_cli::run(m, &m.output_dir)?;
    eprintln!(
        "{} cells, {} failed, {} with bound violations; results in {}",
        summary.cells.len(),
        summary.n_failed(),
        summary.n_unsound(),
        m.output_dir.display()
    );
    Ok(summary.exit_code())
}

fn train_config(t: &TrainCli, seed: u64) -> Result<TrainConfig> {
    let mut c: TrainConfig = match &t.config {
        Some(p) => toml::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => TrainConfig::default(),
    };
    c.seed = seed;
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = t.$f { c.$f = v; } )* };
    }
    set!(architecture, hidden_dim, num_layers, learning_rate, epochs, steps, batch_size, clip_norm, max_degree);
    if t.occurrence_bound.is_some() {
        c.occurrence_bound = t.occurrence_bound;
    }
    if t.sgd {
        c.optimizer = OptimizerKind::sgd();
    }
    Ok(c)
}

fn execute(cli: &Cli) -> Result<i32> {
    let seed = cli.seed.unwrap_or(0);
    let out = |default: &str| cli.out.clone().unwrap_or_else(|| PathBuf::from(default));
    match &cli.command {
        Command::GenSynthetic(a) => {
            let spec = SyntheticSpec {
                num_nodes: a.nodes,
                target_homophily: a.homophily,
                neighbors_per_node: a.neighbors,
                feat_dim: a.feat_dim,
                class_separation: a.separation,
                feature_noise_std: a.noise_std,
                seed,
            };
            print_json(&commands::gen_synthetic(&spec, &out("graph"))?)?;
        }
        Command::BuildGraph(a) => {
            let args = BuildGraphArgs {
                features: &a.features,
                labels: &a.labels,
                options: CsvOptions {
                    standardize: !a.no_standardize,
                    has_header: a.has_header,
                },
                k: a.k,
                metric: a.metric,
            };
            print_json(&commands::build_graph(&args, &out("graph"))?)?;
        }
        Command::Train(t) => {
            let args = TrainArgs {
                graph_dir: t.graph.clone(),
                config: train_config(t, seed)?,
                regime: t.regime,
                split: SplitSpec {
                    train_fraction: t.split.train_fraction,
                    val_fraction: t.split.val_fraction,
                    test_fraction: t.split.test_fraction,
                    seed,
                },
                epsilon: t.epsilon,
                delta: t.delta,
            };
            print_json(&commands::train_model(&args, &out("model"))?)?;
        }
        Command::Audit(a) => {
            let args = AuditArgs {
                graph_dir: a.graph.clone(),
                model_dir: a.model.clone(),
                shadows: ShadowConfig {
                    num_shadows: a.shadows,
                    min_coverage: a.min_coverage,
                    ..ShadowConfig::default()
                },
                fpr_grid: a.fpr.clone().unwrap_or_else(|| FPR_GRID.to_vec()),
                power_bound: parse_power_bound(&a.power_bound)?,
                variant: a.variant.clone(),
                seed,
            };
            let dir = out("audit");
            let sound = commands::audit_model(&args, &dir)?;
            eprintln!("report written to {}", dir.join("report.json").display());
            if !sound {
                return Ok(3);
            }
        }
        Command::Accountant(a) => print_json(&commands::accountant(&a.common.args()?, a.sigma)?)?,
        Command::Calibrate(a) => print_json(&commands::calibrate(&a.common.args()?, a.epsilon)?)?,
        Command::Run => return run_manifest(&load_manifest(cli)?),
        Command::Sweep(s) => {
            let mut m = load_manifest(cli)?;
            if !matches!(m.dataset, Dataset::Synthetic(_)) {
                bail!("sweep needs a synthetic dataset");
            }
            if let Some(h) = &s.homophily {
                m.sweep = Some(SweepBlock { homophily: h.clone() });
            }
            if m.sweep.is_none() {
                bail!("no homophily values: pass --homophily or add a [sweep] block");
            }
            m.validate()?;
            return run_manifest(&m);
        }
        Command::Report(r) => {
            let dir = r.dir.clone().or_else(|| cli.out.clone()).context("report needs a results directory")?;
            let s = report(&dir)?;
            print!("{}", std::fs::read_to_string(dir.join(dpgnn_cli::report::REPORT_TEXT))?);
            if !s.corrupt.is_empty() || !s.missing.is_empty() {
                return Ok(1);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("dpgnn_cli=info,warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
