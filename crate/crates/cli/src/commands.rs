//! Single-step subcommands: graph construction, training, auditing and the
//! accountant.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dpgnn_core::dp::{compose_and_convert, recommend_delta, supremum_power, AccountantState, PowerBound, PrivacySpec};
use dpgnn_core::gnn::{evaluate, train, ModelHeader, ModelParams, Regime, TrainConfig};
use dpgnn_core::graph::{
    assign_splits, build_knn_graph, generate_synthetic, graph_stats, load_csv, read_graph_dir, write_graph_dir,
    CsvOptions, GraphSidecar, GraphStats, Metric, PopulationGraph, SplitSpec, SyntheticSpec,
};
use dpgnn_core::mia::{audit, AuditConfig, ShadowConfig, FPR_GRID};

use crate::output::{graph_hash, write_atomic, write_json, write_jsonl, OUTPUT_SCHEMA_VERSION};

pub const MODEL_STEM: &str = "model";

pub fn parse_power_bound(s: &str) -> Result<PowerBound> {
    match s {
        "one_sided" | "one-sided" => Ok(PowerBound::OneSided),
        "tight" => Ok(PowerBound::Tight),
        other => bail!("unknown power bound {other:?} (one_sided or tight)"),
    }
}

fn write_graph(out: &Path, graph: &PopulationGraph, seed: Option<u64>, provenance: serde_json::Value) -> Result<GraphStats> {
    let sidecar = GraphSidecar::describe(graph, seed, provenance);
    write_graph_dir(out, graph, &sidecar).with_context(|| format!("writing graph to {}", out.display()))?;
    Ok(graph_stats(graph))
}

pub fn gen_synthetic(spec: &SyntheticSpec, out: &Path) -> Result<GraphStats> {
    let g = generate_synthetic(spec)?;
    if let Some(w) = &g.provenance.warning {
        log::warn!("{w}");
    }
    write_graph(out, &g.graph, Some(spec.seed), serde_json::to_value(&g.provenance)?)
}

pub struct BuildGraphArgs<'a> {
    pub features: &'a Path,
    pub labels: &'a Path,
    pub options: CsvOptions,
    pub k: usize,
    pub metric: Metric,
}

pub fn build_graph(args: &BuildGraphArgs<'_>, out: &Path) -> Result<GraphStats> {
    let g = load_csv(args.features, args.labels, args.options)?;
    let g = build_knn_graph(g, args.k, args.metric)?;
    let provenance = serde_json::json!({
        "builder": "knn",
        "k": args.k,
        "metric": args.metric,
        "standardize": args.options.standardize,
        "features": args.features,
        "labels": args.labels,
    });
    write_graph(out, &g, None, provenance)
}

/// Metadata stored in the model header so `audit` can rebuild the
/// training setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub regime: Regime,
    pub train_config: TrainConfig,
    pub split: SplitSpec,
    pub privacy: Option<PrivacySpec>,
    pub input_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResult {
    pub schema_version: u32,
    pub regime: Regime,
    pub seed: u64,
    pub input_hash: String,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub test_acc: f64,
    pub selected_step: usize,
    pub epsilon_target: Option<f64>,
    pub delta: Option<f64>,
    pub noise_multiplier: Option<f64>,
    pub epsilon_spent: Option<f64>,
}

pub struct TrainArgs {
    pub graph_dir: PathBuf,
    pub config: TrainConfig,
    pub regime: Regime,
    pub split: SplitSpec,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
}

fn load_split_graph(dir: &Path, split: &SplitSpec) -> Result<PopulationGraph> {
    let (g, _) = read_graph_dir(dir).with_context(|| format!("reading graph from {}", dir.display()))?;
    Ok(assign_splits(g, split)?)
}

fn save_model(out: &Path, params: &ModelParams, metadata: serde_json::Value) -> Result<()> {
    write_atomic(&out.join(format!("{MODEL_STEM}.bin")), &params.to_le_bytes())?;
    write_json(&out.join(format!("{MODEL_STEM}.json")), &params.header(metadata))
}

pub fn train_model(args: &TrainArgs, out: &Path) -> Result<TrainResult> {
    let graph = load_split_graph(&args.graph_dir, &args.split)?;
    let config = args.config.clone().with_regime(args.regime);
    let n_train = graph.train_nodes().len();
    let spec = match (args.regime, args.epsilon) {
        (Regime::Dp, Some(eps)) => {
            let delta = args.delta.unwrap_or_else(|| recommend_delta(n_train));
            Some(config.privacy_spec(n_train, eps, delta))
        }
        (Regime::Dp, None) => bail!("the dp regime needs --epsilon"),
        (_, Some(_)) => bail!("--epsilon applies to the dp regime only"),
        (_, None) => None,
    };
    let outcome = train(&graph, &config, spec.as_ref())?;
    let input_hash = graph_hash(&graph);
    let masks = graph.masks();
    let result = TrainResult {
        schema_version: OUTPUT_SCHEMA_VERSION,
        regime: args.regime,
        seed: config.seed,
        input_hash: input_hash.clone(),
        train_acc: evaluate(&graph, &outcome.params, &masks.train)?,
        val_acc: evaluate(&graph, &outcome.params, &masks.val).ok(),
        test_acc: evaluate(&graph, &outcome.params, &masks.test)?,
        selected_step: outcome.selected_step,
        epsilon_target: outcome.privacy.as_ref().map(|p| p.epsilon_target),
        delta: outcome.privacy.as_ref().map(|p| p.delta),
        noise_multiplier: outcome.privacy.as_ref().and_then(|p| p.noise_multiplier),
        epsilon_spent: outcome.epsilon_spent,
    };
    let metadata = ModelMetadata {
        regime: args.regime,
        train_config: config.clone(),
        split: args.split,
        privacy: outcome.privacy.clone(),
        input_hash,
        seed: config.seed,
    };
    save_model(out, &outcome.params, serde_json::to_value(&metadata)?)?;
    write_jsonl(&out.join("log.jsonl"), &outcome.log)?;
    write_json(&out.join("result.json"), &result)?;
    Ok(result)
}

pub struct AuditArgs {
    pub graph_dir: PathBuf,
    pub model_dir: PathBuf,
    pub shadows: ShadowConfig,
    pub fpr_grid: Vec<f64>,
    pub power_bound: PowerBound,
    pub variant: Option<String>,
    pub seed: u64,
}

/// Audits a model written by [`train_model`]; returns whether every bound
/// check held.
pub fn audit_model(args: &AuditArgs, out: &Path) -> Result<bool> {
    let (params, header): (ModelParams, ModelHeader) = ModelParams::load(&args.model_dir, MODEL_STEM)
        .with_context(|| format!("reading model from {}", args.model_dir.display()))?;
    let meta: ModelMetadata = serde_json::from_value(header.metadata)
        .context("model header lacks training metadata; was it written by `dpgnn train`?")?;
    let graph = load_split_graph(&args.graph_dir, &meta.split)?;
    if graph_hash(&graph) != meta.input_hash {
        bail!("graph does not match the one the model was trained on");
    }
    let cfg = AuditConfig {
        shadows: args.shadows.clone(),
        fpr_grid: args.fpr_grid.clone(),
        power_bound: args.power_bound,
        seed: args.seed,
    };
    let variant = args.variant.clone().unwrap_or_else(|| meta.regime.name().to_string());
    let report = audit(&graph, &params, &meta.train_config, meta.privacy.as_ref(), &cfg, &variant)?;
    if let Some(roc) = &report.roc {
        write_atomic(&out.join("roc.csv"), roc.to_csv().as_bytes())?;
    }
    write_json(&out.join("report.json"), &report)?;
    for c in &report.bound_check {
        if !c.holds {
            log::error!(
                "bound violated at FPR {}: TPR {} > {} + {}",
                c.fpr,
                c.tpr,
                c.supremum_power,
                c.half_width
            );
        }
    }
    Ok(report.sound())
}

#[derive(Debug, Clone, Copy)]
pub struct AccountantArgs {
    pub steps: usize,
    pub n_train: usize,
    pub batch_size: usize,
    pub max_degree: usize,
    pub hops: usize,
    pub occurrence_bound: Option<usize>,
    pub delta: Option<f64>,
    pub clip_norm: f64,
    pub power_bound: PowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountantReport {
    pub schema_version: u32,
    pub epsilon_target: Option<f64>,
    pub delta: f64,
    pub sigma: f64,
    pub clip_norm: f64,
    #[serde(rename = "K")]
    pub max_degree: usize,
    #[serde(rename = "T")]
    pub occurrence_bound: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub n_train: usize,
    pub steps: usize,
    pub epsilon_spent: f64,
    pub order_argmin: Option<f64>,
    /// Supremum power at each FPR of the default grid, at the spent ε.
    pub supremum_power: BTreeMap<String, f64>,
}

impl AccountantArgs {
    fn spec(&self, epsilon: f64) -> PrivacySpec {
        PrivacySpec {
            epsilon_target: epsilon,
            delta: self.delta.unwrap_or_else(|| recommend_delta(self.n_train)),
            clip_norm: self.clip_norm,
            noise_multiplier: None,
            max_degree: self.max_degree,
            hops: self.hops,
            occurrence_bound: self
                .occurrence_bound
                .unwrap_or_else(|| PrivacySpec::default_occurrence_bound(self.max_degree, self.hops)),
            batch_size: self.batch_size,
            total_steps: self.steps,
            num_train: self.n_train,
        }
    }

    fn report(&self, spec: &PrivacySpec, epsilon_target: Option<f64>, sigma: f64) -> Result<AccountantReport> {
        let state = AccountantState::new(
            sigma,
            spec.num_train,
            spec.occurrence_bound.min(spec.num_train),
            spec.batch_size,
        )?;
        let spent = compose_and_convert(&state, spec.total_steps, spec.delta)?;
        let supremum_power = FPR_GRID
            .iter()
            .map(|&f| (format!("{f}"), supremum_power(spent.epsilon, spec.delta, f, self.power_bound)))
            .collect();
        Ok(AccountantReport {
            schema_version: OUTPUT_SCHEMA_VERSION,
            epsilon_target,
            delta: spec.delta,
            sigma,
            clip_norm: spec.clip_norm,
            max_degree: spec.max_degree,
            occurrence_bound: spec.occurrence_bound,
            m: spec.batch_size,
            n_train: spec.num_train,
            steps: spec.total_steps,
            epsilon_spent: spent.epsilon,
            order_argmin: spent.order,
            supremum_power,
        })
    }
}

/// ε spent by `steps` steps at noise multiplier `sigma`.
pub fn accountant(args: &AccountantArgs, sigma: f64) -> Result<AccountantReport> {
    let spec = args.spec(1.0);
    let mut check = spec.clone();
    check.noise_multiplier = Some(sigma);
    check.validate()?;
    args.report(&spec, None, sigma)
}

/// Smallest σ meeting `epsilon`.
pub fn calibrate(args: &AccountantArgs, epsilon: f64) -> Result<AccountantReport> {
    let mut spec = args.spec(epsilon);
    let sigma = spec.calibrate()?;
    args.report(&spec, Some(epsilon), sigma)
}
