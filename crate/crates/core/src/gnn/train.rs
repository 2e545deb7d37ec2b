use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dp::{clip_in_place, noisy_batch_gradient, sample_training_subgraphs, PrivacySpec};
use crate::error::{Error, Result};
use crate::gnn::context::ForwardContext;
use crate::gnn::eval::accuracy;
use crate::gnn::model::{forward_logits, loss_and_grad};
use crate::gnn::optim::{Optimizer, OptimizerKind};
use crate::gnn::params::{Architecture, ModelParams};
use crate::graph::PopulationGraph;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// One gradient per epoch from the masked loss over the whole graph.
    #[default]
    FullGraph,
    /// Mini-batches of per-root sampled subgraphs.
    SubgraphBatch,
}

/// The five training regimes compared in the homophily ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NonDp,
    Clipping,
    Subgraphing,
    SubgraphClip,
    Dp,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::NonDp,
        Regime::Clipping,
        Regime::Subgraphing,
        Regime::SubgraphClip,
        Regime::Dp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::NonDp => "non_dp",
            Regime::Clipping => "clipping",
            Regime::Subgraphing => "subgraphing",
            Regime::SubgraphClip => "subgraph_clip",
            Regime::Dp => "dp",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown regime {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub architecture: Architecture,
    /// Number of layers, which is also the number of propagation hops.
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Full-graph epochs.
    pub epochs: usize,
    /// Subgraph-batch steps.
    pub steps: usize,
    pub batch_size: usize,
    pub mode: TrainMode,
    pub clipping: bool,
    pub clip_norm: f64,
    pub noise: bool,
    /// Per-node, per-hop neighbor cap `K` of the subgraph sampler.
    pub max_degree: usize,
    /// Occurrence bound `T`; defaults to `K·r + 1`.
    pub occurrence_bound: Option<usize>,
    /// Evaluation period in epochs or steps; defaults to every epoch, or to
    /// one pass over the training subgraphs.
    pub eval_every: Option<usize>,
    /// Return the parameters with the best validation accuracy rather than
    /// the final ones (ignored without validation nodes).
    pub select_checkpoint: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Gcn,
            num_layers: 2,
            hidden_dim: 32,
            learning_rate: 1e-2,
            optimizer: OptimizerKind::default(),
            epochs: 200,
            steps: 1000,
            batch_size: 64,
            mode: TrainMode::FullGraph,
            clipping: false,
            clip_norm: 1.0,
            noise: false,
            max_degree: 5,
            occurrence_bound: None,
            eval_every: None,
            select_checkpoint: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_regime(mut self, regime: Regime) -> Self {
        let (mode, clipping, noise) = match regime {
            Regime::NonDp => (TrainMode::FullGraph, false, false),
            Regime::Clipping => (TrainMode::FullGraph, true, false),
            Regime::Subgraphing => (TrainMode::SubgraphBatch, false, false),
            Regime::SubgraphClip => (TrainMode::SubgraphBatch, true, false),
            Regime::Dp => (TrainMode::SubgraphBatch, true, true),
        };
        self.mode = mode;
        self.clipping = clipping;
        self.noise = noise;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.num_layers == 0 {
            return bad("at least one layer is required");
        }
        if !(self.learning_rate >= 0.0) {
            return bad("learning rate must be non-negative");
        }
        if self.noise && !(self.clipping && self.mode == TrainMode::SubgraphBatch) {
            return bad("noise requires clipping and subgraph batches");
        }
        if self.clipping && !(self.clip_norm > 0.0) {
            return bad("clip norm must be positive");
        }
        if self.mode == TrainMode::SubgraphBatch && (self.batch_size == 0 || self.max_degree == 0) {
            return bad("batch size and max degree must be positive");
        }
        Ok(())
    }

    /// Hops a root's loss depends on (an MLP sees only the node itself).
    pub fn hops(&self) -> usize {
        match self.architecture {
            Architecture::Gcn => self.num_layers,
            Architecture::Mlp => 0,
        }
    }

    pub fn effective_occurrence_bound(&self) -> usize {
        match self.architecture {
            Architecture::Mlp => 1,
            Architecture::Gcn => self
                .occurrence_bound
                .unwrap_or_else(|| PrivacySpec::default_occurrence_bound(self.max_degree, self.hops())),
        }
    }

    /// Uncalibrated privacy spec matching this configuration.
    pub fn privacy_spec(&self, num_train: usize, epsilon: f64, delta: f64) -> PrivacySpec {
        PrivacySpec {
            epsilon_target: epsilon,
            delta,
            clip_norm: self.clip_norm,
            noise_multiplier: None,
            max_degree: self.max_degree,
            hops: self.hops().max(1),
            occurrence_bound: self.effective_occurrence_bound(),
            batch_size: self.batch_size,
            total_steps: self.steps,
            num_train,
        }
    }

    fn check_privacy_spec(&self, spec: &PrivacySpec, num_train: usize) -> Result<()> {
        let expected = self.privacy_spec(num_train, spec.epsilon_target, spec.delta);
        let mismatch = |what: &str| {
            Err(Error::InvalidParameter(format!(
                "privacy spec disagrees with the training configuration on {what}"
            )))
        };
        if spec.num_train != expected.num_train {
            return mismatch("the number of training subgraphs");
        }
        if spec.batch_size != expected.batch_size {
            return mismatch("batch size");
        }
        if spec.total_steps != expected.total_steps {
            return mismatch("step count");
        }
        if spec.clip_norm != expected.clip_norm {
            return mismatch("clip norm");
        }
        if spec.occurrence_bound != expected.occurrence_bound || spec.max_degree != expected.max_degree {
            return mismatch("sampling bounds");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub epsilon_spent: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<LogRecord>,
    /// The calibrated spec for DP runs.
    pub privacy: Option<PrivacySpec>,
    pub epsilon_spent: Option<f64>,
    /// Step (or epoch) of the returned parameters.
    pub selected_step: usize,
}

struct Evaluator<'g> {
    ctx: ForwardContext,
    graph: &'g PopulationGraph,
    train: Vec<usize>,
    val: Vec<usize>,
    select: bool,
    best: Option<(f64, usize, ModelParams)>,
    log: Vec<LogRecord>,
}

impl<'g> Evaluator<'g> {
    fn record(&mut self, step: usize, loss: f64, params: &ModelParams, epsilon: Option<f64>) -> Result<()> {
        let logits = forward_logits(&self.ctx, params)?;
        let train_acc = accuracy(&logits, self.graph.labels(), &self.train)?;
        let val_acc = if self.val.is_empty() {
            None
        } else {
            Some(accuracy(&logits, self.graph.labels(), &self.val)?)
        };
        if let (true, Some(v)) = (self.select, val_acc) {
            if self.best.as_ref().is_none_or(|(b, _, _)| v > *b) {
                self.best = Some((v, step, params.clone()));
            }
        }
        self.log.push(LogRecord {
            step,
            loss,
            train_acc,
            val_acc,
            epsilon_spent: epsilon,
        });
        Ok(())
    }

    fn finish(self, last: ModelParams, last_step: usize, privacy: Option<PrivacySpec>) -> TrainOutcome {
        let epsilon_spent = self.log.last().and_then(|r| r.epsilon_spent);
        let (params, selected_step) = match self.best {
            Some((_, step, p)) => (p, step),
            None => (last, last_step),
        };
        TrainOutcome {
            params,
            log: self.log,
            privacy,
            epsilon_spent,
            selected_step,
        }
    }
}

/// Trains a model under the regime encoded in `config`. A DP run requires
/// `dp`; its noise multiplier is calibrated here when absent, and a budget
/// that cannot be met fails before the first step.
pub fn train(graph: &PopulationGraph, config: &TrainConfig, dp: Option<&PrivacySpec>) -> Result<TrainOutcome> {
    config.validate()?;
    match (dp.is_some(), config.noise) {
        (true, false) => {
            return Err(Error::InvalidParameter(
                "a privacy spec requires the DP regime (subgraph batches, clipping and noise)".into(),
            ))
        }
        (false, true) => {
            return Err(Error::InvalidParameter("noise requires a privacy spec".into()));
        }
        _ => {}
    }
    let train_nodes = graph.train_nodes();
    if train_nodes.is_empty() {
        return Err(Error::EmptyMask("no training nodes".into()));
    }
    let ctx = match config.architecture {
        Architecture::Gcn => ForwardContext::full(graph),
        Architecture::Mlp => ForwardContext::features_only(graph.features().clone()),
    };
    let params = ModelParams::init(
        config.architecture,
        graph.feat_dim(),
        config.hidden_dim,
        graph.num_classes(),
        config.num_layers,
        config.seed,
    )?;
    let evaluator = Evaluator {
        ctx,
        graph,
        train: train_nodes,
        val: graph.val_nodes(),
        select: config.select_checkpoint,
        best: None,
        log: Vec::new(),
    };
    match config.mode {
        TrainMode::FullGraph => train_full_graph(graph, config, params, evaluator),
        TrainMode::SubgraphBatch => train_subgraph_batches(graph, config, dp, params, evaluator),
    }
}

/// A per-root gradient job: a local context, its labels and the root's row.
struct RootJob {
    ctx: ForwardContext,
    labels: Vec<usize>,
}

impl RootJob {
    fn loss_and_grad(&self, params: &ModelParams) -> Result<(f64, Vec<f64>)> {
        loss_and_grad(&self.ctx, params, &self.labels, &[0])
    }
}

fn per_root_gradients(jobs: &[&RootJob], params: &ModelParams) -> Result<Vec<(f64, Vec<f64>)>> {
    jobs.iter().map(|j| j.loss_and_grad(params)).collect()
}

fn train_full_graph(
    graph: &PopulationGraph,
    config: &TrainConfig,
    mut params: ModelParams,
    mut eval: Evaluator<'_>,
) -> Result<TrainOutcome> {
    // Clipping needs per-node gradients. The exact r-hop ball of a node yields
    // the same logit, hence the same per-node gradient, as the full graph.
    let jobs: Vec<RootJob> = if config.clipping {
        eval.train
            .iter()
            .map(|&v| {
                let (ctx, nodes) = ForwardContext::ball(graph, v, config.hops());
                RootJob {
                    ctx,
                    labels: nodes.iter().map(|&u| graph.labels()[u]).collect(),
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    let job_refs: Vec<&RootJob> = jobs.iter().collect();
    let full_ctx = eval.ctx.clone();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, params.len());
    let every = config.eval_every.unwrap_or(1).max(1);
    for epoch in 1..=config.epochs {
        let (loss, grad) = if config.clipping {
            let per_root = per_root_gradients(&job_refs, &params)?;
            let n = per_root.len() as f64;
            let mut mean = vec![0.0; params.len()];
            let mut loss = 0.0;
            for (l, mut g) in per_root {
                clip_in_place(&mut g, config.clip_norm);
                mean.iter_mut().zip(&g).for_each(|(m, x)| *m += x / n);
                loss += l / n;
            }
            (loss, mean)
        } else {
            loss_and_grad(&full_ctx, &params, graph.labels(), &eval.train)?
        };
        opt.step(params.values_mut(), &grad);
        if epoch % every == 0 || epoch == config.epochs {
            eval.record(epoch, loss, &params, None)?;
        }
    }
    Ok(eval.finish(params, config.epochs, None))
}

fn train_subgraph_batches(
    graph: &PopulationGraph,
    config: &TrainConfig,
    dp: Option<&PrivacySpec>,
    mut params: ModelParams,
    mut eval: Evaluator<'_>,
) -> Result<TrainOutcome> {
    let subgraphs = sample_training_subgraphs(
        graph,
        config.max_degree,
        config.hops(),
        config.effective_occurrence_bound(),
        config.seed,
    )?;
    let n = subgraphs.len();
    let m = config.batch_size;
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "batch size {m} exceeds the {n} training subgraphs"
        )));
    }

    let privacy = match dp {
        Some(spec) => {
            config.check_privacy_spec(spec, n)?;
            let mut spec = spec.clone();
            match spec.noise_multiplier {
                None => {
                    spec.calibrate()?;
                }
                Some(_) => {
                    let spent = spec.epsilon_after(spec.total_steps)?.epsilon;
                    if spent > spec.epsilon_target {
                        return Err(Error::Calibration(format!(
                            "σ = {:?} spends ε = {spent:.4} over {} steps, above the target {}",
                            spec.noise_multiplier, spec.total_steps, spec.epsilon_target
                        )));
                    }
                }
            }
            Some(spec)
        }
        None => None,
    };
    let accountant = privacy.as_ref().map(PrivacySpec::accountant).transpose()?;
    let sigma = privacy.as_ref().and_then(|p| p.noise_multiplier);

    let jobs: Vec<RootJob> = subgraphs
        .iter()
        .map(|s| RootJob {
            ctx: match config.architecture {
                Architecture::Gcn => ForwardContext::from_subgraph(graph, s),
                Architecture::Mlp => ForwardContext::features_only(graph.features().gather_rows(&s.nodes[..1])),
            },
            labels: s.nodes.iter().map(|&u| graph.labels()[u]).collect(),
        })
        .collect();

    let mut batch_rng = stream_rng(config.seed, Stream::Batch);
    let mut noise_rng = stream_rng(config.seed, Stream::Noise);
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, params.len());
    let every = config.eval_every.unwrap_or(n.div_ceil(m)).max(1);
    for step in 1..=config.steps {
        let mut picked = sample(&mut batch_rng, n, m).into_vec();
        picked.sort_unstable();
        let batch: Vec<&RootJob> = picked.iter().map(|&i| &jobs[i]).collect();
        let per_root = per_root_gradients(&batch, &params)?;
        let loss = per_root.iter().map(|(l, _)| l).sum::<f64>() / m as f64;
        let grads: Vec<Vec<f64>> = per_root.into_iter().map(|(_, g)| g).collect();
        let grad = if config.clipping {
            noisy_batch_gradient(&grads, config.clip_norm, sigma, &mut noise_rng)?
        } else {
            let mut mean = vec![0.0; params.len()];
            for g in &grads {
                mean.iter_mut().zip(g).for_each(|(s, x)| *s += x / m as f64);
            }
            mean
        };
        opt.step(params.values_mut(), &grad);
        if step % every == 0 || step == config.steps {
            let epsilon = match (&accountant, &privacy) {
                (Some(acc), Some(spec)) => Some(crate::dp::compose_and_convert(acc, step, spec.delta)?.epsilon),
                _ => None,
            };
            eval.record(step, loss, &params, epsilon)?;
        }
    }
    Ok(eval.finish(params, config.steps, privacy))
}
