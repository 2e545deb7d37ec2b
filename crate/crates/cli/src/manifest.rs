//! Experiment manifests: a TOML description of a grid of training runs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dpgnn_core::dp::PowerBound;
use dpgnn_core::gnn::{Architecture, OptimizerKind, Regime, TrainConfig};
use dpgnn_core::graph::{Metric, SplitSpec, SyntheticSpec};
use dpgnn_core::mia::{AuditConfig, ShadowConfig, FPR_GRID};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub dataset: Dataset,
    #[serde(default)]
    pub graph: Option<GraphBlock>,
    #[serde(default)]
    pub split: SplitSpec,
    /// Shared training configuration; `mode`, `clipping`, `noise` and `seed`
    /// are set per cell from the variant and the seed.
    #[serde(default)]
    pub model: TrainConfig,
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub privacy: Option<PrivacyBlock>,
    #[serde(default)]
    pub audit: Option<AuditBlock>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Dataset {
    /// Generated graph; its `seed` is replaced by the cell seed.
    Synthetic(SyntheticSpec),
    Csv(CsvDataset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvDataset {
    pub features: PathBuf,
    pub labels: PathBuf,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn yes() -> bool {
    true
}

/// k-NN construction for CSV datasets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphBlock {
    pub k: usize,
    #[serde(default)]
    pub metric: Metric,
}

/// One column of the results table: a regime plus optional overrides of the
/// shared model block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub regime: Regime,
    pub architecture: Option<Architecture>,
    pub num_layers: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub learning_rate: Option<f64>,
    pub optimizer: Option<OptimizerKind>,
    pub epochs: Option<usize>,
    pub steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub clip_norm: Option<f64>,
    pub max_degree: Option<usize>,
    pub occurrence_bound: Option<usize>,
    pub eval_every: Option<usize>,
    pub select_checkpoint: Option<bool>,
}

impl Variant {
    pub fn new(name: impl Into<String>, regime: Regime) -> Self {
        Self {
            name: name.into(),
            regime,
            architecture: None,
            num_layers: None,
            hidden_dim: None,
            learning_rate: None,
            optimizer: None,
            epochs: None,
            steps: None,
            batch_size: None,
            clip_norm: None,
            max_degree: None,
            occurrence_bound: None,
            eval_every: None,
            select_checkpoint: None,
        }
    }

    pub fn train_config(&self, base: &TrainConfig, seed: u64) -> TrainConfig {
        let mut c = base.clone().with_regime(self.regime).with_seed(seed);
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(
            architecture,
            num_layers,
            hidden_dim,
            learning_rate,
            optimizer,
            epochs,
            steps,
            batch_size,
            clip_norm,
            max_degree,
            select_checkpoint
        );
        if self.occurrence_bound.is_some() {
            c.occurrence_bound = self.occurrence_bound;
        }
        if self.eval_every.is_some() {
            c.eval_every = self.eval_every;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyBlock {
    /// Each DP variant runs once per ε.
    pub epsilons: Vec<f64>,
    /// Defaults to 1/(10·n_train).
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub power_bound: PowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditBlock {
    #[serde(default = "default_shadows")]
    pub num_shadows: usize,
    #[serde(default = "default_coverage")]
    pub min_coverage: usize,
    #[serde(default = "default_fpr_grid")]
    pub fpr_grid: Vec<f64>,
    /// Variant names to audit; all variants when absent.
    #[serde(default)]
    pub variants: Option<Vec<String>>,
}

fn default_shadows() -> usize {
    ShadowConfig::default().num_shadows
}

fn default_coverage() -> usize {
    ShadowConfig::default().min_coverage
}

fn default_fpr_grid() -> Vec<f64> {
    FPR_GRID.to_vec()
}

impl AuditBlock {
    pub fn applies_to(&self, variant: &str) -> bool {
        self.variants
            .as_ref()
            .is_none_or(|v| v.iter().any(|n| n == variant))
    }

    pub fn audit_config(&self, power_bound: PowerBound, seed: u64) -> AuditConfig {
        AuditConfig {
            shadows: ShadowConfig {
                num_shadows: self.num_shadows,
                min_coverage: self.min_coverage,
                ..ShadowConfig::default()
            },
            fpr_grid: self.fpr_grid.clone(),
            power_bound,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub homophily: Vec<f64>,
}

impl Manifest {
    /// Reads and validates a manifest. Relative CSV paths are resolved
    /// against the manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut m: Manifest = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Dataset::Csv(csv) = &mut m.dataset {
            for p in [&mut csv.features, &mut csv.labels] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            bail!(
                "manifest schema_version {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
                self.schema_version
            );
        }
        if self.seeds.is_empty() {
            bail!("seeds must not be empty");
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            bail!("seeds must be distinct");
        }
        if self.variants.is_empty() {
            bail!("at least one variant is required");
        }
        let names: BTreeSet<&str> = self.variants.iter().map(|v| v.name.as_str()).collect();
        if names.len() != self.variants.len() {
            bail!("variant names must be distinct");
        }
        if let Some(bad) = self.variants.iter().find(|v| !is_identifier(&v.name)) {
            bail!("variant name {:?} must use only letters, digits, '-' and '_'", bad.name);
        }
        match (&self.dataset, &self.graph) {
            (Dataset::Csv(_), None) => bail!("a csv dataset needs a [graph] block (k, metric)"),
            (Dataset::Synthetic(_), Some(_)) => bail!("the [graph] block applies to csv datasets only"),
            _ => {}
        }
        if let Some(p) = &self.privacy {
            if p.epsilons.is_empty() {
                bail!("privacy.epsilons must not be empty");
            }
            if p.epsilons.iter().any(|&e| !(e > 0.0)) {
                bail!("every ε must be positive");
            }
            if let Some(d) = p.delta {
                if !(d > 0.0 && d < 1.0) {
                    bail!("δ = {d} outside (0, 1)");
                }
            }
        }
        if self.privacy.is_none() && self.variants.iter().any(|v| v.regime == Regime::Dp) {
            bail!("dp variants need a [privacy] block with an ε list");
        }
        if let Some(a) = &self.audit {
            if let Some(list) = &a.variants {
                if let Some(bad) = list.iter().find(|n| !names.contains(n.as_str())) {
                    bail!("audit lists unknown variant {bad:?}");
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.homophily.is_empty() {
                bail!("sweep.homophily must not be empty");
            }
        }
        self.split.validate()?;
        for v in &self.variants {
            v.train_config(&self.model, 0)
                .validate()
                .with_context(|| format!("variant {}", v.name))?;
        }
        Ok(())
    }

    /// SHA-256 of the manifest's canonical JSON form with the output
    /// directory blanked, so relocating results keeps the hash.
    pub fn hash(&self) -> String {
        let mut m = self.clone();
        m.output_dir = PathBuf::new();
        let canonical = serde_json::to_string(&m).expect("manifest serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn variant(&self, name: &str) -> Option<&Variant> {
        self.variants.iter().find(|v| v.name == name)
    }

    pub fn power_bound(&self) -> PowerBound {
        self.privacy.as_ref().map(|p| p.power_bound).unwrap_or_default()
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        schema_version = 1
        seeds = [0, 1]

        [dataset]
        source = "synthetic"
        target_homophily = 0.8

        [[variants]]
        name = "non_dp"
        regime = "non_dp"

        [[variants]]
        name = "dp"
        regime = "dp"
        steps = 50

        [privacy]
        epsilons = [5.0]
    "#;

    #[test]
    fn minimal_manifest_parses() {
        let m: Manifest = toml::from_str(MINIMAL).unwrap();
        m.validate().unwrap();
        let Dataset::Synthetic(spec) = &m.dataset else { panic!() };
        assert_eq!(spec.target_homophily, 0.8);
        assert_eq!(spec.num_nodes, 1000);
        let dp = m.variant("dp").unwrap().train_config(&m.model, 3);
        assert_eq!(dp.steps, 50);
        assert!(dp.noise && dp.clipping);
        assert_eq!(dp.seed, 3);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let mut a: Manifest = toml::from_str(MINIMAL).unwrap();
        let h = a.hash();
        a.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), h);
        a.seeds.push(9);
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn dp_without_privacy_block_is_rejected() {
        let text = MINIMAL.replace("[privacy]\n        epsilons = [5.0]", "");
        let m: Manifest = toml::from_str(&text).unwrap();
        assert!(m.validate().is_err());
    }

    #[test]
    fn empty_lists_are_rejected() {
        let mut m: Manifest = toml::from_str(MINIMAL).unwrap();
        m.seeds.clear();
        assert!(m.validate().is_err());
        let mut m: Manifest = toml::from_str(MINIMAL).unwrap();
        m.privacy.as_mut().unwrap().epsilons.clear();
        assert!(m.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("seeds = [0, 1]", "seeds = [0, 1]\nsedes = [3]");
        assert!(toml::from_str::<Manifest>(&text).is_err());
    }
}
