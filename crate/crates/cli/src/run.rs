//! Expands a manifest into cells, runs them and writes the result bundle.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dpgnn_core::dp::recommend_delta;
use dpgnn_core::gnn::{evaluate, train, LogRecord, Regime, TrainConfig};
use dpgnn_core::graph::{
    assign_splits, build_knn_graph, edge_homophily, generate_synthetic, load_csv, CsvOptions, PopulationGraph,
    SplitSpec,
};
use dpgnn_core::mia::{audit, AttackReport};

use crate::aggregate::{aggregate, spearman_trends, write_aggregate_csv, write_sweep_csv, write_trend_csv, AggregateRow, TrendRow};
use crate::manifest::{Dataset, Manifest};
use crate::output::{graph_hash, write_atomic, write_json, write_jsonl, OUTPUT_SCHEMA_VERSION};

pub const CELLS_DIR: &str = "cells";
pub const LOGS_DIR: &str = "logs";
pub const ROC_DIR: &str = "roc";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const TREND_FILE: &str = "trend.csv";
pub const RUN_FILE: &str = "run.json";

/// One (homophily, variant, ε, seed) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    pub homophily: Option<f64>,
    pub variant: String,
    pub regime: Regime,
    pub epsilon: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// Contents of `cells/<id>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub schema_version: u32,
    pub manifest_hash: String,
    pub cell_id: String,
    pub homophily: Option<f64>,
    pub variant: String,
    pub regime: Regime,
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub status: CellStatus,
    pub error: Option<String>,
    /// SHA-256 of the split graph the cell trained on.
    pub input_hash: Option<String>,
    pub num_train: Option<usize>,
    pub num_edges: Option<usize>,
    pub edge_homophily: Option<f64>,
    pub delta: Option<f64>,
    pub noise_multiplier: Option<f64>,
    pub epsilon_spent: Option<f64>,
    pub selected_step: Option<usize>,
    pub train_acc: Option<f64>,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub audit: Option<AttackReport>,
}

impl CellRecord {
    fn new(cell: &Cell, manifest_hash: &str) -> Self {
        Self {
            schema_version: OUTPUT_SCHEMA_VERSION,
            manifest_hash: manifest_hash.to_string(),
            cell_id: cell.id.clone(),
            homophily: cell.homophily,
            variant: cell.variant.clone(),
            regime: cell.regime,
            epsilon: cell.epsilon,
            seed: cell.seed,
            status: CellStatus::Failed,
            error: None,
            input_hash: None,
            num_train: None,
            num_edges: None,
            edge_homophily: None,
            delta: None,
            noise_multiplier: None,
            epsilon_spent: None,
            selected_step: None,
            train_acc: None,
            val_acc: None,
            test_acc: None,
            audit: None,
        }
    }

    pub fn ok(&self) -> bool {
        self.status == CellStatus::Ok
    }

    /// False when an audit bound check failed.
    pub fn sound(&self) -> bool {
        self.audit.as_ref().is_none_or(AttackReport::sound)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunInfo {
    pub schema_version: u32,
    pub name: Option<String>,
    pub manifest_hash: String,
    pub cells: Vec<String>,
    pub n_failed: usize,
    pub n_unsound: usize,
    pub elapsed_secs: f64,
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest_hash: String,
    pub out_dir: PathBuf,
    pub cells: Vec<CellRecord>,
    pub aggregate: Vec<AggregateRow>,
    pub trends: Vec<TrendRow>,
}

impl RunSummary {
    pub fn n_failed(&self) -> usize {
        self.cells.iter().filter(|c| !c.ok()).count()
    }

    pub fn n_unsound(&self) -> usize {
        self.cells.iter().filter(|c| !c.sound()).count()
    }

    /// 0 when every cell succeeded and every audit bound held, 1 on cell
    /// failures, 3 on bound violations.
    pub fn exit_code(&self) -> i32 {
        if self.n_failed() > 0 {
            1
        } else if self.n_unsound() > 0 {
            3
        } else {
            0
        }
    }
}

fn fmt_id_num(x: f64) -> String {
    format!("{x}").replace('.', "p")
}

/// Cells in output order: homophily, then variant, then ε, then seed.
pub fn expand_cells(manifest: &Manifest) -> Vec<Cell> {
    let hs: Vec<Option<f64>> = match (&manifest.sweep, &manifest.dataset) {
        (Some(s), _) => s.homophily.iter().copied().map(Some).collect(),
        (None, Dataset::Synthetic(spec)) => vec![Some(spec.target_homophily)],
        (None, Dataset::Csv(_)) => vec![None],
    };
    let mut cells = Vec::new();
    for &h in &hs {
        for v in &manifest.variants {
            let eps: Vec<Option<f64>> = match (v.regime, &manifest.privacy) {
                (Regime::Dp, Some(p)) => p.epsilons.iter().copied().map(Some).collect(),
                _ => vec![None],
            };
            for &e in &eps {
                for &seed in &manifest.seeds {
                    let mut id = String::new();
                    if let (Some(h), Some(_)) = (h, &manifest.sweep) {
                        id.push_str(&format!("h{}_", fmt_id_num(h)));
                    }
                    id.push_str(&v.name);
                    if let Some(e) = e {
                        id.push_str(&format!("_eps{}", fmt_id_num(e)));
                    }
                    id.push_str(&format!("_s{seed}"));
                    cells.push(Cell {
                        id,
                        homophily: h,
                        variant: v.name.clone(),
                        regime: v.regime,
                        epsilon: e,
                        seed,
                    });
                }
            }
        }
    }
    cells
}

/// Edgeless-then-k-NN graph for CSV datasets; read once per run.
fn load_csv_graph(manifest: &Manifest) -> Result<Option<PopulationGraph>> {
    let (Dataset::Csv(csv), Some(g)) = (&manifest.dataset, &manifest.graph) else {
        return Ok(None);
    };
    let graph = load_csv(
        &csv.features,
        &csv.labels,
        CsvOptions {
            standardize: csv.standardize,
            has_header: csv.has_header,
        },
    )?;
    Ok(Some(build_knn_graph(graph, g.k, g.metric)?))
}

/// The split graph a cell trains on. The cell seed drives the synthetic
/// generator and the split.
fn cell_graph(manifest: &Manifest, csv_graph: Option<&PopulationGraph>, cell: &Cell) -> Result<PopulationGraph> {
    let base = match (&manifest.dataset, csv_graph) {
        (Dataset::Synthetic(spec), _) => {
            let mut spec = spec.clone();
            spec.seed = cell.seed;
            if let Some(h) = cell.homophily {
                spec.target_homophily = h;
            }
            let g = generate_synthetic(&spec)?;
            if let Some(w) = &g.provenance.warning {
                log::warn!("{}: {w}", cell.id);
            }
            g.graph
        }
        (Dataset::Csv(_), Some(g)) => g.clone(),
        (Dataset::Csv(_), None) => bail!("csv graph was not loaded"),
    };
    let split = SplitSpec {
        seed: cell.seed,
        ..manifest.split
    };
    Ok(assign_splits(base, &split)?)
}

struct CellOutput {
    record: CellRecord,
    log: Vec<LogRecord>,
}

fn run_cell(manifest: &Manifest, hash: &str, csv_graph: Option<&PopulationGraph>, cell: &Cell) -> CellOutput {
    let mut record = CellRecord::new(cell, hash);
    let mut log = Vec::new();
    let t0 = Instant::now();
    let result = (|| -> Result<()> {
        let graph = cell_graph(manifest, csv_graph, cell)?;
        record.input_hash = Some(graph_hash(&graph));
        record.num_edges = Some(graph.num_edges());
        record.edge_homophily = edge_homophily(&graph).ok();
        let n_train = graph.train_nodes().len();
        record.num_train = Some(n_train);

        let variant = manifest
            .variant(&cell.variant)
            .context("cell names an unknown variant")?;
        let config: TrainConfig = variant.train_config(&manifest.model, cell.seed);
        let spec = match cell.epsilon {
            Some(eps) => {
                let privacy = manifest.privacy.as_ref().context("dp cell without a privacy block")?;
                let delta = privacy.delta.unwrap_or_else(|| recommend_delta(n_train));
                record.delta = Some(delta);
                Some(config.privacy_spec(n_train, eps, delta))
            }
            None => None,
        };
        let outcome = train(&graph, &config, spec.as_ref())?;
        log = outcome.log;
        record.noise_multiplier = outcome.privacy.as_ref().and_then(|p| p.noise_multiplier);
        record.epsilon_spent = outcome.epsilon_spent;
        record.selected_step = Some(outcome.selected_step);
        let masks = graph.masks();
        record.train_acc = Some(evaluate(&graph, &outcome.params, &masks.train)?);
        record.val_acc = evaluate(&graph, &outcome.params, &masks.val).ok();
        record.test_acc = Some(evaluate(&graph, &outcome.params, &masks.test)?);

        if let Some(a) = manifest.audit.as_ref().filter(|a| a.applies_to(&cell.variant)) {
            let cfg = a.audit_config(manifest.power_bound(), cell.seed);
            let label = match cell.epsilon {
                Some(e) => format!("{} (ε={e})", cell.variant),
                None => cell.variant.clone(),
            };
            let report = audit(&graph, &outcome.params, &config, outcome.privacy.as_ref(), &cfg, &label)?;
            record.audit = Some(report);
        }
        Ok(())
    })();
    match result {
        Ok(()) => {
            record.status = CellStatus::Ok;
            log::info!(
                "{}: test acc {:.4} ({:.1}s)",
                cell.id,
                record.test_acc.unwrap_or(f64::NAN),
                t0.elapsed().as_secs_f64()
            );
        }
        Err(e) => {
            log::error!("{}: {e:#}", cell.id);
            record.error = Some(format!("{e:#}"));
        }
    }
    CellOutput { record, log }
}

/// Runs every cell of `manifest` into `out_dir`. Cell failures are recorded
/// and do not stop the run; only setup and I/O problems return an error.
pub fn run(manifest: &Manifest, out_dir: &Path) -> Result<RunSummary> {
    manifest.validate()?;
    let t0 = Instant::now();
    let hash = manifest.hash();
    let csv_graph = load_csv_graph(manifest)?;
    let cells = expand_cells(manifest);
    log::info!("running {} cells into {}", cells.len(), out_dir.display());

    std::fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("manifest.json"), manifest)?;

    let outputs: Vec<CellOutput> = cells
        .par_iter()
        .map(|c| run_cell(manifest, &hash, csv_graph.as_ref(), c))
        .collect();

    let mut records = Vec::with_capacity(outputs.len());
    for out in outputs {
        let id = &out.record.cell_id;
        write_json(&out_dir.join(CELLS_DIR).join(format!("{id}.json")), &out.record)?;
        write_jsonl(&out_dir.join(LOGS_DIR).join(format!("{id}.jsonl")), &out.log)?;
        if let Some(roc) = out.record.audit.as_ref().and_then(|a| a.roc.as_ref()) {
            write_atomic(&out_dir.join(ROC_DIR).join(format!("{id}.csv")), roc.to_csv().as_bytes())?;
        }
        records.push(out.record);
    }

    let rows = aggregate(&records, &hash);
    write_atomic(&out_dir.join(AGGREGATE_FILE), write_aggregate_csv(&rows).as_bytes())?;
    let trends = if manifest.sweep.is_some() {
        write_atomic(&out_dir.join(SWEEP_FILE), write_sweep_csv(&rows).as_bytes())?;
        let trends = spearman_trends(&records);
        write_atomic(&out_dir.join(TREND_FILE), write_trend_csv(&trends).as_bytes())?;
        trends
    } else {
        Vec::new()
    };

    let summary = RunSummary {
        manifest_hash: hash.clone(),
        out_dir: out_dir.to_path_buf(),
        cells: records,
        aggregate: rows,
        trends,
    };
    let info = RunInfo {
        schema_version: OUTPUT_SCHEMA_VERSION,
        name: manifest.name.clone(),
        manifest_hash: hash,
        cells: summary.cells.iter().map(|c| c.cell_id.clone()).collect(),
        n_failed: summary.n_failed(),
        n_unsound: summary.n_unsound(),
        elapsed_secs: t0.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    write_json(&out_dir.join(RUN_FILE), &info)?;
    crate::report::report(out_dir)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{SweepBlock, Variant};
    use dpgnn_core::graph::SyntheticSpec;

    fn manifest() -> Manifest {
        let text = r#"
            schema_version = 1
            seeds = [0, 1]
            [dataset]
            source = "synthetic"
            num_nodes = 60
            [model]
            epochs = 5
            steps = 5
            batch_size = 8
            [[variants]]
            name = "non_dp"
            regime = "non_dp"
            [[variants]]
            name = "dp"
            regime = "dp"
            [privacy]
            epsilons = [5.0, 10.0]
        "#;
        toml::from_str(text).unwrap()
    }

    #[test]
    fn cells_expand_in_order() {
        let ids: Vec<String> = expand_cells(&manifest()).into_iter().map(|c| c.id).collect();
        assert_eq!(
            ids,
            ["non_dp_s0", "non_dp_s1", "dp_eps5_s0", "dp_eps5_s1", "dp_eps10_s0", "dp_eps10_s1"]
        );
        let mut m = manifest();
        m.sweep = Some(SweepBlock {
            homophily: vec![0.5, 0.9],
        });
        let cells = expand_cells(&m);
        assert_eq!(cells.len(), 12);
        assert_eq!(cells[0].id, "h0p5_non_dp_s0");
        assert_eq!(cells[11].homophily, Some(0.9));
    }

    #[test]
    fn failing_cells_are_isolated() {
        let mut m = manifest();
        m.dataset = Dataset::Synthetic(SyntheticSpec {
            num_nodes: 60,
            ..SyntheticSpec::default()
        });
        // a batch larger than the training set fails the dp cells only
        m.privacy.as_mut().unwrap().epsilons = vec![0.5];
        m.variants[1].batch_size = Some(1000);
        m.variants.push(Variant::new("sub", Regime::Subgraphing));
        let dir = tempfile::tempdir().unwrap();
        let s = run(&m, dir.path()).unwrap();
        assert_eq!(s.cells.len(), 6);
        assert_eq!(s.n_failed(), 2);
        assert_eq!(s.exit_code(), 1);
        assert!(s.cells.iter().filter(|c| c.regime != Regime::Dp).all(CellRecord::ok));
        assert!(dir.path().join("cells/dp_eps0p5_s1.json").exists());
        let agg = std::fs::read_to_string(dir.path().join(AGGREGATE_FILE)).unwrap();
        assert_eq!(agg.lines().count(), 4);
    }
}
