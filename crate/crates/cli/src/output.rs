//! File output helpers: atomic writes and content hashes.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use dpgnn_core::graph::PopulationGraph;

/// Schema version stamped on every JSON document the CLI writes.
pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

/// Writes to a temporary file in the target directory, then renames it over
/// `path`, so readers never see a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// SHA-256 over the graph's features, labels, class count, edges and masks.
pub fn graph_hash(graph: &PopulationGraph) -> String {
    let mut h = Sha256::new();
    h.update((graph.num_nodes() as u64).to_le_bytes());
    h.update((graph.feat_dim() as u64).to_le_bytes());
    h.update((graph.num_classes() as u64).to_le_bytes());
    for x in graph.features().data() {
        h.update(x.to_le_bytes());
    }
    for &y in graph.labels() {
        h.update((y as u64).to_le_bytes());
    }
    for (u, v) in graph.edges() {
        h.update((u as u64).to_le_bytes());
        h.update((v as u64).to_le_bytes());
    }
    let m = graph.masks();
    for v in 0..graph.num_nodes() {
        let code = if m.train[v] {
            1u8
        } else if m.val[v] {
            2
        } else if m.test[v] {
            3
        } else {
            0
        };
        h.update([code]);
    }
    hex::encode(h.finalize())
}

/// `"xx.xx ± yy.yy"` in percent.
pub fn percent_pm(mean: f64, std: f64) -> String {
    format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * std)
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(percent_pm(0.661, 0.01362), "66.10 ± 1.36");
        assert_eq!(opt_num(None), "");
        assert_eq!(opt_num(Some(5.0)), "5");
    }
}
