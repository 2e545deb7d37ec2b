//! Renders a results directory into plain-text and CSV tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;

use crate::aggregate::{aggregate, write_aggregate_csv, AggregateRow};
use crate::output::{opt_num, percent_pm, write_atomic};
use crate::run::{CellRecord, RunInfo, CELLS_DIR, RUN_FILE};

pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_ACCURACY: &str = "report_accuracy.csv";
pub const REPORT_MIA: &str = "report_mia.csv";

pub const MIA_HEADER: &str =
    "cell_id,variant,epsilon,delta,seed,n_shadows,auc,fpr,tpr,supremum_power,half_width,holds";

#[derive(Debug, Clone, Default)]
pub struct ReportSummary {
    pub cells: Vec<CellRecord>,
    /// Cell files that could not be read or parsed, with the reason.
    pub corrupt: Vec<(String, String)>,
    /// Cells listed in `run.json` without a cell file.
    pub missing: Vec<String>,
    pub warnings: Vec<String>,
}

fn load_cells(dir: &Path, summary: &mut ReportSummary) -> Result<()> {
    let cells_dir = dir.join(CELLS_DIR);
    let mut paths = Vec::new();
    if cells_dir.is_dir() {
        for entry in std::fs::read_dir(&cells_dir)? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "json") {
                paths.push(p);
            }
        }
    }
    paths.sort();
    for p in paths {
        let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let parsed = std::fs::read_to_string(&p)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<CellRecord>(&t).map_err(|e| e.to_string()));
        match parsed {
            Ok(c) => summary.cells.push(c),
            Err(e) => summary.corrupt.push((name, e)),
        }
    }

    if let Ok(text) = std::fs::read_to_string(dir.join(RUN_FILE)) {
        match serde_json::from_str::<RunInfo>(&text) {
            Ok(info) => {
                // keep the run's cell order
                let order = |c: &CellRecord| info.cells.iter().position(|id| *id == c.cell_id).unwrap_or(usize::MAX);
                summary.cells.sort_by_key(order);
                let present: BTreeSet<&str> = summary.cells.iter().map(|c| c.cell_id.as_str()).collect();
                let corrupt: BTreeSet<String> = summary.corrupt.iter().map(|(n, _)| n.clone()).collect();
                summary.missing = info
                    .cells
                    .iter()
                    .filter(|id| !present.contains(id.as_str()) && !corrupt.contains(&format!("{id}.json")))
                    .cloned()
                    .collect();
            }
            Err(e) => summary.corrupt.push((RUN_FILE.to_string(), e.to_string())),
        }
    }
    Ok(())
}

fn shared_hash(cells: &[CellRecord]) -> String {
    let hashes: BTreeSet<&str> = cells.iter().map(|c| c.manifest_hash.as_str()).collect();
    match hashes.len() {
        1 => hashes.into_iter().next().unwrap_or_default().to_string(),
        0 => String::new(),
        _ => "mixed".into(),
    }
}

pub fn mia_csv(cells: &[CellRecord]) -> String {
    let mut out = format!("{MIA_HEADER}\n");
    for c in cells {
        let Some(a) = &c.audit else { continue };
        for (key, tpr) in &a.tpr {
            let check = a.bound_check.iter().find(|b| format!("{}", b.fpr) == *key);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                c.cell_id,
                c.variant,
                opt_num(c.epsilon),
                opt_num(a.delta),
                c.seed,
                a.n_shadows,
                a.auc,
                key,
                tpr,
                opt_num(check.map(|b| b.supremum_power)),
                opt_num(check.map(|b| b.half_width)),
                check.map(|b| b.holds.to_string()).unwrap_or_default()
            );
        }
    }
    out
}

fn column_label(r: &AggregateRow) -> String {
    match r.epsilon {
        Some(e) => format!("{} ε={e}", r.variant),
        None => r.variant.clone(),
    }
}

fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].chars().count())
                .chain([header[i].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

/// Test accuracy (%) with homophily as rows and variant (and ε) as columns.
fn accuracy_table(rows: &[AggregateRow]) -> String {
    let mut columns: Vec<String> = Vec::new();
    let mut hs: Vec<Option<f64>> = Vec::new();
    for r in rows {
        let c = column_label(r);
        if !columns.contains(&c) {
            columns.push(c);
        }
        if !hs.contains(&r.homophily) {
            hs.push(r.homophily);
        }
    }
    let mut header = vec!["h".to_string()];
    header.extend(columns.iter().cloned());
    let body: Vec<Vec<String>> = hs
        .iter()
        .map(|h| {
            let mut line = vec![h.map_or_else(|| "-".to_string(), |h| h.to_string())];
            for c in &columns {
                let cell = rows
                    .iter()
                    .find(|r| r.homophily == *h && column_label(r) == *c)
                    .map(|r| match (r.test_acc_mean, r.test_acc_std) {
                        (Some(m), Some(s)) if r.n_failed == 0 => percent_pm(m, s),
                        (Some(m), Some(s)) => format!("{} ({} failed)", percent_pm(m, s), r.n_failed),
                        _ => "failed".into(),
                    })
                    .unwrap_or_default();
                line.push(cell);
            }
            line
        })
        .collect();
    render_table(&header, &body)
}

fn mia_table(cells: &[CellRecord]) -> Option<String> {
    let audited: Vec<&CellRecord> = cells.iter().filter(|c| c.audit.is_some()).collect();
    let first = audited.first()?.audit.as_ref()?;
    let keys: Vec<String> = first.tpr.keys().cloned().collect();
    let mut header = vec!["cell".to_string(), "AUC".to_string()];
    for k in &keys {
        header.push(format!("TPR@{k}"));
        header.push(format!("P@{k}"));
    }
    header.push("bound".into());
    let body = audited
        .iter()
        .map(|c| {
            let a = c.audit.as_ref().expect("filtered");
            let mut line = vec![c.cell_id.clone(), format!("{:.4}", a.auc)];
            for k in &keys {
                line.push(a.tpr.get(k).map(|t| format!("{t:.4}")).unwrap_or_default());
                line.push(
                    a.supremum_power
                        .as_ref()
                        .and_then(|p| p.get(k))
                        .map(|p| format!("{p:.4}"))
                        .unwrap_or_default(),
                );
            }
            line.push(match (a.bound_check.is_empty(), a.sound()) {
                (true, _) => String::new(),
                (false, true) => "holds".into(),
                (false, false) => "VIOLATED".into(),
            });
            line
        })
        .collect::<Vec<_>>();
    Some(render_table(&header, &body))
}

/// Reads every cell file under `dir` and writes `report.txt`,
/// `report_accuracy.csv` and `report_mia.csv` next to them. Unreadable
/// cells are listed and skipped.
pub fn report(dir: &Path) -> Result<ReportSummary> {
    let mut summary = ReportSummary::default();
    load_cells(dir, &mut summary)?;
    if summary.cells.is_empty() {
        let w = format!("no cell results found under {}", dir.display());
        log::warn!("{w}");
        summary.warnings.push(w);
    }
    let rows = aggregate(&summary.cells, &shared_hash(&summary.cells));

    let mut text = String::new();
    for w in &summary.warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    if !rows.is_empty() {
        let _ = writeln!(text, "Test accuracy (%), mean ± std over seeds\n");
        text.push_str(&accuracy_table(&rows));
    }
    if let Some(t) = mia_table(&summary.cells) {
        let _ = writeln!(text, "\nMembership inference (P: supremum power of the DP bound)\n");
        text.push_str(&t);
    }
    let failed: Vec<&CellRecord> = summary.cells.iter().filter(|c| !c.ok()).collect();
    if !failed.is_empty() {
        let _ = writeln!(text, "\nFailed cells");
        for c in failed {
            let _ = writeln!(text, "  {}: {}", c.cell_id, c.error.as_deref().unwrap_or("unknown error"));
        }
    }
    if !summary.corrupt.is_empty() {
        let _ = writeln!(text, "\nUnreadable files");
        for (n, e) in &summary.corrupt {
            let _ = writeln!(text, "  {n}: {e}");
        }
    }
    if !summary.missing.is_empty() {
        let _ = writeln!(text, "\nMissing cell files");
        for n in &summary.missing {
            let _ = writeln!(text, "  {n}");
        }
    }

    write_atomic(&dir.join(REPORT_TEXT), text.as_bytes())?;
    write_atomic(&dir.join(REPORT_ACCURACY), write_aggregate_csv(&rows).as_bytes())?;
    write_atomic(&dir.join(REPORT_MIA), mia_csv(&summary.cells).as_bytes())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dir_gives_warning_and_headers() {
        let dir = tempfile::tempdir().unwrap();
        let s = report(dir.path()).unwrap();
        assert!(s.cells.is_empty());
        assert_eq!(s.warnings.len(), 1);
        let acc = std::fs::read_to_string(dir.path().join(REPORT_ACCURACY)).unwrap();
        assert_eq!(acc.lines().count(), 1);
        let mia = std::fs::read_to_string(dir.path().join(REPORT_MIA)).unwrap();
        assert_eq!(mia.trim_end(), MIA_HEADER);
        let txt = std::fs::read_to_string(dir.path().join(REPORT_TEXT)).unwrap();
        assert!(txt.starts_with("warning: no cell results"));
    }

    #[test]
    fn corrupt_files_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join(CELLS_DIR)).unwrap();
        std::fs::write(dir.path().join(CELLS_DIR).join("bad.json"), "{not json").unwrap();
        let s = report(dir.path()).unwrap();
        assert_eq!(s.corrupt.len(), 1);
        assert_eq!(s.corrupt[0].0, "bad.json");
        let txt = std::fs::read_to_string(dir.path().join(REPORT_TEXT)).unwrap();
        assert!(txt.contains("Unreadable files"));
    }

    #[test]
    fn table_alignment() {
        let t = render_table(
            &["a".into(), "bb".into()],
            &[vec!["xyz".into(), "1".into()]],
        );
        assert_eq!(t, "a    bb\n-------\nxyz  1\n");
    }
}
