use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::PopulationGraph;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    /// Rescale each feature column to zero mean and unit (population) variance.
    pub standardize: bool,
    /// Skip the first row of the features file.
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            has_header: false,
        }
    }
}

/// Reads a features CSV (one node per row) and a labels CSV (one integer per
/// row) into an edgeless graph. The class count is inferred as `max label + 1`.
pub fn load_csv(
    features_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    options: CsvOptions,
) -> Result<PopulationGraph> {
    let features = read_features(features_path.as_ref(), options.has_header)?;
    let labels = read_labels(labels_path.as_ref())?;
    from_parts(features, labels, options.standardize)
}

pub(crate) fn from_parts(
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    standardize: bool,
) -> Result<PopulationGraph> {
    if rows.len() != labels.len() {
        return Err(Error::Ingestion(format!(
            "features have {} rows but labels have {}",
            rows.len(),
            labels.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::Ingestion("no rows".into()));
    }
    let mut features = Matrix::from_rows(&rows)?;
    if standardize {
        standardize_columns(&mut features);
    }
    let num_classes = labels.iter().max().map_or(1, |m| m + 1);
    PopulationGraph::new(features, labels, num_classes)
}

fn reader(path: &Path, has_header: bool) -> Result<::csv::Reader<std::fs::File>> {
    ::csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))
}

fn read_features(path: &Path, has_header: bool) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let header_offset = usize::from(has_header);
    for (i, record) in reader(path, has_header)?.records().enumerate() {
        let row_no = i + 1 + header_offset;
        let record = record.map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Parse {
                        row: row_no,
                        column: j + 1,
                        message: format!("{cell:?} is not a finite number"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(Error::Ingestion(format!(
                    "row {row_no} has {} columns, expected {first}",
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (i, record) in reader(path, false)?.records().enumerate() {
        let record = record.map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
        let cell = record.get(0).unwrap_or("");
        let y = cell.parse::<usize>().map_err(|_| Error::Parse {
            row: i + 1,
            column: 1,
            message: format!("{cell:?} is not a non-negative integer label"),
        })?;
        labels.push(y);
    }
    Ok(labels)
}

/// Zero mean, unit population variance per column; constant columns become zero.
pub fn standardize_columns(m: &mut Matrix) {
    let n = m.rows() as f64;
    for c in 0..m.cols() {
        let mean = (0..m.rows()).map(|r| m.get(r, c)).sum::<f64>() / n;
        let var = (0..m.rows()).map(|r| (m.get(r, c) - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        for r in 0..m.rows() {
            let z = if std > 0.0 { (m.get(r, c) - mean) / std } else { 0.0 };
            m.set(r, c, z);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_edgeless_graph() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", "0,0\n1,0\n2,0\n");
        let l = write(&dir, "l.csv", "0\n0\n1\n");
        let opts = CsvOptions {
            standardize: false,
            has_header: false,
        };
        let g = load_csv(&f, &l, opts).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.feat_dim(), 2);
        assert_eq!(g.num_edges(), 0);
        assert_eq!(g.features().row(2), &[2.0, 0.0]);
    }

    #[test]
    fn standardizes_with_population_std() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", "x,y\n1,5\n2,5\n3,5\n");
        let l = write(&dir, "l.csv", "0\n1\n0\n");
        let opts = CsvOptions {
            standardize: true,
            has_header: true,
        };
        let g = load_csv(&f, &l, opts).unwrap();
        // mean 2, population std sqrt(2/3)
        let expected = [-1.224_744_871, 0.0, 1.224_744_871];
        for (r, e) in expected.iter().enumerate() {
            assert!((g.features().get(r, 0) - e).abs() < 1e-4);
            assert_eq!(g.features().get(r, 1), 0.0, "constant column stays zero");
        }
    }

    #[test]
    fn infers_class_count_from_max_label() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", "1\n2\n");
        let l = write(&dir, "l.csv", "5\n0\n");
        let g = load_csv(&f, &l, CsvOptions::default()).unwrap();
        assert_eq!(g.num_classes(), 6);
    }

    #[test]
    fn row_mismatch_is_ingestion_error() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", "1\n2\n3\n");
        let l = write(&dir, "l.csv", "0\n1\n");
        assert!(matches!(
            load_csv(&f, &l, CsvOptions::default()),
            Err(Error::Ingestion(_))
        ));
    }

    #[test]
    fn bad_cell_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", "1,2\n3,abc\n");
        let l = write(&dir, "l.csv", "0\n1\n");
        match load_csv(&f, &l, CsvOptions::default()) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
