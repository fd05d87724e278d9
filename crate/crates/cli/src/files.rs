//! Atomic file output and the CSV layouts used by the subcommands.

use std::io::Write;
use std::path::Path;

use mpsa::{FitTrace, Matrix};
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// Name of the column holding 1-based class labels.
pub const LABEL_COLUMN: &str = "label";

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Data(format!("CSV encoding failed: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    w.into_inner().map_err(|e| CliError::Data(format!("CSV encoding failed: {e}")))
}

/// Writes a CSV file from a header and stringified rows.
pub fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> CliResult<()> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

/// Numeric data with optional 0-based labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    /// Number of distinct labels, when labels are present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.iter().max().map_or(0, |m| m + 1))
    }
}

fn location(path: &Path, line: u64, column: usize, name: &str) -> String {
    format!("{}: line {line}, column {column} ({name})", path.display())
}

/// Reads a headed CSV of numbers. A column named `label` holds positive
/// integer class labels, stored 0-based; every other column is a feature.
pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_col = header.iter().position(|h| h == LABEL_COLUMN);
    let p = header.len() - usize::from(label_col.is_some());
    if p == 0 {
        return Err(CliError::data(format!("{}: no feature columns", path.display())));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| match e.position() {
            Some(pos) => CliError::data(format!("{}: line {}: {e}", path.display(), pos.line())),
            None => CliError::io(path, e),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, field) in record.iter().enumerate() {
            if Some(j) == label_col {
                let l: usize = field
                    .parse()
                    .ok()
                    .filter(|&l| l >= 1)
                    .ok_or_else(|| {
                        CliError::data(format!(
                            "{}: expected a positive integer label, got {field:?}",
                            location(path, line, j + 1, &header[j])
                        ))
                    })?;
                labels.push(l - 1);
            } else {
                let v: f64 = field.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                    CliError::data(format!(
                        "{}: expected a finite number, got {field:?}",
                        location(path, line, j + 1, &header[j])
                    ))
                })?;
                values.push(v);
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }
    let x = Matrix::from_row_major(n, p, values).map_err(|e| CliError::data(e.to_string()))?;
    Ok(Dataset {
        x,
        labels: label_col.map(|_| labels),
    })
}

/// Writes `x1..xp[,label]` with 1-based labels.
pub fn write_dataset(path: &Path, x: &Matrix, labels: Option<&[usize]>) -> CliResult<()> {
    let mut header: Vec<String> = (1..=x.cols()).map(|j| format!("x{j}")).collect();
    if labels.is_some() {
        header.push(LABEL_COLUMN.to_string());
    }
    let rows = x.iter_rows().enumerate().map(|(i, r)| {
        let mut row: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            row.push((l[i] + 1).to_string());
        }
        row
    });
    write_csv(path, &header, rows)
}

/// Reads the `label` column of a CSV as 0-based labels.
pub fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let col = reader
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| CliError::data(format!("{}: no {LABEL_COLUMN:?} column", path.display())))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::io(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = record.get(col).unwrap_or("");
        let l: usize = field.parse().ok().filter(|&l| l >= 1).ok_or_else(|| {
            CliError::data(format!(
                "{}: expected a positive integer label, got {field:?}",
                location(path, line, col + 1, LABEL_COLUMN)
            ))
        })?;
        out.push(l - 1);
    }
    Ok(out)
}

/// Writes a single `label` column with 1-based labels.
pub fn write_labels(path: &Path, labels: &[usize]) -> CliResult<()> {
    write_csv(path, &[LABEL_COLUMN.to_string()], labels.iter().map(|l| vec![(l + 1).to_string()]))
}

/// One row per iteration: `iteration,penalized_ll,kappa,compositions`, the
/// compositions joined by `;`.
pub fn write_trace(path: &Path, trace: &FitTrace) -> CliResult<()> {
    let header = ["iteration", "penalized_ll", "kappa", "compositions"].map(String::from);
    let rows = trace.records.iter().map(|r| {
        vec![
            r.iteration.to_string(),
            r.penalized_loglik.to_string(),
            r.kappa.to_string(),
            r.compositions.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(";"),
        ]
    });
    write_csv(path, &header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let x = Matrix::from_rows(&[vec![0.1, -2.5], vec![1e-300, 3.0]]).unwrap();
        write_dataset(&path, &x, Some(&[1, 0])).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x1,x2,label\n0.1,-2.5,2\n"));
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.x, x);
        assert_eq!(back.labels, Some(vec![1, 0]));
        assert_eq!(back.n_classes(), Some(2));
    }

    #[test]
    fn bad_cells_report_their_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,b\n1,2\n3,oops\n").unwrap();
        let err = read_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("line 3, column 2 (b)"), "{err}");
        std::fs::write(&path, "a,label\n1,0\n").unwrap();
        assert!(read_dataset(&path).is_err());
        std::fs::write(&path, "a,b\n1,2\n3\n").unwrap();
        assert!(read_dataset(&path).unwrap_err().to_string().contains("line 3"));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
