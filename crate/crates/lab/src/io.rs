//! CSV reading and writing for datasets, correlation matrices, ROC curves and
//! benchmark results.
//!
//! Dataset files are UTF-8, comma-delimited, with one header row. An empty
//! field is a missing value. Numbers are written with Rust's shortest
//! round-trip formatting, so output is byte-stable for a given input.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use qbplab_core::cv::{BenchmarkResult, JobFailure, MethodSummary};
use qbplab_core::data::MISSING;
use qbplab_core::metrics::RocCurve;
use qbplab_core::simgen::CorrelationMatrix;
use qbplab_core::Dataset;

/// Label column written by [`write_csv`].
pub const DEFAULT_LABEL: &str = "y";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },

    #[error("{origin}: {source}")]
    Csv { origin: String, source: csv::Error },

    /// `row` counts data rows from 1; the header is row 0.
    #[error("{origin}: row {row}, column '{column}': {message}")]
    Field {
        origin: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{origin}: {message}")]
    Format { origin: String, message: String },

    #[error("{origin}: {source}")]
    Core { origin: String, source: qbplab_core::Error },
}

pub type IoResult<T> = std::result::Result<T, IoError>;

fn open(path: &Path) -> IoResult<File> {
    File::open(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> IoResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn flush(mut w: impl Write, path: &Path) -> IoResult<()> {
    w.flush().map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_csv(path: &Path, label: &str) -> IoResult<Dataset> {
    read_csv(open(path)?, label, &path.display().to_string())
}

/// Parses a dataset with biomarkers in every column except `label`.
/// `origin` names the source in error messages.
pub fn read_csv<R: Read>(reader: R, label: &str, origin: &str) -> IoResult<Dataset> {
    let csv_err = |source| IoError::Csv {
        origin: origin.to_string(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let label_col = header.iter().position(|h| h == label).ok_or_else(|| IoError::Format {
        origin: origin.to_string(),
        message: format!("no label column '{label}' (columns: {})", header.join(", ")),
    })?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_col)
        .map(|(_, h)| h.clone())
        .collect();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = i + 1;
        let field_err = |j: usize, message: String| IoError::Field {
            origin: origin.to_string(),
            row,
            column: header[j].clone(),
            message,
        };
        for (j, field) in record.iter().enumerate() {
            if j == label_col {
                labels.push(match field {
                    "0" | "0.0" => 0,
                    "1" | "1.0" => 1,
                    other => return Err(field_err(j, format!("label '{other}' is not 0 or 1"))),
                });
            } else if field.is_empty() {
                values.push(MISSING);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| field_err(j, format!("'{field}' is not a number")))?;
                if !v.is_finite() {
                    return Err(field_err(j, format!("'{field}' is not finite")));
                }
                values.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(IoError::Format {
            origin: origin.to_string(),
            message: "no data rows".into(),
        });
    }
    Dataset::new(names, values, labels).map_err(|source| IoError::Core {
        origin: origin.to_string(),
        source,
    })
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn write_csv(ds: &Dataset, path: &Path) -> IoResult<()> {
    let mut w = create(path)?;
    write_dataset(ds, &mut w).map_err(|source| IoError::Csv {
        origin: path.display().to_string(),
        source,
    })?;
    flush(w, path)
}

/// Writes biomarker columns followed by the label column [`DEFAULT_LABEL`].
pub fn write_dataset<W: Write>(ds: &Dataset, w: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = ds.names().iter().map(String::as_str).collect();
    header.push(DEFAULT_LABEL);
    wtr.write_record(&header)?;
    for (row, &y) in ds.rows().zip(ds.labels()) {
        let mut fields: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        fields.push(y.to_string());
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a square correlation matrix. A first row that is not numeric is
/// taken as a header and skipped.
pub fn load_correlation(path: &Path) -> IoResult<CorrelationMatrix> {
    let origin = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|source| IoError::Csv {
            origin: origin.clone(),
            source,
        })?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(IoError::Format {
                    origin,
                    message: format!("line {}: {e}", i + 1),
                })
            }
        }
    }
    let dim = rows.len();
    if let Some(i) = rows.iter().position(|r| r.len() != dim) {
        return Err(IoError::Format {
            origin,
            message: format!("matrix row {} has {} entries; expected {dim}", i + 1, rows[i].len()),
        });
    }
    CorrelationMatrix::new(dim, rows.concat()).map_err(|source| IoError::Core { origin, source })
}

/// A `# auc=` comment line, then `fpr,tpr` rows.
pub fn write_roc<W: Write>(curve: &RocCurve, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# auc={}", curve.auc)?;
    writeln!(w, "fpr,tpr")?;
    for (fpr, tpr) in &curve.points {
        writeln!(w, "{fpr},{tpr}")?;
    }
    w.flush()
}

pub fn save_roc(curve: &RocCurve, path: &Path) -> IoResult<()> {
    let wrap = |source| IoError::File {
        path: path.to_path_buf(),
        source,
    };
    write_roc(curve, create(path)?).map_err(wrap)
}

fn optional(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One line per (method, repetition), in the order stored in `result`.
pub fn write_benchmark<W: Write>(result: &BenchmarkResult, w: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "method",
        "repetition",
        "params",
        "auc",
        "n_selected",
        "sensitivity",
        "specificity",
        "accuracy",
    ])?;
    for row in &result.rows {
        wtr.write_record([
            row.method.name().to_string(),
            row.repetition.to_string(),
            row.params.clone(),
            row.auc.to_string(),
            row.n_selected.to_string(),
            optional(row.sensitivity),
            optional(row.specificity),
            optional(row.accuracy),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(summary: &[MethodSummary], w: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "method",
        "repetitions",
        "mean_auc",
        "sd_auc",
        "mean_selected",
        "mean_sensitivity",
        "mean_specificity",
        "mean_accuracy",
    ])?;
    for s in summary {
        wtr.write_record([
            s.method.name().to_string(),
            s.repetitions.to_string(),
            s.mean_auc.to_string(),
            s.sd_auc.to_string(),
            s.mean_selected.to_string(),
            optional(s.mean_sensitivity),
            optional(s.mean_specificity),
            optional(s.mean_accuracy),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_failures<W: Write>(failures: &[JobFailure], w: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "repetition", "message"])?;
    for f in failures {
        wtr.write_record([f.method.name(), &f.repetition.to_string(), &f.message])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes through `write` into a new file at `path`.
pub fn save_with<F>(path: &Path, write: F) -> IoResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
{
    let mut w = create(path)?;
    write(&mut w).map_err(|source| IoError::Csv {
        origin: path.display().to_string(),
        source,
    })?;
    flush(w, path)
}
