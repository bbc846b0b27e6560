//! Delimited matrix files and JSON result documents.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::synth::GroundTruth;
use crate::types::{Bicluster, BiclusterModel, FitConfig, MultiViewData};

/// Version stamped into every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadOptions {
    /// First line holds column names.
    pub header: bool,
    /// First field of every line is a sample label.
    pub row_labels: bool,
    /// Field separator; detected from the first line when `None`.
    pub delimiter: Option<u8>,
}

/// One matrix file after parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub values: Array2<f64>,
    pub row_labels: Option<Vec<String>>,
    pub col_names: Option<Vec<String>>,
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn detect_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Parses a delimited numeric matrix. Line and column numbers in errors are
/// 1-based and refer to the file as written.
pub fn read_matrix(path: &Path, opts: &LoadOptions) -> Result<MatrixFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", display(path))))?;
    parse_matrix(&text, &display(path), opts)
}

fn parse_matrix(text: &str, file: &str, opts: &LoadOptions) -> Result<MatrixFile> {
    let delimiter = opts.delimiter.unwrap_or_else(|| detect_delimiter(text));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let parse_err = |line: usize, col: usize, msg: String| Error::Parse {
        file: file.to_string(),
        line,
        col,
        msg,
    };
    let skip = usize::from(opts.row_labels);
    let mut col_names = None;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if opts.header && col_names.is_none() {
            col_names = Some(record.iter().skip(skip).map(str::to_string).collect::<Vec<_>>());
            continue;
        }
        let fields = record.len().saturating_sub(skip);
        match width {
            None => width = Some(fields),
            Some(w) if w != fields => {
                return Err(parse_err(line, 0, format!("expected {w} values, found {fields}")));
            }
            _ => {}
        }
        if opts.row_labels {
            labels.push(record.get(0).unwrap_or("").to_string());
        }
        for (j, field) in record.iter().enumerate().skip(skip) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, j + 1, format!("'{field}' is not finite")));
            }
            data.push(v);
        }
    }

    let p = width.unwrap_or(0);
    if p == 0 {
        return Err(parse_err(1, 0, "no numeric data".into()));
    }
    if let Some(names) = &col_names {
        if names.len() != p {
            return Err(parse_err(1, 0, format!("header has {} names for {p} columns", names.len())));
        }
    }
    let n = data.len() / p;
    let values = Array2::from_shape_vec((n, p), data).expect("row widths checked");
    Ok(MatrixFile {
        values,
        row_labels: opts.row_labels.then_some(labels),
        col_names,
    })
}

/// Loads one view per file. With row labels, later files are reordered to
/// the label order of the first file; without them rows align by position.
pub fn load_views(paths: &[PathBuf], opts: &LoadOptions) -> Result<MultiViewData> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no view files given".into()));
    }
    let files = paths
        .iter()
        .map(|p| read_matrix(p, opts))
        .collect::<Result<Vec<_>>>()?;
    let first = &files[0];
    let n = first.values.nrows();
    let mut views = Vec::with_capacity(files.len());
    for (path, file) in paths.iter().zip(&files) {
        if file.values.nrows() != n {
            return Err(Error::Dimension(format!(
                "{} has {} rows but {} has {n}",
                display(path),
                file.values.nrows(),
                display(&paths[0])
            )));
        }
        views.push(match (&first.row_labels, &file.row_labels) {
            (Some(reference), Some(labels)) => align_rows(file, labels, reference, path, &paths[0])?,
            _ => file.values.clone(),
        });
    }
    let names = paths
        .iter()
        .map(|p| p.file_stem().map_or_else(|| display(p), |s| s.to_string_lossy().into_owned()))
        .collect();
    let data = MultiViewData::new(views)?.with_view_names(names)?;
    match &first.row_labels {
        Some(labels) => data.with_sample_ids(labels.clone()),
        None => Ok(data),
    }
}

fn align_rows(file: &MatrixFile, labels: &[String], reference: &[String], path: &Path, ref_path: &Path) -> Result<Array2<f64>> {
    if labels == reference {
        return Ok(file.values.clone());
    }
    let mut index = HashMap::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        if index.insert(label.as_str(), i).is_some() {
            return Err(Error::Parse {
                file: display(path),
                line: i + 1,
                col: 1,
                msg: format!("duplicate row label '{label}'"),
            });
        }
    }
    let order = reference
        .iter()
        .map(|label| {
            index.get(label.as_str()).copied().ok_or_else(|| {
                Error::Dimension(format!(
                    "row label '{label}' from {} is missing in {}",
                    display(ref_path),
                    display(path)
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(file.values.select(ndarray::Axis(0), &order))
}

/// Writes one view with a header line and a leading label column. Values use
/// the shortest representation that parses back to the same `f64`.
pub fn save_matrix(path: &Path, values: &Array2<f64>, row_labels: &[String], col_names: &[String]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", display(path))))?;
    let io_err = |e: csv::Error| Error::Io(format!("{}: {e}", display(path)));
    let mut head = vec![String::from("sample")];
    head.extend(col_names.iter().cloned());
    writer.write_record(&head).map_err(io_err)?;
    for (label, row) in row_labels.iter().zip(values.rows()) {
        let mut rec = Vec::with_capacity(row.len() + 1);
        rec.push(label.clone());
        rec.extend(row.iter().map(|v| v.to_string()));
        writer.write_record(&rec).map_err(io_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes every view to `dir/<name>.csv` and returns the paths. Files carry
/// a header and label column, so read them back with both options on.
pub fn save_views(data: &MultiViewData, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let labels: Vec<String> = match data.sample_ids() {
        Some(ids) => ids.to_vec(),
        None => (0..data.n_samples()).map(|i| format!("s{i}")).collect(),
    };
    let mut paths = Vec::with_capacity(data.n_views());
    for d in 0..data.n_views() {
        let name = data
            .view_names()
            .map_or_else(|| format!("view{}", d + 1), |n| n[d].clone());
        let path = dir.join(format!("{name}.csv"));
        let cols: Vec<String> = (0..data.dims()[d]).map(|j| format!("{name}_{j}")).collect();
        save_matrix(&path, &data.views()[d], &labels, &cols)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Index-list summary of one fitted layer. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub rows: Vec<usize>,
    pub cols: Vec<Vec<usize>>,
    pub s: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub lambda_u: f64,
    pub lambda_v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub config: FitConfig,
    pub view_files: Vec<String>,
    pub sample_ids: Option<Vec<String>>,
    pub k_selected: usize,
    pub k_detected: usize,
    pub layers: Vec<LayerSummary>,
    pub row_membership: Vec<usize>,
    pub col_membership: Vec<Vec<usize>>,
    /// Row membership after assigning unclustered samples, when requested.
    pub assigned_row_membership: Option<Vec<usize>>,
    pub wall_time_secs: f64,
}

impl ResultDocument {
    pub fn from_model(model: &BiclusterModel, config: &FitConfig, view_files: Vec<String>, wall_time_secs: f64) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|l| LayerSummary {
                rows: l.row_support(),
                cols: l.col_support(),
                s: l.s.clone(),
                converged: l.converged,
                iterations: l.iterations,
                lambda_u: l.lambda_u,
                lambda_v: l.lambda_v.clone(),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            view_files,
            sample_ids: None,
            k_selected: model.k_selected,
            k_detected: model.k_detected(),
            layers,
            row_membership: model.row_membership.clone(),
            col_membership: model.col_membership.clone(),
            assigned_row_membership: None,
            wall_time_secs,
        }
    }

    pub fn biclusters(&self) -> Vec<Bicluster> {
        self.layers
            .iter()
            .map(|l| Bicluster::new(l.rows.clone(), l.cols.clone()))
            .collect()
    }

    pub fn unclustered_count(&self) -> usize {
        self.row_membership.iter().filter(|&&m| m == 0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub schema_version: u32,
    pub truth: GroundTruth,
    pub view_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub schema_version: u32,
    pub result_file: String,
    pub truth_file: String,
    pub metrics: MetricsReport,
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_document<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", display(path))))
}

/// Reads a JSON document after checking its `schema_version`.
pub fn read_document<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", display(path))))?;
    let json_err = |e: serde_json::Error| Error::Parse {
        file: display(path),
        line: e.line(),
        col: e.column(),
        msg: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
    match value.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(Error::InvalidArgument(format!(
                "{} has schema version {v}, expected {SCHEMA_VERSION}",
                display(path)
            )))
        }
        None => {
            return Err(Error::InvalidArgument(format!("{} has no schema_version", display(path))))
        }
    }
    serde_json::from_value(value).map_err(json_err)
}
