//! CSV datasets, JSON manifests and JSON result documents.
//!
//! Labels are 1-based on disk and 0-based in memory; the conversion happens
//! only in this module.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Algorithm, AssignmentMatrix, CenterSet, ClusterResult, Diagnostics, HyperParams, MultiViewDataset, ViewWeights,
};
use crate::scalar::Scalar;

/// Rows and feature columns of the raw QCM sensor file.
pub const QCM_ROWS: usize = 125;
pub const QCM_FEATURES: usize = 10;
const QCM_MIN_COLUMNS: usize = 15;
const QCM_BLOCK: usize = 25;

fn default_delimiter() -> String {
    ",".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    #[default]
    Csv,
    /// Raw UCI QCM file; `view_files` holds the single file.
    Qcm,
}

/// JSON description of a dataset on disk. Relative paths are resolved
/// against the directory holding the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub view_files: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_true: Option<usize>,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default)]
    pub format: DataFormat,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, view_files: Vec<PathBuf>) -> Self {
        Self {
            name: name.into(),
            view_files,
            label_file: None,
            k_true: None,
            delimiter: default_delimiter(),
            has_header: false,
            format: DataFormat::Csv,
            base_dir: PathBuf::new(),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Self = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: format!("bad manifest: {e}"),
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.check(path)?;
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn delimiter_byte(&self) -> Result<u8> {
        match self.delimiter.as_bytes() {
            [b] if b.is_ascii() && *b != b'"' && *b != b'\n' => Ok(*b),
            _ => Err(Error::Config(format!(
                "delimiter must be one ASCII character, got {:?}",
                self.delimiter
            ))),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check(&self, path: &Path) -> Result<()> {
        if self.view_files.is_empty() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: "manifest lists no view files".into(),
            });
        }
        if self.format == DataFormat::Qcm && self.view_files.len() != 1 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: "a qcm manifest takes exactly one file".into(),
            });
        }
        self.delimiter_byte().map(|_| ())
    }
}

/// Loads every file a manifest refers to.
pub fn load(manifest: &DatasetManifest) -> Result<MultiViewDataset<f64>> {
    if manifest.format == DataFormat::Qcm {
        let data = load_qcm(manifest.resolve(&manifest.view_files[0]))?;
        return Ok(data.with_name(manifest.name.clone()));
    }
    let delim = manifest.delimiter_byte()?;
    let mut views = Vec::with_capacity(manifest.view_files.len());
    for f in &manifest.view_files {
        views.push(read_matrix(manifest.resolve(f), delim, manifest.has_header)?);
    }
    let n = views[0].nrows();
    for (v, m) in views.iter().enumerate().skip(1) {
        if m.nrows() != n {
            return Err(Error::Dimension(format!(
                "{} has {} rows but {} has {n}",
                manifest.resolve(&manifest.view_files[v]).display(),
                m.nrows(),
                manifest.resolve(&manifest.view_files[0]).display()
            )));
        }
    }
    let labels = match &manifest.label_file {
        Some(f) => {
            let p = manifest.resolve(f);
            let l = read_labels(&p, delim, manifest.has_header)?;
            if l.len() != n {
                return Err(Error::Dimension(format!(
                    "{} has {} labels for {n} samples",
                    p.display(),
                    l.len()
                )));
            }
            Some(l)
        }
        None => None,
    };
    MultiViewDataset::new(views, labels, manifest.name.clone())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<MultiViewDataset<f64>> {
    load(&DatasetManifest::read(path)?)
}

fn parse_err(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

fn reader(path: &Path, delimiter: u8, has_header: bool) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::Utf8 { err, .. } => parse_err(path, line, err.field() + 1, "invalid UTF-8"),
        other => parse_err(path, line, 0, format!("{other:?}")),
    }
}

fn parse_cell(path: &Path, line: usize, column: usize, cell: &str) -> Result<f64> {
    if cell.is_empty() {
        return Err(parse_err(path, line, column, "empty cell"));
    }
    let x: f64 = cell
        .parse()
        .map_err(|_| parse_err(path, line, column, format!("not a number: {cell:?}")))?;
    if !x.is_finite() {
        return Err(parse_err(path, line, column, format!("non-finite value: {cell:?}")));
    }
    Ok(x)
}

/// Reads a dense numeric matrix. Lines and columns in errors are 1-based.
pub fn read_matrix(path: impl AsRef<Path>, delimiter: u8, has_header: bool) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut rdr = reader(path, delimiter, has_header)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec).map_err(|e| csv_err(path, e))? {
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(parse_err(
                    path,
                    line,
                    rec.len().min(w) + 1,
                    format!("expected {w} fields, found {}", rec.len()),
                ))
            }
            _ => {}
        }
        for (j, cell) in rec.iter().enumerate() {
            values.push(parse_cell(path, line, j + 1, cell)?);
        }
        rows += 1;
    }
    let Some(w) = width else {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    };
    Ok(Array2::from_shape_vec((rows, w), values).expect("row-major buffer"))
}

/// Reads one integer label per line and maps the distinct values, in
/// increasing order, to 0..L.
pub fn read_labels(path: impl AsRef<Path>, delimiter: u8, has_header: bool) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let m = read_matrix(path, delimiter, has_header)?;
    if m.ncols() != 1 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("label file must have one column, found {}", m.ncols()),
        });
    }
    let offset = usize::from(has_header) + 1;
    let mut raw = Vec::with_capacity(m.nrows());
    for (i, &x) in m.column(0).iter().enumerate() {
        if x.fract() != 0.0 || x.abs() > 2f64.powi(53) {
            return Err(parse_err(path, i + offset, 1, format!("label {x} is not an integer")));
        }
        raw.push(x as i64);
    }
    Ok(dense_labels(&raw))
}

fn dense_labels(raw: &[i64]) -> Vec<usize> {
    let mut ids = BTreeMap::new();
    for &x in raw {
        ids.insert(x, 0);
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    raw.iter().map(|x| ids[x]).collect()
}

/// Writes a matrix using Rust's shortest round-trip float formatting.
pub fn write_matrix<T: Scalar>(path: impl AsRef<Path>, m: &Array2<T>, delimiter: u8) -> Result<()> {
    let path = path.as_ref();
    let sep = char::from(delimiter);
    let mut out = String::new();
    for row in m.rows() {
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                out.push(sep);
            }
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes 0-based labels as 1-based integers, one per line.
pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&(l + 1).to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `<stem>_view<v>.csv`, `<stem>_labels.csv` and `<stem>.manifest.json`
/// into `dir` and returns the manifest path.
pub fn write_dataset<T: Scalar>(
    data: &MultiViewDataset<T>,
    dir: impl AsRef<Path>,
    stem: &str,
    k_true: Option<usize>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for (v, m) in data.views().iter().enumerate() {
        let name = PathBuf::from(format!("{stem}_view{}.csv", v + 1));
        write_matrix(dir.join(&name), m, b',')?;
        files.push(name);
    }
    let mut manifest = DatasetManifest::new(data.name(), files);
    if let Some(l) = data.labels() {
        let name = PathBuf::from(format!("{stem}_labels.csv"));
        write_labels(dir.join(&name), l)?;
        manifest.label_file = Some(name);
    }
    manifest.k_true = k_true;
    let path = dir.join(format!("{stem}.manifest.json"));
    manifest.write(&path)?;
    Ok(path)
}

fn sniff_delimiter(text: &str) -> u8 {
    let first = text.lines().next().unwrap_or("");
    if first.contains(';') {
        b';'
    } else {
        b','
    }
}

/// Loads the raw UCI QCM file: 125 rows, at least 15 columns of which the
/// first 10 are sensor features. Rows come in five blocks of 25, one per
/// class. A non-numeric first row is treated as a header.
pub fn load_qcm(path: impl AsRef<Path>) -> Result<MultiViewDataset<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let delim = sniff_delimiter(&text);
    let has_header = text
        .lines()
        .next()
        .and_then(|l| l.split(char::from(delim)).next())
        .is_some_and(|c| c.trim().parse::<f64>().is_err());
    let full = read_matrix(path, delim, has_header)?;
    let fmt = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    if full.nrows() != QCM_ROWS {
        return Err(fmt(format!("expected {QCM_ROWS} rows, found {}", full.nrows())));
    }
    if full.ncols() < QCM_MIN_COLUMNS {
        return Err(fmt(format!(
            "expected at least {QCM_MIN_COLUMNS} columns, found {}",
            full.ncols()
        )));
    }
    let x = full.slice(ndarray::s![.., ..QCM_FEATURES]).to_owned();
    let labels = (0..QCM_ROWS).map(|i| i / QCM_BLOCK).collect();
    MultiViewDataset::new(vec![x], Some(labels), "qcm")
}

/// On-disk form of a [`ClusterResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub algorithm: Algorithm,
    /// Hard labels, 1-based.
    pub result: Vec<usize>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<f64>>,
    pub weight: Vec<f64>,
    pub center: Vec<Vec<Vec<f64>>>,
    pub center_nonneg: bool,
    pub nmi: Option<f64>,
    pub objective_trace: Vec<f64>,
    pub elapsed_seconds: f64,
    pub config: HyperParams,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

fn rows_of<T: Scalar>(m: &Array2<T>) -> Vec<Vec<f64>> {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.as_f64()).collect())
        .collect()
}

fn matrix_from(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Validation(format!("{what} has ragged rows")));
    }
    let flat = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), cols), flat).expect("row-major buffer"))
}

impl ResultDocument {
    pub fn from_result<T: Scalar>(r: &ClusterResult<T>) -> Self {
        Self {
            algorithm: r.algorithm,
            result: r.labels().iter().map(|l| l + 1).collect(),
            u: rows_of(r.assignment.entries()),
            weight: r.weights.alpha().iter().map(|a| a.as_f64()).collect(),
            center: r.centers.views().iter().map(rows_of).collect(),
            center_nonneg: r.centers.nonneg_enforced(),
            nmi: r.nmi.filter(|x| x.is_finite()),
            objective_trace: r.objective_trace.iter().map(|x| x.as_f64()).collect(),
            elapsed_seconds: r.elapsed_seconds,
            config: r.config.clone(),
            diagnostics: r.diagnostics.clone(),
        }
    }

    pub fn into_result(self) -> Result<ClusterResult<f64>> {
        let assignment = AssignmentMatrix::from_entries(matrix_from(&self.u, "U")?);
        let labels: Vec<usize> = self.result.iter().map(|l| l.wrapping_sub(1)).collect();
        if labels != assignment.hard_labels() {
            return Err(Error::Validation(
                "\"result\" disagrees with the row-wise argmax of \"U\"".into(),
            ));
        }
        let centers = self
            .center
            .iter()
            .map(|c| matrix_from(c, "center"))
            .collect::<Result<Vec<_>>>()?;
        Ok(ClusterResult {
            algorithm: self.algorithm,
            assignment,
            centers: CenterSet::new(centers, self.center_nonneg)?,
            weights: ViewWeights::new(self.weight, self.config.r)?,
            objective_trace: self.objective_trace,
            elapsed_seconds: self.elapsed_seconds,
            nmi: self.nmi,
            config: self.config,
            diagnostics: self.diagnostics,
        })
    }
}

pub fn save_result<T: Scalar>(result: &ClusterResult<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&ResultDocument::from_result(result))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_result(path: impl AsRef<Path>) -> Result<ClusterResult<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ResultDocument = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: format!("bad result document: {e}"),
    })?;
    doc.into_result()
}
