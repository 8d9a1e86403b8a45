//! Tabular input: CSV ingestion, centring/scaling, PCA reduction and
//! synthetic uniform-ball samples.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),
    #[error("need at least 2 numeric columns, found {0}")]
    TooFewColumns(usize),
    #[error("no rows left after dropping {dropped} rows with non-finite values")]
    Empty { dropped: usize },
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("{0}")]
    Shape(String),
    #[error("requested {k} components but data has {p} columns (need 2 <= k <= p)")]
    ComponentCount { k: usize, p: usize },
    #[error("covariance has rank {0}; at least 2 components are required")]
    RankTooLow(usize),
}

/// An n×p numeric matrix with column names and optional per-row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: DMatrix<f64>,
    column_names: Vec<String>,
    labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        values: DMatrix<f64>,
        column_names: Vec<String>,
        labels: Option<Vec<String>>,
    ) -> Result<Self, DatasetError> {
        let (n, p) = values.shape();
        if n == 0 {
            return Err(DatasetError::Empty { dropped: 0 });
        }
        if p < 2 {
            return Err(DatasetError::TooFewColumns(p));
        }
        if column_names.len() != p {
            return Err(DatasetError::Shape(format!(
                "{} column names for {p} columns",
                column_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::DuplicateColumn(name.clone()));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(DatasetError::Shape(format!("{} labels for {n} rows", l.len())));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DatasetError::Shape("non-finite entries".into()));
        }
        Ok(Dataset { values, column_names, labels })
    }

    /// Builds a dataset with generated column names `x1..xp`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self, DatasetError> {
        let names = (1..=values.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(values, names, None)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, DatasetError> {
        if labels.len() != self.n() {
            return Err(DatasetError::Shape(format!("{} labels for {} rows", labels.len(), self.n())));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// SHA-256 over the shape and the little-endian bit patterns of the
    /// values, in row-major order.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        h.update((self.p() as u64).to_le_bytes());
        for row in self.values.row_iter() {
            for v in row.iter() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Result of [`load_csv`].
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: Dataset,
    /// Rows dropped because a numeric field was missing or non-finite.
    pub dropped_rows: usize,
    /// Columns skipped because they held non-numeric text.
    pub skipped_columns: Vec<String>,
}

fn parse_field(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

/// Reads a comma-delimited file with a header row.
///
/// A column is numeric when every non-empty field parses as a number
/// (`NaN`/`inf` included). Other columns are skipped, except the label
/// column which is kept verbatim. Rows with any empty or non-finite numeric
/// field are dropped and counted.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<LoadReport, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |source| DatasetError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DatasetError::MissingLabelColumn(name.to_string()))?,
        ),
        None => None,
    };

    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec.map_err(csv_err)?);
    }

    let numeric: Vec<usize> = (0..header.len())
        .filter(|&j| Some(j) != label_idx)
        .filter(|&j| {
            records.iter().all(|r| {
                let f = r.get(j).unwrap_or("").trim();
                f.is_empty() || parse_field(f).is_some()
            })
        })
        .collect();
    let skipped_columns = (0..header.len())
        .filter(|j| Some(*j) != label_idx && !numeric.contains(j))
        .map(|j| header[j].clone())
        .collect();
    if numeric.len() < 2 {
        return Err(DatasetError::TooFewColumns(numeric.len()));
    }

    let mut flat = Vec::with_capacity(records.len() * numeric.len());
    let mut labels = Vec::new();
    let mut dropped = 0;
    for rec in &records {
        let row: Option<Vec<f64>> = numeric
            .iter()
            .map(|&j| parse_field(rec.get(j).unwrap_or("")).filter(|v| v.is_finite()))
            .collect();
        match row {
            Some(row) => {
                flat.extend(row);
                if let Some(li) = label_idx {
                    labels.push(rec.get(li).unwrap_or("").trim().to_string());
                }
            }
            None => dropped += 1,
        }
    }
    if flat.is_empty() {
        return Err(DatasetError::Empty { dropped });
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with non-finite values", path.display());
    }
    let n = flat.len() / numeric.len();
    let values = DMatrix::from_row_slice(n, numeric.len(), &flat);
    let names = numeric.iter().map(|&j| header[j].clone()).collect();
    let dataset = Dataset::new(values, names, label_idx.map(|_| labels))?;
    Ok(LoadReport { dataset, dropped_rows: dropped, skipped_columns })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    /// Divide by the sample standard deviation (divisor n - 1).
    #[default]
    Variance,
    /// Divide by `max - min`.
    Range,
    None,
}

impl std::str::FromStr for ScaleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "variance" => Ok(ScaleMode::Variance),
            "range" => Ok(ScaleMode::Range),
            "none" => Ok(ScaleMode::None),
            other => Err(format!("unknown scale mode {other:?} (expected variance, range or none)")),
        }
    }
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleMode::Variance => "variance",
            ScaleMode::Range => "range",
            ScaleMode::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessSpec {
    pub center: bool,
    pub scale: ScaleMode,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        PreprocessSpec { center: true, scale: ScaleMode::Variance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    ConstantColumn(String),
    RankDeficient { requested: usize, kept: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::ConstantColumn(c) => write!(f, "column {c:?} is constant and was not scaled"),
            Warning::RankDeficient { requested, kept } => {
                write!(f, "covariance is rank deficient: kept {kept} of {requested} components")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub dataset: Dataset,
    pub warnings: Vec<Warning>,
}

fn is_degenerate(spread: f64, magnitude: f64) -> bool {
    !(spread > 1e-12 * (1.0 + magnitude))
}

/// Centres and/or scales each column. Constant columns are centred but never
/// divided; each one produces a warning.
pub fn preprocess(d: &Dataset, spec: PreprocessSpec) -> Preprocessed {
    let n = d.n();
    let mut values = d.values.clone();
    let mut warnings = Vec::new();
    for (j, mut col) in values.column_iter_mut().enumerate() {
        let mean = col.sum() / n as f64;
        let max_abs = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let divisor = match spec.scale {
            ScaleMode::None => 1.0,
            ScaleMode::Variance => {
                let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
                if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 }
            }
            ScaleMode::Range => {
                let (lo, hi) = col
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                hi - lo
            }
        };
        let divisor = if spec.scale != ScaleMode::None && is_degenerate(divisor, max_abs) {
            warnings.push(Warning::ConstantColumn(d.column_names[j].clone()));
            1.0
        } else {
            divisor
        };
        let shift = if spec.center { mean } else { 0.0 };
        for v in col.iter_mut() {
            *v = (*v - shift) / divisor;
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Preprocessed {
        dataset: Dataset { values, column_names: d.column_names.clone(), labels: d.labels.clone() },
        warnings,
    }
}

#[derive(Debug, Clone)]
pub struct PcaResult {
    pub dataset: Dataset,
    /// Eigenvalues of the retained components, descending.
    pub eigenvalues: Vec<f64>,
    /// Retained share of the total variance.
    pub explained_fraction: f64,
    pub warnings: Vec<Warning>,
}

/// Projects onto the leading `k` principal components of the sample
/// covariance (divisor n - 1). Each component's largest-magnitude loading is
/// made positive. Components with eigenvalue below `1e-12 * max` are not
/// kept; fewer than `k` columns then come back along with a warning.
pub fn pca_reduce(d: &Dataset, k: usize) -> Result<PcaResult, DatasetError> {
    let (n, p) = d.values.shape();
    if k < 2 || k > p {
        return Err(DatasetError::ComponentCount { k, p });
    }
    let means = d.values.row_mean();
    let mut centered = d.values.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let denom = (n.max(2) - 1) as f64;
    let cov = (centered.transpose() * &centered) / denom;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let top = eig.eigenvalues[order[0]].max(0.0);
    let kept: Vec<usize> = order
        .into_iter()
        .take(k)
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * top)
        .collect();
    if kept.len() < 2 {
        return Err(DatasetError::RankTooLow(kept.len()));
    }
    let mut warnings = Vec::new();
    if kept.len() < k {
        let w = Warning::RankDeficient { requested: k, kept: kept.len() };
        log::warn!("{w}");
        warnings.push(w);
    }

    let mut loadings = DMatrix::zeros(p, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let lead = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
        if lead < 0.0 {
            v.neg_mut();
        }
        loadings.set_column(c, &v);
    }
    let scores = centered * loadings;
    let eigenvalues: Vec<f64> = kept.iter().map(|&i| eig.eigenvalues[i]).collect();
    let explained_fraction = if total > 0.0 { eigenvalues.iter().sum::<f64>() / total } else { 1.0 };
    let names = (1..=kept.len()).map(|c| format!("PC{c}")).collect();
    Ok(PcaResult {
        dataset: Dataset::new(scores, names, d.labels.clone())?,
        eigenvalues,
        explained_fraction,
        warnings,
    })
}

/// Draws `n` points uniformly from the p-ball of radius `radius`: a normalised
/// standard Gaussian direction scaled by `radius * U^(1/p)`, `U ~ (0, 1)`.
pub fn sample_ball(n: usize, p: usize, radius: f64, seed: u64) -> Dataset {
    assert!(n >= 1 && p >= 2 && radius > 0.0, "sample_ball needs n >= 1, p >= 2, R > 0");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = Vec::with_capacity(n * p);
    let mut dir = vec![0.0f64; p];
    for _ in 0..n {
        let norm = loop {
            for x in dir.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break norm;
            }
        };
        let u: f64 = rng.sample(Open01);
        let r = radius * u.powf(1.0 / p as f64);
        flat.extend(dir.iter().map(|x| x / norm * r));
    }
    Dataset::from_matrix(DMatrix::from_row_slice(n, p, &flat)).expect("sample has valid shape")
}
