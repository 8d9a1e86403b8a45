//! Dataset → tour path → sage transform, plus frame export and replay.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::render::{assign_colors, ColorMap};
use crate::sage::{apply_sage, HalfRange, SageParams};
use crate::tour::{frame_stream, Frame, FrameStream, PathConfig};

pub const DEFAULT_FRAME_BUDGET: usize = 500;
pub const DEFAULT_CHANNEL_CAPACITY: usize = 8;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid tour run: {0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// One transformed tour step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedFrame {
    pub frame_index: u64,
    pub basis: Frame,
    pub coords: Vec<[f64; 2]>,
    pub params: SageParams,
}

/// Everything needed to run a tour over a dataset.
#[derive(Debug, Clone)]
pub struct TourRun {
    pub dataset: Arc<Dataset>,
    pub path: PathConfig,
    pub params: SageParams,
    pub frame_budget: usize,
    pub colors: ColorMap,
}

impl TourRun {
    /// Default sage parameters (`R` = max row norm) and a 500-frame budget.
    pub fn new(dataset: Dataset, path: PathConfig) -> Result<Self, PipelineError> {
        let params = SageParams::for_dataset(&dataset).map_err(|e| PipelineError::Invalid(e.to_string()))?;
        let colors = assign_colors(dataset.labels());
        let run = TourRun {
            dataset: Arc::new(dataset),
            path,
            params,
            frame_budget: DEFAULT_FRAME_BUDGET,
            colors,
        };
        Ok(run)
    }

    pub fn with_params(mut self, params: SageParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_frame_budget(mut self, frames: usize) -> Self {
        self.frame_budget = frames;
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.frame_budget == 0 {
            return Err(PipelineError::Invalid("frame budget must be at least 1".into()));
        }
        if self.params.p_input() != self.dataset.p() {
            return Err(PipelineError::Invalid(format!(
                "params are for p = {} but the dataset has p = {}",
                self.params.p_input(),
                self.dataset.p()
            )));
        }
        self.path.validate().map_err(PipelineError::Invalid)
    }
}

/// `Y = X·A` followed by the sage display transform.
pub fn project_frame(dataset: &Dataset, basis: &Frame, params: &SageParams) -> Vec<[f64; 2]> {
    let y = dataset.values() * basis.basis();
    apply_sage(&y, params)
}

/// Lazy frame producer for a [`TourRun`].
pub struct TourFrames {
    dataset: Arc<Dataset>,
    params: SageParams,
    stream: FrameStream,
    next_index: u64,
    remaining: Option<usize>,
}

impl TourFrames {
    /// Producer that ignores the frame budget.
    pub fn unbounded(run: &TourRun) -> Self {
        TourFrames {
            dataset: run.dataset.clone(),
            params: run.params,
            stream: frame_stream(run.dataset.p(), run.path),
            next_index: 0,
            remaining: None,
        }
    }

    pub fn params(&self) -> &SageParams {
        &self.params
    }

    /// Used for the next frame onward.
    pub fn set_params(&mut self, params: SageParams) {
        self.params = params;
    }

    pub fn set_step_angle(&mut self, step_angle: f64) {
        self.stream.set_step_angle(step_angle);
    }

    /// Restarts the path from `seed`; frame numbering continues.
    pub fn reseed(&mut self, path: PathConfig) {
        self.stream = frame_stream(self.dataset.p(), path);
    }
}

impl Iterator for TourFrames {
    type Item = ProjectedFrame;

    fn next(&mut self) -> Option<ProjectedFrame> {
        if let Some(left) = self.remaining.as_mut() {
            if *left == 0 {
                return None;
            }
            *left -= 1;
        }
        let basis = self.stream.next()?;
        let coords = project_frame(&self.dataset, &basis, &self.params);
        let frame = ProjectedFrame { frame_index: self.next_index, basis, coords, params: self.params };
        self.next_index += 1;
        Some(frame)
    }
}

/// Frames of `run`, at most `frame_budget` of them.
pub fn run_tour(run: &TourRun) -> Result<TourFrames, PipelineError> {
    run.validate()?;
    let mut frames = TourFrames::unbounded(run);
    frames.remaining = Some(run.frame_budget);
    Ok(frames)
}

/// Runs the tour on a worker thread feeding a channel of `capacity` frames;
/// the producer blocks whenever the consumer falls behind.
pub fn spawn_tour(run: &TourRun, capacity: usize) -> Result<Receiver<ProjectedFrame>, PipelineError> {
    let frames = run_tour(run)?;
    let (tx, rx) = sync_channel(capacity.max(1));
    thread::spawn(move || {
        for f in frames {
            if tx.send(f).is_err() {
                break;
            }
        }
    });
    Ok(rx)
}

/// Parameters as written into frame records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub gamma: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub half_range: f64,
}

impl From<&SageParams> for ParamRecord {
    fn from(p: &SageParams) -> Self {
        ParamRecord { gamma: p.gamma(), radius: p.radius(), half_range: p.half_range() }
    }
}

impl ParamRecord {
    /// Rebuilds full params for a dataset of dimension `p_input`. The
    /// half-range is explicit unless it equals `R`.
    pub fn to_params(&self, p_input: usize) -> Result<SageParams, PipelineError> {
        let hr = if self.half_range == self.radius {
            HalfRange::FollowRadius
        } else {
            HalfRange::Explicit(self.half_range)
        };
        SageParams::with(p_input, self.gamma, self.radius, hr).map_err(|e| PipelineError::Invalid(e.to_string()))
    }
}

/// One line of the jsonl export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: u64,
    /// p rows of `[a1, a2]`.
    pub basis: Vec<[f64; 2]>,
    pub points: Vec<[f64; 2]>,
    pub params: ParamRecord,
}

impl From<&ProjectedFrame> for FrameRecord {
    fn from(f: &ProjectedFrame) -> Self {
        let b = f.basis.basis();
        FrameRecord {
            frame_index: f.frame_index,
            basis: (0..b.nrows()).map(|i| [b[(i, 0)], b[(i, 1)]]).collect(),
            points: f.coords.clone(),
            params: ParamRecord::from(&f.params),
        }
    }
}

impl FrameRecord {
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.basis.len(), 2, |i, j| self.basis[i][j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    Jsonl,
    CsvPerFrame,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(ExportFormat::Jsonl),
            "csv-per-frame" => Ok(ExportFormat::CsvPerFrame),
            other => Err(format!("unknown export format {other:?} (expected jsonl or csv-per-frame)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: ExportFormat,
    pub frame_count: usize,
    pub files: Vec<String>,
    pub seed: u64,
    pub step_angle: f64,
    pub dataset_hash: String,
    pub n: usize,
    pub p: usize,
    pub column_names: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const JSONL_FILE: &str = "frames.jsonl";

/// Writes `frames` into `dir` (created if needed) and a `manifest.json`.
/// Output is byte-for-byte deterministic for identical input.
pub fn export_frames<I>(frames: I, dir: &Path, format: ExportFormat, run: &TourRun) -> Result<Manifest, PipelineError>
where
    I: IntoIterator<Item = ProjectedFrame>,
{
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();
    let mut count = 0;
    match format {
        ExportFormat::Jsonl => {
            let path = dir.join(JSONL_FILE);
            let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
            for f in frames {
                let line = serde_json::to_string(&FrameRecord::from(&f)).expect("frame records serialize");
                writeln!(w, "{line}").map_err(io_err(&path))?;
                count += 1;
            }
            w.flush().map_err(io_err(&path))?;
            files.push(JSONL_FILE.to_string());
        }
        ExportFormat::CsvPerFrame => {
            for f in frames {
                let name = format!("frame_{:05}.csv", f.frame_index);
                let path = dir.join(&name);
                write_frame_csv(&f, &path)?;
                files.push(name);
                count += 1;
            }
        }
    }
    let manifest = Manifest {
        format,
        frame_count: count,
        files,
        seed: run.path.seed,
        step_angle: run.path.step_angle,
        dataset_hash: run.dataset.content_hash(),
        n: run.dataset.n(),
        p: run.dataset.p(),
        column_names: run.dataset.column_names().to_vec(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

/// Points only, as `x,y`. Bases and parameters are kept by the jsonl format.
fn write_frame_csv(f: &ProjectedFrame, path: &Path) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "x,y").map_err(io_err(path))?;
    for [x, y] in &f.coords {
        writeln!(w, "{x},{y}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, PipelineError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json { path, line: 1, source })
}

/// Reads back a jsonl frame file.
pub fn read_jsonl(path: &Path) -> Result<Vec<FrameRecord>, PipelineError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| PipelineError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Recomputes a record's points from its basis and parameters.
pub fn recompute(record: &FrameRecord, dataset: &Dataset) -> Result<Vec<[f64; 2]>, PipelineError> {
    let basis = Frame::new(record.basis_matrix())
        .ok_or_else(|| PipelineError::Invalid(format!("frame {} has a non-orthonormal basis", record.frame_index)))?;
    let params = record.params.to_params(dataset.p())?;
    Ok(project_frame(dataset, &basis, &params))
}
