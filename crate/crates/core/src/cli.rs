//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 I/O error. Failures
//! print a single `error[<kind>]: <message>` line on stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::dataset::{self, load_csv, pca_reduce, preprocess, sample_ball, Dataset, PreprocessSpec, ScaleMode};
use crate::diagnostics::{self, curve_table, hexbin, ks_uniformity, transformed_circles, CurveKind};
use crate::pipeline::{self, export_frames, run_tour, ExportFormat, TourRun};
use crate::render::render_static;
use crate::sage::{sage_transform, HalfRange, SageParams};
use crate::server;
use crate::tour::{PathConfig, DEFAULT_STEP_ANGLE};

/// K–S threshold used by `diagnose`.
pub const KS_TOLERANCE: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "sagetour", version, about = "Grand tour with radial sage transformation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a tour over a CSV file and export the transformed frames.
    Tour(TourArgs),
    /// Stream a live tour over WebSocket.
    Serve(ServeArgs),
    /// Check area-uniformity of transformed frames with a K–S statistic.
    Diagnose(DiagnoseArgs),
    /// Write a uniform p-ball sample as CSV.
    Sample(SampleArgs),
    /// Tabulate radial curves (projected volume, full volume, transform).
    Curves(CurvesArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Name of a column holding class labels (used for coloring only).
    #[arg(long)]
    pub label_column: Option<String>,
    /// Skip column centring.
    #[arg(long)]
    pub no_center: bool,
    /// Column scaling: variance, range or none.
    #[arg(long, default_value_t = ScaleMode::Variance)]
    pub scale: ScaleMode,
    /// Reduce to the first K principal components (re-standardised afterwards).
    #[arg(long, value_name = "K")]
    pub pca: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SageArgs {
    /// Scales the effective dimension: p_eff = gamma * p.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Trim radius; defaults to the largest row norm of the preprocessed data.
    #[arg(long = "R", value_name = "R")]
    pub radius: Option<f64>,
    /// Canvas half-range s; defaults to R.
    #[arg(long)]
    pub half_range: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    /// Seed for the tour path.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Interpolation step in radians, in (0, pi/2).
    #[arg(long, default_value_t = DEFAULT_STEP_ANGLE)]
    pub step_angle: f64,
}

#[derive(Debug, Args)]
pub struct TourArgs {
    /// Input CSV with a header row.
    pub data: PathBuf,
    #[command(flatten)]
    pub prep: PreprocessArgs,
    #[command(flatten)]
    pub sage: SageArgs,
    #[command(flatten)]
    pub path: PathArgs,
    /// Number of frames to export.
    #[arg(long, default_value_t = pipeline::DEFAULT_FRAME_BUDGET)]
    pub frames: usize,
    /// Output directory.
    #[arg(long, default_value = "tour-out")]
    pub out: PathBuf,
    /// Export format: jsonl or csv-per-frame.
    #[arg(long, default_value = "jsonl")]
    pub format: ExportFormat,
    /// Also write one SVG per frame.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Input CSV with a header row (omit with --synthetic-ball).
    pub data: Option<PathBuf>,
    /// Use a uniform p-ball sample instead of a file.
    #[arg(long)]
    pub synthetic_ball: bool,
    /// Dimension of the synthetic ball.
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    /// Number of synthetic points.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Seed for the synthetic sample.
    #[arg(long, default_value_t = 1)]
    pub sample_seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub prep: PreprocessArgs,
    #[command(flatten)]
    pub sage: SageArgs,
    #[command(flatten)]
    pub path: PathArgs,
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub bind: String,
    /// Frames per second.
    #[arg(long, default_value_t = server::DEFAULT_FPS)]
    pub fps: f64,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub prep: PreprocessArgs,
    #[command(flatten)]
    pub sage: SageArgs,
    #[command(flatten)]
    pub path: PathArgs,
    /// Number of tour frames to check.
    #[arg(long, default_value_t = 5)]
    pub frames: usize,
    /// Write a hexbin grid (q,r,count) of the first frame's centred projection.
    #[arg(long)]
    pub hexbin_out: Option<PathBuf>,
    /// Hexagon width for --hexbin-out; defaults to 1/40 of the extent.
    #[arg(long)]
    pub bin_width: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Number of points.
    #[arg(long)]
    pub n: usize,
    /// Ball dimension.
    #[arg(long)]
    pub p: usize,
    /// Ball radius.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Sampler seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// projected, full or transform.
    #[arg(long, default_value = "transform")]
    pub kind: String,
    /// Dimension (or effective dimension for transform).
    #[arg(long)]
    pub p: f64,
    /// Ball radius.
    #[arg(long = "R", value_name = "R", default_value_t = 1.0)]
    pub radius: f64,
    /// Number of grid points on [0, R].
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Add a Monte-Carlo column from this many ball samples (integer p only).
    #[arg(long)]
    pub monte_carlo: Option<usize>,
    /// Seed for --monte-carlo.
    #[arg(long, default_value_t = 0)]
    pub mc_seed: u64,
    /// Print K transformed equidistant circle radii instead of a curve.
    #[arg(long, value_name = "K")]
    pub circles: Option<usize>,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn line(&self) -> String {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Data(m) => ("data", m),
            CliError::Io(m) => ("io", m),
        };
        format!("error[{kind}]: {}", msg.replace('\n', " "))
    }
}

impl From<dataset::DatasetError> for CliError {
    fn from(e: dataset::DatasetError) -> Self {
        match e {
            dataset::DatasetError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<pipeline::PipelineError> for CliError {
    fn from(e: pipeline::PipelineError) -> Self {
        match e {
            pipeline::PipelineError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<diagnostics::DiagnosticsError> for CliError {
    fn from(e: diagnostics::DiagnosticsError) -> Self {
        match e {
            diagnostics::DiagnosticsError::Io(_) => CliError::Io(e.to_string()),
            diagnostics::DiagnosticsError::UnknownKind(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn io_error(path: &std::path::Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {v}")))
    }
}

fn validate_sage(args: &SageArgs) -> Result<(), CliError> {
    positive("gamma", args.gamma)?;
    if let Some(r) = args.radius {
        positive("R", r)?;
    }
    if let Some(s) = args.half_range {
        positive("half-range", s)?;
    }
    Ok(())
}

fn path_config(args: &PathArgs) -> Result<PathConfig, CliError> {
    let cfg = PathConfig { step_angle: args.step_angle, seed: args.seed, max_targets: None };
    cfg.validate().map_err(CliError::Usage)?;
    Ok(cfg)
}

fn prepare(d: Dataset, args: &PreprocessArgs) -> Result<Dataset, CliError> {
    let spec = PreprocessSpec { center: !args.no_center, scale: args.scale };
    let d = preprocess(&d, spec).dataset;
    match args.pca {
        None => Ok(d),
        Some(k) => {
            if k < 2 || k > d.p() {
                return Err(CliError::Usage(format!("--pca {k} must lie in [2, {}]", d.p())));
            }
            let res = pca_reduce(&d, k)?;
            log::info!("{} components keep {:.4} of the variance", res.dataset.p(), res.explained_fraction);
            let std = PreprocessSpec { center: true, scale: ScaleMode::Variance };
            Ok(preprocess(&res.dataset, std).dataset)
        }
    }
}

fn load(path: &std::path::Path, args: &PreprocessArgs) -> Result<Dataset, CliError> {
    let report = load_csv(path, args.label_column.as_deref())?;
    if report.dropped_rows > 0 {
        eprintln!("dropped {} rows with non-finite values", report.dropped_rows);
    }
    if !report.skipped_columns.is_empty() {
        eprintln!("skipped non-numeric columns: {}", report.skipped_columns.join(", "));
    }
    prepare(report.dataset, args)
}

fn load_source(src: &SourceArgs, prep: &PreprocessArgs) -> Result<Dataset, CliError> {
    match (&src.data, src.synthetic_ball) {
        (Some(_), true) => Err(CliError::Usage("give either a data file or --synthetic-ball, not both".into())),
        (None, false) => Err(CliError::Usage("a data file or --synthetic-ball is required".into())),
        (Some(path), false) => load(path, prep),
        (None, true) => {
            if src.p < 2 || src.n == 0 {
                return Err(CliError::Usage("--synthetic-ball needs --p >= 2 and --n >= 1".into()));
            }
            Ok(sample_ball(src.n, src.p, 1.0, src.sample_seed))
        }
    }
}

fn sage_params(d: &Dataset, args: &SageArgs) -> Result<SageParams, CliError> {
    validate_sage(args)?;
    let radius = args.radius.unwrap_or_else(|| crate::sage::default_radius(d));
    let half = args.half_range.map_or(HalfRange::FollowRadius, HalfRange::Explicit);
    let params = SageParams::with(d.p(), args.gamma, radius, half).map_err(|e| CliError::Data(e.to_string()))?;
    if params.is_inverted() {
        eprintln!("warning: p_eff = {} < 2, the transformation is inverted", params.effective_dim());
    }
    Ok(params)
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(io_error(path))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn cmd_tour(args: &TourArgs) -> Result<(), CliError> {
    if args.frames == 0 {
        return Err(CliError::Usage("--frames must be at least 1".into()));
    }
    validate_sage(&args.sage)?;
    let path = path_config(&args.path)?;
    let d = load(&args.data, &args.prep)?;
    let params = sage_params(&d, &args.sage)?;
    let run = TourRun::new(d, path)?.with_params(params).with_frame_budget(args.frames);

    let rx = pipeline::spawn_tour(&run, pipeline::DEFAULT_CHANNEL_CAPACITY)?;
    let svg_dir = args.out.clone();
    let labels = run.dataset.labels().map(<[String]>::to_vec);
    let colors = run.colors.clone();
    let want_svg = args.svg;
    let mut svg_err = None;
    let frames = rx.into_iter().inspect(|f| {
        if want_svg && svg_err.is_none() {
            let file = svg_dir.join(format!("frame_{:05}.svg", f.frame_index));
            if let Err(e) = render_static(f, labels.as_deref(), &colors, &file) {
                svg_err = Some(e);
            }
        }
    });
    std::fs::create_dir_all(&args.out).map_err(io_error(&args.out))?;
    let manifest = export_frames(frames, &args.out, args.format, &run)?;
    if let Some(e) = svg_err {
        return Err(e.into());
    }
    println!(
        "wrote {} frames to {} (dataset {})",
        manifest.frame_count,
        args.out.display(),
        &manifest.dataset_hash[..12]
    );
    Ok(())
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    validate_sage(&args.sage)?;
    positive("fps", args.fps)?;
    let path = path_config(&args.path)?;
    let d = load_source(&args.source, &args.prep)?;
    let params = sage_params(&d, &args.sage)?;
    let run = TourRun::new(d, path)?.with_params(params);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    rt.block_on(server::serve(run, args.bind.as_str(), args.fps))
        .map_err(|e| CliError::Io(format!("{}: {e}", args.bind)))
}

/// Per-frame K–S statistics of transformed squared radii.
#[derive(Debug, Clone)]
pub struct DiagnoseReport {
    pub p_eff: f64,
    pub raw_ks: Vec<f64>,
    pub sage_ks: Vec<f64>,
}

pub fn diagnose(d: &Dataset, params: &SageParams, path: PathConfig, frames: usize) -> Result<DiagnoseReport, CliError> {
    let run = TourRun::new(d.clone(), path)?.with_params(*params).with_frame_budget(frames);
    let radius = params.radius();
    let mut raw_ks = Vec::new();
    let mut sage_ks = Vec::new();
    for f in run_tour(&run)? {
        let y = d.values() * f.basis.basis();
        let mean = y.row_mean();
        let raw: Vec<[f64; 2]> = y.row_iter().map(|r| [r[0] - mean[0], r[1] - mean[1]]).collect();
        let sq = |pts: Vec<[f64; 2]>| -> Vec<f64> {
            pts.into_iter().map(|[x, y]| ((x * x + y * y) / (radius * radius)).min(1.0)).collect()
        };
        raw_ks.push(ks_uniformity(&sq(raw))?);
        sage_ks.push(ks_uniformity(&sq(sage_transform(&y, params)))?);
    }
    Ok(DiagnoseReport { p_eff: params.effective_dim(), raw_ks, sage_ks })
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<bool, CliError> {
    if args.frames == 0 {
        return Err(CliError::Usage("--frames must be at least 1".into()));
    }
    if let Some(w) = args.bin_width {
        positive("bin-width", w)?;
    }
    validate_sage(&args.sage)?;
    let path = path_config(&args.path)?;
    let d = load_source(&args.source, &args.prep)?;
    let params = sage_params(&d, &args.sage)?;
    let report = diagnose(&d, &params, path, args.frames)?;

    println!(
        "n={} p={} gamma={} R={} p_eff={} tolerance={}",
        d.n(),
        d.p(),
        params.gamma(),
        params.radius(),
        report.p_eff,
        KS_TOLERANCE
    );
    if (report.p_eff - 2.0).abs() < 1e-12 {
        println!("note: p_eff = 2, the radial transform is the identity");
    }
    let mut all_pass = true;
    for (i, (raw, sage)) in report.raw_ks.iter().zip(&report.sage_ks).enumerate() {
        let pass = *sage < KS_TOLERANCE;
        all_pass &= pass;
        println!(
            "frame {i}: ks_raw={raw:.6} ks_sage={sage:.6} {}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("overall: {}", if all_pass { "PASS" } else { "FAIL" });

    if let Some(out) = &args.hexbin_out {
        let run = TourRun::new(d.clone(), path)?.with_params(params).with_frame_budget(1);
        let first = run_tour(&run)?.next().expect("budget of one frame");
        let y = d.values() * first.basis.basis();
        let mean = y.row_mean();
        let pts: Vec<[f64; 2]> = y.row_iter().map(|r| [r[0] - mean[0], r[1] - mean[1]]).collect();
        let width = args.bin_width.unwrap_or_else(|| diagnostics::default_bin_width(&pts));
        let grid = hexbin(&pts, width);
        let file = File::create(out).map_err(io_error(out))?;
        grid.write_csv(BufWriter::new(file))?;
        println!("hexbin: {} bins of width {width} -> {}", grid.nonempty(), out.display());
    }
    Ok(all_pass)
}

pub fn cmd_sample(args: &SampleArgs) -> Result<(), CliError> {
    if args.n == 0 || args.p < 2 {
        return Err(CliError::Usage("sample needs --n >= 1 and --p >= 2".into()));
    }
    positive("radius", args.radius)?;
    let d = sample_ball(args.n, args.p, args.radius, args.seed);
    let mut w = csv::Writer::from_writer(output(&args.out)?);
    let to_io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(d.column_names()).map_err(to_io)?;
    for row in d.values().row_iter() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(to_io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn cmd_curves(args: &CurvesArgs) -> Result<(), CliError> {
    positive("p", args.p)?;
    positive("R", args.radius)?;
    if let Some(k) = args.circles {
        let radii = transformed_circles(args.p, args.radius, k)?;
        let mut w = output(&args.out)?;
        let write = |w: &mut dyn Write| -> io::Result<()> {
            writeln!(w, "r,transformed")?;
            for (i, t) in radii.iter().enumerate() {
                let r = args.radius * (i + 1) as f64 / k as f64;
                writeln!(w, "{r},{t}")?;
            }
            w.flush()
        };
        return write(&mut w).map_err(|e| CliError::Io(e.to_string()));
    }
    let kind: CurveKind = args.kind.parse()?;
    if args.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let mut table = curve_table(kind, args.p, args.radius, args.grid)?;
    if let Some(n) = args.monte_carlo {
        table = table.with_monte_carlo(n, args.mc_seed)?;
        eprintln!("monte-carlo: {n} samples, seed {}", args.mc_seed);
    }
    table.write_csv(output(&args.out)?)?;
    Ok(())
}

/// Parses `args` and runs the chosen subcommand; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Tour(a) => cmd_tour(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Diagnose(a) => cmd_diagnose(a).map(|_| ()),
        Command::Sample(a) => cmd_sample(a),
        Command::Curves(a) => cmd_curves(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
