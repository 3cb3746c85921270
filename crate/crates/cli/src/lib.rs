//! Command-line front end: file conversion stages and the full imaging pipeline.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use orthobeam::analysis::{ambiguity_probe, psf_table, psf_table_setups, ImagingMethod, ImagingSetup};
use orthobeam::beamform::{BeamVolume, FocusMode};
use orthobeam::complexity::{
    benchmark, opcount_czt, opcount_das, opcount_dm, opcount_proposed, published, BenchParams, OpCountReport, OpMethod,
};
use orthobeam::geometry::{build_imaging_grid, ArrayKind};
use orthobeam::io::config::{Beamformer, PointConfig, RunConfig};
use orthobeam::io::{self, raster_from_projection};
use orthobeam::postproc::{
    kmeans_segment, project_max, project_max_polar, scan_convert, scan_convert_mask, to_db_image, CartesianSpec,
    KMeansParams, Plane,
};
use orthobeam::signal::{Scatterer, Window};

pub mod pipeline;
pub mod report;
pub mod scene;

use report::{csv_string, AmbiguityCsvRow, OpRow, PsfRow};

/// A failed stage and its cause.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(stage: &'static str, error: anyhow::Error) -> Self {
        Self { stage, error }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} failed: {:#}", self.stage, self.error)
    }
}

pub trait StageExt<T> {
    fn stage(self, name: &'static str) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for Result<T, E> {
    fn stage(self, name: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(name, e.into()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "orthobeam", version, about = "3D sonar imaging with orthogonal line arrays")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate point echoes on an array and write a channel-data file.
    Synth(SynthArgs),
    /// Beamform a channel-data file into a volume file.
    Beamform(BeamformArgs),
    /// Point-spread-function metrics for the supported array layouts.
    Psf(PsfArgs),
    /// Real-operation count per slice.
    Opcount(OpcountArgs),
    /// Median wall time per slice on a simulated scene.
    Bench(BenchArgs),
    /// k-means segmentation of a volume into a mask file.
    Segment(SegmentArgs),
    /// Resample a polar volume or mask onto a Cartesian grid.
    Scanconvert(ScanconvertArgs),
    /// Maximum projection of a volume to an 8-bit PGM image.
    Project(ProjectArgs),
    /// Run every stage from simulation to projections.
    Pipeline(PipelineArgs),
}

fn parse_point(s: &str) -> Result<PointConfig, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [r, a, e] | [r, a, e, _] => Ok(PointConfig {
            range_m: *r,
            azimuth_deg: *a,
            elevation_deg: *e,
            reflectivity: v.get(3).copied().unwrap_or(1.0),
        }),
        _ => Err("expected RANGE_M,AZIMUTH_DEG,ELEVATION_DEG[,REFLECTIVITY]".into()),
    }
}

fn parse_pitch(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [p] => Ok([*p; 3]),
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err("expected one pitch or X,Y,Z".into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Rect,
    Hann,
    Hamming,
}

impl From<WindowArg> for Window {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::Rect => Window::Rect,
            WindowArg::Hann => Window::Hann,
            WindowArg::Hamming => Window::Hamming,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FocusArg {
    Nearfield,
    Farfield,
}

impl From<FocusArg> for FocusMode {
    fn from(f: FocusArg) -> Self {
        match f {
            FocusArg::Nearfield => FocusMode::Nearfield,
            FocusArg::Farfield => FocusMode::Farfield,
        }
    }
}

/// Scene, array and grid settings: a config file with per-flag overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct SceneArgs {
    /// JSON run configuration; desk-scale defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for noise and clutter; required when the scene has either.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub array: Option<ArrayKind>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub spacing_m: Option<f64>,
    #[arg(long)]
    pub fc_hz: Option<f64>,
    #[arg(long)]
    pub cycles: Option<f64>,
    #[arg(long)]
    pub fs_hz: Option<f64>,
    #[arg(long, value_enum)]
    pub window: Option<WindowArg>,
    #[arg(long)]
    pub c_mps: Option<f64>,
    /// Scatterer as RANGE_M,AZIMUTH_DEG,ELEVATION_DEG[,REFLECTIVITY]; repeat for more. Replaces the config's points.
    #[arg(long, value_parser = parse_point)]
    pub point: Vec<PointConfig>,
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long)]
    pub az_span_deg: Option<f64>,
    #[arg(long)]
    pub el_span_deg: Option<f64>,
    #[arg(long)]
    pub mb: Option<usize>,
    #[arg(long)]
    pub nb: Option<usize>,
    /// Focus range; repeat for more. Replaces the config's ranges.
    #[arg(long)]
    pub range_m: Vec<f64>,
    #[arg(long, value_enum)]
    pub focus: Option<FocusArg>,
    /// Half-width of the range gate, samples.
    #[arg(long)]
    pub gate: Option<usize>,
}

impl SceneArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::from_json(scene::DESK_CONFIG)?,
        };
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v.into();
                }
            };
        }
        set!(cfg.array.kind, self.array);
        set!(cfg.array.m, self.m);
        set!(cfg.array.n, self.n);
        if self.spacing_m.is_some() {
            cfg.array.spacing_m = self.spacing_m;
        }
        set!(cfg.pulse.fc_hz, self.fc_hz);
        set!(cfg.pulse.cycles, self.cycles);
        set!(cfg.pulse.fs_hz, self.fs_hz);
        set!(cfg.pulse.window, self.window);
        set!(cfg.medium.c_mps, self.c_mps);
        if !self.point.is_empty() {
            cfg.scene.points = self.point.clone();
        }
        if self.snr_db.is_some() {
            cfg.scene.snr_db = self.snr_db;
        }
        set!(cfg.grid.azimuth_span_deg, self.az_span_deg);
        set!(cfg.grid.elevation_span_deg, self.el_span_deg);
        set!(cfg.grid.mb, self.mb);
        set!(cfg.grid.nb, self.nb);
        if !self.range_m.is_empty() {
            cfg.grid.ranges_m = self.range_m.clone();
        }
        set!(cfg.method.focus, self.focus);
        set!(cfg.method.gate_samples, self.gate);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BeamformArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Channel-data file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "PM")]
    pub method: Beamformer,
    /// Matched-filter with the configured pulse first.
    #[arg(long)]
    pub matched_filter: bool,
    /// Apply the configured (or default) time-varying gain first.
    #[arg(long)]
    pub tgc: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PsfArgs {
    #[arg(long, default_value_t = 30.0)]
    pub range_m: f64,
    /// Cut half-width is half of this span.
    #[arg(long, default_value_t = 60.0)]
    pub span_deg: f64,
    #[arg(long, default_value_t = 0.1)]
    pub step_deg: f64,
    /// Also probe cross-term ghosts for two points at (5°, 10°) and (10°, 5°).
    #[arg(long)]
    pub ambiguity: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpArg {
    Linear,
    None,
}

#[derive(Debug, Args)]
pub struct OpcountArgs {
    #[arg(long)]
    pub method: OpMethod,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub nb: u64,
    #[arg(long, value_enum, default_value = "linear")]
    pub interp: InterpArg,
    /// Block length for the frequency-domain methods.
    #[arg(long, default_value_t = 1024)]
    pub l: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Methods to time; repeat for more.
    #[arg(long = "method", default_values = ["CM", "PM"])]
    pub methods: Vec<Beamformer>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Volume file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScanconvertArgs {
    /// Volume file.
    #[arg(long, required_unless_present = "mask", conflicts_with = "mask")]
    pub input: Option<PathBuf>,
    /// Mask file; its grid comes from the sidecar.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Voxel pitch in metres, one value or X,Y,Z.
    #[arg(long, value_parser = parse_pitch, default_value = "0.05")]
    pub pitch_m: [f64; 3],
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Polar (SBVL) or Cartesian (SBCV) volume.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "XY")]
    pub plane: Plane,
    #[arg(long, default_value_t = 40.0)]
    pub dynamic_range_db: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            1
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => io::write_atomic(p, text.as_bytes()).stage("output"),
        None => std::io::stdout().write_all(text.as_bytes()).stage("output"),
    }
}

pub fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Synth(a) => {
            let cfg = a.scene.resolve().stage("config")?;
            let cd = scene::synthesize(&cfg, a.scene.seed).stage("synth")?;
            io::write_channel_data(&a.out, &cd).stage("synth")
        }
        Command::Beamform(a) => {
            let cfg = a.scene.resolve().stage("config")?;
            let mut cd = io::read_channel_data::<f64>(&a.input).stage("read")?;
            if a.matched_filter {
                cd = scene::matched(&cfg, &cd).stage("matched_filter")?;
            }
            if a.tgc {
                let p = cfg.method.tgc.unwrap_or_default();
                cd = orthobeam::signal::tgc(&cd, cfg.medium.c_mps, &p).stage("tgc")?;
            }
            let grid = scene::grid(&cfg).stage("beamform")?;
            let v = scene::beamform(&cfg, &cd, a.method, &grid).stage("beamform")?;
            io::write_volume(&a.out, &v).stage("beamform")
        }
        Command::Psf(a) => psf(&a),
        Command::Opcount(a) => opcount(&a),
        Command::Bench(a) => bench(&a),
        Command::Segment(a) => {
            let v = io::read_volume::<f64>(&a.input).stage("read")?;
            let params = KMeansParams {
                k: a.k,
                max_iter: a.max_iter,
                tol: a.tol,
            };
            let seg = kmeans_segment(&v, &params).stage("segment")?;
            io::write_segmentation(&a.out, &seg).stage("segment")
        }
        Command::Scanconvert(a) => {
            let cart = match (&a.input, &a.mask) {
                (Some(p), _) => {
                    let v = io::read_volume::<f64>(p).stage("read")?;
                    let spec = CartesianSpec::covering(v.grid(), a.pitch_m).stage("scanconvert")?;
                    scan_convert(&v, &spec).stage("scanconvert")?
                }
                (None, Some(p)) => {
                    let seg = io::read_segmentation::<f64>(p).stage("read")?;
                    let like = BeamVolume::new(
                        seg.grid.clone(),
                        orthobeam::beamform::Method::ProductElsa,
                        FocusMode::Farfield,
                        seg.mask.mapv(|_| 0.0),
                    )
                    .stage("scanconvert")?;
                    let spec = CartesianSpec::covering(&seg.grid, a.pitch_m).stage("scanconvert")?;
                    scan_convert_mask(&seg, &like, &spec).stage("scanconvert")?
                }
                (None, None) => unreachable!("clap requires one source"),
            };
            io::write_cartesian(&a.out, &cart).stage("scanconvert")
        }
        Command::Project(a) => {
            let bytes = std::fs::read(&a.input).stage("read")?;
            let img = match bytes.get(..4) {
                Some(b"SBCV") => project_max(&io::decode_cartesian::<f64>(&bytes).stage("read")?, a.plane),
                Some(b"SBVL") => project_max_polar(&io::decode_volume::<f64>(&bytes).stage("read")?, a.plane),
                _ => return Err(Failure::new("read", anyhow!("{} is not a volume file", a.input.display()))),
            };
            let db = to_db_image(&img, a.dynamic_range_db).stage("project")?;
            io::write_pgm(&a.out, &raster_from_projection(&db)).stage("project")
        }
        Command::Pipeline(a) => {
            let cfg = a.scene.resolve().stage("config")?;
            let report = pipeline::run(&cfg, a.scene.seed, &a.out_dir)?;
            for b in &report.beamformers {
                let res = b.resolvable.map_or("n/a".to_string(), |r| r.to_string());
                println!(
                    "{}: peak at ({:.2} m, {:.2}°, {:.2}°), resolvable = {res}",
                    b.method, b.peak_range_m, b.peak_azimuth_deg, b.peak_elevation_deg
                );
            }
            Ok(())
        }
    }
}

fn psf(a: &PsfArgs) -> Result<(), Failure> {
    let setups = psf_table_setups();
    let rows = psf_table(&setups, a.range_m, a.span_deg, a.step_deg).stage("psf")?;
    let rows: Vec<PsfRow> = rows.iter().map(PsfRow::from).collect();
    let mut text = csv_string(&rows).stage("psf")?;
    if a.ambiguity {
        let base = ImagingSetup::desk(ArrayKind::Elsa, ImagingMethod::Pm);
        let grid = build_imaging_grid::<f64>(30.0, 30.0, 60, 60, vec![a.range_m]).stage("psf")?;
        let p1 = Scatterer::from_degrees(a.range_m, 5.0, 10.0, 1.0);
        let p2 = Scatterer::from_degrees(a.range_m, 10.0, 5.0, 1.0);
        let kinds = [ArrayKind::Elsa, ArrayKind::Clsa, ArrayKind::Csa];
        let amb = ambiguity_probe(&base, &kinds, &p1, &p2, &grid).stage("psf")?;
        let amb: Vec<AmbiguityCsvRow> = amb.iter().map(AmbiguityCsvRow::from).collect();
        text.push('\n');
        text.push_str(&csv_string(&amb).stage("psf")?);
    }
    emit(a.out.as_deref(), &text)
}

/// Published total for the desk configuration, if the arguments match it.
fn published_total(r: &OpCountReport, interp: bool) -> Option<f64> {
    if r.n != 24 || r.nb != 60 {
        return None;
    }
    match r.method {
        OpMethod::Das if interp => Some(published::DAS),
        OpMethod::Proposed if interp => Some(published::PROPOSED),
        OpMethod::Dm => Some(published::DM),
        OpMethod::Czt => Some(published::CZT),
        _ => None,
    }
}

pub fn opcount_report(method: OpMethod, n: u64, nb: u64, interp: bool, l: u64) -> orthobeam::Result<OpCountReport> {
    match method {
        OpMethod::Das => opcount_das(n, nb, interp),
        OpMethod::Proposed => opcount_proposed(n, nb, interp),
        OpMethod::Dm => opcount_dm(n, nb, l),
        OpMethod::Czt => opcount_czt(n, nb, l),
    }
}

fn opcount(a: &OpcountArgs) -> Result<(), Failure> {
    let interp = a.interp == InterpArg::Linear;
    let r = opcount_report(a.method, a.n, a.nb, interp, a.l).stage("opcount")?;
    if let Some(p) = published_total(&r, interp) {
        if (r.total as f64 - p).abs() > 0.5 {
            eprintln!(
                "note: published total for {} at N = 24, Nb = 60 is {p}; the formula gives {} ({:+.1}%)",
                r.method,
                r.total,
                (r.total as f64 / p - 1.0) * 100.0
            );
        }
    }
    emit(a.out.as_deref(), &csv_string(&[OpRow::new(&r, None)]).stage("opcount")?)
}

fn bench(a: &BenchArgs) -> Result<(), Failure> {
    let cfg = a.scene.resolve().stage("config")?;
    let raw = scene::synthesize(&cfg, a.scene.seed).stage("synth")?;
    let cd = if cfg.method.matched_filter {
        scene::matched(&cfg, &raw).stage("matched_filter")?
    } else {
        raw
    };
    let grid = scene::grid(&cfg).stage("bench")?;
    let params = BenchParams {
        repetitions: a.repetitions.unwrap_or(cfg.bench.repetitions),
        threads: a.threads.or(cfg.bench.threads),
        options: scene::options(&cfg),
        dm: cfg.method.dm,
    };
    let g = cd.geometry();
    if g.kind() != ArrayKind::Ura || g.m() != g.n() {
        return Err(Failure::new("bench", anyhow!("bench needs a square URA recording")));
    }
    if grid.mb() != grid.nb() {
        return Err(Failure::new("bench", anyhow!("bench needs a square beam grid")));
    }
    let mut rows = Vec::new();
    for &m in &a.methods {
        let method = match m {
            Beamformer::Cm => OpMethod::Das,
            Beamformer::Pm => OpMethod::Proposed,
            Beamformer::Dm => OpMethod::Dm,
        };
        let timing = benchmark(method, &cd, &grid, &params, a.scene.seed.unwrap_or(0)).stage("bench")?;
        let ops = opcount_report(method, g.m() as u64, grid.mb() as u64, true, params.dm.block_len as u64)
            .stage("bench")?;
        rows.push(OpRow::new(&ops, Some(timing.median)));
    }
    emit(a.out.as_deref(), &csv_string(&rows).stage("bench")?)
}
