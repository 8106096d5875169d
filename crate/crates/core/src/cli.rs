//! The `pbaloc` experiment driver.
//!
//! Every subcommand reads an [`ExperimentConfig`] (from `--config FILE` or the
//! built-in defaults), applies its command-line overrides, and runs. With
//! `--dump-config` the effective config is printed as JSON instead, every
//! field spelled out, ready to be edited and fed back through `--config`.
//!
//! Exit codes: 0 success, 1 invalid arguments, 2 oracle or transport
//! failure, 3 localization stopped at `max_iterations` without converging.
//!
//! CSV outputs start with `#` comment lines recording the version, command,
//! seed and a hash of the effective config. Rerunning with the same config
//! reproduces the data rows byte for byte.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, McConfig};
use crate::baseline::{self, WindowGridSpec};
use crate::engine::{self, EngineConfig, LocalizationResult};
use crate::geometry::{Dims, Point};
use crate::oracles::{BlockTruthOracle, BscOracle, Endpoint, ExternalClient, ExternalOracle, Oracle, DEFAULT_CONF_FLOOR};
use crate::scene::{self, Scene};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_ORACLE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Trace CSV columns, in order.
pub const TRACE_COLUMNS: [&str; 16] = [
    "t", "axis", "split_bin", "side", "q_blocks", "y", "epsilon", "calls_cum", "median_row", "median_col",
    "map_row", "map_col", "var_row", "var_col", "width95_row", "width95_col",
];

/// Comparison CSV columns, in order.
pub const COMPARISON_COLUMNS: [&str; 6] = ["method", "calls", "center_row", "center_col", "err_l2", "speedup"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Bsc,
    BlockTruth,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub eps_true: f64,
    pub conf_floor: f64,
    pub seed: u64,
    pub endpoint: Option<Endpoint>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { kind: OracleKind::BlockTruth, eps_true: 0.05, conf_floor: DEFAULT_CONF_FLOOR, seed: oracle_seed(0), endpoint: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub dims: Dims,
    pub center: Point,
    pub half_size: usize,
    pub noise_density: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { dims: Dims { rows: 400, cols: 400 }, center: Point::new(200, 200), half_size: 12, noise_density: 0.2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub window_sides: Vec<usize>,
    pub shift: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { window_sides: vec![100, 150, 200], shift: 25 }
    }
}

impl BaselineConfig {
    pub fn specs(&self) -> Vec<WindowGridSpec> {
        self.window_sides.iter().map(|&w| WindowGridSpec::new(w, self.shift)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub scene: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub engine: EngineConfig,
    pub scene: SceneConfig,
    pub oracle: OracleConfig,
    pub baseline: BaselineConfig,
    pub analysis: McConfig,
    pub paths: PathsConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Oracle stream seed derived from a run seed, so the oracle's randomness is
/// not the same stream as the engine's side choices.
pub fn oracle_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

#[derive(Debug, Parser)]
#[command(name = "pbaloc", version, about = "Object localization by probabilistic bisection")]
pub struct Cli {
    /// Start from this JSON config instead of the defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the effective config as JSON and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a star-in-noise scene to PGM plus a sidecar JSON.
    GenScene(GenSceneArgs),
    /// Run the bisection search on a scene and write the per-iteration trace.
    Localize(LocalizeArgs),
    /// Run the sliding-window baseline on a scene.
    Baseline(BaselineArgs),
    /// Run both and report the call-count speedup.
    Compare(CompareArgs),
    /// Monte Carlo MSE curve under the channel oracle, with the calibrated bound.
    Analyze(AnalyzeArgs),
    /// Handshake with an external classifier and classify a blank raster.
    CheckOracle(CheckOracleArgs),
}

#[derive(Debug, Args)]
pub struct GenSceneArgs {
    /// ROWSxCOLS
    #[arg(long)]
    dims: Option<Dims>,
    /// ROW,COL
    #[arg(long)]
    center: Option<Point>,
    #[arg(long)]
    half_size: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    oracle: Option<OracleKind>,
    /// True flip probability of the simulated oracles.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    conf_floor: Option<f64>,
    /// `tcp:HOST:PORT` or `stdio:PROGRAM [ARGS...]`
    #[arg(long)]
    endpoint: Option<Endpoint>,
    /// Defaults to a value derived from `--seed`.
    #[arg(long)]
    oracle_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    stop_map_mass: Option<f64>,
    #[arg(long)]
    stop_width: Option<usize>,
    #[arg(long)]
    block_side: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Comma-separated window sides, e.g. 100,150,200.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    #[arg(long)]
    shift: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[command(flatten)]
    oracle: OracleArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[command(flatten)]
    oracle: OracleArgs,
    #[command(flatten)]
    windows: WindowArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[command(flatten)]
    oracle: OracleArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    windows: WindowArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Bins per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Number of axes, 1 or 2.
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckOracleArgs {
    #[arg(long)]
    endpoint: Option<Endpoint>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl OracleArgs {
    fn apply(self, cfg: &mut OracleConfig) {
        set(&mut cfg.kind, self.oracle);
        set(&mut cfg.eps_true, self.eps);
        set(&mut cfg.conf_floor, self.conf_floor);
        set(&mut cfg.seed, self.oracle_seed);
        if self.endpoint.is_some() {
            cfg.endpoint = self.endpoint;
        }
    }
}

impl EngineArgs {
    fn apply(self, cfg: &mut ExperimentConfig, explicit_oracle_seed: bool) {
        if let Some(seed) = self.seed {
            cfg.engine.rng_seed = seed;
            if !explicit_oracle_seed {
                cfg.oracle.seed = oracle_seed(seed);
            }
        }
        set(&mut cfg.engine.max_iterations, self.max_iter);
        set(&mut cfg.engine.stop_map_mass, self.stop_map_mass);
        set(&mut cfg.engine.stop_credible_width, self.stop_width);
        set(&mut cfg.engine.block_input_side, self.block_side);
    }
}

impl WindowArgs {
    fn apply(self, cfg: &mut BaselineConfig) {
        set(&mut cfg.window_sides, self.windows);
        set(&mut cfg.shift, self.shift);
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenScene(_) => "gen-scene",
            Command::Localize(_) => "localize",
            Command::Baseline(_) => "baseline",
            Command::Compare(_) => "compare",
            Command::Analyze(_) => "analyze",
            Command::CheckOracle(_) => "check-oracle",
        }
    }

    /// Folds the command-line overrides into `cfg`.
    fn apply(self, cfg: &mut ExperimentConfig) {
        match self {
            Command::GenScene(a) => {
                set(&mut cfg.scene.dims, a.dims);
                set(&mut cfg.scene.center, a.center);
                set(&mut cfg.scene.half_size, a.half_size);
                set(&mut cfg.scene.noise_density, a.noise);
                set(&mut cfg.scene.seed, a.seed);
                if a.output.is_some() {
                    cfg.paths.output = a.output;
                }
            }
            Command::Localize(a) => {
                let explicit = a.oracle.oracle_seed.is_some();
                a.oracle.apply(&mut cfg.oracle);
                a.engine.apply(cfg, explicit);
                set_paths(cfg, a.scene, a.output);
            }
            Command::Baseline(a) => {
                let explicit = a.oracle.oracle_seed.is_some();
                a.oracle.apply(&mut cfg.oracle);
                a.windows.apply(&mut cfg.baseline);
                if let (Some(seed), false) = (a.seed, explicit) {
                    cfg.oracle.seed = oracle_seed(seed);
                }
                set_paths(cfg, a.scene, a.output);
            }
            Command::Compare(a) => {
                let explicit = a.oracle.oracle_seed.is_some();
                a.oracle.apply(&mut cfg.oracle);
                a.engine.apply(cfg, explicit);
                a.windows.apply(&mut cfg.baseline);
                set_paths(cfg, a.scene, a.output);
            }
            Command::Analyze(a) => {
                set(&mut cfg.analysis.grid, a.grid);
                set(&mut cfg.analysis.dims, a.dims);
                set(&mut cfg.analysis.eps_true, a.eps);
                set(&mut cfg.analysis.trials, a.trials);
                set(&mut cfg.analysis.n_max, a.nmax);
                set(&mut cfg.analysis.seed, a.seed);
                if a.output.is_some() {
                    cfg.paths.output = a.output;
                }
            }
            Command::CheckOracle(a) => {
                if a.endpoint.is_some() {
                    cfg.oracle.endpoint = a.endpoint;
                }
            }
        }
    }
}

fn set_paths(cfg: &mut ExperimentConfig, scene: Option<PathBuf>, output: Option<PathBuf>) {
    if scene.is_some() {
        cfg.paths.scene = scene;
    }
    if output.is_some() {
        cfg.paths.output = output;
    }
}

/// What a successful command produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    dispatch_to(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn dispatch_to<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_INVALID
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::NotConverged) => {
            let _ = writeln!(err, "warning: stopped at max_iterations without converging");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_oracle_failure() { EXIT_ORACLE } else { EXIT_INVALID }
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let name = cli.command.name();
    cli.command.apply(&mut cfg);
    if cli.dump_config {
        writeln!(out, "{}", cfg.to_json())?;
        return Ok(Outcome::Done);
    }
    match name {
        "gen-scene" => gen_scene(&cfg, out),
        "localize" => localize(&cfg, out),
        "baseline" => run_baseline(&cfg, out),
        "compare" => compare(&cfg, out),
        "analyze" => analyze(&cfg, out),
        _ => check_oracle(&cfg, out),
    }
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::invalid(format!("missing {what} path")))
}

/// `#` header lines carried by every CSV output.
pub fn provenance_header(cfg: &ExperimentConfig, command: &str, seed: u64) -> Vec<String> {
    vec![
        format!("pbaloc version={}", env!("CARGO_PKG_VERSION")),
        format!("command={command}"),
        format!("seed={seed}"),
        format!("config_hash={}", cfg.hash()),
    ]
}

/// Writes `# `-prefixed comment lines followed by a headed CSV.
pub fn write_csv<W: Write, T: Serialize>(mut w: W, comments: &[String], rows: &[T]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut writer = csv::Writer::from_writer(w);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn write_csv_file<T: Serialize>(path: &Path, comments: &[String], rows: &[T]) -> Result<()> {
    write_csv(std::io::BufWriter::new(fs::File::create(path)?), comments, rows)
}

/// Builds the configured oracle for a scene. Channel and block-truth
/// oracles take their ground truth from the scene.
pub fn build_oracle<'a>(cfg: &ExperimentConfig, scene: &'a Scene) -> Result<Box<dyn Oracle + 'a>> {
    let o = &cfg.oracle;
    Ok(match o.kind {
        OracleKind::Bsc => Box::new(BscOracle::new(scene.target_center(), o.eps_true, o.seed)?),
        OracleKind::BlockTruth => Box::new(BlockTruthOracle::new(scene, o.eps_true, o.conf_floor, o.seed)?),
        OracleKind::External => {
            let endpoint = o.endpoint.as_ref().ok_or_else(|| Error::invalid("external oracle needs --endpoint"))?;
            let client = ExternalClient::connect(endpoint)?;
            if client.input_side() != cfg.engine.block_input_side {
                return Err(Error::invalid(format!(
                    "server input side {} differs from block_input_side {}",
                    client.input_side(),
                    cfg.engine.block_input_side
                )));
            }
            Box::new(ExternalOracle::new(client, scene))
        }
    })
}

/// Row of the comparison CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub calls: u64,
    pub center_row: usize,
    pub center_col: usize,
    pub err_l2: f64,
    pub speedup: f64,
}

fn gen_scene(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Outcome> {
    let s = &cfg.scene;
    let path = required(&cfg.paths.output, "output")?;
    let scene = scene::generate_star_scene(s.dims, s.center, s.half_size, s.noise_density, s.seed)?;
    scene.save(path)?;
    writeln!(out, "wrote {} and {}", path.display(), Scene::sidecar_path(path).display())?;
    Ok(Outcome::Done)
}

fn load_scene(cfg: &ExperimentConfig) -> Result<Scene> {
    Scene::load(required(&cfg.paths.scene, "scene")?)
}

fn run_pba(cfg: &ExperimentConfig, scene: &Scene) -> Result<LocalizationResult> {
    let mut oracle = build_oracle(cfg, scene)?;
    engine::run(scene.dims(), &mut oracle, &cfg.engine)
}

fn localize(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Outcome> {
    let scene = load_scene(cfg)?;
    let res = run_pba(cfg, &scene)?;
    if let Some(path) = &cfg.paths.output {
        write_csv_file(path, &provenance_header(cfg, "localize", cfg.engine.rng_seed), &res.trace)?;
    }
    writeln!(
        out,
        "center {},{} iterations {} calls {} status {:?} err_l2 {:.3}",
        res.center.row,
        res.center.col,
        res.iterations_used,
        res.oracle_calls,
        res.status,
        res.center.distance(&scene.target_center()),
    )?;
    Ok(if res.converged() { Outcome::Done } else { Outcome::NotConverged })
}

fn sliding_window_row(cfg: &ExperimentConfig, scene: &Scene) -> Result<ComparisonRow> {
    let mut oracle = build_oracle(cfg, scene)?;
    let res = baseline::sliding_window_localize(scene.dims(), &mut oracle, &cfg.baseline.specs())?;
    Ok(ComparisonRow {
        method: "sliding_window".into(),
        calls: res.calls,
        center_row: res.center.row,
        center_col: res.center.col,
        err_l2: res.center.distance(&scene.target_center()),
        speedup: 1.0,
    })
}

fn run_baseline(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Outcome> {
    let scene = load_scene(cfg)?;
    let row = sliding_window_row(cfg, &scene)?;
    if let Some(path) = &cfg.paths.output {
        write_csv_file(path, &provenance_header(cfg, "baseline", cfg.oracle.seed), std::slice::from_ref(&row))?;
    }
    writeln!(out, "center {},{} calls {} err_l2 {:.3}", row.center_row, row.center_col, row.calls, row.err_l2)?;
    Ok(Outcome::Done)
}

/// Runs both methods on a scene with separate oracle instances.
pub fn compare_rows(cfg: &ExperimentConfig, scene: &Scene) -> Result<(Vec<ComparisonRow>, LocalizationResult)> {
    let sw = sliding_window_row(cfg, scene)?;
    let pba = run_pba(cfg, scene)?;
    let pba_row = ComparisonRow {
        method: "pba".into(),
        calls: pba.oracle_calls,
        center_row: pba.center.row,
        center_col: pba.center.col,
        err_l2: pba.center.distance(&scene.target_center()),
        speedup: baseline::speedup(pba.oracle_calls, sw.calls)?,
    };
    Ok((vec![pba_row, sw], pba))
}

fn compare(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Outcome> {
    let scene = load_scene(cfg)?;
    let (rows, pba) = compare_rows(cfg, &scene)?;
    if let Some(path) = &cfg.paths.output {
        write_csv_file(path, &provenance_header(cfg, "compare", cfg.engine.rng_seed), &rows)?;
    }
    for r in &rows {
        writeln!(out, "{:<15} calls {:>6} center {},{} err_l2 {:.3}", r.method, r.calls, r.center_row, r.center_col, r.err_l2)?;
    }
    writeln!(out, "speedup {:.2}x", rows[0].speedup)?;
    Ok(if pba.converged() { Outcome::Done } else { Outcome::NotConverged })
}

fn analyze(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Outcome> {
    let mc = &cfg.analysis;
    let curve = analysis::run_mc(mc)?;
    let rows = analysis::curve_rows(&curve, mc)?;
    if let Some(path) = &cfg.paths.output {
        write_csv_file(path, &provenance_header(cfg, "analyze", mc.seed), &rows)?;
    }
    let last = rows.last().expect("n = 0 is always present");
    writeln!(out, "mse(0) {:.4} mse({}) {:.6} capacity {:.6}", rows[0].mse, last.n, last.mse, analysis::capacity(mc.eps_true)?)?;
    let window = *analysis::DECAY_FIT_WINDOW.start()..=(*analysis::DECAY_FIT_WINDOW.end()).min(mc.n_max);
    match analysis::fit_decay_rate(&curve, window.clone()) {
        Ok(rate) => writeln!(out, "decay rate {rate:.5} per query over n in {window:?}")?,
        Err(e) => writeln!(out, "decay rate unavailable: {e}")?,
    }
    Ok(Outcome::Done)
}

fn check_oracle(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Outcome> {
    let endpoint = cfg.oracle.endpoint.as_ref().ok_or_else(|| Error::invalid("check-oracle needs --endpoint"))?;
    let mut client = ExternalClient::connect(endpoint)?;
    let side = client.input_side();
    writeln!(out, "connected to {endpoint}, input side {side}")?;
    let r = client.classify(&vec![0u8; side * side], side)?;
    writeln!(out, "blank raster -> label {} confidence [{}, {}]", r.label as u8, r.p_obj(), r.p_bg())?;
    Ok(Outcome::Done)
}
