//! Command-line front end. The binary only calls [`run`].

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::eval::{
    brute_force_oracles, compute_metrics, evaluate_model, metrics_close, roundtrip_pairs, write_scene_diagnostics, EvalError, EvalPair,
    EvalReport,
};
use crate::layout::{RoomType, SceneLayout};
use crate::model::{generate, layer_checks, network_checks, LayerCheck, ModelConfig, ModelError, GRADCHECK_TOL, NETWORK_COORDS_PER_TENSOR};
use crate::parallel::par_map;
use crate::raster::{render_empty_room, render_layout, write_layout_ppm, write_room_ppm, RasterConfig, RasterError};
use crate::synthgen::{build_dataset_for, read_dataset, write_dataset, Dataset, Split, SynthError};
use crate::training::{load_checkpoint, prepare_samples, save_checkpoint, Ablation, StepMetrics, TrainError, Trainer};

/// Written into every output directory.
pub const PROVENANCE_FILE: &str = "run_config.json";

/// Resolution and width of the networks under `gradcheck` unless
/// `--resolution` says otherwise.
pub const GRADCHECK_RESOLUTION: usize = 16;
pub const GRADCHECK_BASE_CHANNELS: usize = 4;

/// Agreement required between the fast metrics and the exhaustive oracle.
pub const ORACLE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 1 for bad input, 2 for anything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Parser)]
#[command(
    name = "rotlayout",
    version,
    about = "Rotation-aware furniture layout generation: synthetic data, training and evaluation",
    after_help = "Environment:\n  RL_THREADS  maximum worker threads (default: available parallelism)\n\n\
                  Exit status: 0 on success, 1 on invalid input, 2 on a runtime failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthetic dataset commands.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Write PPM images of empty rooms, ground-truth layouts and, with
    /// --ckpt, generated layouts.
    Render(RenderArgs),
    /// Train the generator and both critics.
    Train(TrainArgs),
    /// Score a checkpoint, or the raster round trip, on the test split.
    Eval(EvalArgs),
    /// Finite-difference checks of every layer and of the three networks.
    Gradcheck(GradcheckArgs),
    /// Collect the reports and loss logs of several runs into one table.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Generate base scenes, their four rotations and a train/test split.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
struct ConfigFlags {
    /// Run configuration, TOML or (with a .json extension) JSON.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for data generation, initialisation and batching.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DataFlags {
    /// Base scenes per room type; each is stored in four orientations.
    #[arg(long, value_name = "N")]
    n_per_type: Option<usize>,
    /// Room types to generate or keep, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', value_name = "TYPE")]
    room_type: Vec<RoomTypeArg>,
}

#[derive(Debug, Args)]
struct ModelFlags {
    /// Grid side in pixels of both the raster and the model.
    #[arg(long, value_name = "PX")]
    resolution: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainFlags {
    /// Training steps.
    #[arg(long, value_name = "N")]
    iterations: Option<u64>,
    /// Weight of the room-conditioned adversarial term.
    #[arg(long, value_name = "W")]
    lambda_adv1: Option<f64>,
    /// Weight of the layout-only adversarial term.
    #[arg(long, value_name = "W")]
    lambda_adv2: Option<f64>,
    /// Switch off rotation filters, the layout-only critic, or both.
    #[arg(long, value_enum)]
    ablate: Option<AblateArg>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[command(flatten)]
    data: DataFlags,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[command(flatten)]
    data_flags: DataFlags,
    #[command(flatten)]
    model: ModelFlags,
    /// Dataset directory; without it the dataset is generated from the config.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Checkpoint whose generator output is rendered too.
    #[arg(long, value_name = "FILE")]
    ckpt: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[command(flatten)]
    data_flags: DataFlags,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    train: TrainFlags,
    /// Dataset directory; without it the dataset is generated from the config.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Checkpoint to resume from.
    #[arg(long, value_name = "FILE")]
    ckpt: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[command(flatten)]
    data_flags: DataFlags,
    #[command(flatten)]
    model: ModelFlags,
    /// Dataset directory; without it the dataset is generated from the config.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Checkpoint to score, or `none` for the ground-truth raster round trip.
    #[arg(long, value_name = "FILE|none")]
    ckpt: String,
    /// Score the raster round trip and cross-check every metric against
    /// the exhaustive matcher.
    #[arg(long)]
    oracle_roundtrip: bool,
    /// Output directory; without it the table is only printed.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[command(flatten)]
    config: ConfigFlags,
    /// Grid side of the checked networks.
    #[arg(long, value_name = "PX")]
    resolution: Option<usize>,
    /// Difference every network coordinate instead of a seeded sample.
    #[arg(long)]
    full: bool,
    /// Output directory for gradcheck.csv; without it results are only printed.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory holding run directories (or a single run directory).
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RoomTypeArg {
    Bedroom,
    Bathroom,
    Study,
    Tatami,
}

impl From<RoomTypeArg> for RoomType {
    fn from(a: RoomTypeArg) -> Self {
        match a {
            RoomTypeArg::Bedroom => RoomType::Bedroom,
            RoomTypeArg::Bathroom => RoomType::Bathroom,
            RoomTypeArg::Study => RoomType::Study,
            RoomTypeArg::Tatami => RoomType::Tatami,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AblateArg {
    None,
    Rotation,
    Mode,
    Both,
}

impl From<AblateArg> for Ablation {
    fn from(a: AblateArg) -> Self {
        match a {
            AblateArg::None => Ablation::None,
            AblateArg::Rotation => Ablation::Rotation,
            AblateArg::Mode => Ablation::Mode,
            AblateArg::Both => Ablation::Both,
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Dataset(DatasetCommand::Gen(a)) => dataset_gen(a),
        Command::Render(a) => render(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Report(a) => report(a),
    }
}

fn require_exists(flag: &str, path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{flag}: {} does not exist", path.display())))
    }
}

/// The config file (or defaults) with the flags applied, validated.
fn build_config(
    c: &ConfigFlags,
    data: Option<&DataFlags>,
    model: Option<&ModelFlags>,
    train: Option<&TrainFlags>,
) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => {
            require_exists("--config", p)?;
            RunConfig::from_file(p)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.set_seed(s);
    }
    if let Some(d) = data {
        if let Some(n) = d.n_per_type {
            cfg.data.n_per_type = n;
        }
        if !d.room_type.is_empty() {
            let mut types: Vec<RoomType> = d.room_type.iter().map(|&t| t.into()).collect();
            types.sort();
            types.dedup();
            cfg.data.room_types = types;
        }
    }
    if let Some(r) = model.and_then(|m| m.resolution) {
        cfg.raster.resolution = r;
        cfg.model.resolution = r;
    }
    if let Some(t) = train {
        if let Some(n) = t.iterations {
            cfg.train.iterations = n;
        }
        if let Some(w) = t.lambda_adv1 {
            cfg.train.lambda_adv1 = w;
        }
        if let Some(w) = t.lambda_adv2 {
            cfg.train.lambda_adv2 = w;
        }
        if let Some(a) = t.ablate {
            cfg.train.ablation = a.into();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Provenance<'a> {
    command: &'a str,
    config_hash: String,
    /// Hash recorded in the manifest of the dataset read with `--data`.
    #[serde(skip_serializing_if = "Option::is_none")]
    data_hash: Option<&'a str>,
    config: &'a RunConfig,
}

fn create_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_err(out))
}

fn write_provenance(out: &Path, command: &str, cfg: &RunConfig, data_hash: Option<&str>) -> Result<(), CliError> {
    let p = Provenance { command, config_hash: cfg.hash(), data_hash, config: cfg };
    let path = out.join(PROVENANCE_FILE);
    fs::write(&path, serde_json::to_string_pretty(&p).expect("provenance serializes") + "\n").map_err(io_err(&path))
}

/// The dataset in `--data`, or one generated from the config. The second
/// value is the manifest hash when the dataset was read from disk.
fn load_dataset(cfg: &RunConfig, data: Option<&Path>) -> Result<(Dataset, Option<String>), CliError> {
    match data {
        Some(dir) => {
            require_exists("--data", dir)?;
            let d = read_dataset(dir)?;
            let h = d.manifest.config_hash.clone();
            Ok((d, Some(h)))
        }
        None => Ok((build_dataset_for(&cfg.data.room_types, cfg.data.n_per_type, cfg.seed)?, None)),
    }
}

/// Scenes of `split` (or all) whose room type the config keeps.
fn select<'a>(d: &'a Dataset, cfg: &RunConfig, split: Option<Split>) -> Vec<&'a SceneLayout> {
    d.scenes
        .iter()
        .filter(|s| split.is_none_or(|sp| d.split.get(&s.scene_id) == Some(&sp)))
        .filter(|s| cfg.data.room_types.contains(&s.room_type))
        .collect()
}

fn dataset_gen(a: GenArgs) -> Result<(), CliError> {
    let cfg = build_config(&a.config, Some(&a.data), None, None)?;
    let d = build_dataset_for(&cfg.data.room_types, cfg.data.n_per_type, cfg.seed)?;
    create_out(&a.out)?;
    write_dataset(&d, &a.out)?;
    write_provenance(&a.out, "dataset gen", &cfg, None)?;
    println!("{} scenes ({} train, {} test) written to {}", d.scenes.len(), d.manifest.train.len(), d.manifest.test.len(), a.out.display());
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(io_err(path))?;
    fs::write(path, buf).map_err(io_err(path))
}

fn render(a: RenderArgs) -> Result<(), CliError> {
    let cfg = build_config(&a.config, Some(&a.data_flags), Some(&a.model), None)?;
    let trainer = match &a.ckpt {
        Some(p) => {
            require_exists("--ckpt", p)?;
            Some(load_checkpoint(p)?)
        }
        None => None,
    };
    let (d, data_hash) = load_dataset(&cfg, a.data.as_deref())?;
    let scenes = select(&d, &cfg, None);
    let rc = RasterConfig::new(cfg.raster.resolution)?;
    create_out(&a.out)?;
    let written: Vec<Result<usize, CliError>> = par_map(&scenes, |s| {
        let room = render_empty_room(&s.room, &rc)?;
        write_file(&a.out.join(format!("{}.room.ppm", s.scene_id)), |b| write_room_ppm(b, &room))?;
        let layout = render_layout(s, &rc)?;
        write_file(&a.out.join(format!("{}.layout.ppm", s.scene_id)), |b| write_layout_ppm(b, &layout))?;
        if let Some(t) = &trainer {
            let room = render_empty_room(&s.room, &RasterConfig::new(t.model.resolution)?)?;
            let out = generate(&t.params, &t.model, &room, s.theta)?;
            write_file(&a.out.join(format!("{}.generated.ppm", s.scene_id)), |b| write_layout_ppm(b, &out))?;
            return Ok(3);
        }
        Ok(2)
    });
    let mut files = 0;
    for w in written {
        files += w?;
    }
    write_provenance(&a.out, "render", &cfg, data_hash.as_deref())?;
    println!("{files} images of {} scenes written to {}", scenes.len(), a.out.display());
    Ok(())
}

/// Loss columns of the run log.
pub const RUN_LOG_FILE: &str = "run_log.csv";
/// Wall-clock milliseconds per step, kept apart from the reproducible log.
pub const TIMING_FILE: &str = "timing.csv";
/// Test-split metrics at every checkpoint.
pub const METRICS_FILE: &str = "metrics.csv";

/// Checkpoint file name after `step` steps.
pub fn checkpoint_name(step: u64) -> String {
    format!("ckpt-{step:06}.rltw")
}

struct Logs {
    run: Vec<u8>,
    timing: Vec<u8>,
    metrics: Vec<u8>,
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let cfg = build_config(&a.config, Some(&a.data_flags), Some(&a.model), Some(&a.train))?;
    let mut trainer = match &a.ckpt {
        Some(p) => {
            require_exists("--ckpt", p)?;
            let mut t = load_checkpoint(p)?;
            let same = |x: &crate::training::TrainConfig| crate::training::TrainConfig { iterations: 0, checkpoint_every: 0, ..*x };
            if same(&t.cfg) != same(&cfg.train) || t.model != cfg.train.ablation.apply(&cfg.model) {
                return Err(CliError::Usage(format!("--ckpt: {} was trained with a different configuration", p.display())));
            }
            if t.step > cfg.train.iterations {
                return Err(CliError::Usage(format!(
                    "--ckpt: {} is already at step {}, beyond --iterations {}",
                    p.display(),
                    t.step,
                    cfg.train.iterations
                )));
            }
            t.cfg = cfg.train;
            t
        }
        None => Trainer::new(&cfg.model, &cfg.train)?,
    };
    let (d, data_hash) = load_dataset(&cfg, a.data.as_deref())?;
    let train_scenes = select(&d, &cfg, Some(Split::Train));
    let test_scenes = select(&d, &cfg, Some(Split::Test));
    if train_scenes.is_empty() || test_scenes.is_empty() {
        return Err(CliError::Usage("--room-type: no training or test scenes of the selected types".into()));
    }
    let samples = prepare_samples(&train_scenes, &trainer.model)?;
    create_out(&a.out)?;
    let hash = cfg.hash();
    log::info!(
        "training {} steps on {} scenes ({} test), config {}",
        cfg.train.iterations,
        train_scenes.len(),
        test_scenes.len(),
        &hash[..12]
    );

    let mut logs = Logs {
        run: format!("{}\n", StepMetrics::CSV_HEADER).into_bytes(),
        timing: b"step,wall_ms\n".to_vec(),
        metrics: b"step,room_type,mode,map50,rot\n".to_vec(),
    };
    let every = cfg.train.checkpoint_every;
    let mut last: Option<EvalReport> = None;
    while trainer.step < cfg.train.iterations {
        let m = trainer.train_step(&samples)?;
        writeln!(logs.run, "{}", m.csv_row()).expect("vec write");
        writeln!(logs.timing, "{},{:.3}", m.step, m.wall_ms).expect("vec write");
        if m.step == 1 || m.step % 100 == 0 {
            log::info!("step {} L_gc {:.4} L_1D {:.4} L_2D {:.4}", m.step, m.l_gc, m.l_1d, m.l_2d);
        }
        if m.step == cfg.train.iterations || (every > 0 && m.step % every == 0) {
            save_checkpoint(&trainer, &a.out.join(checkpoint_name(m.step)))?;
            let (mut rep, _) = evaluate_model(&trainer.params, &trainer.model, &test_scenes)?;
            rep.config_hash = hash.clone();
            for (name, ms) in rep.rows() {
                writeln!(logs.metrics, "{},{name},{},{},{}", m.step, ms.mode, ms.map50, ms.rot).expect("vec write");
            }
            last = Some(rep);
        }
    }
    for (name, bytes) in [(RUN_LOG_FILE, &logs.run), (TIMING_FILE, &logs.timing), (METRICS_FILE, &logs.metrics)] {
        let p = a.out.join(name);
        fs::write(&p, bytes).map_err(io_err(&p))?;
    }
    let rep = match last {
        Some(r) => r,
        // Resumed at the final step: nothing trained, score it anyway.
        None => {
            let (mut r, _) = evaluate_model(&trainer.params, &trainer.model, &test_scenes)?;
            r.config_hash = hash.clone();
            r
        }
    };
    rep.write(&a.out)?;
    write_provenance(&a.out, "train", &cfg, data_hash.as_deref())?;
    print!("{}", table(&rep));
    Ok(())
}

/// Plain-text metrics table, one row per room type plus the overall row.
pub fn table(rep: &EvalReport) -> String {
    let mut s = format!("{:<10} {:>7} {:>7} {:>7} {:>7}\n", "room", "Mode", "mAP", "RoT", "scenes");
    for (name, m) in rep.rows() {
        s += &format!("{name:<10} {:>7.4} {:>7.4} {:>7.4} {:>7}\n", m.mode, m.map50, m.rot, m.n_scenes);
    }
    s
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let cfg = build_config(&a.config, Some(&a.data_flags), Some(&a.model), None)?;
    let trainer = match a.ckpt.as_str() {
        "none" => None,
        p => {
            let p = Path::new(p);
            require_exists("--ckpt", p)?;
            if a.oracle_roundtrip {
                return Err(CliError::Usage("--oracle-roundtrip scores the round trip; use it with --ckpt none".into()));
            }
            Some(load_checkpoint(p)?)
        }
    };
    let (d, data_hash) = load_dataset(&cfg, a.data.as_deref())?;
    let test = select(&d, &cfg, Some(Split::Test));
    let (mut rep, pairs): (EvalReport, Vec<EvalPair>) = match &trainer {
        Some(t) => evaluate_model(&t.params, &t.model, &test)?,
        None => {
            let pairs = roundtrip_pairs(&test, &RasterConfig::new(cfg.raster.resolution)?)?;
            (EvalReport::from_pairs(&test, &pairs)?, pairs)
        }
    };
    rep.config_hash = cfg.hash();
    if a.oracle_roundtrip {
        let fast = compute_metrics(&pairs)?;
        let slow = brute_force_oracles(&pairs)?;
        if !metrics_close(&fast, &slow, ORACLE_TOL) {
            return Err(CliError::Failed(format!("exhaustive matcher disagrees: fast {fast:?}, exhaustive {slow:?}")));
        }
        println!("exhaustive matcher agrees within {ORACLE_TOL:e} on {} scenes", pairs.len());
    }
    print!("{}", table(&rep));
    if let Some(out) = &a.out {
        create_out(out)?;
        rep.write(out)?;
        write_scene_diagnostics(&out.join("scene_metrics.jsonl"), &pairs)?;
        write_provenance(out, "eval", &cfg, data_hash.as_deref())?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<(), CliError> {
    let mut cfg = build_config(&a.config, None, None, None)?;
    let model =
        ModelConfig { resolution: a.resolution.unwrap_or(GRADCHECK_RESOLUTION), base_channels: GRADCHECK_BASE_CHANNELS, ..cfg.model };
    model.validate()?;
    cfg.model = model;
    let coords = if a.full { None } else { Some(NETWORK_COORDS_PER_TENSOR) };
    let mut checks: Vec<LayerCheck> = layer_checks(cfg.seed)?;
    checks.extend(network_checks(&model, cfg.seed, coords)?);
    let mut csv = String::from("name,max_rel_error,max_coord_error,kink_margin,coordinates,redraws,passed\n");
    for c in &checks {
        println!(
            "{:<20} max rel error {:.3e}  kink margin {:.2e}  {}",
            c.name,
            c.report.max_rel_error,
            c.report.kink_margin,
            if c.passed() { "ok" } else { "FAIL" }
        );
        csv += &format!(
            "{},{:e},{:e},{:e},{},{},{}\n",
            c.name,
            c.report.max_rel_error,
            c.report.max_coord_error,
            c.report.kink_margin,
            c.report.coordinates,
            c.redraws,
            c.passed()
        );
    }
    if let Some(out) = &a.out {
        create_out(out)?;
        let p = out.join("gradcheck.csv");
        fs::write(&p, csv).map_err(io_err(&p))?;
        write_provenance(out, "gradcheck", &cfg, None)?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("all {} checks below {GRADCHECK_TOL:e}", checks.len());
        Ok(())
    } else {
        Err(CliError::Failed(format!("gradient check failed for {}", failed.join(", "))))
    }
}

/// Run directories under `root`: `root` itself if it holds a report,
/// then every child directory that does, by name.
fn find_runs(root: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut runs = Vec::new();
    if root.join("report.json").is_file() {
        let name = root.file_name().map_or_else(|| ".".to_string(), |n| n.to_string_lossy().into_owned());
        runs.push((name, root.to_path_buf()));
    }
    let mut children: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("report.json").is_file())
        .collect();
    children.sort();
    for c in children {
        runs.push((c.file_name().expect("child has a name").to_string_lossy().into_owned(), c));
    }
    Ok(runs)
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    require_exists("--data", &a.data)?;
    let runs = find_runs(&a.data)?;
    if runs.is_empty() {
        return Err(CliError::Usage(format!("--data: no run directory with a report.json under {}", a.data.display())));
    }
    let mut comparison = String::from("run,room_type,mode,map50,rot,n_scenes,config_hash\n");
    let mut curves = format!("run,{}\n", StepMetrics::CSV_HEADER);
    let mut text = String::new();
    for (name, dir) in &runs {
        let p = dir.join("report.json");
        let body = fs::read_to_string(&p).map_err(io_err(&p))?;
        let rep: EvalReport = serde_json::from_str(&body).map_err(|e| CliError::Failed(format!("{}: {e}", p.display())))?;
        for (room, m) in rep.rows() {
            comparison += &format!("{name},{room},{},{},{},{},{}\n", m.mode, m.map50, m.rot, m.n_scenes, rep.config_hash);
        }
        text += &format!("{name}\n{}\n", table(&rep));
        let log = dir.join(RUN_LOG_FILE);
        if log.is_file() {
            let body = fs::read_to_string(&log).map_err(io_err(&log))?;
            for line in body.lines().skip(1).filter(|l| !l.is_empty()) {
                curves += &format!("{name},{line}\n");
            }
        }
    }
    create_out(&a.out)?;
    for (file, body) in [("comparison.csv", &comparison), ("loss_curves.csv", &curves)] {
        let p = a.out.join(file);
        fs::write(&p, body).map_err(io_err(&p))?;
    }
    print!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_mentions_every_flag() {
        let mut out = Vec::new();
        for sub in [&["dataset", "gen"][..], &["render"], &["train"], &["eval"], &["gradcheck"], &["report"]] {
            let mut cmd = <Cli as clap::CommandFactory>::command();
            let mut c = &mut cmd;
            for s in sub {
                c = c.find_subcommand_mut(s).expect("subcommand exists");
            }
            out.push(c.render_long_help().to_string());
        }
        let all = out.join("\n");
        for flag in [
            "--config",
            "--out",
            "--seed",
            "--n-per-type",
            "--iterations",
            "--lambda-adv1",
            "--lambda-adv2",
            "--resolution",
            "--ckpt",
            "--room-type",
            "--ablate",
            "--data",
            "--oracle-roundtrip",
        ] {
            assert!(all.contains(flag), "{flag} missing from help");
        }
        for sub in out {
            assert!(sub.contains("--help"));
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["rotlayout", "--help"]), 0);
        assert_eq!(run(["rotlayout", "train", "--bogus", "1"]), 1);
        assert_eq!(run(["rotlayout", "eval", "--ckpt", "/nonexistent/ckpt.rltw"]), 1);
        assert_eq!(run(["rotlayout", "dataset", "gen", "--n-per-type", "2", "--out", "/nonexistent/x"]), 1);
        assert_eq!(run(["rotlayout", "train", "--ablate", "sideways", "--out", "x"]), 1);
    }

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "seed = 4\n[train]\niterations = 7\n").unwrap();
        let c = ConfigFlags { config: Some(p), seed: Some(9) };
        let t = TrainFlags { iterations: None, lambda_adv1: Some(0.0), lambda_adv2: None, ablate: Some(AblateArg::Mode) };
        let d = DataFlags { n_per_type: Some(6), room_type: vec![RoomTypeArg::Study, RoomTypeArg::Bedroom] };
        let cfg = build_config(&c, Some(&d), None, Some(&t)).unwrap();
        assert_eq!((cfg.seed, cfg.train.seed, cfg.train.iterations), (9, 9, 7));
        assert_eq!(cfg.train.lambda_adv1, 0.0);
        assert_eq!(cfg.train.ablation, Ablation::Mode);
        assert_eq!(cfg.data.room_types, vec![RoomType::Bedroom, RoomType::Study]);
        assert_eq!(cfg.data.n_per_type, 6);
    }
}
