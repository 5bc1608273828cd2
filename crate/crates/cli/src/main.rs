//! `objscan` command line: build shape databases, run scanning episodes,
//! evaluate and replay them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use objscan::database::{build_database, Database, DbParams};
use objscan::evaluation::recognition::DEFAULT_IOU;
use objscan::evaluation::{evaluate_episode, write_csv, MetricsObserver};
use objscan::orchestrator::svg::top_view_svg;
use objscan::orchestrator::{read_trace, replay, run_episode_with, Config, Observer};
use objscan::scanner::scene::{CatalogManifest, SceneFile};
use objscan::scanner::synth;
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "objscan", version, about = "Object-aware autonomous scene scanning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shape database commands.
    Db {
        #[command(subcommand)]
        command: DbCommand,
    },
    /// Run one scanning episode on a scene.
    Run(RunArgs),
    /// Score a finished episode against the scene's ground truth.
    Eval(EvalArgs),
    /// Recompute every recorded NBO/NBV decision from a trace.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Write the built-in catalog and a random scene.
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum DbCommand {
    /// Virtually scan every catalog model into a database file.
    Build {
        /// Catalog manifest (JSON).
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// Config sources. Defaults are overridden by flags, flags by the file.
#[derive(Args, Default)]
struct ConfigArgs {
    /// Config file, TOML or JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_p: Option<usize>,
    #[arg(long)]
    n_s: Option<usize>,
    #[arg(long)]
    n_v: Option<usize>,
    #[arg(long)]
    max_nbv: Option<usize>,
    #[arg(long)]
    complete_threshold: Option<f64>,
    #[arg(long)]
    noise_threshold: Option<f64>,
    #[arg(long)]
    noise_sigma_rel: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    h_cam: Option<f64>,
    #[arg(long)]
    scene_resolution: Option<f64>,
    #[arg(long)]
    blur_sigma: Option<f64>,
    #[arg(long)]
    adjacency_radius: Option<f64>,
    /// NBO weights w_z,w_e,w_d.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
}

#[derive(Args)]
struct RunArgs {
    /// Scene file (JSON).
    #[arg(long)]
    scene: PathBuf,
    /// Database written by `db build`.
    #[arg(long)]
    db: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Trace output, JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Result output (JSON); stdout when omitted.
    #[arg(long)]
    result: Option<PathBuf>,
    /// Top-view plot of the episode.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Record coverage and Rand Index curves into the result.
    #[arg(long)]
    metrics: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    result: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Directory for metrics.json, coverage.csv and rand_index.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IOU)]
    iou: f64,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    objects: usize,
    /// Square room side, meters.
    #[arg(long, default_value_t = 5.0)]
    room: f64,
    #[arg(long, default_value_t = 0.5)]
    clearance: f64,
}

enum Failure {
    /// Bad or unreadable input.
    Invalid(String),
    Runtime(String),
    Inconsistent(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) | Failure::Inconsistent(_) => 1,
            Failure::Invalid(_) => 3,
        }
    }
}

fn invalid(what: &Path) -> impl Fn(objscan::error::Error) -> Failure + '_ {
    move |e| Failure::Invalid(format!("{}: {e}", what.display()))
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn flag_overrides(a: &ConfigArgs) -> Result<Value, Failure> {
    if a.weights.as_ref().is_some_and(|w| w.len() != 3) {
        return Err(Failure::Invalid("--weights takes three values: w_z,w_e,w_d".into()));
    }
    let mut m = Map::new();
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            m.insert(k.to_string(), v);
        }
    };
    put("n_p", a.n_p.map(Value::from));
    put("n_s", a.n_s.map(Value::from));
    put("n_v", a.n_v.map(Value::from));
    put("max_nbv", a.max_nbv.map(Value::from));
    put("complete_threshold", a.complete_threshold.map(Value::from));
    put("noise_threshold", a.noise_threshold.map(Value::from));
    put("noise_sigma_rel", a.noise_sigma_rel.map(Value::from));
    put("seed", a.seed.map(Value::from));
    put("h_cam", a.h_cam.map(Value::from));
    put("scene_resolution", a.scene_resolution.map(Value::from));
    put("blur_sigma", a.blur_sigma.map(Value::from));
    put("adjacency_radius", a.adjacency_radius.map(Value::from));
    put(
        "weights",
        a.weights.as_ref().map(|w| json!({"w_z": w[0], "w_e": w[1], "w_d": w[2]})),
    );
    Ok(Value::Object(m))
}

fn read_config_file(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let bad = |e: String| Failure::Invalid(format!("{}: {e}", path.display()));
    let is_json = path.extension().is_some_and(|x| x.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
    } else {
        let t: toml::Table = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
        serde_json::to_value(t).map_err(|e| bad(e.to_string()))
    }
}

fn load_config(a: &ConfigArgs) -> Result<Config, Failure> {
    let with_flags = Config::default()
        .overlay(&flag_overrides(a)?)
        .map_err(|e| Failure::Invalid(format!("flags: {e}")))?;
    match &a.config {
        Some(path) => with_flags.overlay(&read_config_file(path)?).map_err(invalid(path)),
        None => Ok(with_flags),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(runtime)?;
    writeln!(w).and_then(|_| w.flush()).map_err(runtime)
}

fn db_build(catalog: &Path, out: &Path, config: &ConfigArgs) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let models = CatalogManifest::load(catalog).map_err(invalid(catalog))?;
    let params = DbParams {
        n_p: cfg.n_p,
        r_dedup: cfg.r_dedup,
        preseg: cfg.preseg.clone(),
        adjacency_radius: cfg.adjacency_radius,
        min_component_points: cfg.min_component_points,
        ..DbParams::default()
    };
    let db = build_database(&models, &params).map_err(runtime)?;
    db.save_file(out).map_err(runtime)?;
    eprintln!("{} models, {} entries -> {}", models.len(), db.entries.len(), out.display());
    Ok(())
}

fn run(a: &RunArgs) -> Result<bool, Failure> {
    let cfg = load_config(&a.config)?;
    let (scene, _) = SceneFile::load(&a.scene).map_err(invalid(&a.scene))?;
    scene.validate(0.01).map_err(invalid(&a.scene))?;
    let db = Database::load_file(&a.db).map_err(invalid(&a.db))?;
    let mut sink = a.trace.as_deref().map(create).transpose()?;
    let mut metrics = if a.metrics {
        Some(MetricsObserver::new(&scene, cfg.camera, DEFAULT_IOU).map_err(runtime)?)
    } else {
        None
    };
    let (mut result, trace) = run_episode_with(
        &scene,
        &db,
        &cfg,
        sink.as_mut().map(|s| s as &mut dyn Write),
        metrics.as_mut().map(|m| m as &mut dyn Observer),
    )
    .map_err(runtime)?;
    if let Some(m) = metrics {
        result.curves = m.curves;
    }
    match &a.result {
        Some(path) => write_json(path, &result)?,
        None => println!("{}", serde_json::to_string_pretty(&result).map_err(runtime)?),
    }
    if let Some(path) = &a.svg {
        let mut w = create(path)?;
        w.write_all(top_view_svg(&scene, &result, &trace).as_bytes())
            .and_then(|_| w.flush())
            .map_err(runtime)?;
    }
    eprintln!(
        "recognized {} of {} objects, {} scans ({} NBV), {:.1} m traveled{}",
        result.recognized.len(),
        scene.objects.len(),
        result.scans,
        result.nbv_scans,
        result.total_travel,
        if result.partial { ", partial" } else { "" }
    );
    Ok(result.partial)
}

fn eval(a: &EvalArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.config)?;
    let (scene, _) = SceneFile::load(&a.scene).map_err(invalid(&a.scene))?;
    let text = std::fs::read_to_string(&a.result).map_err(|e| Failure::Invalid(format!("{}: {e}", a.result.display())))?;
    let result = serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", a.result.display())))?;
    let file = File::open(&a.trace).map_err(|e| Failure::Invalid(format!("{}: {e}", a.trace.display())))?;
    let trace = read_trace(BufReader::new(file)).map_err(invalid(&a.trace))?;
    let ev = evaluate_episode(&scene, &result, &trace, &cfg.camera, a.iou).map_err(runtime)?;
    std::fs::create_dir_all(&a.out).map_err(runtime)?;
    write_json(&a.out.join("metrics.json"), &ev)?;
    let cov: Vec<Vec<f64>> = ev
        .coverage_curve
        .iter()
        .map(|c| vec![c.step as f64, c.nbv_scans as f64, c.r_cover, c.q_cover])
        .collect();
    write_csv(create(&a.out.join("coverage.csv"))?, &["step", "nbv_scans", "r_cover", "q_cover"], &cov)
        .map_err(runtime)?;
    let ri: Vec<Vec<f64>> = ev
        .segmentation_curve
        .iter()
        .filter_map(|c| c.rand_index.map(|r| vec![c.step as f64, c.nbv_scans as f64, r]))
        .collect();
    write_csv(create(&a.out.join("rand_index.csv"))?, &["step", "nbv_scans", "rand_index"], &ri)
        .map_err(runtime)?;
    eprintln!(
        "recall {:.3}, precision {:.3}, R_cover {}, Rand Index {}",
        ev.recognition.all.recall,
        ev.recognition.all.precision,
        ev.coverage.as_ref().map_or("n/a".into(), |c| format!("{:.3}", c.r_cover)),
        ev.rand_index.map_or("n/a".into(), |r| format!("{r:.3}")),
    );
    Ok(())
}

fn replay_cmd(path: &Path) -> Result<(), Failure> {
    let file = File::open(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let trace = read_trace(BufReader::new(file)).map_err(invalid(path))?;
    let report = replay(&trace);
    println!("{}", serde_json::to_string_pretty(&report).map_err(runtime)?);
    if report.is_consistent() {
        Ok(())
    } else {
        Err(Failure::Inconsistent(format!("{} decisions differ", report.mismatches.len())))
    }
}

fn synth_cmd(a: &SynthArgs) -> Result<(), Failure> {
    let models = synth::catalog();
    let params = synth::LayoutParams {
        room: a.room,
        n_objects: a.objects,
        clearance: a.clearance,
        seed: a.seed,
        ..synth::LayoutParams::default()
    };
    let scene = synth::random_scene(&models, &params).map_err(|e| Failure::Invalid(e.to_string()))?;
    let manifest = synth::write_catalog(&a.out.join("catalog"), &models).map_err(runtime)?;
    let rel = manifest.strip_prefix(&a.out).unwrap_or(&manifest);
    write_json(&a.out.join("scene.json"), &synth::scene_file(&scene, rel))?;
    eprintln!("{} objects -> {}", scene.objects.len(), a.out.join("scene.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Db {
            command: DbCommand::Build { catalog, out, config },
        } => db_build(catalog, out, config).map(|_| false),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a).map(|_| false),
        Command::Replay { trace } => replay_cmd(trace).map(|_| false),
        Command::Synth(a) => synth_cmd(a).map(|_| false),
    };
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(f) => {
            let (Failure::Invalid(m) | Failure::Runtime(m) | Failure::Inconsistent(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
