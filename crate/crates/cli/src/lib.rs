//! Stages of the `ppg-posture` command line tool. Each stage reads the previous stage's
//! files and writes its own, so every intermediate can be inspected or plotted.

pub mod settings;

use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ppg_posture::classify::{benchmark_grid, write_class_metrics_csv, write_report_csv, GridEntry, LabeledDataset};
use ppg_posture::features::{chi_squared_scores, select_features, FeatureRanking};
use ppg_posture::io::{
    read_features_file, read_poi_file, read_recording, truth_path, write_features_file, write_ground_truth,
    write_poi_file, write_recording, RecordingMeta,
};
use ppg_posture::pipeline::{process_with_filter, table_features};
use ppg_posture::synth::{batch_specs, generate_recording, BatchShape, ScenarioSpec};
use ppg_posture::wire::{run_device, run_receiver, ReceiverConfig, SampleSource, SessionConfig};
use ppg_posture::Activity;

pub use settings::Settings;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "ppg-posture", version, about = "PPG postural-movement recognition pipeline")]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// `key = value` settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic recordings with ground truth.
    Simulate(SimulateArgs),
    /// Serve recordings over TCP like the wearable does.
    Device(DeviceArgs),
    /// Record one session from a device.
    Receive(ReceiveArgs),
    /// Segment recordings and locate pulse landmarks.
    Process(ProcessArgs),
    /// Compute the pulse feature matrix from landmark files.
    Features(FeaturesArgs),
    /// Rank features by chi-squared score.
    Rank(RankArgs),
    /// Train and evaluate the model grid.
    Train(TrainArgs),
    /// Write report tables from training results.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Activity of a single recording.
    #[arg(long, conflicts_with = "batch")]
    pub class: Option<Activity>,
    /// Generate a participant corpus instead of one recording.
    #[arg(long)]
    pub batch: bool,
    #[arg(long, default_value_t = 24, requires = "batch")]
    pub sit: usize,
    #[arg(long, default_value_t = 14, requires = "batch")]
    pub lie: usize,
    #[arg(long, default_value_t = 0, requires = "batch")]
    pub stationary: usize,
    /// Seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Seconds.
    #[arg(long)]
    pub movement_onset: Option<f64>,
    /// Hz.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Output CSV for one recording, or directory for a batch.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DeviceArgs {
    #[arg(long, default_value = "127.0.0.1:5000")]
    pub listen: String,
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 60.0)]
    pub limit_seconds: f64,
    /// Stream a synthetic recording of this activity.
    #[arg(long, conflicts_with = "replay")]
    pub scenario: Option<Activity>,
    /// Stream the values of a recording CSV.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Playback speed relative to real time.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    /// Exit after this many sessions.
    #[arg(long)]
    pub sessions: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReceiveArgs {
    #[arg(long, default_value = "127.0.0.1:5000")]
    pub connect: String,
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    /// Expected session length; a shorter stream is flagged as truncated.
    #[arg(long)]
    pub limit_seconds: Option<f64>,
    #[arg(long, default_value = "stationary")]
    pub label: Activity,
    #[arg(long)]
    pub movement_onset: Option<f64>,
    #[arg(long)]
    pub source_id: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    /// Recording CSVs.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Landmark CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Landmark CSVs from `process`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub features: PathBuf,
    /// Ranking from `rank`; computed from the features when absent.
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    /// Comma-separated features to leave out; overrides the configured drop list.
    #[arg(long)]
    pub drop: Option<String>,
    /// Comma-separated presets; overrides the configured model list.
    #[arg(long)]
    pub models: Option<String>,
    /// Results JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub results: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Usage errors exit with 1, data and I/O errors with 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

impl From<ppg_posture::Error> for CliError {
    fn from(e: ppg_posture::Error) -> Self {
        CliError::Data(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => {
                let mut shown = e.to_string();
                for cause in e.chain().skip(1) {
                    let c = cause.to_string();
                    if !shown.contains(&c) {
                        shown = format!("{shown}: {c}");
                    }
                }
                f.write_str(&shown)
            }
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Training output consumed by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResults {
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
    pub entries: Vec<GridEntry>,
}

pub fn run(cli: Cli) -> CliResult {
    let settings = match &cli.config {
        Some(p) => Settings::load(p).map_err(|e| usage(format!("{e:#}")))?,
        None => Settings::default(),
    };
    match cli.command {
        Command::Simulate(a) => simulate(&a, cli.seed),
        Command::Device(a) => device(&a, cli.seed),
        Command::Receive(a) => receive(&a),
        Command::Process(a) => process(&a, &settings),
        Command::Features(a) => features(&a, &settings),
        Command::Rank(a) => rank(&a),
        Command::Train(a) => train(&a, &settings, cli.seed),
        Command::Report(a) => report(&a),
    }
}

fn customize(mut spec: ScenarioSpec, a: &SimulateArgs) -> ScenarioSpec {
    if let Some(d) = a.duration {
        spec.duration = d;
    }
    if let Some(m) = a.movement_onset {
        spec.movement_onset = m;
    }
    if let Some(r) = a.rate {
        spec.sample_rate = r;
    }
    spec
}

fn write_simulated(spec: &ScenarioSpec, path: &Path, source_id: &str) -> CliResult {
    let (mut rec, truth) = generate_recording(spec).map_err(|e| usage(e.to_string()))?;
    rec.source_id = source_id.to_string();
    write_recording(path, &rec, &RecordingMeta::of(&rec))?;
    write_ground_truth(&truth_path(path), &truth)?;
    Ok(())
}

pub fn simulate(a: &SimulateArgs, seed: u64) -> CliResult {
    if a.batch {
        let shape = BatchShape {
            stationary: a.stationary,
            sit_to_stand: a.sit,
            lie_to_stand: a.lie,
        };
        if shape.total() == 0 {
            return Err(usage("batch is empty"));
        }
        for (i, spec) in batch_specs(shape, seed).into_iter().enumerate() {
            let id = format!("rec{:02}_{}", i + 1, spec.class_label);
            write_simulated(&customize(spec, a), &a.out.join(format!("{id}.csv")), &id)?;
        }
        println!("wrote {} recordings to {}", shape.total(), a.out.display());
    } else {
        let class = a.class.ok_or_else(|| usage("either --class or --batch is required"))?;
        let spec = customize(ScenarioSpec::preset(class, seed), a);
        let id = a.out.file_stem().map_or("recording".into(), |s| s.to_string_lossy().into_owned());
        write_simulated(&spec, &a.out, &id)?;
    }
    Ok(())
}

pub fn device(a: &DeviceArgs, seed: u64) -> CliResult {
    let source = match (&a.scenario, &a.replay) {
        (Some(c), None) => SampleSource::Scenario(ScenarioSpec::preset(*c, seed)),
        (None, Some(p)) => {
            let (rec, _) = read_recording(p)?;
            SampleSource::Replay(rec.samples.iter().map(|s| s.value).collect())
        }
        _ => return Err(usage("exactly one of --scenario or --replay is required")),
    };
    let cfg = SessionConfig {
        session_limit: a.limit_seconds,
        sample_rate: a.rate,
        source,
        speed: a.speed,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let listener = TcpListener::bind(&a.listen).with_context(|| format!("binding {}", a.listen))?;
    println!("listening on {}", listener.local_addr().map_err(anyhow::Error::from)?);
    std::io::stdout().flush().ok();
    for (i, o) in run_device(&listener, &cfg, a.sessions)?.iter().enumerate() {
        println!("session {}: {:?}, {} samples", i + 1, o.end, o.sensor_records);
    }
    Ok(())
}

pub fn receive(a: &ReceiveArgs) -> CliResult {
    let source_id = a
        .source_id
        .clone()
        .or_else(|| a.out.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "session".into());
    let cfg = ReceiverConfig {
        sample_rate: a.rate,
        source_id,
        label: a.label,
        movement_onset: a.movement_onset,
        expected_duration: a.limit_seconds,
    };
    let s = run_receiver(a.connect.as_str(), &cfg, &a.out)?;
    println!(
        "received {} samples, {} malformed tokens{}",
        s.recording.len(),
        s.meta.malformed_count,
        if s.meta.truncated { ", truncated" } else { "" }
    );
    Ok(())
}

pub fn process(a: &ProcessArgs, settings: &Settings) -> CliResult {
    let cfg = settings.pipeline;
    let filter = cfg.filter().map_err(|e| usage(e.to_string()))?;
    let mut tables = Vec::new();
    for path in &a.inputs {
        let outcome = read_recording(path).and_then(|(rec, _)| process_with_filter(&rec, &cfg, &filter));
        match outcome {
            Ok(p) => {
                for (i, why) in &p.skipped {
                    eprintln!("{}: pulse {i} skipped: {why}", path.display());
                }
                tables.push(p.pulse_table());
            }
            Err(e) => eprintln!("skipped {}: {e}", path.display()),
        }
    }
    if tables.is_empty() {
        return Err(anyhow!("no usable recordings").into());
    }
    write_poi_file(&a.out, &tables)?;
    println!("{} of {} recordings processed", tables.len(), a.inputs.len());
    Ok(())
}

pub fn features(a: &FeaturesArgs, settings: &Settings) -> CliResult {
    let mut rows = Vec::new();
    let mut used = 0;
    for path in &a.inputs {
        for table in read_poi_file(path)? {
            match table_features(&table, &settings.pipeline) {
                Ok(f) => {
                    rows.extend(f);
                    used += 1;
                }
                Err(e) => eprintln!("skipped {}: {e}", table.source_id),
            }
        }
    }
    if rows.is_empty() {
        return Err(anyhow!("no feature rows extracted").into());
    }
    write_features_file(&a.out, &rows)?;
    println!("{} pulses from {used} recordings", rows.len());
    Ok(())
}

pub fn write_ranking(path: &Path, ranking: &FeatureRanking) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["rank", "feature", "chi_squared"])?;
    for (i, (name, score)) in ranking.entries.iter().enumerate() {
        w.write_record([(i + 1).to_string(), name.clone(), score.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ranking(path: &Path) -> anyhow::Result<FeatureRanking> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("missing column `{name}` in {}", path.display()))
    };
    let (fi, si) = (col("feature")?, col("chi_squared")?);
    let mut entries = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let score: f64 = rec[si].trim().parse().with_context(|| format!("bad score in {}", path.display()))?;
        entries.push((rec[fi].to_string(), score));
    }
    Ok(FeatureRanking { entries })
}

pub fn rank(a: &RankArgs) -> CliResult {
    let rows = read_features_file(&a.features)?;
    let ranking = chi_squared_scores(&rows)?;
    write_ranking(&a.out, &ranking)?;
    for (name, score) in &ranking.entries {
        println!("{name:32} {score:.3}");
    }
    Ok(())
}

pub fn train(a: &TrainArgs, settings: &Settings, seed: u64) -> CliResult {
    let rows = read_features_file(&a.features)?;
    let ranking = match &a.ranking {
        Some(p) => read_ranking(p)?,
        None => chi_squared_scores(&rows)?,
    };
    let drop: Vec<String> = match &a.drop {
        Some(d) => d.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => settings.drop.clone(),
    };
    let drop_refs: Vec<&str> = drop.iter().map(String::as_str).collect();
    let mask = select_features(&ranking, &drop_refs).map_err(|e| usage(e.to_string()))?;
    let models: Vec<String> = match &a.models {
        Some(m) => m.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => settings.models.clone(),
    };
    let model_refs: Vec<&str> = models.iter().map(String::as_str).collect();
    let presets = settings.hyper.presets(&model_refs).map_err(|e| usage(e.to_string()))?;
    let data = LabeledDataset::from_features(&rows, &mask)?;
    println!("training on {} rows, {} feature columns", data.len(), mask.count());
    let entries = benchmark_grid(&data, &presets, settings.grid, seed)?;
    let results = TrainResults {
        seed,
        feature_names: data.feature_names.clone(),
        class_names: data.class_names.clone(),
        class_counts: data.class_counts(),
        entries,
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(anyhow::Error::from)?;
    }
    let text = serde_json::to_string_pretty(&results).map_err(anyhow::Error::from)?;
    std::fs::write(&a.out, text + "\n").with_context(|| format!("writing {}", a.out.display()))?;
    for e in &results.entries {
        match &e.outcome {
            Ok(r) => println!("{:14} test {:6.2}%  mean F1 {:6.2}%", e.model, r.test_accuracy, r.mean_f1()),
            Err(msg) => println!("{:14} failed: {msg}", e.model),
        }
    }
    Ok(())
}

pub fn read_results(path: &Path) -> anyhow::Result<TrainResults> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes `models.csv` (accuracy and F1 per model), `class_metrics.csv` (per-class bars)
/// and `confusion.csv` (long-format confusion counts).
pub fn report(a: &ReportArgs) -> CliResult {
    let results = read_results(&a.results)?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let file = |name: &str| -> anyhow::Result<std::io::BufWriter<std::fs::File>> {
        let p = a.out_dir.join(name);
        Ok(std::io::BufWriter::new(
            std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?,
        ))
    };
    write_report_csv(file("models.csv")?, &results.entries, &results.class_names)?;
    write_class_metrics_csv(file("class_metrics.csv")?, &results.entries, &results.class_names)?;
    let mut w = csv::Writer::from_writer(file("confusion.csv")?);
    w.write_record(["model", "actual", "predicted", "count"]).map_err(anyhow::Error::from)?;
    for e in &results.entries {
        let Ok(r) = &e.outcome else { continue };
        for (i, row) in r.confusion.counts.iter().enumerate() {
            for (j, n) in row.iter().enumerate() {
                let rec = [e.model.as_str(), &results.class_names[i], &results.class_names[j], &n.to_string()];
                w.write_record(rec).map_err(anyhow::Error::from)?;
            }
        }
    }
    w.flush().map_err(anyhow::Error::from)?;
    println!("report written to {}", a.out_dir.display());
    Ok(())
}
