//! Command-line front end. `src/main.rs` only parses arguments and maps the
//! result to an exit code.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::eval::{self, GroundTruth, ThresholdGrid};
use crate::gallery::{Gallery, GalleryParams};
use crate::orchestrator::Orchestrator;
use crate::sim::{self, ScenarioConfig};
use crate::types::DetectionEvent;
use crate::wire::{self, EventReader, StreamHeader};

#[derive(Debug, Parser)]
#[command(name = "osreid", version, about = "Streaming open-set re-identification engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic event stream.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output file, or "-" for standard output.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Stream events through the engine.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Event file, or "-" for standard input.
        input: PathBuf,
        /// Directory for outcomes.jsonl, snapshot.json and manifest.json.
        /// Without it, outcomes go to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Start from a saved gallery snapshot instead of an empty gallery.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score an outcome file against ground truth.
    Eval {
        outcomes: PathBuf,
        /// Labelled event file the outcomes came from. Defaults to the labels
        /// echoed in the outcomes.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Also write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a stream once per th_score value and tabulate the metrics.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Event file or "-". Without it the configured scenario is simulated.
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0.99)]
        from: f64,
        #[arg(long, default_value_t = 0.90)]
        to: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Explicit comma-separated thresholds, overriding --from/--to/--step.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        /// First pick th_emb as the largest value with FTR at most this.
        #[arg(long)]
        target_ftr: Option<f64>,
        #[arg(long)]
        parallel: bool,
        /// Also write the rows as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect or validate a gallery snapshot.
    Snapshot {
        #[command(subcommand)]
        action: SnapshotAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum SnapshotAction {
    /// Print identity and slot counts.
    Inspect { path: PathBuf },
    /// Check structure and, with --d, the embedding dimension.
    Validate {
        path: PathBuf,
        #[arg(long)]
        d: Option<usize>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with [system] and [scenario] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sets both system.seed and scenario.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub th_score: Option<f64>,
    #[arg(long)]
    pub th_emb: Option<f64>,
    #[arg(long)]
    pub ttl_ms: Option<u64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Any other field, as section.field=value (TOML value syntax).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn io_at(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

/// Contents of a `--config` file after command-line overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub system: SystemConfig,
    pub scenario: ScenarioConfig,
}

/// A resolved configuration plus whether `system.d` was given explicitly.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub file: ConfigFile,
    pub path: Option<PathBuf>,
    pub explicit_d: bool,
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| usage(format!("--set key {key:?} must look like section.field")))?;
    if section != "system" && section != "scenario" {
        return Err(usage(format!("unknown config section {section:?}")));
    }
    let entry = table
        .entry(section)
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(t) = entry else {
        return Err(usage(format!("[{section}] is not a table")));
    };
    t.insert(field.to_owned(), value);
    Ok(())
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<ResolvedConfig, CliError> {
        let mut table = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| usage(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        if let Some(seed) = self.seed {
            let v = toml::Value::Integer(seed as i64);
            set_path(&mut table, "system.seed", v.clone())?;
            set_path(&mut table, "scenario.seed", v)?;
        }
        if let Some(v) = self.th_score {
            set_path(&mut table, "system.th_score", toml::Value::Float(v))?;
        }
        if let Some(v) = self.th_emb {
            set_path(&mut table, "system.th_emb", toml::Value::Float(v))?;
        }
        if let Some(v) = self.ttl_ms {
            set_path(&mut table, "system.ttl_ms", toml::Value::Integer(v as i64))?;
        }
        if let Some(v) = self.k {
            set_path(&mut table, "system.k", toml::Value::Integer(v as i64))?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| usage(format!("--set {kv:?} must look like key=value")))?;
            set_path(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        let explicit_d = table
            .get("system")
            .and_then(|s| s.as_table())
            .is_some_and(|s| s.contains_key("d"));
        let file: ConfigFile = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| usage(format!("config: {}", e.message())))?;
        Ok(ResolvedConfig { file, path: self.config.clone(), explicit_d })
    }
}

impl ResolvedConfig {
    /// System config for a stream of dimension `d`.
    pub fn system_for(&self, d: usize) -> Result<crate::ValidatedConfig, CliError> {
        let mut system = self.file.system.clone();
        if self.explicit_d && system.d != d {
            return Err(data(format!("config sets d = {} but the stream has d = {d}", system.d)));
        }
        system.d = d;
        system
            .validate()
            .map_err(|e| usage(format!("config: system.{}: {e}", e.field)))
    }
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>, CliError> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(File::open(path).map_err(io_at(path))?)))
    }
}

fn read_event_file(path: &Path) -> Result<(StreamHeader, Vec<DetectionEvent>), CliError> {
    wire::read_events(open_input(path)?).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(data)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_at(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutputs {
    pub outcomes: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

/// Everything needed to repeat a `run` invocation exactly, plus its timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_path: Option<PathBuf>,
    /// Event file path, or "stdin".
    pub input: String,
    pub resumed_from: Option<PathBuf>,
    pub outputs: RunOutputs,
    pub seed: u64,
    pub system: SystemConfig,
    pub events: usize,
    pub wall_time_ms: f64,
    pub events_per_sec: f64,
}

/// Executes one parsed command, writing normal output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out: path } => simulate(&config, &path, out, err),
        Command::Run { config, input, out: dir, resume } => {
            run(&config, &input, dir.as_deref(), resume.as_deref(), out, err)
        }
        Command::Eval { outcomes, events, out: json } => {
            evaluate(&outcomes, events.as_deref(), json.as_deref(), out)
        }
        Command::Sweep { config, input, from, to, step, thresholds, target_ftr, parallel, out: json } => {
            let thresholds = match thresholds {
                Some(t) => t,
                None => threshold_range(from, to, step)?,
            };
            sweep(&config, input.as_deref(), &thresholds, target_ftr, parallel, json.as_deref(), out, err)
        }
        Command::Snapshot { action } => snapshot(action, out),
    }
}

fn simulate(args: &ConfigArgs, path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let scenario = &cfg.file.scenario;
    let (events, _) = sim::generate(scenario).map_err(usage)?;
    if path.as_os_str() == "-" {
        wire::write_events(io::stdout().lock(), scenario.d, &events).map_err(data)?;
    } else {
        let f = File::create(path).map_err(io_at(path))?;
        wire::write_events(BufWriter::new(f), scenario.d, &events).map_err(io_at(path))?;
    }
    let identities: BTreeSet<_> = events.iter().filter_map(|e| e.gt_identity.as_deref()).collect();
    let cameras: BTreeSet<_> = events.iter().map(|e| e.camera_id.as_str()).collect();
    let summary = format!(
        "{} events, {} identities, {} cameras\n",
        events.len(),
        identities.len(),
        cameras.len()
    );
    // Keep stdout clean when it carries the stream.
    let sink: &mut dyn Write = if path.as_os_str() == "-" { err } else { out };
    sink.write_all(summary.as_bytes()).map_err(data)
}

fn run(
    args: &ConfigArgs,
    input: &Path,
    dir: Option<&Path>,
    resume: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let start = Instant::now();
    let reader = EventReader::events(open_input(input)?).map_err(|e| data(format!("{}: {e}", input.display())))?;
    let d = reader.header().d;
    let system = cfg.system_for(d)?;

    let mut orch = match resume {
        Some(p) => {
            let bytes = fs::read(p).map_err(io_at(p))?;
            let gallery = Gallery::restore_for(&bytes, d).map_err(|e| data(format!("{}: {e}", p.display())))?;
            if *gallery.params() != GalleryParams::from(&system) {
                return Err(usage(format!(
                    "{}: snapshot parameters {:?} differ from the configured {:?}",
                    p.display(),
                    gallery.params(),
                    GalleryParams::from(&system)
                )));
            }
            Orchestrator::with_gallery(system.clone(), gallery)
        }
        None => Orchestrator::new(system.clone()),
    };

    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(io_at(dir))?;
    }
    let outcomes_path = dir.map(|d| d.join("outcomes.jsonl"));
    let mut sink: Box<dyn Write> = match &outcomes_path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_at(p))?)),
        None => Box::new(&mut *out),
    };
    let write_err = |e: io::Error| data(format!("writing outcomes: {e}"));
    serde_json::to_writer(&mut sink, &StreamHeader::outcomes(d)).map_err(data)?;
    sink.write_all(b"\n").map_err(write_err)?;

    let mut count = 0usize;
    for (index, event) in reader.enumerate() {
        let event = event.map_err(|e| data(format!("{}: {e}", input.display())))?;
        let outcome = orch.process_checked(index, &event).map_err(data)?;
        serde_json::to_writer(&mut sink, &outcome).map_err(data)?;
        sink.write_all(b"\n").map_err(write_err)?;
        count += 1;
    }
    sink.flush().map_err(write_err)?;
    drop(sink);

    let snapshot_path = dir.map(|d| d.join("snapshot.json"));
    if let Some(p) = &snapshot_path {
        fs::write(p, orch.snapshot()).map_err(io_at(p))?;
    }
    let wall = start.elapsed().as_secs_f64();
    let rate = if wall > 0.0 { count as f64 / wall } else { 0.0 };
    writeln!(err, "{count} events in {:.3} s ({rate:.0} events/s)", wall).map_err(data)?;

    if let Some(dir) = dir {
        let manifest_path = dir.join("manifest.json");
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_path: cfg.path.clone(),
            input: if input.as_os_str() == "-" { "stdin".into() } else { input.display().to_string() },
            resumed_from: resume.map(Path::to_path_buf),
            outputs: RunOutputs {
                outcomes: outcomes_path,
                snapshot: snapshot_path,
                manifest: Some(manifest_path.clone()),
            },
            seed: system.seed,
            system: system.into_inner(),
            events: count,
            wall_time_ms: wall * 1e3,
            events_per_sec: rate,
        };
        write_json_file(&manifest_path, &manifest)?;
    }
    Ok(())
}

fn evaluate(
    outcomes_path: &Path,
    events_path: Option<&Path>,
    json: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let (_, outcomes) = wire::read_outcomes(open_input(outcomes_path)?)
        .map_err(|e| data(format!("{}: {e}", outcomes_path.display())))?;
    let gt = match events_path {
        Some(p) => GroundTruth::from_events(&read_event_file(p)?.1),
        None => GroundTruth::from_outcomes(&outcomes),
    };
    let judgments = eval::judge(&outcomes, &gt).map_err(data)?;
    let report = eval::report(&judgments);
    out.write_all(report.to_text().as_bytes()).map_err(data)?;
    if let Some(p) = json {
        write_json_file(p, &report)?;
    }
    Ok(())
}

/// `from, from - step, …` down to `to` inclusive, rounded to 1e-9.
pub fn threshold_range(from: f64, to: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && from.is_finite() && to.is_finite()) || to > from {
        return Err(usage(format!("bad threshold range {from}..{to} step {step}")));
    }
    let n = ((from - to) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((from - i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SweepDoc {
    th_emb: f64,
    operating_point_ftr: Option<f64>,
    rows: Vec<eval::SweepRow>,
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    args: &ConfigArgs,
    input: Option<&Path>,
    thresholds: &[f64],
    target_ftr: Option<f64>,
    parallel: bool,
    json: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let (d, events) = match input {
        Some(p) => {
            let (h, ev) = read_event_file(p)?;
            (h.d, ev)
        }
        None => {
            let s = &cfg.file.scenario;
            (s.d, sim::generate(s).map_err(usage)?.0)
        }
    };
    let mut system = cfg.system_for(d)?.into_inner();
    let mut op_ftr = None;
    if let Some(target) = target_ftr {
        let op = eval::operating_point(&events, &system, target, ThresholdGrid::default()).map_err(data)?;
        writeln!(err, "operating point: th_emb {:.2} (FTR {:.4})", op.th_emb, op.report.ftr.unwrap_or(0.0))
            .map_err(data)?;
        system.th_emb = op.th_emb;
        op_ftr = Some(op.report.ftr.unwrap_or(0.0));
    }
    let rows = eval::sweep_th_score(&events, &system, thresholds, parallel).map_err(data)?;
    out.write_all(eval::format_table("th_score", &rows).as_bytes()).map_err(data)?;
    if let Some(p) = json {
        write_json_file(p, &SweepDoc { th_emb: system.th_emb, operating_point_ftr: op_ftr, rows })?;
    }
    Ok(())
}

fn snapshot(action: SnapshotAction, out: &mut dyn Write) -> Result<(), CliError> {
    let read = |p: &Path| -> Result<Vec<u8>, CliError> {
        let mut bytes = Vec::new();
        open_input(p)?.read_to_end(&mut bytes).map_err(io_at(p))?;
        Ok(bytes)
    };
    match action {
        SnapshotAction::Inspect { path } => {
            let g = Gallery::restore(&read(&path)?).map_err(|e| data(format!("{}: {e}", path.display())))?;
            let mut text = serde_json::to_string_pretty(&g.summary()).map_err(data)?;
            text.push('\n');
            out.write_all(text.as_bytes()).map_err(data)
        }
        SnapshotAction::Validate { path, d } => {
            let bytes = read(&path)?;
            let g = match d {
                Some(d) => Gallery::restore_for(&bytes, d),
                None => Gallery::restore(&bytes),
            }
            .map_err(|e| data(format!("{}: {e}", path.display())))?;
            let s = g.summary();
            writeln!(out, "ok: {} identities, {} slots, next id {}", s.identities, s.slots, s.next_global_id)
                .map_err(data)
        }
    }
}
