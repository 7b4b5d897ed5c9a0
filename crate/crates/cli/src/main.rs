//! `rrbsight` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or configuration error.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use rrbsight_core::ensemble::{EnsembleConfig, Variant};
use rrbsight_core::experiment::{self, sha256_hex, CorpusConfig};
use rrbsight_core::pipeline::{self, PipelineConfig, ThroughputSeries};
use rrbsight_core::profiles;
use rrbsight_core::radio::Crnti;
use rrbsight_core::sim::{run_simulation, DciLog, SimConfig};
use rrbsight_core::sniffer::{self, read_trace_csv, reconstruct_throughput};

#[derive(Parser)]
#[command(name = "rrbsight", version, about = "Simulate, sniff and fingerprint cell scheduling traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the cell simulator and write the DCI log plus ground truth.
    Simulate {
        /// SimConfig JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reconstruct one RNTI's binned UL/DL bytes from a DCI log.
    Sniff {
        /// Grants CSV (`subframe,rnti,direction,bitmap_hex,tbs_bytes`).
        #[arg(long)]
        log: PathBuf,
        /// RAR CSV; defaults to `rar_events.csv` next to the log.
        #[arg(long)]
        rar: Option<PathBuf>,
        /// Decimal or 0x-prefixed hex.
        #[arg(long, value_parser = parse_rnti)]
        rnti: u16,
        /// Bin width in subframes.
        #[arg(long, default_value_t = sniffer::DEFAULT_BIN_SUBFRAMES)]
        bin: u64,
        #[arg(long, default_value_t = 1.0)]
        subframe_ms: f64,
        /// Observation span in subframes; inferred from the log when absent.
        #[arg(long)]
        subframes: Option<u64>,
        /// Output trace CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// List every RNTI announced or granted in a DCI log.
    Rntis {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        rar: Option<PathBuf>,
    },
    /// Build a feature CSV from `<traces>/<label>/*.csv`.
    Dataset {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Average this many consecutive iterations per class into one row.
        #[arg(long, default_value_t = 1)]
        average: usize,
        /// Bin width the traces were written with, in milliseconds.
        #[arg(long, default_value_t = 100.0)]
        bin_ms: f64,
    },
    /// Stratified split, fit one ensemble, score it on the held-out part.
    TrainEval {
        #[arg(long)]
        dataset: PathBuf,
        /// `rf` (Random Forest) or `et` (Extra Trees).
        #[arg(long, value_parser = parse_variant)]
        variant: Variant,
        /// Model JSON output.
        #[arg(long)]
        model: PathBuf,
        /// Metrics report JSON output.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        /// Grow trees on one thread. The model is identical either way.
        #[arg(long)]
        serial: bool,
    },
    /// Write `ul_cdf.csv` and `dl_cdf.csv` for one trace.
    Cdf {
        #[arg(long)]
        trace: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Skip rolling normalisation and use capped raw bytes.
        #[arg(long)]
        raw: bool,
        #[arg(long, default_value_t = 100.0)]
        bin_ms: f64,
    },
    /// Whole synthetic attack: corpus, features, both ensembles, reports.
    Run {
        /// CorpusConfig JSON; defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        trees: usize,
    },
    /// Print the built-in application profiles as JSON.
    Profiles,
}

fn parse_rnti(s: &str) -> Result<u16, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u16::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid RNTI {s:?}: {e}"))
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: rrbsight_core::Error| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl From<rrbsight_core::Error> for Failure {
    fn from(e: rrbsight_core::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn data_err(context: impl std::fmt::Display) -> impl FnOnce(std::io::Error) -> Failure {
    move |e| Failure::Data(format!("{context}: {e}"))
}

fn open(path: &Path) -> CmdResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(data_err(path.display()))
}

fn read_text(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).map_err(data_err(path.display()))
}

#[derive(Serialize)]
struct Artifact {
    path: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct RunManifest {
    tool_version: &'static str,
    command: &'static str,
    config_paths: Vec<String>,
    seeds: BTreeMap<String, u64>,
    artifacts: Vec<Artifact>,
    stage_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(command: &'static str) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            config_paths: Vec::new(),
            seeds: BTreeMap::new(),
            artifacts: Vec::new(),
            stage_seconds: BTreeMap::new(),
        }
    }
}

/// Writes files under `dir` and records each one in the manifest.
struct OutDir<'m> {
    dir: PathBuf,
    manifest: &'m mut RunManifest,
}

impl<'m> OutDir<'m> {
    fn create(dir: &Path, manifest: &'m mut RunManifest) -> CmdResult<Self> {
        fs::create_dir_all(dir).map_err(data_err(dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn put(&mut self, rel: &str, bytes: &[u8]) -> CmdResult {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(data_err(parent.display()))?;
        }
        fs::write(&path, bytes).map_err(data_err(path.display()))?;
        self.manifest.artifacts.push(Artifact {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn finish(self) -> CmdResult<String> {
        let json = serde_json::to_string_pretty(&*self.manifest).map_err(|e| Failure::Data(e.to_string()))?;
        let path = self.dir.join("manifest.json");
        fs::write(&path, format!("{json}\n")).map_err(data_err(path.display()))?;
        Ok(json)
    }
}

/// Prints to stdout; a closed pipe is not an error once outputs are on disk.
fn emit(text: impl std::fmt::Display) {
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{text}").and_then(|()| stdout.flush());
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(data_err(parent.display()))?;
    }
    fs::write(path, bytes).map_err(data_err(path.display()))
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> rrbsight_core::Result<()>) -> CmdResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> CmdResult {
    let mut cfg = SimConfig::from_json(&read_text(config)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let start = Instant::now();
    let (log, truth) = run_simulation(&cfg)?;
    let mut manifest = RunManifest::new("simulate");
    manifest.config_paths.push(config.display().to_string());
    manifest.seeds.insert("simulation".into(), cfg.seed);
    manifest.stage_seconds.insert("simulate".into(), start.elapsed().as_secs_f64());
    let mut dir = OutDir::create(out, &mut manifest)?;
    dir.put("dci_log.csv", &buffer(|b| log.write_grants_csv(b))?)?;
    dir.put("rar_events.csv", &buffer(|b| log.write_rar_csv(b))?)?;
    dir.put("ground_truth.csv", &buffer(|b| truth.write_csv(b))?)?;
    dir.put("labels.csv", &buffer(|b| truth.write_labels_csv(b))?)?;
    emit(dir.finish()?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sniff(
    log_path: &Path,
    rar: Option<&Path>,
    rnti: u16,
    bin: u64,
    subframe_ms: f64,
    subframes: Option<u64>,
    out: &Path,
) -> CmdResult {
    if bin == 0 {
        return Err(Failure::Usage("--bin must be at least 1".into()));
    }
    let log = load_log(log_path, rar, subframes)?;
    let trace = reconstruct_throughput(&log, Crnti(rnti), bin, subframe_ms)?;
    write_file(out, &buffer(|b| trace.write_csv(b))?)?;
    let total = |s: &ThroughputSeries| s.values.iter().sum::<f64>();
    eprintln!(
        "rnti {rnti}: {} bins of {bin} subframes, UL {} B, DL {} B{}",
        trace.ul.len(),
        total(&trace.ul),
        total(&trace.dl),
        if trace.partial_last_bin { " (last bin partial)" } else { "" }
    );
    Ok(())
}

fn load_log(log_path: &Path, rar: Option<&Path>, subframes: Option<u64>) -> CmdResult<DciLog> {
    let rar_path = rar.map_or_else(|| log_path.with_file_name("rar_events.csv"), Path::to_path_buf);
    let log = DciLog::read_csv(open(log_path)?, open(&rar_path)?, subframes)?;
    log.validate()?;
    Ok(log)
}

fn list_rntis(log_path: &Path, rar: Option<&Path>) -> CmdResult {
    let log = load_log(log_path, rar, None)?;
    for r in sniffer::identify_victims(&log)? {
        emit(r.0);
    }
    Ok(())
}

fn sorted_entries(dir: &Path) -> CmdResult<Vec<PathBuf>> {
    let mut paths = fs::read_dir(dir)
        .map_err(data_err(dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data_err(dir.display()))?;
    paths.sort();
    Ok(paths)
}

fn dataset(traces: &Path, out: &Path, average: usize, bin_ms: f64) -> CmdResult {
    if average == 0 {
        return Err(Failure::Usage("--average must be at least 1".into()));
    }
    let mut loaded: Vec<(String, ThroughputSeries, ThroughputSeries)> = Vec::new();
    for class_dir in sorted_entries(traces)?.into_iter().filter(|p| p.is_dir()) {
        let label = class_dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Failure::Data(format!("{}: class directory name is not UTF-8", class_dir.display())))?
            .to_string();
        for file in sorted_entries(&class_dir)? {
            if file.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            let (ul, dl) = read_trace_csv(open(&file)?, bin_ms)
                .map_err(|e| Failure::Data(format!("{}: {e}", file.display())))?;
            loaded.push((label.clone(), ul, dl));
        }
    }
    if loaded.is_empty() {
        return Err(Failure::Data(format!("no trace CSVs under {}/<label>/", traces.display())));
    }
    let (rows, skipped) = experiment::featurize_series(
        loaded.iter().map(|(l, ul, dl)| (l.as_str(), ul, dl)),
        &PipelineConfig::default(),
        average,
    )?;
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} degenerate trace(s) with no non-zero bins");
    }
    if rows.is_empty() {
        return Err(Failure::Data("no usable traces".into()));
    }
    write_file(out, &buffer(|b| pipeline::write_features_csv(&rows, b))?)?;
    eprintln!("{} feature rows from {} traces", rows.len(), loaded.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train_eval(
    dataset: &Path,
    variant: Variant,
    model_path: &Path,
    report_path: &Path,
    seed: u64,
    trees: usize,
    train_fraction: f64,
    serial: bool,
) -> CmdResult {
    let rows = pipeline::read_features_csv(open(dataset)?)?;
    if rows.is_empty() {
        return Err(Failure::Data(format!("{}: no rows", dataset.display())));
    }
    let cfg = EnsembleConfig {
        n_estimators: trees,
        seed,
        ..EnsembleConfig::new(variant)
    };
    let tv = experiment::train_and_evaluate(&rows, &cfg, train_fraction, !serial)?;
    write_file(model_path, tv.model.to_json()?.as_bytes())?;
    write_file(report_path, tv.report.to_json()?.as_bytes())?;
    emit(&tv.report);
    Ok(())
}

fn cdf(trace: &Path, out: &Path, raw: bool, bin_ms: f64) -> CmdResult {
    let (ul, dl) = read_trace_csv(open(trace)?, bin_ms)?;
    let cfg = PipelineConfig::default();
    let mut files = Vec::new();
    for (name, series) in [("ul_cdf.csv", &ul), ("dl_cdf.csv", &dl)] {
        let curve = pipeline::series_cdf(series, &cfg, !raw).map_err(|e| Failure::Data(format!("{name}: {e}")))?;
        files.push((name, buffer(|b| curve.write_csv(b))?));
    }
    fs::create_dir_all(out).map_err(data_err(out.display()))?;
    for (name, bytes) in files {
        write_file(&out.join(name), &bytes)?;
    }
    Ok(())
}

fn run(config: Option<&Path>, out: &Path, seed: Option<u64>, trees: usize) -> CmdResult {
    let mut corpus = match config {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?,
        None => CorpusConfig::default(),
    };
    if let Some(s) = seed {
        corpus.seed = s;
    }
    let artifacts = experiment::run_end_to_end(&corpus, &PipelineConfig::default(), trees)?;
    let mut manifest = RunManifest::new("run");
    if let Some(p) = config {
        manifest.config_paths.push(p.display().to_string());
    }
    manifest.seeds.insert("corpus".into(), corpus.seed);
    manifest.seeds.insert("ensemble".into(), corpus.seed);
    manifest.stage_seconds = artifacts.stage_seconds.iter().cloned().collect();
    let mut dir = OutDir::create(out, &mut manifest)?;
    let config_json = serde_json::to_string_pretty(&corpus).map_err(|e| Failure::Data(e.to_string()))?;
    dir.put("corpus_config.json", config_json.as_bytes())?;
    for (rel, bytes) in &artifacts.files {
        dir.put(rel, bytes)?;
    }
    dir.finish()?;
    if artifacts.skipped_traces > 0 {
        eprintln!("warning: skipped {} degenerate trace(s)", artifacts.skipped_traces);
    }
    emit(format_args!("Random Forest\n{}\n\nExtra Trees\n{}", artifacts.rf.report, artifacts.et.report));
    Ok(())
}

fn profiles_json() -> CmdResult {
    let json = serde_json::to_string_pretty(&profiles::catalogue()).map_err(|e| Failure::Data(e.to_string()))?;
    emit(json);
    Ok(())
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Simulate { config, out, seed } => simulate(&config, &out, seed),
        Command::Sniff {
            log,
            rar,
            rnti,
            bin,
            subframe_ms,
            subframes,
            out,
        } => sniff(&log, rar.as_deref(), rnti, bin, subframe_ms, subframes, &out),
        Command::Rntis { log, rar } => list_rntis(&log, rar.as_deref()),
        Command::Dataset {
            traces,
            out,
            average,
            bin_ms,
        } => dataset(&traces, &out, average, bin_ms),
        Command::TrainEval {
            dataset,
            variant,
            model,
            report,
            seed,
            trees,
            train_fraction,
            serial,
        } => train_eval(&dataset, variant, &model, &report, seed, trees, train_fraction, serial),
        Command::Cdf { trace, out, raw, bin_ms } => cdf(&trace, &out, raw, bin_ms),
        Command::Run {
            config,
            out,
            seed,
            trees,
        } => run(config.as_deref(), &out, seed, trees),
        Command::Profiles => profiles_json(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
