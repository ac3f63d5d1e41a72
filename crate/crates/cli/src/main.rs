//! `tbma`: command-line front end for the event-detection experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Deserialize;
use serde_json::Value;
use tbma_core::harness::{
    rows_to_csv, run_sweep, write_atomic, write_rows_csv, Axis, CodebookKind, RunManifest, StopRule, SweepSpec,
};
use tbma_core::oracle::DEFAULT_BUDGET;
use tbma_core::{compare_with_oracle, AmpSettings, Error, ScenarioConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "tbma", version, about = "Event detection with JSC and SSC coding over a shared channel")]
#[command(after_help = "Exit codes: 0 success, 2 usage or config error, 3 numerical failure.\n\
                        Set TBMA_LOG (e.g. TBMA_LOG=debug) to control logging.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one operating point and print its result row as CSV.
    Run(RunArgs),
    /// Run every sweep in a spec file and write one CSV per coding plus a manifest.
    Sweep(SweepArgs),
    /// Compare AMP with the exact MAP detector on identical trials.
    OracleCompare(OracleArgs),
}

#[derive(Args)]
struct Overrides {
    /// Override a config field, `key=value`. Dotted keys reach nested objects
    /// (`amp.max_iters=100`); `G=<n>` replaces the group structure with
    /// disjoint groups of size n. Overrides take precedence over the file,
    /// and `--seed`/`--trials` take precedence over both.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON scenario (sweep-only keys such as `axis` and `values` are ignored).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep spec, or an array of specs.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value_t = 5000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest number of hypotheses the oracle may enumerate.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Optional run parameters carried in a config file next to the scenario.
#[derive(Deserialize)]
struct PointConfig {
    #[serde(flatten)]
    scenario: ScenarioConfig,
    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default)]
    master_seed: u64,
    #[serde(default)]
    amp: AmpSettings,
    #[serde(default)]
    codebook: CodebookKind,
    #[serde(default)]
    fixed_codebook: bool,
}

fn default_trials() -> u64 {
    1000
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: invalid JSON: {e}", path.display())))
}

/// Parses a `--set` value as JSON, falling back to a plain string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn apply_overrides(doc: &mut Value, sets: &[String]) -> CliResult<()> {
    for item in sets {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
        let value = parse_value(raw);
        let root = doc
            .as_object_mut()
            .ok_or_else(|| CliError::Usage("config must be a JSON object".into()))?;
        if key == "G" || key == "g" {
            root.remove("group_assignment");
            root.remove("K");
            root.remove("k");
            root.insert("G".into(), value);
            continue;
        }
        let mut target = &mut *root;
        let mut parts = key.split('.').peekable();
        while let Some(part) = parts.next() {
            if parts.peek().is_none() {
                target.insert(part.to_string(), value.clone());
                break;
            }
            target = target
                .entry(part)
                .or_insert_with(|| Value::Object(Default::default()))
                .as_object_mut()
                .ok_or_else(|| CliError::Usage(format!("--set {key}: `{part}` is not an object")))?;
        }
    }
    Ok(())
}

/// Loads a scenario file, drops sweep-only keys and applies overrides.
fn load_point(path: &Path, sets: &[String]) -> CliResult<PointConfig> {
    let mut doc = read_json(path)?;
    if let Some(obj) = doc.as_object_mut() {
        if !obj.contains_key("coding") {
            if let Some(first) = obj.get("codings").and_then(|c| c.get(0)).cloned() {
                obj.insert("coding".into(), first);
            }
        }
        for key in ["axis", "values", "codings", "confidence", "name"] {
            obj.remove(key);
        }
    }
    apply_overrides(&mut doc, sets)?;
    serde_json::from_value(doc).map_err(|e| CliError::Core(Error::Json(e)))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => write_atomic(path, bytes)?,
        None => print!("{}", String::from_utf8_lossy(bytes)),
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let point = load_point(&args.config, &args.overrides.set)?;
    let spec = SweepSpec {
        name: None,
        axis: Axis::SnrDb,
        values: vec![point.scenario.snr_db],
        codings: vec![point.scenario.coding],
        base: point.scenario,
        trials: args.trials.unwrap_or(point.trials),
        master_seed: args.seed.unwrap_or(point.master_seed),
        confidence: StopRule::Fixed,
        amp: point.amp,
        codebook: point.codebook,
        fixed_codebook: point.fixed_codebook,
    };
    let rows = run_sweep(&spec, args.workers)?;
    emit(args.out.as_deref(), &rows_to_csv(&rows)?)
}

fn load_specs(path: &Path) -> CliResult<Vec<SweepSpec>> {
    let docs = match read_json(path)? {
        Value::Array(items) => items,
        single => vec![single],
    };
    if docs.is_empty() {
        return Err(CliError::Usage(format!("{}: no sweeps found", path.display())));
    }
    docs.into_iter()
        .map(|d| SweepSpec::from_json_value(d).map_err(CliError::from))
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    let specs = load_specs(&args.spec)?;
    let file_stem = args
        .spec
        .file_stem()
        .map_or_else(|| "sweep".to_string(), |s| s.to_string_lossy().into_owned());
    fs::create_dir_all(&args.out).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", args.out.display())))?;
    for (i, spec) in specs.iter().enumerate() {
        let stem = match (&spec.name, specs.len()) {
            (Some(name), _) => name.clone(),
            (None, 1) => file_stem.clone(),
            (None, _) => format!("{file_stem}_{i}"),
        };
        info!("sweep {stem}: {} points per coding", spec.values.len());
        let rows = run_sweep(spec, args.workers)?;
        let mut outputs = Vec::new();
        for &coding in &spec.codings {
            let name = format!("{stem}_{}.csv", coding.as_str().to_lowercase());
            let subset: Vec<_> = rows.iter().filter(|r| r.coding == coding).cloned().collect();
            write_rows_csv(&args.out.join(&name), &subset)?;
            outputs.push(name);
        }
        RunManifest::new(spec, args.workers, &rows, outputs).write(&args.out.join(format!("{stem}_manifest.json")))?;
    }
    Ok(())
}

fn cmd_oracle_compare(args: OracleArgs) -> CliResult<()> {
    let point = load_point(&args.config, &args.overrides.set)?;
    let cmp = compare_with_oracle(
        &point.scenario,
        &point.amp,
        point.codebook,
        args.trials,
        args.seed.unwrap_or(point.master_seed),
        args.budget,
        args.workers,
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(&cmp).map_err(|e| CliError::Core(e.into()))?;
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    emit(args.out.as_deref(), &bytes)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("TBMA_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::OracleCompare(a) => cmd_oracle_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
