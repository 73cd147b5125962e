//! Batch command-line front end: data generation, model fitting,
//! prediction, evaluation, sweeps and rate checks, all driven by JSON
//! configs with a manifest written next to every output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use postdrift::data::{fmt_f64, read_dataset_csv, read_probability_csv, write_dataset_csv};
use postdrift::error::Error;
use postdrift::features::FeatureMap;
use postdrift::harness::{self, ExperimentConfig, RateKind};
use postdrift::logistic::Penalty;
use postdrift::metrics::{auc, confusion};
use postdrift::source::{balanced_weights, fit_logistic_with, FitOptions, SourceModel};
use postdrift::synth::{self, Domain, SimConfig};
use postdrift::transfer::{fit_transfer, TransferModel, DEFAULT_CLAMP_EPS};

const EXIT_CONFIG: i32 = 2;
const EXIT_NONCONVERGED: i32 = 3;
const EXIT_DATA: i32 = 4;

#[derive(Parser)]
#[command(name = "postdrift", version, about = "Posterior-drift transfer learning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw synthetic source/target datasets from a simulation config.
    Generate(GenerateArgs),
    /// Fit a weighted, optionally L1-penalized logistic source model.
    FitSource(FitSourceArgs),
    /// Estimate the linear shift on top of a source model.
    FitTransfer(FitTransferArgs),
    /// Score a feature CSV with a fitted model.
    Predict(PredictArgs),
    /// Compute classification metrics of a model on labeled data.
    Evaluate(EvaluateArgs),
    /// Run a one-parameter sweep over the benchmark model roster.
    Sweep(SweepArgs),
    /// Regress estimation error against target sample size.
    RateCheck(RateCheckArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON: {"sim": SimConfig, "domains": ["source","target"]}
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitSourceArgs {
    #[arg(long)]
    data: PathBuf,
    /// Feature map JSON; defaults to intercept plus all mains.
    #[arg(long)]
    map: Option<PathBuf>,
    /// L1 penalty strength; omit for an unpenalized fit.
    #[arg(long)]
    lambda: Option<f64>,
    /// Weight rows by inverse class proportions.
    #[arg(long)]
    balanced_weights: bool,
    /// Z-score design columns during the fit (coefficients are reported
    /// on the original scale).
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    allow_nonconverged: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitTransferArgs {
    /// Fitted source model JSON.
    #[arg(long, conflicts_with = "probs")]
    source: Option<PathBuf>,
    /// External probability CSV (row_id,probability) used as the source.
    #[arg(long)]
    probs: Option<PathBuf>,
    #[arg(long)]
    target: PathBuf,
    /// Shift map JSON; defaults to intercept plus all mains.
    #[arg(long)]
    shift_map: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Probability clamp for kernel/external sources.
    #[arg(long, default_value_t = DEFAULT_CLAMP_EPS)]
    eps: f64,
    #[arg(long)]
    balanced_weights: bool,
    #[arg(long)]
    allow_nonconverged: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Transfer model JSON (a bare source model is accepted and scored
    /// with a zero shift).
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled data CSV (y column required).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// ExperimentConfig JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replicates (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct RateCheckArgs {
    /// JSON: {"kind": "beta_error"|"excess_risk", "grid": [..],
    /// "replicates": R, "sim": SimConfig}
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
}

/// Written atomically next to every output; rerunning the recorded
/// command with the recorded config reproduces the outputs byte for byte.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    config: serde_json::Value,
    inputs: serde_json::Value,
    outputs: Vec<String>,
    seed: Option<u64>,
    duration_seconds: f64,
}

enum CliError {
    Config(String),
    NonConverged(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::NonConverged(_) => EXIT_NONCONVERGED,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::NonConverged(m) | CliError::Data(m) => m,
        }
    }
}

/// Library errors map onto the exit-code contract: configuration
/// problems are 2, everything data-shaped is 4.
fn classify(err: Error) -> CliError {
    match err {
        Error::Config(_) | Error::Json(_) => CliError::Config(err.to_string()),
        _ => CliError::Data(err.to_string()),
    }
}

fn main() {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args, started),
        Command::FitSource(args) => cmd_fit_source(args, started),
        Command::FitTransfer(args) => cmd_fit_transfer(args, started),
        Command::Predict(args) => cmd_predict(args, started),
        Command::Evaluate(args) => cmd_evaluate(args, started),
        Command::Sweep(args) => cmd_sweep(args, started),
        Command::RateCheck(args) => cmd_rate_check(args, started),
    };
    if let Err(err) = result {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}

fn read_config_json(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: invalid JSON: {e}", path.display())))
}

fn parse_config<T: serde::de::DeserializeOwned>(
    value: serde_json::Value,
    path: &Path,
) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|e| {
        // serde_json reports the failing field path in the message
        CliError::Config(format!("{}: {e}", path.display()))
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_manifest(dir_or_file: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let path = if dir_or_file.is_dir() {
        dir_or_file.join("manifest.json")
    } else {
        manifest_path_for(dir_or_file)
    };
    let value = serde_json::to_value(manifest)
        .map_err(|e| CliError::Data(format!("serialize manifest: {e}")))?;
    write_json(&path, &value)?;
    println!("manifest: {}", path.display());
    Ok(())
}

fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}

fn load_dataset(path: &Path) -> Result<postdrift::Dataset, CliError> {
    read_dataset_csv(path).map_err(classify)
}

fn penalty_from(lambda: Option<f64>) -> Penalty {
    match lambda {
        Some(l) => Penalty::l1(l),
        None => Penalty::none(),
    }
}

fn load_map_or_default(path: Option<&PathBuf>, d: usize) -> Result<FeatureMap, CliError> {
    match path {
        Some(p) => {
            let value = read_config_json(p)?;
            let map: FeatureMap = parse_config(value, p)?;
            map.validate(d).map_err(classify)?;
            Ok(map)
        }
        None => Ok(FeatureMap::intercept_mains(d)),
    }
}

fn cmd_generate(args: GenerateArgs, started: Instant) -> Result<(), CliError> {
    #[derive(serde::Deserialize, Serialize)]
    #[serde(deny_unknown_fields)]
    struct GenerateConfig {
        sim: SimConfig,
        domains: Vec<Domain>,
    }
    let raw = read_config_json(&args.config)?;
    let mut config: GenerateConfig = parse_config(raw, &args.config)?;
    if let Some(seed) = args.seed {
        config.sim.seed = seed;
    }
    config.sim.validate().map_err(classify)?;
    if config.domains.is_empty() {
        return Err(CliError::Config("domains list is empty".into()));
    }

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let mut outputs = Vec::new();
    for &domain in &config.domains {
        let data = synth::generate(&config.sim, domain).map_err(classify)?;
        let name = match domain {
            Domain::Source => "source.csv",
            Domain::Target => "target.csv",
        };
        let path = args.out_dir.join(name);
        write_dataset_csv(&path, &data).map_err(classify)?;
        println!("wrote {} ({} rows)", path.display(), data.n());
        outputs.push(path.display().to_string());
    }
    let manifest = RunManifest {
        command: "generate",
        version: env!("CARGO_PKG_VERSION"),
        config: serde_json::to_value(&config).expect("config serializes"),
        inputs: serde_json::json!({ "config": args.config.display().to_string() }),
        outputs,
        seed: Some(config.sim.seed),
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    write_manifest(&args.out_dir, &manifest)
}

fn cmd_fit_source(args: FitSourceArgs, started: Instant) -> Result<(), CliError> {
    let mut data = load_dataset(&args.data)?;
    if args.balanced_weights {
        data.w = balanced_weights(data.y.view()).map_err(classify)?;
    }
    let map = load_map_or_default(args.map.as_ref(), data.dim())?;
    let penalty = penalty_from(args.lambda);
    let options = FitOptions {
        standardize: args.standardize,
    };
    let (model, report) =
        fit_logistic_with(&data, &map, &penalty, None, &options).map_err(classify)?;
    println!(
        "fit: converged={} iterations={} objective={:.6} kkt={:.2e}",
        report.converged, report.iterations, report.objective, report.kkt_residual
    );
    if !report.converged && !args.allow_nonconverged {
        return Err(CliError::NonConverged(
            "fit did not converge (rerun with --allow-nonconverged to keep it)".into(),
        ));
    }
    write_json(&args.out, &model.to_json())?;
    println!("wrote {}", args.out.display());
    let manifest = RunManifest {
        command: "fit-source",
        version: env!("CARGO_PKG_VERSION"),
        config: serde_json::json!({
            "map": map,
            "lambda": args.lambda,
            "balanced_weights": args.balanced_weights,
            "standardize": args.standardize,
            "allow_nonconverged": args.allow_nonconverged,
        }),
        inputs: serde_json::json!({ "data": args.data.display().to_string() }),
        outputs: vec![args.out.display().to_string()],
        seed: None,
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    write_manifest(&args.out, &manifest)
}

fn cmd_fit_transfer(args: FitTransferArgs, started: Instant) -> Result<(), CliError> {
    let mut target = load_dataset(&args.target)?;
    if args.balanced_weights {
        target.w = balanced_weights(target.y.view()).map_err(classify)?;
    }
    let source = match (&args.source, &args.probs) {
        (Some(path), None) => {
            let value = read_config_json(path)?;
            SourceModel::from_json(&value).map_err(classify)?
        }
        (None, Some(path)) => {
            let probabilities = read_probability_csv(path).map_err(classify)?;
            SourceModel::External { probabilities }
        }
        _ => {
            return Err(CliError::Config(
                "exactly one of --source and --probs is required".into(),
            ))
        }
    };
    let shift_map = load_map_or_default(args.shift_map.as_ref(), target.dim())?;
    let penalty = penalty_from(args.lambda);
    let (model, report) =
        fit_transfer(&source, &target, &shift_map, &penalty, args.eps).map_err(classify)?;
    println!(
        "fit: converged={} iterations={} objective={:.6} kkt={:.2e}",
        report.converged, report.iterations, report.objective, report.kkt_residual
    );
    if !report.converged && !args.allow_nonconverged {
        return Err(CliError::NonConverged(
            "shift fit did not converge (rerun with --allow-nonconverged to keep it)".into(),
        ));
    }
    write_json(&args.out, &model.to_json())?;
    println!("wrote {}", args.out.display());
    let manifest = RunManifest {
        command: "fit-transfer",
        version: env!("CARGO_PKG_VERSION"),
        config: serde_json::json!({
            "shift_map": shift_map,
            "lambda": args.lambda,
            "eps": args.eps,
            "balanced_weights": args.balanced_weights,
            "allow_nonconverged": args.allow_nonconverged,
        }),
        inputs: serde_json::json!({
            "source": args.source.as_ref().map(|p| p.display().to_string()),
            "probs": args.probs.as_ref().map(|p| p.display().to_string()),
            "target": args.target.display().to_string(),
        }),
        outputs: vec![args.out.display().to_string()],
        seed: None,
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    write_manifest(&args.out, &manifest)
}

fn load_transfer_model(path: &Path) -> Result<TransferModel, CliError> {
    let value = read_config_json(path)?;
    if value.get("beta").is_some() {
        return TransferModel::from_json(&value).map_err(classify);
    }
    // a bare source model predicts through a zero shift
    let source = SourceModel::from_json(&value).map_err(classify)?;
    Ok(TransferModel {
        source,
        shift_map: FeatureMap {
            include_intercept: true,
            mains: vec![],
            squares: vec![],
            interactions: vec![],
        },
        beta: ndarray::Array1::zeros(1),
        clamp_eps: DEFAULT_CLAMP_EPS,
    })
}

fn cmd_predict(args: PredictArgs, started: Instant) -> Result<(), CliError> {
    let model = load_transfer_model(&args.model)?;
    let data = load_dataset(&args.data)?;
    let (probs, labels) = model.predict_dataset(&data).map_err(classify)?;
    let mut out = String::from("row_id,prob,label\n");
    for i in 0..data.n() {
        out.push_str(&format!(
            "{},{},{}\n",
            data.row_id(i),
            fmt_f64(probs[i]),
            labels[i]
        ));
    }
    write_atomic(&args.out, out.as_bytes())?;
    println!("wrote {} ({} rows)", args.out.display(), data.n());
    let manifest = RunManifest {
        command: "predict",
        version: env!("CARGO_PKG_VERSION"),
        config: serde_json::json!({}),
        inputs: serde_json::json!({
            "model": args.model.display().to_string(),
            "data": args.data.display().to_string(),
        }),
        outputs: vec![args.out.display().to_string()],
        seed: None,
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    write_manifest(&args.out, &manifest)
}

fn cmd_evaluate(args: EvaluateArgs, started: Instant) -> Result<(), CliError> {
    let model = load_transfer_model(&args.model)?;
    let data = load_dataset(&args.data)?;
    data.require_binary_labels().map_err(classify)?;
    let (probs, labels) = model.predict_dataset(&data).map_err(classify)?;
    let truth = data.y.to_vec();
    let predicted: Vec<f64> = labels.iter().map(|&v| v as f64).collect();
    let mut metrics = confusion(&truth, &predicted).map_err(classify)?;
    let has_both = truth.iter().any(|&v| v == 1.0) && truth.iter().any(|&v| v == 0.0);
    if has_both {
        metrics.auc = Some(auc(&truth, &probs.to_vec()).map_err(classify)?);
    }
    let value = serde_json::to_value(&metrics)
        .map_err(|e| CliError::Data(format!("serialize metrics: {e}")))?;
    write_json(&args.out, &value)?;
    println!("wrote {}", args.out.display());
    let manifest = RunManifest {
        command: "evaluate",
        version: env!("CARGO_PKG_VERSION"),
        config: serde_json::json!({}),
        inputs: serde_json::json!({
            "model": args.model.display().to_string(),
            "data": args.data.display().to_string(),
        }),
        outputs: vec![args.out.display().to_string()],
        seed: None,
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    write_manifest(&args.out, &manifest)
}

fn with_pool<T>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    match jobs {
        None => Ok(f()),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn cmd_sweep(args: SweepArgs, started: Instant) -> Result<(), CliError> {
    let raw = read_config_json(&args.config)?;
    let mut config: ExperimentConfig = parse_config(raw, &args.config)?;
    if let Some(seed) = args.seed {
        config.base.seed = seed;
    }
    config.validate().map_err(classify)?;

    let result = with_pool(args.jobs, || harness::run_sweep(&config))?.map_err(classify)?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let csv_path = args.out_dir.join("sweep.csv");
    write_atomic(&csv_path, result.to_csv().as_bytes())?;
    let json_path = args.out_dir.join("sweep.json");
    let value = serde_json::to_value(&result)
        .map_err(|e| CliError::Data(format!("serialize result: {e}")))?;
    write_json(&json_path, &value)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());

    let manifest = RunManifest {
        command: "sweep",
        version: env!("CARGO_PKG_VERSION"),
        config: serde_json::to_value(&config).expect("config serializes"),
        inputs: serde_json::json!({ "config": args.config.display().to_string() }),
        outputs: vec![
            csv_path.display().to_string(),
            json_path.display().to_string(),
        ],
        seed: Some(config.base.seed),
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    write_manifest(&args.out_dir, &manifest)
}

fn cmd_rate_check(args: RateCheckArgs, started: Instant) -> Result<(), CliError> {
    #[derive(serde::Deserialize, Serialize)]
    #[serde(deny_unknown_fields)]
    struct RateCheckConfig {
        kind: RateKind,
        grid: Vec<usize>,
        replicates: usize,
        sim: SimConfig,
    }
    let raw = read_config_json(&args.config)?;
    let mut config: RateCheckConfig = parse_config(raw, &args.config)?;
    if let Some(seed) = args.seed {
        config.sim.seed = seed;
    }

    let result = with_pool(args.jobs, || {
        harness::rate_check(config.kind, &config.grid, config.replicates, &config.sim)
    })?
    .map_err(classify)?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let csv_path = args.out_dir.join("rate.csv");
    write_atomic(&csv_path, result.to_csv().as_bytes())?;
    let json_path = args.out_dir.join("rate.json");
    let value = serde_json::to_value(&result)
        .map_err(|e| CliError::Data(format!("serialize result: {e}")))?;
    write_json(&json_path, &value)?;
    println!(
        "slope {:.4} (95% band [{:.4}, {:.4}])",
        result.slope, result.slope_ci_lower, result.slope_ci_upper
    );

    let manifest = RunManifest {
        command: "rate-check",
        version: env!("CARGO_PKG_VERSION"),
        config: serde_json::to_value(&config).expect("config serializes"),
        inputs: serde_json::json!({ "config": args.config.display().to_string() }),
        outputs: vec![
            csv_path.display().to_string(),
            json_path.display().to_string(),
        ],
        seed: Some(config.sim.seed),
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    write_manifest(&args.out_dir, &manifest)
}
