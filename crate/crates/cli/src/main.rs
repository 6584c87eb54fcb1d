//! `attrition` command-line tool.
//!
//! Results go to stdout as JSON (or to CSV files named by `--out`); logs and
//! errors go to stderr. Exit codes: 0 success, 1 usage error, 2 data or
//! schema error, 3 model error.

use std::fs;
use std::io::{self, Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use attrition_core::features::{chi_square, crosstab, Binning};
use attrition_core::forest::Execution;
use attrition_core::ingest::{load_dataset, write_dataset, DatasetSchema, EmployeeId, LoadOptions};
use attrition_core::model_store::{load_bundle, save_bundle, ModelBundle, StoreError};
use attrition_core::pipeline::{
    compare_candidates, defaults, evaluate, parse_candidates, score_employee, score_roster,
    screen_candidate, train_all, PipelineError, ScreeningResult, TrainConfig, TrainOptions,
};
use attrition_server::{AppState, ServerConfig};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "attrition", version, about = "Employee attrition risk, tenure and drivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and print its validation metrics.
    Train(TrainArgs),
    /// Print metrics of a model on labelled data.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Score every row and write one CSV line per employee.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the driver report for one employee.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        id: String,
        /// Decompose predicted tenure instead of attrition probability.
        #[arg(long)]
        tenure: bool,
    },
    /// Score candidate(s) from a JSON object or array (`-` reads stdin).
    Screen {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
    },
    /// Cross-tabulate two columns and test independence.
    Eda {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Quantile bins for numeric columns.
        #[arg(long, default_value_t = 4)]
        bins: usize,
        /// Dataset schema; defaults to the built-in one.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Serve the HTTP API over a model and a roster.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Training config; defaults to the built-in one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's forest seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the held-out rows as CSV.
    #[arg(long)]
    validation_out: Option<PathBuf>,
    /// Build trees on one thread (same result, slower).
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    roster: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Allowed CORS origin; any origin when omitted.
    #[arg(long)]
    cors_origin: Option<String>,
    /// Write each scored roster snapshot to this JSON file.
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Model(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Model(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Model(m) => m,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Forest(_) | PipelineError::Regression(_) | PipelineError::Drivers(_) => {
                Failure::Model(e.to_string())
            }
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure::Model(e.to_string())
    }
}

impl From<attrition_core::ingest::IngestError> for Failure {
    fn from(e: attrition_core::ingest::IngestError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train(args) => train(args),
        Command::Evaluate { model, data } => {
            let bundle = load_bundle(&model)?;
            let records = load_dataset(&data, &bundle.schema, LoadOptions::labeled())?.records;
            print_json(&evaluate(&bundle, &records)?)
        }
        Command::Predict { model, data, out } => predict(&model, &data, &out),
        Command::Explain {
            model,
            data,
            id,
            tenure,
        } => {
            let bundle = load_bundle(&model)?;
            let records = load_dataset(&data, &bundle.schema, LoadOptions::unlabeled())?.records;
            let id = EmployeeId(id);
            let record = records
                .iter()
                .find(|r| r.id == id)
                .ok_or_else(|| Failure::Data(format!("no employee with id {id} in {}", data.display())))?;
            let scored = score_employee(&bundle, record)?;
            print_json(if tenure {
                &scored.tenure_drivers
            } else {
                &scored.drivers
            })
        }
        Command::Screen { model, candidate } => screen(&model, &candidate),
        Command::Eda {
            data,
            x,
            y,
            bins,
            schema,
        } => eda(&data, &x, &y, bins, schema.as_deref()),
        Command::Serve(args) => serve(args),
    }
}

fn print_json<T: Serialize + ?Sized>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Data(e.to_string()))?;
    writeln!(out).map_err(|e| Failure::Data(e.to_string()))
}

/// `SOURCE_DATE_EPOCH` when set, so rebuilt artifacts can be byte-identical.
fn build_time() -> Result<DateTime<Utc>, Failure> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse::<i64>()
            .ok()
            .and_then(|s| DateTime::from_timestamp(s, 0))
            .ok_or_else(|| Failure::Usage(format!("SOURCE_DATE_EPOCH={v} is not a Unix timestamp"))),
        Err(_) => {
            let now = Utc::now();
            Ok(DateTime::from_timestamp(now.timestamp(), 0).unwrap_or(now))
        }
    }
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    let (mut config, inputs) = match &args.config {
        Some(path) => {
            let (config, base) = TrainConfig::load(path)?;
            let inputs = config.load_inputs(&base)?;
            (config, inputs)
        }
        None => (defaults::train_config(), defaults::inputs()),
    };
    if let Some(seed) = args.seed {
        config.forest.seed = seed;
    }
    let loaded = load_dataset(&args.data, &inputs.schema, LoadOptions::labeled())?;
    for column in &loaded.unknown_columns {
        log::warn!("ignoring column `{column}` not in the schema");
    }
    let options = TrainOptions {
        execution: if args.serial {
            Execution::Serial
        } else {
            Execution::Parallel
        },
        created_at: build_time()?,
    };
    let outcome = train_all(&loaded.records, &config, &inputs, options)?;
    save_bundle(&outcome.bundle, &args.out)?;
    log::info!("wrote {}", args.out.display());
    if let Some(path) = &args.validation_out {
        let file = create(path)?;
        write_dataset(file, &outcome.validation, &outcome.bundle.schema)?;
    }
    print_json(outcome.metrics())
}

fn create(path: &Path) -> Result<fs::File, Failure> {
    fs::File::create(path).map_err(|e| Failure::Data(format!("cannot create {}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct PredictSummary<'a> {
    rows: usize,
    predicted_yes: usize,
    predicted_attrition_ratio: f64,
    out: &'a Path,
}

fn predict(model: &Path, data: &Path, out: &Path) -> Result<(), Failure> {
    let bundle = load_bundle(model)?;
    let records = load_dataset(data, &bundle.schema, LoadOptions::unlabeled())?.records;
    let scored = score_roster(&bundle, &records, Utc::now())?;

    let mut csv = csv::Writer::from_writer(create(out)?);
    let write_err = |e: csv::Error| Failure::Data(format!("cannot write {}: {e}", out.display()));
    csv.write_record([
        "id",
        "probability",
        "label",
        "ttl",
        "lead_time",
        "lead_time_raw",
        "overdue",
        "top_reason",
    ])
    .map_err(write_err)?;
    for s in &scored {
        csv.write_record([
            s.id.0.clone(),
            s.attrition_probability.to_string(),
            s.label.to_string(),
            s.tenure.ttl.to_string(),
            s.tenure.lead_time.to_string(),
            s.tenure.lead_time_raw.to_string(),
            s.tenure.overdue.to_string(),
            s.top_reason().unwrap_or_default().to_owned(),
        ])
        .map_err(write_err)?;
    }
    csv.flush()
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", out.display())))?;

    let predicted_yes = scored
        .iter()
        .filter(|s| s.label == attrition_core::forest::Label::Yes)
        .count();
    print_json(&PredictSummary {
        rows: scored.len(),
        predicted_yes,
        predicted_attrition_ratio: if scored.is_empty() {
            0.0
        } else {
            predicted_yes as f64 / scored.len() as f64
        },
        out,
    })
}

fn screen(model: &Path, candidate: &Path) -> Result<(), Failure> {
    let bundle = load_bundle(model)?;
    let bytes = if candidate == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Failure::Data(format!("cannot read stdin: {e}")))?;
        buf
    } else {
        fs::read(candidate).map_err(|e| Failure::Data(format!("cannot read {}: {e}", candidate.display())))?
    };
    let many = serde_json::from_slice::<serde_json::Value>(&bytes).is_ok_and(|v| v.is_array());
    let candidates = parse_candidates(&bytes)?;
    let mut results: Vec<ScreeningResult> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| screen_candidate(&bundle, c, i))
        .collect::<Result<_, _>>()?;
    if many {
        results.sort_by(compare_candidates);
        print_json(&results)
    } else {
        print_json(&results[0])
    }
}

fn eda(data: &Path, x: &str, y: &str, bins: usize, schema: Option<&Path>) -> Result<(), Failure> {
    if bins < 2 {
        return Err(Failure::Usage("--bins must be at least 2".into()));
    }
    let schema = match schema {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
            DatasetSchema::from_json_slice(&bytes)?
        }
        None => defaults::inputs().schema,
    };
    let records = load_dataset(data, &schema, LoadOptions::unlabeled())?.records;
    let table = crosstab(&records, &schema, x, y, Binning::Quantile(bins))
        .map_err(|e| Failure::Data(e.to_string()))?;
    let test = chi_square(&table).map_err(|e| Failure::Data(e.to_string()))?;
    print_json(&serde_json::json!({"table": table, "chi_square": test}))
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let bundle: ModelBundle = load_bundle(&args.model)?;
    let roster = load_dataset(&args.roster, &bundle.schema, LoadOptions::unlabeled())?.records;
    let config = ServerConfig {
        token: None,
        cors_origin: args.cors_origin,
        snapshot_path: args.snapshot,
    }
    .with_token_from_env();
    if config.token.is_none() {
        log::warn!("{} is not set; the API is open", attrition_server::TOKEN_ENV);
    }
    let state = AppState::new(roster, &bundle.schema, config);
    state.install(bundle)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Data(e.to_string()))?;
    let addr = SocketAddr::new(args.host, args.port);
    runtime
        .block_on(attrition_server::serve(Arc::new(state), addr))
        .map_err(|e| Failure::Data(format!("server on {addr}: {e}")))
}
