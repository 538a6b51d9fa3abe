//! The `metrology` command: batch runs of the toolkit over CSV exports, and
//! a launcher for the local HTTP service.
//!
//! Exit codes: 0 on success, 1 for usage or input validation problems, 2
//! when an analysis ran but could not produce a result. `--json` prints the
//! same bodies the service returns under `result`.

mod render;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use metrology::cfa::{self, ConfirmatorySpec, FitOptions};
use metrology::dataset::{correlation_matrix, MetricDataset, MissingPolicy, ParseOptions};
use metrology::efa::{self, expected_from_names, EfaConfig, ExpectedMap, ParallelConfig};
use metrology::reliability::{self, Level, RatingTable};
use metrology::session::{Action, RefinementSession, SessionDocument};
use metrology::truescore::{self, ErrorModel};
use metrology_service::api::{ScoresResult, SessionView, SimulateResult};
use metrology_service::{AppState, Failure, ServiceConfig, DEFAULT_PORT, DEFAULT_UPLOAD_LIMIT};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

/// Working directory for `serve` when `--workdir` is not given.
pub const WORKDIR_ENV: &str = "METROLOGY_WORKDIR";

#[derive(Debug, Parser)]
#[command(name = "metrology", version, about = "Measurement-quality analysis for software metrics")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Input {
    /// Metrics CSV: header row, entity id in the first column.
    data: PathBuf,
    /// Field delimiter.
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Reject non-numeric cells instead of treating them as missing.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Policy {
    Listwise,
    Pairwise,
}

impl From<Policy> for MissingPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Listwise => MissingPolicy::Listwise,
            Policy::Pairwise => MissingPolicy::Pairwise,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Nominal,
    Ordinal,
    Interval,
    Ratio,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Nominal => Level::Nominal,
            LevelArg::Ordinal => Level::Ordinal,
            LevelArg::Interval => Level::Interval,
            LevelArg::Ratio => Level::Ratio,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cronbach's alpha over item columns, or agreement over rater columns.
    Reliability {
        /// CSV whose columns are items (alpha over complete rows).
        #[arg(long, conflicts_with = "ratings", required_unless_present = "ratings")]
        items: Option<PathBuf>,
        /// Restrict alpha to these columns.
        #[arg(long, value_delimiter = ',', requires = "items")]
        metrics: Vec<String>,
        /// CSV whose rows are units and columns raters; blanks are missing.
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// Measurement level for Krippendorff's alpha.
        #[arg(long, value_enum, default_value_t = LevelArg::Nominal, requires = "ratings")]
        level: LevelArg,
        /// Report simple percent agreement instead of Krippendorff's alpha.
        #[arg(long, requires = "ratings")]
        agreement: bool,
    },
    /// KMO, Bartlett's test and multicollinearity screen.
    Adequacy {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = Policy::Listwise)]
        policy: Policy,
    },
    /// Exploratory factor analysis with oblique rotation.
    Efa {
        #[command(flatten)]
        input: Input,
        /// Number of factors to extract.
        #[arg(long, required_unless_present = "advice")]
        k: Option<usize>,
        /// JSON object mapping metric column to construct; header prefixes otherwise.
        #[arg(long)]
        expected: Option<PathBuf>,
        /// Loadings below this magnitude are left blank.
        #[arg(long)]
        suppress: Option<f64>,
        /// Print the factor-count advice instead of a solution.
        #[arg(long)]
        advice: bool,
        /// Seed for the parallel-analysis simulation.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Refinement session: drop metrics by hand or let the advisor do it.
    Refine {
        /// Metrics CSV (omit when resuming with --load).
        #[arg(required_unless_present = "load")]
        data: Option<PathBuf>,
        /// Resume a saved session document.
        #[arg(long, conflicts_with_all = ["data", "k", "expected"])]
        load: Option<PathBuf>,
        #[arg(long, required_unless_present = "load")]
        k: Option<usize>,
        #[arg(long)]
        expected: Option<PathBuf>,
        /// Drop these metrics, in order, before anything else.
        #[arg(long, value_delimiter = ',')]
        drop: Vec<String>,
        /// Repeatedly drop the top-ranked problem metric.
        #[arg(long)]
        auto: bool,
        #[arg(long, default_value_t = 20)]
        max_steps: usize,
        /// Write the session document here.
        #[arg(long)]
        save: Option<PathBuf>,
        /// Write the confirmatory model specification here.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Confirmatory factor analysis of an exported specification.
    Cfa {
        #[command(flatten)]
        input: Input,
        /// Model specification (as written by `refine --export`).
        #[arg(long)]
        spec: PathBuf,
        /// Write the fitted model document here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-entity factor scores here as CSV.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Return a non-converged fit instead of failing.
        #[arg(long)]
        allow_nonconverged: bool,
    },
    /// Simulate observed values around a true score.
    Simulate {
        /// True score.
        #[arg(long = "t", allow_negative_numbers = true)]
        true_score: f64,
        /// Systematic error added to every observation.
        #[arg(long = "es", default_value_t = 0.0, allow_negative_numbers = true)]
        systematic: f64,
        /// Standard deviation of the random error.
        #[arg(long)]
        sd: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        bins: usize,
        /// Write one observation per line here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the histogram as `value,count` CSV here.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Check that metrics correlate more within their scale than across.
    Audit {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        expected: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Policy::Listwise)]
        policy: Policy,
    },
    /// Start the local HTTP service.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Persist datasets and sessions here and reload them on start.
        #[arg(long, env = WORKDIR_ENV)]
        workdir: Option<PathBuf>,
        /// Largest accepted request body, in bytes.
        #[arg(long, default_value_t = DEFAULT_UPLOAD_LIMIT)]
        upload_limit: usize,
    },
}

/// Why a command stopped.
#[derive(Debug)]
enum CliError {
    /// Bad flags, unreadable files, or input the toolkit rejected.
    Invalid(String),
    /// The analysis ran but produced no usable result.
    Failed(String),
}

impl From<Failure> for CliError {
    fn from(f: Failure) -> Self {
        if f.error.code == "analysis_failed" || f.status.is_server_error() {
            CliError::Failed(f.error.message)
        } else {
            CliError::Invalid(f.error.message)
        }
    }
}

macro_rules! core_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Failure::from(e).into()
            }
        }
    )*};
}

core_error!(
    metrology::dataset::DatasetError,
    metrology::efa::EfaError,
    metrology::session::SessionError,
    metrology::cfa::CfaError,
    metrology::reliability::ReliabilityError,
    metrology::truescore::TrueScoreError
);

/// What a command produced: the table text and the JSON body.
struct Report {
    text: String,
    json: serde_json::Value,
}

impl Report {
    fn new<T: Serialize>(text: String, body: &T) -> Result<Self, CliError> {
        let json = serde_json::to_value(body).map_err(|e| CliError::Failed(e.to_string()))?;
        Ok(Self { text, json })
    }
}

/// Runs one invocation. `argv` includes the program name.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{rendered}") } else { write!(out, "{rendered}") };
            return code;
        }
    };
    let json = cli.json;
    match execute(cli.command) {
        Ok(report) => {
            let written = if json {
                serde_json::to_writer_pretty(&mut *out, &report.json)
                    .map_err(std::io::Error::from)
                    .and_then(|()| writeln!(out))
            } else {
                write!(out, "{}", report.text)
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(err, "error: could not write output: {e}");
                    EXIT_FAILED
                }
            }
        }
        Err(CliError::Invalid(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INVALID
        }
        Err(CliError::Failed(msg)) => {
            let _ = writeln!(err, "analysis failed: {msg}");
            EXIT_FAILED
        }
    }
}

fn load_dataset(input: &Input) -> Result<MetricDataset, CliError> {
    let delimiter =
        u8::try_from(input.delimiter).map_err(|_| CliError::Invalid("delimiter must be ASCII".into()))?;
    open_csv(&input.data, ParseOptions { delimiter, strict: input.strict })
}

fn open_csv(path: &Path, options: ParseOptions) -> Result<MetricDataset, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    Ok(MetricDataset::load(file, options)?)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    write_file(path, &bytes)
}

fn expected_map(path: Option<&Path>, ds: &MetricDataset) -> Result<ExpectedMap, CliError> {
    match path {
        Some(p) => read_json(p),
        None => Ok(expected_from_names(&ds.columns)),
    }
}

fn execute(command: Command) -> Result<Report, CliError> {
    match command {
        Command::Reliability { items, metrics, ratings, level, agreement } => {
            let report = if let Some(path) = items {
                let ds = open_csv(&path, ParseOptions::default())?;
                let names: Vec<String> = if metrics.is_empty() {
                    ds.columns.iter().map(|c| c.raw.clone()).collect()
                } else {
                    metrics
                };
                reliability::cronbach_alpha_for(&ds, &names)?
            } else {
                let path = ratings.expect("clap requires items or ratings");
                let ds = open_csv(&path, ParseOptions::default())?;
                let rows: Vec<Vec<Option<f64>>> = (0..ds.n_entities()).map(|i| ds.row(i).to_vec()).collect();
                let table = RatingTable::new(rows, level.into())?;
                if agreement {
                    reliability::percent_agreement(&table)?
                } else {
                    reliability::krippendorff_alpha(&table)?
                }
            };
            Report::new(render::reliability(&report), &report)
        }
        Command::Adequacy { input, policy } => {
            let ds = load_dataset(&input)?;
            let r = correlation_matrix(&ds, policy.into())?;
            let report = efa::adequacy(&r, r.n_used)?;
            Report::new(render::adequacy(&report), &report)
        }
        Command::Efa { input, k, expected, suppress, advice, seed } => {
            let ds = load_dataset(&input)?;
            if advice {
                let config = ParallelConfig { seed, ..ParallelConfig::default() };
                let advice = efa::advise_factor_count(&ds, &config, k)?;
                return Report::new(render::advice(&advice), &advice);
            }
            let expected = expected_map(expected.as_deref(), &ds)?;
            let mut config = EfaConfig::default();
            if let Some(s) = suppress {
                config.thresholds.set("suppress", s)?;
            }
            let session = RefinementSession::new(ds.into(), expected, k.expect("clap requires k"), config)?;
            let view = SessionView::of(&session);
            Report::new(render::session_state(&view.current), &view)
        }
        Command::Refine { data, load, k, expected, drop, auto, max_steps, save, export } => {
            let mut session = match load {
                Some(path) => RefinementSession::from_document(&read_json::<SessionDocument>(&path)?)?,
                None => {
                    let ds = open_csv(&data.expect("clap requires data"), ParseOptions::default())?;
                    let expected = expected_map(expected.as_deref(), &ds)?;
                    RefinementSession::new(ds.into(), expected, k.expect("clap requires k"), EfaConfig::default())?
                }
            };
            for metric in drop {
                session.apply(Action::Drop { metric }, "requested on the command line")?;
            }
            let outcome = if auto { Some(session.auto_refine(max_steps)?) } else { None };
            if let Some(path) = save {
                write_json(&path, &session.to_document())?;
            }
            if let Some(path) = export {
                write_json(&path, &session.export_model())?;
            }
            let mut view = SessionView::of(&session);
            view.auto_refine = outcome;
            Report::new(render::refinement(&view), &view)
        }
        Command::Cfa { input, spec, out, scores, allow_nonconverged } => {
            let ds = load_dataset(&input)?;
            let spec: ConfirmatorySpec = read_json(&spec)?;
            let options = FitOptions { allow_nonconverged, ..FitOptions::default() };
            let model = cfa::fit(&ds, &spec, &options)?;
            if let Some(path) = out {
                write_file(&path, cfa::export_formulas(&model).as_bytes())?;
            }
            if let Some(path) = scores {
                let result = ScoresResult {
                    entity_ids: ds.entity_ids.clone(),
                    factors: model.factors.clone(),
                    scores: cfa::factor_scores(&model, &ds)?,
                };
                write_file(&path, render::scores_csv(&ds.id_header, &result).as_bytes())?;
            }
            Report::new(render::model(&model), &model)
        }
        Command::Simulate { true_score, systematic, sd, n, seed, bins, out, histogram } => {
            let model = ErrorModel::new(true_score, sd, systematic, seed);
            let samples = truescore::simulate_observations(&model, n)?;
            let result = SimulateResult {
                summary: truescore::summarize(&samples)?,
                histogram: truescore::histogram(&samples, bins)?,
                samples: None,
            };
            if let Some(path) = out {
                let text: String = samples.iter().map(|x| format!("{x}\n")).collect();
                write_file(&path, text.as_bytes())?;
            }
            if let Some(path) = histogram {
                write_file(&path, render::histogram_csv(&result.histogram).as_bytes())?;
            }
            Report::new(render::simulation(&result), &result)
        }
        Command::Audit { input, expected, policy } => {
            let ds = load_dataset(&input)?;
            let assignment = expected_map(expected.as_deref(), &ds)?;
            let r = correlation_matrix(&ds, policy.into())?;
            let audit = efa::audit_scales(&r, &assignment)?;
            Report::new(render::audit(&audit, &assignment), &audit)
        }
        Command::Serve { port, workdir, upload_limit } => {
            let config = ServiceConfig {
                bind: SocketAddr::from((Ipv4Addr::LOCALHOST, port)),
                upload_limit,
                workdir,
            };
            serve(config)?;
            Report::new(String::new(), &BTreeMap::<String, String>::new())
        }
    }
}

fn serve(config: ServiceConfig) -> Result<(), CliError> {
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let state = AppState::open(config).map_err(|e| CliError::Invalid(format!("working directory: {e}")))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(e.to_string()))?;
    runtime
        .block_on(metrology_service::serve(state))
        .map_err(|e| CliError::Failed(format!("server stopped: {e}")))
}
