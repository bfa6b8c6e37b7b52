//! Command-line front end. Every subcommand goes through the same library
//! calls as the HTTP service.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |-----:|---------|
//! | 0 | success |
//! | 1 | unexpected failure |
//! | 2 | usage error (unknown flag, missing argument) |
//! | 3 | invalid input: bad dataset, config, session field or prompt |
//! | 4 | session or iteration not found |
//! | 5 | AttemptLimitExceeded |
//! | 6 | SessionClosed |
//! | 7 | UncodableAnswer |
//! | 8 | NothingToFinalize |
//! | 9 | ConditionMismatch |
//! | 10 | IncompleteStudy |
//! | 11 | ReplayMiss |
//! | 12 | BackendUnavailable |
//! | 13 | MalformedResponse or ExtractionParseError |
//! | 14 | matching failed |
//! | 15 | PipelineFailed (recorded as a failed attempt) |
//! | 16 | StorageError |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::canonical;
use crate::gateway::{Backends, GatewayConfig, GatewayError, GatewayMode, GATEWAY_MODE_ENV};
use crate::insights::{
    render_report, MatcherKind, Pipeline, PipelineCondition, PipelineConfig, PipelineError,
    ReportFormat,
};
use crate::materials::{load_dataset_file, validate_dataset, DatasetError};
use crate::matcher::{lexical_match, vlm_match, MatchError, MaterialDescription, VlmMatcher};
use crate::service::{serve, shutdown_signal, ServiceConfig, ServiceError};
use crate::study::{
    add_reflection, create_session, finalize_session, import_sessions, render_summary_table, submit_iteration,
    summarize_study, Condition, SessionStore, StudyError, StudyTexts, SurveyInput,
};

/// Exit codes paired with the machine codes printed on stderr.
pub const EXIT_CODES: &[(i32, &str)] = &[
    (1, "Internal"),
    (2, "Usage"),
    (3, "InvalidInput"),
    (4, "NotFound"),
    (5, "AttemptLimitExceeded"),
    (6, "SessionClosed"),
    (7, "UncodableAnswer"),
    (8, "NothingToFinalize"),
    (9, "ConditionMismatch"),
    (10, "IncompleteStudy"),
    (11, "ReplayMiss"),
    (12, "BackendUnavailable"),
    (13, "MalformedResponse"),
    (14, "MatchFailed"),
    (15, "PipelineFailed"),
    (16, "StorageError"),
];

#[derive(Debug, Parser)]
#[command(name = "insightgen", version, about = "Text-to-image generation with material CO₂e insights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Materials dataset tools.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Match one material description to a dataset record.
    Match(MatchArgs),
    /// Generate an image and, optionally, material insights for a prompt.
    Gen(GenArgs),
    /// Study sessions: create, iterate, reflect, finalize, summarize.
    #[command(subcommand)]
    Study(StudyCommand),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Check every record and report violations.
    Validate { path: PathBuf },
}

#[derive(Debug, Args)]
pub struct GatewayArgs {
    /// Pipeline config file (JSON). Flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, env = GATEWAY_MODE_ENV)]
    pub mode: Option<GatewayMode>,
    /// Fixture directory (required for replay; records when set in live/mock).
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Matching strategy.
    #[arg(long, value_parser = parse_matcher)]
    pub matcher: Option<MatcherKind>,
}

fn parse_matcher(s: &str) -> Result<MatcherKind, String> {
    match s {
        "vlm" => Ok(MatcherKind::Vlm),
        "lexical" => Ok(MatcherKind::Lexical),
        other => Err(format!("unknown matcher {other:?} (expected vlm or lexical)")),
    }
}

fn parse_condition(s: &str) -> Result<PipelineCondition, String> {
    match s {
        "t2i_only" => Ok(PipelineCondition::T2iOnly),
        "t2i_insights" => Ok(PipelineCondition::T2iInsights),
        other => Err(format!("unknown condition {other:?} (expected t2i_only or t2i_insights)")),
    }
}

fn parse_study_condition(s: &str) -> Result<Condition, String> {
    s.parse().map_err(|e: StudyError| e.to_string())
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    pub description: String,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Number of candidates to report.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// `lexical`, `mock`, `live`, or `replay:<fixture dir>`.
    #[arg(long, default_value = "lexical")]
    pub backend: String,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub prompt: String,
    #[command(flatten)]
    pub gateway: GatewayArgs,
    #[arg(long, value_parser = parse_condition)]
    pub condition: Option<PipelineCondition>,
    #[arg(long, default_value = "json")]
    pub format: ReportFormat,
}

#[derive(Debug, Subcommand)]
pub enum StudyCommand {
    /// Create a session and print it.
    New {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        participant: String,
        #[arg(long, value_parser = parse_study_condition)]
        condition: Condition,
    },
    /// Submit one prompt iteration.
    Iterate {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        session: String,
        #[arg(long)]
        prompt: String,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
    /// Record the reflection for an iteration.
    Reflect {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        session: String,
        #[arg(long)]
        iteration: u8,
        #[arg(long)]
        text: String,
    },
    /// Code the final survey and close the session.
    Finalize {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        session: String,
        #[arg(long)]
        satisfaction: String,
        #[arg(long)]
        sustainability: String,
        #[arg(long)]
        insights_useful: Option<String>,
        #[arg(long, default_value = "")]
        free_text: String,
    },
    /// Aggregate complete sessions from a store directory or a JSONL export.
    Summarize {
        source: PathBuf,
        /// `json`, `text`, or `both`.
        #[arg(long, default_value = "both")]
        format: String,
    },
    /// Write every stored session as JSONL to stdout.
    Export {
        #[arg(long)]
        store: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the listen address in the config.
    #[arg(long)]
    pub listen: Option<std::net::SocketAddr>,
}

/// A failure with its exit code and machine code.
#[derive(Debug)]
pub struct CliError {
    pub exit: i32,
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    fn new(exit: i32, message: impl Into<String>) -> CliError {
        let code = EXIT_CODES.iter().find(|(e, _)| *e == exit).map(|(_, c)| *c).unwrap_or("Internal");
        CliError { exit, code, message: message.into() }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        let exit = match &e {
            StudyError::Validation(_) => 3,
            StudyError::NotFound(_) | StudyError::IterationNotFound { .. } => 4,
            StudyError::AttemptLimitExceeded(_) => 5,
            StudyError::SessionClosed(_) => 6,
            StudyError::UncodableAnswer(_) => 7,
            StudyError::NothingToFinalize(_) => 8,
            StudyError::ConditionMismatch(_) => 9,
            StudyError::IncompleteStudy(_) => 10,
            StudyError::PipelineFailed(_) => 15,
            StudyError::Storage(_) => 16,
        };
        CliError::new(exit, e.to_string())
    }
}

fn gateway_exit(e: &GatewayError) -> i32 {
    match e {
        GatewayError::EmptyPrompt | GatewayError::PromptTooLong { .. } => 3,
        GatewayError::ReplayMiss { .. } => 11,
        GatewayError::BackendUnavailable { .. } => 12,
        GatewayError::MalformedResponse(_) | GatewayError::ExtractionParse { .. } => 13,
        GatewayError::Storage(_) => 16,
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        CliError::new(gateway_exit(&e), e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let exit = match &e {
            PipelineError::Gateway { source, .. } => gateway_exit(source),
            PipelineError::Match { .. } => 14,
            PipelineError::Config(_) => 3,
        };
        CliError::new(exit, e.to_string())
    }
}

impl From<MatchError> for CliError {
    fn from(e: MatchError) -> Self {
        let exit = match e {
            MatchError::BackendUnavailable(_) => 12,
            MatchError::EmptyDescription | MatchError::InvalidShortlist => 3,
            _ => 14,
        };
        CliError::new(exit, e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::new(3, e.to_string())
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        let exit = match e {
            ServiceError::Config(_) => 3,
            _ => 1,
        };
        CliError::new(exit, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError { exit: 0, code: "BrokenPipe", message: e.to_string() };
        }
        CliError::new(16, e.to_string())
    }
}

impl GatewayArgs {
    fn pipeline_config(&self) -> Result<PipelineConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => {
                let dataset = self
                    .dataset
                    .clone()
                    .ok_or_else(|| CliError::new(2, "either --config or --dataset is required"))?;
                PipelineConfig::new(dataset, GatewayConfig::default())
            }
        };
        if let Some(dataset) = &self.dataset {
            config.dataset = dataset.clone();
        }
        if let Some(mode) = self.mode {
            config.gateway.mode = mode;
        }
        if let Some(dir) = &self.fixtures {
            config.gateway.fixtures = Some(dir.clone());
        }
        if let Some(matcher) = self.matcher {
            config.matcher = matcher;
        }
        Ok(config)
    }
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 { write!(out, "{}", e.render()) } else { write!(err, "{}", e.render()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        // Downstream closed the pipe (e.g. `| head`); nothing left to report.
        Err(e) if e.code == "BrokenPipe" => 0,
        Err(e) => {
            let line = json!({ "error": { "code": e.code, "exit": e.exit, "message": e.message } });
            let _ = writeln!(err, "{line}");
            e.exit
        }
    }
}

fn print_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = canonical::to_canonical_pretty(value).map_err(|e| CliError::new(1, e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Dataset(DatasetCommand::Validate { path }) => {
            let bytes = std::fs::read(&path).map_err(|e| CliError::new(3, format!("{}: {e}", path.display())))?;
            let problems = validate_dataset(&bytes);
            if problems.is_empty() {
                let load = load_dataset_file(&path)?;
                writeln!(out, "{}: {} records, all valid", path.display(), load.dataset.len())?;
                Ok(())
            } else {
                for p in &problems {
                    writeln!(out, "{p}")?;
                }
                Err(CliError::new(3, format!("{}: {} problems", path.display(), problems.len())))
            }
        }
        Command::Match(args) => run_match(args, out),
        Command::Gen(args) => {
            let mut config = args.gateway.pipeline_config()?;
            if let Some(condition) = args.condition {
                config.condition = condition;
            }
            let pipeline = Pipeline::from_config(&config)?;
            let run = pipeline.run(&args.prompt)?;
            write!(out, "{}", render_report(&run.report, args.format))?;
            if args.format == ReportFormat::Json {
                writeln!(out)?;
            }
            Ok(())
        }
        Command::Study(cmd) => run_study(cmd, out),
        Command::Serve(args) => {
            let mut config = ServiceConfig::from_file(&args.config)?;
            if let Some(listen) = args.listen {
                config.listen = listen;
            }
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| CliError::new(1, e.to_string()))?;
            runtime.block_on(serve(config, shutdown_signal()))?;
            Ok(())
        }
    }
}

fn run_match(args: MatchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let dataset = load_dataset_file(&args.dataset)?.dataset;
    let desc = MaterialDescription::new(args.description, 1);
    let result = if args.backend == "lexical" {
        lexical_match(&desc, &dataset, args.top)?
    } else {
        let mut gateway = GatewayConfig::default();
        match args.backend.as_str() {
            "mock" => gateway.mode = GatewayMode::Mock,
            "live" => gateway.mode = GatewayMode::Live,
            other => match other.strip_prefix("replay:") {
                Some(dir) => {
                    gateway.mode = GatewayMode::Replay;
                    gateway.fixtures = Some(PathBuf::from(dir));
                }
                None => {
                    return Err(CliError::new(
                        2,
                        format!("unknown backend {other:?} (expected lexical, mock, live or replay:<dir>)"),
                    ))
                }
            },
        }
        let backends = Backends::from_config(&gateway)?;
        let mut matcher = VlmMatcher::new(backends.vlm, gateway.prompts);
        matcher.shortlist = args.top;
        vlm_match(&desc, &dataset, &matcher)?
    };
    print_json(out, &result)
}

fn read_sessions(source: &Path) -> Result<Vec<crate::study::Session>, CliError> {
    if source.is_dir() {
        Ok(SessionStore::open(source)?.sessions()?)
    } else {
        let file = std::fs::File::open(source).map_err(|e| CliError::new(4, format!("{}: {e}", source.display())))?;
        Ok(import_sessions(std::io::BufReader::new(file))?)
    }
}

fn run_study(cmd: StudyCommand, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        StudyCommand::New { store, participant, condition } => {
            let store = SessionStore::open(&store)?;
            let session = create_session(&store, &participant, condition, &StudyTexts::default())?;
            print_json(out, &session)
        }
        StudyCommand::Iterate { store, session, prompt, gateway } => {
            let store = SessionStore::open(&store)?;
            let pipeline = Pipeline::from_config(&gateway.pipeline_config()?)?;
            let iteration = submit_iteration(&store, &pipeline, &session, &prompt)?;
            let left = store.load(&session)?.attempts_left();
            print_json(out, &json!({ "iteration": iteration, "attempts_left": left }))
        }
        StudyCommand::Reflect { store, session, iteration, text } => {
            let store = SessionStore::open(&store)?;
            print_json(out, &add_reflection(&store, &session, iteration, &text)?)
        }
        StudyCommand::Finalize { store, session, satisfaction, sustainability, insights_useful, free_text } => {
            let store = SessionStore::open(&store)?;
            let survey = SurveyInput {
                satisfaction,
                sustainability_considered: sustainability,
                insights_useful,
                free_text,
            }
            .code()?;
            print_json(out, &finalize_session(&store, &session, survey)?)
        }
        StudyCommand::Summarize { source, format } => {
            let sessions = read_sessions(&source)?;
            if sessions.is_empty() {
                writeln!(out, "no sessions")?;
                return Ok(());
            }
            let summary = summarize_study(&sessions)?;
            match format.as_str() {
                "json" => print_json(out, &summary),
                "text" => Ok(write!(out, "{}", render_summary_table(&summary))?),
                "both" => {
                    print_json(out, &summary)?;
                    writeln!(out)?;
                    Ok(write!(out, "{}", render_summary_table(&summary))?)
                }
                other => Err(CliError::new(2, format!("unknown format {other:?} (expected json, text or both)"))),
            }
        }
        StudyCommand::Export { store } => {
            let sessions = SessionStore::open(&store)?.sessions()?;
            crate::study::export_sessions(&sessions, &mut *out)?;
            Ok(())
        }
    }
}
