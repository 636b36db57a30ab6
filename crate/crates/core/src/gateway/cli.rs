//! `verity check | scan | eval | serve | render`.
//!
//! Exit codes: 0 judged (or success), 3 not verifiable, 4 unable to judge,
//! 1 runtime error, 2 usage error.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use chrono::{DateTime, TimeZone, Utc};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use super::bot::{Bot, TelegramApi};
use super::config::AppConfig;
use super::fetch::{fetch_url, is_url, FetchLimits};
use super::{build_judge, build_segmenter, format_verdict, BackendKind, BackendOptions};
use crate::claims::{Strategy, Verdict};
use crate::eval::{load_dataset, run_eval, DatasetFormat, EvalOptions, MatchMode};
use crate::ingest::{extract, SourceKind};
use crate::judge::JudgeError;
use crate::report::{assess_document, parse_json, render_html, render_json, AssessOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_VERIFIABLE: i32 = 3;
pub const EXIT_UNABLE: i32 = 4;

pub fn exit_code(verdict: &Verdict) -> i32 {
    match verdict {
        Verdict::Judged { .. } => EXIT_OK,
        Verdict::NonVerifiable => EXIT_NOT_VERIFIABLE,
        Verdict::UnableToJudge => EXIT_UNABLE,
    }
}

#[derive(Parser, Debug)]
#[command(name = "verity", version, about = "Sentence-level veracity scoring with language models")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct JudgeArgs {
    /// fewshot or agent.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long, value_enum, default_value = "live")]
    backend: BackendKind,
    /// Fixture file for --backend mock.
    #[arg(long, value_name = "FILE")]
    fixtures: Option<PathBuf>,
    /// Response cache for --backend record/replay.
    #[arg(long, value_name = "FILE")]
    cache: Option<PathBuf>,
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Concurrent judgments.
    #[arg(long)]
    concurrency: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Judge one statement (argument, or stdin when absent or "-").
    Check {
        statement: Vec<String>,
        /// Print the verdict as JSON.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Assess a document (file or URL) and write report.json and report.html.
    Scan {
        input: String,
        /// plaintext, html, srt or vtt; inferred when absent.
        #[arg(long)]
        kind: Option<String>,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// RFC 3339 report timestamp; defaults to SOURCE_DATE_EPOCH, then now.
        #[arg(long)]
        created_at: Option<String>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Measure accuracy on a labeled dataset (.csv or .jsonl).
    Eval {
        dataset: PathBuf,
        #[arg(long, value_enum)]
        format: Option<DatasetFormatArg>,
        #[arg(long, value_enum, default_value = "polarity")]
        mode: ModeArg,
        /// Count "half-true" as untruthful in polarity mode.
        #[arg(long)]
        half_true_untruthful: bool,
        /// Directory for eval_summary.json and eval_items.jsonl.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Run the chat bot until interrupted.
    Serve {
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Re-render the HTML view of a JSON report.
    Render {
        report: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum DatasetFormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Polarity,
    Coarse,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn error(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_ERROR,
            message: message.into(),
        }
    }
}

struct Io<'a> {
    stdin: &'a mut dyn Read,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

/// Runs the CLI with `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut io = Io { stdin, stdout, stderr };
    match dispatch(cli, &mut io) {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(io.stderr, "error: {}", failure.message);
            failure.code
        }
    }
}

fn load_config(path: Option<&Path>, judge: Option<&JudgeArgs>) -> Result<AppConfig, Failure> {
    let mut config = AppConfig::load(path).map_err(|e| Failure::error(e.to_string()))?;
    if let Some(args) = judge {
        if let Some(strategy) = args.strategy {
            config.strategy = strategy;
        }
        if let Some(model_id) = &args.model_id {
            config.model_id = model_id.clone();
        }
        if let Some(steps) = args.max_steps {
            config.max_steps = steps;
        }
        if let Some(n) = args.concurrency {
            config.concurrency = n;
        }
        config.validate().map_err(|e| Failure::usage(e.to_string()))?;
    }
    Ok(config)
}

fn judge_for(config: &AppConfig, args: &JudgeArgs) -> Result<crate::judge::Judge, Failure> {
    let options = BackendOptions {
        kind: args.backend,
        fixtures: args.fixtures.clone(),
        cache: args.cache.clone(),
    };
    build_judge(config, config.strategy, &options).map_err(Failure::usage)
}

fn dispatch(cli: Cli, io: &mut Io<'_>) -> Result<i32, Failure> {
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Check { statement, json, judge } => {
            let config = load_config(config_path, Some(&judge))?;
            check(&config, &judge, statement, json, io)
        }
        Command::Scan {
            input,
            kind,
            out,
            created_at,
            json,
            judge,
        } => {
            let config = load_config(config_path, Some(&judge))?;
            scan(&config, &judge, &input, kind.as_deref(), out, created_at.as_deref(), json, io)
        }
        Command::Eval {
            dataset,
            format,
            mode,
            half_true_untruthful,
            out,
            json,
            judge,
        } => {
            let config = load_config(config_path, Some(&judge))?;
            let format = match format {
                Some(DatasetFormatArg::Csv) => DatasetFormat::Csv,
                Some(DatasetFormatArg::Jsonl) => DatasetFormat::Jsonl,
                None => DatasetFormat::from_path(&dataset)
                    .ok_or_else(|| Failure::usage(format!("cannot infer the format of {}; pass --format", dataset.display())))?,
            };
            let options = EvalOptions {
                mode: match mode {
                    ModeArg::Polarity => MatchMode::Polarity,
                    ModeArg::Coarse => MatchMode::Coarse,
                },
                half_true_truthful: !half_true_untruthful,
                concurrency: config.concurrency,
            };
            eval(&config, &judge, &dataset, format, &options, out, json, io)
        }
        Command::Serve { judge } => {
            let config = load_config(config_path, Some(&judge))?;
            serve(&config, &judge, io)
        }
        Command::Render { report, out } => render(&report, out, io),
    }
}

fn check(config: &AppConfig, args: &JudgeArgs, words: Vec<String>, json: bool, io: &mut Io<'_>) -> Result<i32, Failure> {
    let mut statement = words.join(" ");
    if words.is_empty() || statement == "-" {
        statement.clear();
        io.stdin
            .read_to_string(&mut statement)
            .map_err(|e| Failure::error(format!("reading stdin: {e}")))?;
    }
    let statement = statement.trim();
    if statement.is_empty() {
        return Err(Failure::usage("empty statement; pass it as an argument or on stdin"));
    }
    let judge = judge_for(config, args)?;
    let (verdict, warnings) = match judge.judge(statement) {
        Ok(j) => (j.verdict, j.warnings),
        Err(failure) => match failure.error {
            JudgeError::Parse(e) => (Verdict::UnableToJudge, vec![format!("unparseable answer: {}", e.reason)]),
            other => return Err(Failure::error(other.to_string())),
        },
    };
    for w in &warnings {
        let _ = writeln!(io.stderr, "warning: {w}");
    }
    let text = if json {
        serde_json::to_string_pretty(&verdict).expect("verdict serialization is infallible")
    } else {
        format_verdict(&verdict)
    };
    let _ = writeln!(io.stdout, "{text}");
    Ok(exit_code(&verdict))
}

fn report_timestamp(flag: Option<&str>) -> Result<DateTime<Utc>, Failure> {
    if let Some(raw) = flag {
        return DateTime::parse_from_rfc3339(raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| Failure::usage(format!("--created-at {raw:?}: {e}")));
    }
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse::<i64>().ok()) {
        if let Some(t) = Utc.timestamp_opt(epoch, 0).single() {
            return Ok(t);
        }
    }
    let now = Utc::now();
    Ok(Utc.timestamp_opt(now.timestamp(), 0).single().unwrap_or(now))
}

#[allow(clippy::too_many_arguments)]
fn scan(
    config: &AppConfig,
    args: &JudgeArgs,
    input: &str,
    kind: Option<&str>,
    out: Option<PathBuf>,
    created_at: Option<&str>,
    json: bool,
    io: &mut Io<'_>,
) -> Result<i32, Failure> {
    let forced = match kind {
        Some(name) => Some(SourceKind::parse(name).ok_or_else(|| {
            Failure::usage(format!("unsupported kind {name:?} (expected plaintext, html, srt or vtt)"))
        })?),
        None => None,
    };
    let created_at = report_timestamp(created_at)?;
    let (raw, kind) = if is_url(input) {
        let fetched = fetch_url(input, &FetchLimits::default()).map_err(|e| Failure::error(e.to_string()))?;
        let kind = forced
            .or_else(|| fetched.content_type.as_deref().and_then(SourceKind::from_content_type))
            .or_else(|| SourceKind::from_path(&fetched.final_url))
            .ok_or_else(|| Failure::usage(format!("cannot tell what kind of document {input} is; pass --kind")))?;
        (fetched.body, kind)
    } else {
        let kind = forced
            .or_else(|| SourceKind::from_path(input))
            .ok_or_else(|| Failure::usage(format!("unsupported file type for {input}; pass --kind")))?;
        let raw = std::fs::read(input).map_err(|e| Failure::error(format!("reading {input}: {e}")))?;
        (raw, kind)
    };
    let doc = extract(&raw, kind)
        .map_err(|e| Failure::error(format!("{input}: {e}")))?
        .with_origin(input);
    let judge = judge_for(config, args)?;
    let options = AssessOptions {
        segmenter: build_segmenter(config).map_err(Failure::error)?,
        concurrency: config.concurrency,
        created_at,
    };
    let report = assess_document(&doc, &judge, &options).map_err(|e| Failure::error(e.to_string()))?;

    let dir = out.unwrap_or_else(|| config.output_dir.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Failure::error(format!("creating {}: {e}", dir.display())))?;
    let json_path = dir.join("report.json");
    let html_path = dir.join("report.html");
    let write = |path: &Path, bytes: &[u8]| {
        std::fs::write(path, bytes).map_err(|e| Failure::error(format!("writing {}: {e}", path.display())))
    };
    write(&json_path, &render_json(&report))?;
    write(&html_path, render_html(&report).as_bytes())?;
    for w in &report.warnings {
        let _ = writeln!(io.stderr, "warning: {w}");
    }
    let mean = report.global.mean_percent;
    if json {
        let summary = json!({
            "global": report.global,
            "report_json": json_path,
            "report_html": html_path,
        });
        let _ = writeln!(io.stdout, "{}", serde_json::to_string_pretty(&summary).expect("infallible"));
    } else {
        let score = mean.map_or_else(|| "n/a".to_owned(), |m| format!("{m}%"));
        let _ = writeln!(
            io.stdout,
            "Global veracity score: {score} ({} judged, {} excluded)",
            report.global.judged_count, report.global.excluded_count
        );
        let _ = writeln!(io.stderr, "wrote {} and {}", json_path.display(), html_path.display());
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn eval(
    config: &AppConfig,
    args: &JudgeArgs,
    path: &Path,
    format: DatasetFormat,
    options: &EvalOptions,
    out: Option<PathBuf>,
    json: bool,
    io: &mut Io<'_>,
) -> Result<i32, Failure> {
    let dataset = load_dataset(path, format).map_err(|e| Failure::error(e.to_string()))?;
    for w in &dataset.warnings {
        let _ = writeln!(io.stderr, "warning: {w}");
    }
    let judge = judge_for(config, args)?;
    let run = run_eval(&dataset.items, &judge, options);
    for item in &run.items {
        for w in &item.warnings {
            let _ = writeln!(io.stderr, "warning: item {}: {w}", item.id);
        }
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|e| Failure::error(format!("creating {}: {e}", dir.display())))?;
        for (name, body) in [("eval_summary.json", run.summary_json()), ("eval_items.jsonl", run.items_jsonl())] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Failure::error(format!("writing {}: {e}", path.display())))?;
        }
    }
    if json {
        let _ = write!(io.stdout, "{}", run.summary_json());
    } else {
        let _ = writeln!(io.stdout, "{}", run.summary.table_row(judge.strategy.as_str()));
    }
    Ok(EXIT_OK)
}

static SHUTDOWN: OnceLock<Arc<AtomicBool>> = OnceLock::new();

fn serve(config: &AppConfig, args: &JudgeArgs, io: &mut Io<'_>) -> Result<i32, Failure> {
    let var = &config.bot.token_env_var;
    let token = std::env::var(var)
        .ok()
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| Failure::error(format!("set {var} to the bot token")))?;
    let judge = judge_for(config, args)?;
    let shutdown = SHUTDOWN
        .get_or_init(|| {
            let flag = Arc::new(AtomicBool::new(false));
            let handler_flag = flag.clone();
            if let Err(e) = ctrlc::set_handler(move || handler_flag.store(true, Ordering::SeqCst)) {
                log::warn!("no termination handler: {e}");
            }
            flag
        })
        .clone();
    let api = TelegramApi::new(&config.bot, token);
    let mut bot = Bot::new(api, judge, &config.bot, config.concurrency);
    let _ = writeln!(io.stderr, "polling for updates; press Ctrl-C to stop");
    let stats = bot.run(&shutdown).map_err(|e| Failure::error(e.to_string()))?;
    let _ = writeln!(
        io.stderr,
        "stopped: {} updates, {} replies, {} duplicates skipped, {} failed sends",
        stats.updates, stats.replies, stats.duplicates, stats.send_failures
    );
    Ok(EXIT_OK)
}

fn render(path: &Path, out: Option<PathBuf>, io: &mut Io<'_>) -> Result<i32, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::error(format!("reading {}: {e}", path.display())))?;
    let report = parse_json(&bytes).map_err(|e| Failure::error(format!("{}: {e}", path.display())))?;
    if let Err(e) = report.validate() {
        let _ = writeln!(io.stderr, "warning: {}: {e}", path.display());
    }
    let html = render_html(&report);
    match out {
        Some(file) => std::fs::write(&file, html).map_err(|e| Failure::error(format!("writing {}: {e}", file.display())))?,
        None => {
            let _ = io.stdout.write_all(html.as_bytes());
        }
    }
    Ok(EXIT_OK)
}
