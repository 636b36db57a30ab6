//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Everything runs offline against mocks, replay caches and local
//! stub servers.

mod support;

use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use scraper::{Html, Selector};
use serde_json::json;

use support::{fixture, props, Scripted, StubServer, StubTelegram, BOT_TOKEN, EASTWOOD, MCCAIN, NYT, ROMNEY};
use verity::claims::{Strategy, VeracityLabel, Verdict};
use verity::eval::{load_dataset, run_eval, DatasetFormat, EvalOptions, EvalSummary};
use verity::gateway::bot::{Bot, TelegramApi};
use verity::gateway::config::BotConfig;
use verity::gateway::{build_judge, AppConfig, BackendKind, BackendOptions};
use verity::ingest::{extract_plaintext, SourceDocument};
use verity::judge::Judge;
use verity::prompting::{build_fewshot_prompt, PromptBundle};
use verity::provider::{
    Clock, Fixtures, HttpModel, ModelBackend, ModelRequest, ProviderConfig, ProviderError, RateLimiter, RetryPolicy, VirtualClock,
};
use verity::report::{assess_document, render_html, render_json, AssessOptions};
use verity::verdict_parse::{attach_spans, parse_verdict, RawAnswer};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn accuracy_arithmetic() -> Outcome {
    let rows = [((14, 3, 3), 20, 82), ((16, 3, 1), 20, 84)];
    for ((correct, wrong, unable), total, expected) in rows {
        let summary = EvalSummary::from_counts(correct, wrong, unable);
        ensure!(summary.total == total, "total {} != {total}", summary.total);
        ensure!(
            summary.accuracy_percent == Some(expected),
            "({correct},{wrong},{unable}) gave {:?}, expected {expected}",
            summary.accuracy_percent
        );
    }
    ensure!(EvalSummary::from_counts(0, 0, 5).accuracy_display() == "n/a", "all-unable accuracy is not n/a");
    Ok("(20,14,3,3) -> 82%, (20,16,3,1) -> 84%".into())
}

const EXAMPLES: [(&str, &str, u8, VeracityLabel, Option<&str>); 5] = [
    (
        "Alan Grayson is the only member of the House of Representatives who raised most of his campaign funds in the last election from small contributions of less than $200.",
        "Veracity score: 100% (True), False Part: /",
        100,
        VeracityLabel::True,
        None,
    ),
    (
        EASTWOOD,
        "Veracity score: 0% (False), False Part: Clint Eastwood said",
        0,
        VeracityLabel::False,
        Some("Clint Eastwood said"),
    ),
    (
        "As Governor, Romney did not keep public safety funding in line with inflation.",
        "Veracity score: 30% (Mostly False), False Part: did not keep",
        30,
        VeracityLabel::MostlyFalse,
        Some("did not keep"),
    ),
    (
        "In California, \"they're rioting now\" over sanctuary cities in 2018.",
        "Veracity score: 0%(False), False Part: rioting now over sanctuary cities",
        0,
        VeracityLabel::False,
        Some("rioting now over sanctuary cities"),
    ),
    (
        "U.S. teenagers have now fallen behind their counterparts in Ireland, Poland and even Vietnam in math and science.",
        "Veracity score: 80% (Mostly True), False Part: fallen behind",
        80,
        VeracityLabel::MostlyTrue,
        Some("fallen behind"),
    ),
];

fn parser_round_trip() -> Outcome {
    let bundle = PromptBundle::default();
    ensure!(bundle.examples.len() == 5, "bundle has {} examples", bundle.examples.len());
    for (i, (input, output, score, label, part)) in EXAMPLES.iter().enumerate() {
        ensure!(
            bundle.examples[i].input == *input && bundle.examples[i].output == *output,
            "bundled example {i} differs from the reference text"
        );
        let parsed = parse_verdict(&RawAnswer::new(*output, Strategy::FewShot)).map_err(|e| e.to_string())?;
        let verdict = attach_spans(parsed.verdict, input);
        let parts: Vec<&str> = verdict.false_parts().iter().map(|p| p.text.as_str()).collect();
        ensure!(
            verdict.score() == Some(*score) && verdict.label() == Some(*label) && parts == part.iter().copied().collect::<Vec<_>>(),
            "example {i}: got {verdict:?}"
        );
        ensure!(
            verdict.false_parts().iter().all(|p| p.span.is_some()),
            "example {i}: false part not located in its input"
        );
    }
    for (text, expected) in [("null", Verdict::NonVerifiable), ("Unable to judge.", Verdict::UnableToJudge)] {
        let parsed = parse_verdict(&RawAnswer::new(text, Strategy::FewShot)).map_err(|e| e.to_string())?;
        ensure!(parsed.verdict == expected, "{text:?} gave {:?}", parsed.verdict);
    }
    Ok("5 example outputs, null and Unable to judge".into())
}

fn golden_prompt() -> Outcome {
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/fewshot_wisconsin.txt");
    let golden = std::fs::read_to_string(&golden_path).map_err(|e| e.to_string())?;
    let statement = "The Wisconsin Retirement System for public employees is \"a self-funded pension plan\" and \"it the money of the workers that funds it.";
    let prompt = build_fewshot_prompt(statement, &PromptBundle::default()).map_err(|e| e.to_string())?;
    if prompt != golden {
        let line = prompt
            .lines()
            .zip(golden.lines())
            .position(|(a, b)| a != b)
            .map_or("length".to_owned(), |n| format!("line {}", n + 1));
        return Err(format!("prompt differs from golden file at {line}"));
    }
    Ok(format!("{} bytes identical", prompt.len()))
}

/// The three fact-check statements plus a general one, as a small document.
fn fact_check_document() -> SourceDocument {
    let text = format!(
        "{MCCAIN} {ROMNEY}\n\n{NYT} The Great Wall of China is visible from the Moon with the naked eye."
    );
    extract_plaintext(text.as_bytes()).with_origin("factchecks.txt")
}

fn backend(kind: BackendKind, cache: &Path) -> BackendOptions {
    BackendOptions {
        kind,
        fixtures: Some(fixture("eval20.json")),
        cache: Some(cache.to_owned()),
    }
}

/// Eval and report bytes for both strategies.
fn pipeline_outputs(kind: BackendKind, cache: &Path, concurrency: usize) -> Result<Vec<u8>, String> {
    let dataset = load_dataset(fixture("eval20.csv"), DatasetFormat::Csv).map_err(|e| e.to_string())?;
    let doc = fact_check_document();
    let mut out = Vec::new();
    for strategy in [Strategy::FewShot, Strategy::Agent] {
        let judge = build_judge(&AppConfig::default(), strategy, &backend(kind, cache))?;
        let options = EvalOptions {
            concurrency,
            ..EvalOptions::default()
        };
        let run = run_eval(&dataset.items, &judge, &options);
        out.extend(run.summary_json().bytes());
        out.extend(run.items_jsonl().bytes());
        let report = assess_document(
            &doc,
            &judge,
            &AssessOptions {
                concurrency,
                ..AssessOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;
        out.extend(render_json(&report));
        out.extend(render_html(&report).bytes());
    }
    Ok(out)
}

fn replay_stability() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cache = dir.path().join("cache.jsonl");
    let recorded = pipeline_outputs(BackendKind::Record, &cache, 1)?;
    let entries = std::fs::read_to_string(&cache).map_err(|e| e.to_string())?.lines().count();
    let mut runs = 0;
    for concurrency in [1, 4] {
        for _ in 0..3 {
            let replayed = pipeline_outputs(BackendKind::Replay, &cache, concurrency)?;
            ensure!(replayed == recorded, "replay at concurrency {concurrency} differs from the recording");
            runs += 1;
        }
    }
    ensure!(started.elapsed() < Duration::from_secs(10), "took {:?}", started.elapsed());
    Ok(format!(
        "{runs} replays of {} bytes identical ({entries} cached responses, {:?})",
        recorded.len(),
        started.elapsed()
    ))
}

fn property_suite() -> Outcome {
    let started = Instant::now();
    for (name, check) in props::ALL {
        check().map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("{} properties x {} cases ({:?})", props::ALL.len(), props::CASES, started.elapsed()))
}

fn six_sentence_rendering() -> Outcome {
    let fixtures = Fixtures::load(fixture("docs.json")).map_err(|e| e.to_string())?;
    let judge = support::mock_judge(Strategy::FewShot, &fixtures);
    let raw = std::fs::read(fixture("docs/six_sentences.txt")).map_err(|e| e.to_string())?;
    let doc = extract_plaintext(&raw).with_origin("six_sentences.txt");
    let report = assess_document(&doc, &judge, &AssessOptions::default()).map_err(|e| e.to_string())?;
    ensure!(report.sentences.len() == 6, "{} sentences", report.sentences.len());
    let html = render_html(&report);
    let page = Html::parse_document(&html);
    let select = |css: &str| Selector::parse(css).unwrap();

    let located: usize = report
        .verdicts
        .iter()
        .map(|v| v.verdict.false_parts().iter().filter(|p| p.span.is_some()).count())
        .sum();
    let marks = page.select(&select("span.false-part")).count();
    ensure!(marks == located && located == 4, "{marks} false-part marks for {located} located spans");

    let zero_indices: Vec<usize> = page
        .select(&select("span.zero-score > span.sentence"))
        .filter_map(|e| e.value().attr("data-index")?.parse().ok())
        .collect();
    let zero_expected: Vec<usize> = report
        .verdicts
        .iter()
        .filter(|v| v.verdict.score() == Some(0))
        .map(|v| v.sentence_index)
        .collect();
    ensure!(
        zero_indices == zero_expected && page.select(&select("span.zero-score")).count() == zero_expected.len(),
        "zero-score highlight on {zero_indices:?}, expected {zero_expected:?}"
    );
    ensure!(html.contains(".zero-score{background:#cfe3ff}"), "zero-score highlight is not blue");

    let badge: String = page.select(&select("div.badge-score")).next().ok_or("no badge")?.text().collect();
    let expected_badge = report.global.mean_percent.map_or("n/a".to_owned(), |m| format!("{m}%"));
    ensure!(badge == expected_badge && badge == "53%", "badge {badge:?}, global {expected_badge:?}");

    ensure!(
        page.select(&select("div.document b")).next().is_none() && html.contains("Use &lt;b&gt; tags"),
        "sentence markup is not escaped"
    );
    let texts: Vec<String> = page.select(&select("span.sentence")).map(|e| e.text().collect()).collect();
    let expected: Vec<String> = report.sentences.iter().map(|s| s.text.clone()).collect();
    ensure!(texts == expected, "rendered sentence text differs: {texts:?}");
    Ok(format!("{marks} marks, blue on {zero_indices:?}, badge {badge}, markup escaped"))
}

fn bot_config(base: &str) -> BotConfig {
    BotConfig {
        api_base: base.to_owned(),
        poll_timeout_secs: 0,
        poll_interval_ms: 10,
        retry: RetryPolicy {
            max_attempts: 4,
            base_backoff_ms: 200,
            max_backoff_ms: 1000,
        },
        ..BotConfig::default()
    }
}

fn bot_end_to_end() -> Outcome {
    let started = Instant::now();
    let stub = StubTelegram::start();
    let fixtures = Fixtures::default().answer(
        EASTWOOD,
        "Veracity score: 0% (False), False Part: Clint Eastwood said, Reason: There is no record of him saying this.",
    );
    let judge = Judge::new(Strategy::FewShot, Arc::new(verity::provider::MockModel::new(&fixtures)), "mock");
    let config = bot_config(stub.base());
    let clock = Arc::new(VirtualClock::new());
    let api = TelegramApi::with_clock(&config, BOT_TOKEN, clock.clone());
    let mut bot = Bot::new(api, judge, &config, 4);

    stub.with(|s| {
        s.enqueue(42, EASTWOOD);
        s.fail_get_updates = 2;
        s.fail_send = 1;
    });
    let handled = bot.poll_once().map_err(|e| e.to_string())?;
    ensure!(handled == 1, "first poll handled {handled} updates");
    stub.with(|s| s.redeliver_once = true);
    let again = bot.poll_once().map_err(|e| e.to_string())?;
    ensure!(again == 0, "redelivered update handled again");

    let (sent, get_calls, send_calls) = stub.with(|s| (s.sent.clone(), s.get_calls, s.send_calls));
    ensure!(sent.len() == 1, "{} replies sent", sent.len());
    let (chat, text) = &sent[0];
    ensure!(
        *chat == 42 && text.contains("Veracity score: 0% (False)") && text.contains("Clint Eastwood said"),
        "reply {text:?} to chat {chat}"
    );
    ensure!(get_calls == 4 && send_calls == 2, "{get_calls} getUpdates, {send_calls} sendMessage calls");
    ensure!(bot.stats().duplicates == 1, "stats {:?}", bot.stats());
    ensure!(clock.now() > Duration::ZERO, "no backoff taken between retries");
    ensure!(started.elapsed() < Duration::from_secs(10), "took {:?}", started.elapsed());
    Ok(format!(
        "1 reply, duplicate suppressed, 2 getUpdates 500s and 1 sendMessage 500 retried ({:?})",
        started.elapsed()
    ))
}

const KEY_ENV: &str = "VERITY_ACCEPTANCE_MODEL_KEY";
const SECRET: &str = "sk-acceptance-7f3c9e";

fn completion(text: &str) -> Scripted {
    Scripted::json(200, json!({"choices": [{"message": {"role": "assistant", "content": text}}]}))
}

fn model_config(base: &str, rate_limit_per_minute: u32) -> ProviderConfig {
    ProviderConfig {
        auth_env_var: KEY_ENV.into(),
        retry: RetryPolicy {
            max_attempts: 3,
            base_backoff_ms: 500,
            max_backoff_ms: 4000,
        },
        rate_limit_per_minute,
        ..ProviderConfig::new(format!("{base}/v1/chat/completions"))
    }
}

fn provider_discipline() -> Outcome {
    std::env::set_var(KEY_ENV, SECRET);
    let request = ModelRequest::single("gpt-4", "Is water wet?");

    let stub = StubServer::start(vec![
        Scripted::json(429, json!({"error": "slow down"})).with_header("Retry-After", "2"),
        completion("Veracity score: 100% (True)"),
    ]);
    let clock = Arc::new(VirtualClock::new());
    let model = HttpModel::with_clock(model_config(&stub.base, 0), clock.clone());
    let answer = model.complete(&request).map_err(|e| e.to_string())?;
    let requests = stub.requests();
    ensure!(answer == "Veracity score: 100% (True)" && requests.len() == 2, "429 path: {} requests", requests.len());
    ensure!(clock.now() >= Duration::from_secs(2), "Retry-After ignored (waited {:?})", clock.now());
    ensure!(
        requests[0].headers.get("authorization").map(String::as_str) == Some(&format!("Bearer {SECRET}")),
        "missing bearer credentials"
    );

    let stub = StubServer::start(vec![Scripted::json(401, json!({"error": "bad key"}))]);
    let model = HttpModel::with_clock(model_config(&stub.base, 0), Arc::new(VirtualClock::new()));
    let err = model.complete(&request).err().ok_or("401 succeeded")?;
    ensure!(matches!(err, ProviderError::Auth { status: 401 }), "401 gave {err}");
    ensure!(stub.requests().len() == 1, "401 retried ({} requests)", stub.requests().len());
    ensure!(!format!("{err} {err:?}").contains(SECRET), "secret leaked into the error");

    let limit = 10u32;
    let clock = Arc::new(VirtualClock::new());
    let stamps = Arc::new(Mutex::new(Vec::new()));
    let stub = {
        let (clock, stamps) = (clock.clone(), stamps.clone());
        StubServer::start_with(move |_, _| {
            stamps.lock().unwrap().push(clock.now());
            completion("ok")
        })
    };
    let model = HttpModel::with_clock(model_config(&stub.base, limit), clock.clone());
    for _ in 0..32 {
        model.complete(&request).map_err(|e| e.to_string())?;
    }
    let stamps = stamps.lock().unwrap().clone();
    ensure!(stamps.len() == 32, "{} requests observed", stamps.len());
    let window = Duration::from_secs(60);
    let observed = busiest_window(&stamps, window);
    ensure!(observed <= limit as usize, "{observed} requests inside one 60s window (limit {limit})");

    let clock = Arc::new(VirtualClock::new());
    let limiter = Arc::new(RateLimiter::per_minute(limit, clock));
    let workers: Vec<_> = (0..4)
        .map(|_| {
            let limiter = limiter.clone();
            std::thread::spawn(move || (0..8).map(|_| limiter.acquire()).collect::<Vec<_>>())
        })
        .collect();
    let mut grants = Vec::new();
    for worker in workers {
        grants.extend(worker.join().map_err(|_| "worker panicked")?);
    }
    grants.sort();
    let granted = busiest_window(&grants, window);
    ensure!(granted <= limit as usize, "{granted} permits inside one 60s window across 4 threads");
    Ok(format!(
        "429 retried after Retry-After, 401 sent once, busiest 60s window {observed}/{limit} requests over {:?} simulated, {granted}/{limit} permits with 4 threads",
        stamps.last().copied().unwrap_or_default()
    ))
}

/// Most timestamps falling in any half-open window of length `window`;
/// `stamps` must be sorted.
fn busiest_window(stamps: &[Duration], window: Duration) -> usize {
    (0..stamps.len())
        .map(|i| stamps[i..].iter().take_while(|t| **t < stamps[i] + window).count())
        .max()
        .unwrap_or(0)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("accuracy arithmetic", accuracy_arithmetic),
        ("verdict parser round trip", parser_round_trip),
        ("golden prompt", golden_prompt),
        ("replay byte stability", replay_stability),
        ("property suite", property_suite),
        ("six-sentence rendering", six_sentence_rendering),
        ("bot end to end", bot_end_to_end),
        ("provider discipline", provider_discipline),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("PASS {} {name}: {detail}", n + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", n + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {} {name}: panicked", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
