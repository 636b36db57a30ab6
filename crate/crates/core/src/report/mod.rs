//! Document assessment and report output.
//!
//! [`assess_document`] segments a document, judges every sentence on a
//! bounded worker pool and aggregates the local scores. Reports serialize to
//! a versioned JSON schema and to a static annotated HTML page.

mod html;

use std::sync::atomic::{AtomicBool, Ordering};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentTrace;
use crate::claims::{global_score, CharRange, GlobalScore, SentenceVerdict, Strategy, Verdict};
use crate::ingest::{SourceDocument, SourceKind};
use crate::judge::{Judge, JudgeError, Judgment};
use crate::pool::map_ordered;
use crate::provider::{ProviderError, DEFAULT_MAX_IN_FLIGHT};
use crate::segment::Segmenter;

pub use html::render_html;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSentence {
    pub index: usize,
    pub text: String,
    /// Character range in the extracted document text.
    pub span: CharRange,
    /// Cue time span in milliseconds, for subtitle sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_ms: Option<[u64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub origin: String,
    pub kind: SourceKind,
    pub strategy: Strategy,
    pub model_id: String,
    pub created_at: DateTime<Utc>,
    pub global: GlobalScore,
    pub sentences: Vec<ReportSentence>,
    pub verdicts: Vec<SentenceVerdict>,
    pub warnings: Vec<String>,
    /// One entry per sentence for agent runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_trace: Option<Vec<Option<AgentTrace>>>,
}

impl Report {
    /// Checks index alignment and that `global` matches the verdicts.
    pub fn validate(&self) -> Result<(), String> {
        if self.sentences.len() != self.verdicts.len() {
            return Err(format!(
                "{} sentences but {} verdicts",
                self.sentences.len(),
                self.verdicts.len()
            ));
        }
        for (i, (s, v)) in self.sentences.iter().zip(&self.verdicts).enumerate() {
            if s.index != i || v.sentence_index != i {
                return Err(format!("entry {i} is out of order"));
            }
        }
        if self.global != global_score(&self.verdicts) {
            return Err("global score does not match the verdicts".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    /// Credentials were refused; judging the rest of the document would fail
    /// the same way.
    #[error("sentence {index}: {source}")]
    Provider {
        index: usize,
        #[source]
        source: ProviderError,
    },
    #[error("invalid report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone)]
pub struct AssessOptions {
    pub segmenter: Segmenter,
    pub concurrency: usize,
    pub created_at: DateTime<Utc>,
}

impl Default for AssessOptions {
    fn default() -> Self {
        AssessOptions {
            segmenter: Segmenter::default(),
            concurrency: DEFAULT_MAX_IN_FLIGHT,
            created_at: DateTime::<Utc>::UNIX_EPOCH,
        }
    }
}

struct Outcome {
    verdict: Verdict,
    warnings: Vec<String>,
    trace: Option<AgentTrace>,
}

fn judge_one(judge: &Judge, text: &str) -> Result<Outcome, ProviderError> {
    match judge.judge(text) {
        Ok(Judgment {
            verdict,
            warnings,
            trace,
            ..
        }) => Ok(Outcome {
            verdict,
            warnings,
            trace,
        }),
        Err(failure) => {
            if let JudgeError::Provider(e @ ProviderError::Auth { .. }) = failure.error {
                return Err(e);
            }
            Ok(Outcome {
                verdict: Verdict::UnableToJudge,
                warnings: vec![format!("downgraded to unable to judge: {}", failure.error)],
                trace: failure.trace,
            })
        }
    }
}

/// Segments `doc`, judges each sentence once and aggregates.
///
/// Per-sentence failures become [`Verdict::UnableToJudge`] with a warning.
/// Only an authentication failure aborts the run.
pub fn assess_document(doc: &SourceDocument, judge: &Judge, options: &AssessOptions) -> Result<Report, ReportError> {
    let sentences = options.segmenter.split(&doc.text);
    let abort = AtomicBool::new(false);
    let results = map_ordered(&sentences, options.concurrency, |_, sentence| {
        if abort.load(Ordering::SeqCst) {
            return None;
        }
        let outcome = judge_one(judge, &sentence.text);
        if outcome.is_err() {
            abort.store(true, Ordering::SeqCst);
        }
        Some(outcome)
    });
    let mut outcomes = Vec::with_capacity(results.len());
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Some(Ok(outcome)) => outcomes.push(outcome),
            Some(Err(source)) => return Err(ReportError::Provider { index: i, source }),
            None => {}
        }
    }

    let mut warnings = doc.warnings.clone();
    let mut verdicts = Vec::with_capacity(outcomes.len());
    let mut traces = Vec::with_capacity(outcomes.len());
    for (i, outcome) in outcomes.into_iter().enumerate() {
        warnings.extend(outcome.warnings.into_iter().map(|w| format!("sentence {i}: {w}")));
        verdicts.push(SentenceVerdict::new(i, outcome.verdict));
        traces.push(outcome.trace);
    }

    let report_sentences = sentences
        .into_iter()
        .map(|s| ReportSentence {
            time_ms: doc.time_span(s.range).map(|(a, b)| [a, b]),
            index: s.index,
            text: s.text,
            span: s.range,
        })
        .collect();
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        origin: doc.origin.clone(),
        kind: doc.kind,
        strategy: judge.strategy,
        model_id: judge.model_id.clone(),
        created_at: options.created_at,
        global: global_score(&verdicts),
        sentences: report_sentences,
        verdicts,
        warnings,
        agent_trace: (judge.strategy == Strategy::Agent).then_some(traces),
    })
}

/// Pretty-printed JSON with a trailing newline. Field order is fixed by the
/// type definitions, so equal reports give identical bytes.
pub fn render_json(report: &Report) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(report).expect("report serialization is infallible");
    out.push(b'\n');
    out
}

pub fn parse_json(bytes: &[u8]) -> Result<Report, ReportError> {
    Ok(serde_json::from_slice(bytes)?)
}
