//! Statements, verdicts, and score aggregation.
//!
//! A verdict is the outcome of judging one statement. Judged verdicts carry an
//! integer percent score; the label is always derived from the score through
//! fixed bands so the two can never disagree inside the pipeline.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClaimsError {
    #[error("veracity score {0} is outside 0..=100")]
    ScoreOutOfRange(i64),
}

/// Four-level truthfulness label, ordered from least to most truthful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VeracityLabel {
    False,
    MostlyFalse,
    MostlyTrue,
    True,
}

impl VeracityLabel {
    pub const ALL: [VeracityLabel; 4] = [
        VeracityLabel::False,
        VeracityLabel::MostlyFalse,
        VeracityLabel::MostlyTrue,
        VeracityLabel::True,
    ];

    /// The canonical score the few-shot examples pair with this label.
    pub fn anchor_score(self) -> u8 {
        match self {
            VeracityLabel::False => 0,
            VeracityLabel::MostlyFalse => 30,
            VeracityLabel::MostlyTrue => 80,
            VeracityLabel::True => 100,
        }
    }

    /// Human form used in model answers, e.g. `Mostly True`.
    pub fn display_name(self) -> &'static str {
        match self {
            VeracityLabel::False => "False",
            VeracityLabel::MostlyFalse => "Mostly False",
            VeracityLabel::MostlyTrue => "Mostly True",
            VeracityLabel::True => "True",
        }
    }

    /// Lenient label lookup: case, spaces, hyphens and underscores are ignored.
    pub fn from_name(name: &str) -> Option<VeracityLabel> {
        let folded: String = name
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match folded.as_str() {
            "true" => Some(VeracityLabel::True),
            "mostlytrue" => Some(VeracityLabel::MostlyTrue),
            "mostlyfalse" => Some(VeracityLabel::MostlyFalse),
            "false" => Some(VeracityLabel::False),
            _ => None,
        }
    }
}

impl fmt::Display for VeracityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Maps a percent score onto its label band.
///
/// Bands: `[0,15]` False, `(15,49]` Mostly False, `(49,85]` Mostly True,
/// `(85,100]` True.
pub fn label_from_score(score: i64) -> Result<VeracityLabel, ClaimsError> {
    match score {
        0..=15 => Ok(VeracityLabel::False),
        16..=49 => Ok(VeracityLabel::MostlyFalse),
        50..=85 => Ok(VeracityLabel::MostlyTrue),
        86..=100 => Ok(VeracityLabel::True),
        other => Err(ClaimsError::ScoreOutOfRange(other)),
    }
}

/// Half-open character range `[start, end)` in Unicode scalar values.
///
/// Serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct CharRange {
    pub start: usize,
    pub end: usize,
}

impl CharRange {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        CharRange { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, other: &CharRange) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Slices `text` by character offsets. Out-of-bounds ends are clamped.
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        let byte_at = |char_idx: usize| {
            text.char_indices()
                .nth(char_idx)
                .map(|(b, _)| b)
                .unwrap_or(text.len())
        };
        let start = byte_at(self.start);
        let end = byte_at(self.end).max(start);
        &text[start..end]
    }

    pub fn as_range(&self) -> Range<usize> {
        self.start..self.end
    }
}

impl From<[usize; 2]> for CharRange {
    fn from(pair: [usize; 2]) -> Self {
        CharRange {
            start: pair[0],
            end: pair[1].max(pair[0]),
        }
    }
}

impl From<CharRange> for [usize; 2] {
    fn from(range: CharRange) -> Self {
        [range.start, range.end]
    }
}

/// A phrase the judge flagged as incorrect or ambiguous.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FalsePart {
    pub text: String,
    /// Where the phrase sits in the judged sentence, if it could be located.
    pub span: Option<CharRange>,
}

impl FalsePart {
    pub fn unlocated(text: impl Into<String>) -> Self {
        FalsePart {
            text: text.into(),
            span: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Verdict {
    Judged {
        score: u8,
        label: VeracityLabel,
        #[serde(default)]
        false_parts: Vec<FalsePart>,
        #[serde(default)]
        reason: String,
    },
    /// The statement is not objective or checkable.
    NonVerifiable,
    /// The judge could not determine authenticity.
    UnableToJudge,
}

impl Verdict {
    /// Builds a judged verdict, deriving the label from the score.
    pub fn judged(
        score: i64,
        false_parts: Vec<FalsePart>,
        reason: impl Into<String>,
    ) -> Result<Verdict, ClaimsError> {
        let label = label_from_score(score)?;
        Ok(Verdict::Judged {
            score: score as u8,
            label,
            false_parts,
            reason: reason.into(),
        })
    }

    pub fn score(&self) -> Option<u8> {
        match self {
            Verdict::Judged { score, .. } => Some(*score),
            _ => None,
        }
    }

    pub fn label(&self) -> Option<VeracityLabel> {
        match self {
            Verdict::Judged { label, .. } => Some(*label),
            _ => None,
        }
    }

    pub fn false_parts(&self) -> &[FalsePart] {
        match self {
            Verdict::Judged { false_parts, .. } => false_parts,
            _ => &[],
        }
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            Verdict::Judged { reason, .. } => Some(reason),
            _ => None,
        }
    }

    pub fn is_judged(&self) -> bool {
        matches!(self, Verdict::Judged { .. })
    }
}

/// How a statement is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// One few-shot prompt per statement.
    FewShot,
    /// Plan, search each sub-question, then synthesize.
    Agent,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::FewShot => "fewshot",
            Strategy::Agent => "agent",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fewshot" | "few-shot" => Ok(Strategy::FewShot),
            "agent" => Ok(Strategy::Agent),
            other => Err(format!("unknown strategy {other:?} (expected fewshot or agent)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceVerdict {
    pub sentence_index: usize,
    #[serde(flatten)]
    pub verdict: Verdict,
}

impl SentenceVerdict {
    pub fn new(sentence_index: usize, verdict: Verdict) -> Self {
        SentenceVerdict {
            sentence_index,
            verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalScore {
    pub judged_count: usize,
    pub excluded_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_percent: Option<u8>,
    pub prefix_series: Vec<Option<u8>>,
}

/// Integer mean of `sum / count`, rounded half-up. `count` must be non-zero.
fn mean_half_up(sum: u64, count: u64) -> u8 {
    ((2 * sum + count) / (2 * count)) as u8
}

/// Aggregates local scores into the global veracity score.
///
/// Only judged sentences count; non-verifiable and unable-to-judge entries are
/// left out of both numerator and denominator.
pub fn global_score(verdicts: &[SentenceVerdict]) -> GlobalScore {
    let mut sum = 0u64;
    let mut judged = 0u64;
    let mut prefix_series = Vec::with_capacity(verdicts.len());
    for sv in verdicts {
        if let Some(score) = sv.verdict.score() {
            sum += u64::from(score);
            judged += 1;
        }
        prefix_series.push((judged > 0).then(|| mean_half_up(sum, judged)));
    }
    GlobalScore {
        judged_count: judged as usize,
        excluded_count: verdicts.len() - judged as usize,
        mean_percent: (judged > 0).then(|| mean_half_up(sum, judged)),
        prefix_series,
    }
}

/// Running global score: entry `i` covers `verdicts[0..=i]`.
pub fn prefix_scores(verdicts: &[SentenceVerdict]) -> Vec<Option<u8>> {
    global_score(verdicts).prefix_series
}
