//! Accuracy evaluation against labeled fact-check statements.
//!
//! Accuracy is `correct / (correct + wrong)`, rounded to the nearest whole
//! percent; statements the judge could not or would not score are counted
//! separately and left out of the denominator.

use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{label_from_score, Strategy, VeracityLabel, Verdict};
use crate::judge::Judge;
use crate::pool::map_ordered;
use crate::provider::DEFAULT_MAX_IN_FLIGHT;

/// Ground-truth labels in the fact-check rating scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundLabel {
    True,
    MostlyTrue,
    HalfTrue,
    BarelyTrue,
    MostlyFalse,
    False,
    PantsFire,
}

impl GroundLabel {
    pub const ALL: [GroundLabel; 7] = [
        GroundLabel::True,
        GroundLabel::MostlyTrue,
        GroundLabel::HalfTrue,
        GroundLabel::BarelyTrue,
        GroundLabel::MostlyFalse,
        GroundLabel::False,
        GroundLabel::PantsFire,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GroundLabel::True => "true",
            GroundLabel::MostlyTrue => "mostly-true",
            GroundLabel::HalfTrue => "half-true",
            GroundLabel::BarelyTrue => "barely-true",
            GroundLabel::MostlyFalse => "mostly-false",
            GroundLabel::False => "false",
            GroundLabel::PantsFire => "pants-fire",
        }
    }

    /// Case-insensitive; `_` and spaces are read as `-`, and
    /// "pants-on-fire" is accepted.
    pub fn normalize(raw: &str) -> Option<GroundLabel> {
        let key: String = raw
            .trim()
            .to_lowercase()
            .split(|c: char| c == '-' || c == '_' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .collect::<Vec<_>>()
            .join("-");
        match key.as_str() {
            "pants-on-fire" => Some(GroundLabel::PantsFire),
            other => GroundLabel::ALL.into_iter().find(|l| l.as_str() == other),
        }
    }

    pub fn coarse(self) -> VeracityLabel {
        match self {
            GroundLabel::True => VeracityLabel::True,
            GroundLabel::MostlyTrue | GroundLabel::HalfTrue => VeracityLabel::MostlyTrue,
            GroundLabel::MostlyFalse | GroundLabel::BarelyTrue => VeracityLabel::MostlyFalse,
            GroundLabel::False | GroundLabel::PantsFire => VeracityLabel::False,
        }
    }

    pub fn is_truthful(self, half_true_truthful: bool) -> bool {
        match self {
            GroundLabel::True | GroundLabel::MostlyTrue => true,
            GroundLabel::HalfTrue => half_true_truthful,
            _ => false,
        }
    }
}

impl fmt::Display for GroundLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledStatement {
    pub id: String,
    pub statement: String,
    pub ground_label: GroundLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Csv,
    Jsonl,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> Option<DatasetFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(DatasetFormat::Csv),
            "jsonl" | "ndjson" => Some(DatasetFormat::Jsonl),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset is missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("dataset has no usable statements")]
    Empty,
    #[error("cannot tell the dataset format of {0}; use a .csv or .jsonl file")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub items: Vec<LabeledStatement>,
    /// Rows skipped at load time.
    pub warnings: Vec<String>,
}

const REQUIRED: [&str; 3] = ["id", "statement", "label"];

fn push_row(
    data: &mut Dataset,
    line: usize,
    id: &str,
    statement: &str,
    label: &str,
) {
    let statement = statement.trim();
    if statement.is_empty() {
        data.warnings.push(format!("line {line}: empty statement, skipped"));
        return;
    }
    match GroundLabel::normalize(label) {
        Some(ground_label) => data.items.push(LabeledStatement {
            id: id.trim().to_owned(),
            statement: statement.to_owned(),
            ground_label,
        }),
        None => data
            .warnings
            .push(format!("line {line}: unknown label {label:?}, skipped")),
    }
}

fn load_csv(reader: impl std::io::Read) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| DatasetError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    let mut columns = [0usize; 3];
    for (slot, name) in columns.iter_mut().zip(REQUIRED) {
        *slot = headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or(DatasetError::MissingColumn(name))?;
    }
    let mut data = Dataset::default();
    for (n, record) in rdr.records().enumerate() {
        let line = n + 2;
        let record = record.map_err(|e| DatasetError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let field = |i: usize| record.get(columns[i]).unwrap_or("");
        push_row(&mut data, line, field(0), field(1), field(2));
    }
    Ok(data)
}

fn load_jsonl(reader: impl BufRead) -> Result<Dataset, DatasetError> {
    let mut data = Dataset::default();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| DatasetError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let mut fields = [String::new(), String::new(), String::new()];
        for (slot, name) in fields.iter_mut().zip(REQUIRED) {
            *slot = match value.get(name) {
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(serde_json::Value::Number(n)) => n.to_string(),
                Some(_) => {
                    return Err(DatasetError::Malformed {
                        line: line_no,
                        message: format!("{name:?} must be a string"),
                    })
                }
                None => return Err(DatasetError::MissingColumn(name)),
            };
        }
        push_row(&mut data, line_no, &fields[0], &fields[1], &fields[2]);
    }
    Ok(data)
}

/// Loads a CSV (header row required) or JSON-lines dataset with `id`,
/// `statement` and `label` fields.
pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let data = match format {
        DatasetFormat::Csv => load_csv(file)?,
        DatasetFormat::Jsonl => load_jsonl(std::io::BufReader::new(file))?,
    };
    if data.items.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(data)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Truthful versus untruthful only.
    #[default]
    Polarity,
    /// Four-band label equality.
    Coarse,
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "polarity" => Ok(MatchMode::Polarity),
            "coarse" => Ok(MatchMode::Coarse),
            other => Err(format!("unknown mode {other:?} (expected polarity or coarse)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correctness {
    Correct,
    Wrong,
    Unable,
}

pub fn judge_correctness(
    verdict: &Verdict,
    ground: GroundLabel,
    mode: MatchMode,
    half_true_truthful: bool,
) -> Correctness {
    let Some(score) = verdict.score() else {
        return Correctness::Unable;
    };
    let agree = match mode {
        MatchMode::Polarity => (score >= 50) == ground.is_truthful(half_true_truthful),
        MatchMode::Coarse => label_from_score(i64::from(score)).ok() == Some(ground.coarse()),
    };
    if agree {
        Correctness::Correct
    } else {
        Correctness::Wrong
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub total: usize,
    pub correct: usize,
    pub wrong: usize,
    pub unable: usize,
    /// Absent when nothing was judged.
    pub accuracy_percent: Option<u32>,
}

impl EvalSummary {
    pub fn from_counts(correct: usize, wrong: usize, unable: usize) -> Self {
        let judged = correct + wrong;
        let accuracy_percent = (judged > 0).then(|| ((200 * correct + judged) / (2 * judged)) as u32);
        EvalSummary {
            total: judged + unable,
            correct,
            wrong,
            unable,
            accuracy_percent,
        }
    }

    pub fn tally<'a>(outcomes: impl IntoIterator<Item = &'a Correctness>) -> Self {
        let (mut c, mut w, mut u) = (0, 0, 0);
        for outcome in outcomes {
            match outcome {
                Correctness::Correct => c += 1,
                Correctness::Wrong => w += 1,
                Correctness::Unable => u += 1,
            }
        }
        EvalSummary::from_counts(c, w, u)
    }

    pub fn accuracy_display(&self) -> String {
        self.accuracy_percent
            .map_or_else(|| "n/a".to_owned(), |a| format!("{a}%"))
    }

    /// One results-table row, e.g.
    /// `fewshot  total 20  correct 14  wrong 3  unable 3  accuracy 82%`.
    pub fn table_row(&self, method: &str) -> String {
        format!(
            "{method:<8} total {}  correct {}  wrong {}  unable {}  accuracy {}",
            self.total,
            self.correct,
            self.wrong,
            self.unable,
            self.accuracy_display()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: String,
    pub statement: String,
    pub ground_label: GroundLabel,
    pub raw_answer: Option<String>,
    pub verdict: Verdict,
    pub correctness: Correctness,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub mode: MatchMode,
    pub half_true_truthful: bool,
    pub concurrency: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            mode: MatchMode::Polarity,
            half_true_truthful: true,
            concurrency: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRun {
    pub strategy: Strategy,
    pub model_id: String,
    pub mode: MatchMode,
    pub summary: EvalSummary,
    #[serde(skip)]
    pub items: Vec<EvalItem>,
}

impl EvalRun {
    /// Summary JSON with a trailing newline.
    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serialization is infallible");
        s.push('\n');
        s
    }

    /// One JSON object per line, in dataset order.
    pub fn items_jsonl(&self) -> String {
        self.items
            .iter()
            .map(|item| serde_json::to_string(item).expect("item serialization is infallible") + "\n")
            .collect()
    }
}

/// Judges every statement once. Per-item failures are recorded as
/// [`Correctness::Unable`] with a warning.
pub fn run_eval(dataset: &[LabeledStatement], judge: &Judge, options: &EvalOptions) -> EvalRun {
    let items = map_ordered(dataset, options.concurrency, |_, row| {
        let (verdict, raw_answer, warnings) = match judge.judge(&row.statement) {
            Ok(j) => (j.verdict, Some(j.raw), j.warnings),
            Err(failure) => (
                Verdict::UnableToJudge,
                failure.raw_answer().map(str::to_owned),
                vec![failure.to_string()],
            ),
        };
        let correctness = judge_correctness(&verdict, row.ground_label, options.mode, options.half_true_truthful);
        EvalItem {
            id: row.id.clone(),
            statement: row.statement.clone(),
            ground_label: row.ground_label,
            raw_answer,
            verdict,
            correctness,
            warnings,
        }
    });
    EvalRun {
        strategy: judge.strategy,
        model_id: judge.model_id.clone(),
        mode: options.mode,
        summary: EvalSummary::tally(items.iter().map(|i| &i.correctness)),
        items,
    }
}
