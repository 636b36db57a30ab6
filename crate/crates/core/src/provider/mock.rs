use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{check_query, ModelBackend, ModelRequest, ProviderError, SearchBackend, SearchResult};
use crate::prompting::{question_subject, PromptKind};

/// Case- and whitespace-insensitive fixture key.
fn fold(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureKind {
    Fewshot,
    Plan,
    Synthesis,
}

impl From<PromptKind> for FixtureKind {
    fn from(kind: PromptKind) -> Self {
        match kind {
            PromptKind::FewShot => FixtureKind::Fewshot,
            PromptKind::Plan => FixtureKind::Plan,
            PromptKind::Synthesis => FixtureKind::Synthesis,
        }
    }
}

/// A canned answer for prompts whose question is `statement`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockAnswer {
    pub statement: String,
    /// Restricts the answer to one prompt kind; any kind when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<FixtureKind>,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchFixture {
    pub query: String,
    pub results: Vec<SearchResult>,
}

/// Fixture file contents (JSON).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixtures {
    #[serde(default)]
    pub answers: Vec<MockAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_answer: Option<String>,
    #[serde(default)]
    pub search: Vec<SearchFixture>,
}

impl Fixtures {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Cache(format!("reading fixtures {}: {e}", path.display())))?;
        serde_json::from_str(&raw)
            .map_err(|e| ProviderError::Cache(format!("parsing fixtures {}: {e}", path.display())))
    }

    pub fn answer(mut self, statement: &str, answer: &str) -> Self {
        self.answers.push(MockAnswer {
            statement: statement.to_owned(),
            kind: None,
            answer: answer.to_owned(),
        });
        self
    }

    pub fn answer_for(mut self, kind: FixtureKind, statement: &str, answer: &str) -> Self {
        self.answers.push(MockAnswer {
            statement: statement.to_owned(),
            kind: Some(kind),
            answer: answer.to_owned(),
        });
        self
    }

    /// Answer for prompts no fixture matches.
    pub fn fallback(mut self, answer: &str) -> Self {
        self.default_answer = Some(answer.to_owned());
        self
    }

    pub fn search_results(mut self, query: &str, results: Vec<SearchResult>) -> Self {
        self.search.push(SearchFixture {
            query: query.to_owned(),
            results,
        });
        self
    }
}

/// Deterministic model keyed by the question a prompt asks.
///
/// The key is the statement in the prompt's final `input:` line (or the
/// whole last user message when there is none) together with the prompt
/// kind, so the few-shot examples never collide with the question.
pub struct MockModel {
    answers: Vec<MockAnswer>,
    default_answer: Option<String>,
    calls: AtomicUsize,
}

impl MockModel {
    pub fn new(fixtures: &Fixtures) -> Self {
        MockModel {
            answers: fixtures.answers.clone(),
            default_answer: fixtures.default_answer.clone(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ModelBackend for MockModel {
    fn complete(&self, request: &ModelRequest) -> Result<String, ProviderError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let prompt = request.last_user_content().unwrap_or("");
        let kind = FixtureKind::from(PromptKind::detect(prompt));
        let subject = fold(question_subject(prompt).unwrap_or(prompt));
        self.answers
            .iter()
            .find(|a| a.kind.is_none_or(|k| k == kind) && fold(&a.statement) == subject)
            .map(|a| a.answer.clone())
            .or_else(|| self.default_answer.clone())
            .ok_or_else(|| ProviderError::FixtureMiss(subject.chars().take(80).collect()))
    }
}

/// Canned search results; unknown queries return nothing.
pub struct MockSearch {
    entries: Vec<SearchFixture>,
    calls: AtomicUsize,
}

impl MockSearch {
    pub fn new(fixtures: &Fixtures) -> Self {
        MockSearch {
            entries: fixtures.search.clone(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl SearchBackend for MockSearch {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, ProviderError> {
        check_query(query)?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = fold(query);
        Ok(self
            .entries
            .iter()
            .find(|e| fold(&e.query) == key)
            .map(|e| e.results.iter().take(k).cloned().collect())
            .unwrap_or_default())
    }
}
