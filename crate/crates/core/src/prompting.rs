//! Prompt assembly for the few-shot judge and the agent loop.
//!
//! The few-shot bundle is stored as a sectioned text file:
//!
//! ```text
//! --- role_set ---
//! ...
//! --- instruction ---
//! ...
//! --- examples ---
//! input: "statement"
//! output: Veracity score: ...
//! --- question ---
//! input: "{statement}"
//! output:
//! ```
//!
//! and rendered as `Role set:` / `Instruction:` / `Examples:` / `Question:`
//! blocks separated by blank lines.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::provider::SearchResult;

pub const FEWSHOT_TEMPLATE_VERSION: &str = "fewshot-v1";
pub const DEFAULT_FEWSHOT_TEMPLATE: &str = include_str!("../templates/fewshot_v1.txt");
pub const DEFAULT_PLAN_TEMPLATE: &str = include_str!("../templates/agent_plan_v1.txt");

/// Maximum characters of snippet text embedded in a synthesis prompt.
pub const DEFAULT_EVIDENCE_BUDGET: usize = 4000;
pub const NO_EVIDENCE_MARKER: &str = "No evidence retrieved.";
pub const TRUNCATION_MARKER: &str = "[further evidence omitted]";

const STATEMENT_SLOT: &str = "{statement}";
const CLAIM_SLOT: &str = "{claim}";
const STEPS_SLOT: &str = "{max_steps}";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("statement is empty")]
    EmptyStatement,
    #[error("template is missing section `{0}`")]
    MissingSection(&'static str),
    #[error("template section `{0}` appears more than once")]
    DuplicateSection(String),
    #[error("unknown template section `{0}`")]
    UnknownSection(String),
    #[error("examples must alternate `input:` and `output:` lines (line {0})")]
    MalformedExamples(usize),
    #[error("question section must contain the {STATEMENT_SLOT} placeholder")]
    MissingPlaceholder,
    #[error("failed to read template: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotExample {
    /// Statement without the surrounding quotes.
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub role_set: String,
    pub instruction: String,
    pub examples: Vec<FewShotExample>,
    /// Question template containing `{statement}`.
    pub question: String,
}

impl Default for PromptBundle {
    fn default() -> Self {
        PromptBundle::parse(DEFAULT_FEWSHOT_TEMPLATE).expect("bundled template is valid")
    }
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(s)
}

/// Reads alternating `input:` / `output:` lines.
pub fn parse_examples(block: &str) -> Result<Vec<FewShotExample>, PromptError> {
    let lines: Vec<&str> = block.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut examples = Vec::new();
    for (pair_no, pair) in lines.chunks(2).enumerate() {
        let bad = || PromptError::MalformedExamples(pair_no * 2 + 1);
        let input = pair[0].strip_prefix("input:").ok_or_else(bad)?;
        let output = pair
            .get(1)
            .and_then(|l| l.strip_prefix("output:"))
            .ok_or_else(bad)?;
        examples.push(FewShotExample {
            input: unquote(input.trim()).to_owned(),
            output: output.trim().to_owned(),
        });
    }
    Ok(examples)
}

impl PromptBundle {
    pub fn parse(source: &str) -> Result<Self, PromptError> {
        let mut sections: Vec<(String, Vec<&str>)> = Vec::new();
        for line in source.lines() {
            let trimmed = line.trim();
            if let Some(name) = trimmed
                .strip_prefix("--- ")
                .and_then(|rest| rest.strip_suffix(" ---"))
            {
                if sections.iter().any(|(n, _)| n == name) {
                    return Err(PromptError::DuplicateSection(name.to_owned()));
                }
                sections.push((name.to_owned(), Vec::new()));
            } else if let Some((_, body)) = sections.last_mut() {
                body.push(line);
            }
        }
        let mut take = |name: &'static str| -> Result<String, PromptError> {
            let at = sections
                .iter()
                .position(|(n, _)| n == name)
                .ok_or(PromptError::MissingSection(name))?;
            let (_, body) = sections.remove(at);
            Ok(body.join("\n").trim_matches('\n').to_owned())
        };
        let role_set = take("role_set")?;
        let instruction = take("instruction")?;
        let examples = parse_examples(&take("examples")?)?;
        let question = take("question")?;
        if let Some((name, _)) = sections.first() {
            return Err(PromptError::UnknownSection(name.clone()));
        }
        if !question.contains(STATEMENT_SLOT) {
            return Err(PromptError::MissingPlaceholder);
        }
        Ok(PromptBundle {
            role_set,
            instruction,
            examples,
            question,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let source = std::fs::read_to_string(path).map_err(|e| PromptError::Io(e.to_string()))?;
        Self::parse(&source)
    }

    fn examples_block(&self) -> String {
        let mut out = String::new();
        for (i, ex) in self.examples.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = write!(out, "input: \"{}\"\noutput: {}", ex.input, ex.output);
        }
        out
    }

    fn render(&self, statement: &str, evidence: Option<&str>) -> String {
        let mut out = format!(
            "Role set:\n{}\n\nInstruction:\n{}\n\nExamples:\n{}\n\n",
            self.role_set,
            self.instruction,
            self.examples_block()
        );
        if let Some(evidence) = evidence {
            out.push_str("Evidence:\n");
            out.push_str(evidence);
            out.push_str("\n\n");
        }
        out.push_str("Question:\n");
        out.push_str(&self.question.replace(STATEMENT_SLOT, statement));
        out
    }
}

/// The few-shot judging prompt for one statement.
pub fn build_fewshot_prompt(statement: &str, bundle: &PromptBundle) -> Result<String, PromptError> {
    if statement.trim().is_empty() {
        return Err(PromptError::EmptyStatement);
    }
    Ok(bundle.render(statement, None))
}

/// Asks the model to decompose `claim` into at most `max_steps` searchable
/// sub-questions, as a numbered list.
pub fn build_agent_plan_prompt(claim: &str, max_steps: usize) -> Result<String, PromptError> {
    build_agent_plan_prompt_with(DEFAULT_PLAN_TEMPLATE, claim, max_steps)
}

pub fn build_agent_plan_prompt_with(
    template: &str,
    claim: &str,
    max_steps: usize,
) -> Result<String, PromptError> {
    if claim.trim().is_empty() {
        return Err(PromptError::EmptyStatement);
    }
    Ok(template
        .replace(STEPS_SLOT, &max_steps.to_string())
        .replace(CLAIM_SLOT, claim))
}

/// One search issued by the agent and what it returned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evidence {
    pub query: String,
    pub results: Vec<SearchResult>,
}

/// Renders the evidence section body. Snippets are kept in order until the
/// next one would push the snippet total past `budget` characters; that
/// snippet and everything after it are dropped.
pub fn render_evidence(evidence: &[Evidence], budget: usize) -> String {
    if evidence.is_empty() {
        return NO_EVIDENCE_MARKER.to_owned();
    }
    let mut out = String::from("Web search results gathered for this statement. Use them when judging it.");
    let mut used = 0usize;
    let mut truncated = false;
    for (i, item) in evidence.iter().enumerate() {
        let _ = write!(out, "\n[{}] search: {}", i + 1, item.query);
        if item.results.is_empty() && !truncated {
            out.push_str("\n(no results)");
        }
        for result in &item.results {
            if truncated {
                break;
            }
            let cost = result.snippet.chars().count();
            if used + cost > budget {
                truncated = true;
                break;
            }
            used += cost;
            let _ = write!(out, "\n- {} <{}>: {}", result.title, result.url, result.snippet);
        }
    }
    if truncated {
        out.push('\n');
        out.push_str(TRUNCATION_MARKER);
    }
    out
}

/// The final agent prompt: the few-shot prompt with an evidence section
/// ahead of the question, so the answer follows the same output grammar.
pub fn build_agent_synthesis_prompt(
    claim: &str,
    evidence: &[Evidence],
    bundle: &PromptBundle,
    budget: usize,
) -> Result<String, PromptError> {
    if claim.trim().is_empty() {
        return Err(PromptError::EmptyStatement);
    }
    Ok(bundle.render(claim, Some(&render_evidence(evidence, budget))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    FewShot,
    Plan,
    Synthesis,
}

impl PromptKind {
    /// Recognises which builder produced `prompt`.
    pub fn detect(prompt: &str) -> PromptKind {
        let plan_prefix = DEFAULT_PLAN_TEMPLATE
            .split('{')
            .next()
            .unwrap_or(DEFAULT_PLAN_TEMPLATE);
        if prompt.starts_with(plan_prefix) {
            PromptKind::Plan
        } else if prompt.contains("\n\nEvidence:\n") {
            PromptKind::Synthesis
        } else {
            PromptKind::FewShot
        }
    }
}

/// The statement substituted into a rendered prompt's final `input:` line.
pub fn question_subject(prompt: &str) -> Option<&str> {
    let at = prompt.rfind("\ninput: \"")?;
    let rest = &prompt[at + "\ninput: \"".len()..];
    let rest = rest.trim_end();
    let rest = rest.strip_suffix("output:")?.trim_end();
    rest.strip_suffix('"')
}
