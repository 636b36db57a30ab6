//! Plan, search, synthesize.
//!
//! The claim is decomposed into at most `max_steps` sub-questions, each
//! sub-question is sent once to the search backend, and a final few-shot
//! prompt carrying the gathered evidence is answered and parsed with the
//! usual verdict grammar. Every stage is recorded in an [`AgentTrace`],
//! including on failure.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::Strategy;
use crate::prompting::{
    build_agent_plan_prompt_with, build_agent_synthesis_prompt, Evidence, PromptBundle, PromptError,
    DEFAULT_EVIDENCE_BUDGET, DEFAULT_PLAN_TEMPLATE,
};
use crate::provider::{
    ModelBackend, ModelRequest, ProviderError, SearchBackend, SearchResult, DEFAULT_MAX_TOKENS,
    DEFAULT_SEARCH_RESULTS,
};
use crate::verdict_parse::{parse_verdict, ParseError, ParsedVerdict, RawAnswer};

pub const DEFAULT_MAX_STEPS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStep {
    pub sub_question: String,
    pub query: String,
    pub results: Vec<SearchResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub claim: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub plan_raw: String,
    pub plan: Vec<String>,
    pub steps: Vec<AgentStep>,
    pub final_raw: String,
    pub step_count: usize,
}

#[derive(Debug, Clone)]
pub struct AgentOptions {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_steps: usize,
    pub search_k: usize,
    pub evidence_budget: usize,
    pub plan_template: String,
}

impl Default for AgentOptions {
    fn default() -> Self {
        AgentOptions {
            model_id: String::new(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            max_steps: DEFAULT_MAX_STEPS,
            search_k: DEFAULT_SEARCH_RESULTS,
            evidence_budget: DEFAULT_EVIDENCE_BUDGET,
            plan_template: DEFAULT_PLAN_TEMPLATE.to_owned(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AgentFailure {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("max_steps must be at least 1")]
    NoSteps,
}

/// A failed agent run with whatever trace was built before the failure.
#[derive(Debug, Error)]
#[error("agent run failed: {failure}")]
pub struct AgentError {
    pub failure: AgentFailure,
    pub trace: AgentTrace,
}

static LIST_ITEM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:\d+\s*[.)]|[-*•])\s+(.+?)\s*$").unwrap());

/// Reads a numbered (`1.`, `1)`) or bulleted (`-`) list, keeping at most
/// `max_steps` items. Falls back to the claim itself when no item is found.
pub fn parse_plan(answer: &str, claim: &str, max_steps: usize) -> Vec<String> {
    let mut items: Vec<String> = answer
        .lines()
        .filter_map(|line| LIST_ITEM.captures(line))
        .map(|caps| caps[1].trim_matches(|c: char| c == '*' || c.is_whitespace()).to_owned())
        .filter(|item| !item.is_empty())
        .collect();
    if items.is_empty() {
        items.push(claim.trim().to_owned());
    }
    items.truncate(max_steps.max(1));
    items
}

/// Runs the agent strategy for one claim.
///
/// Provider calls: one plan completion, one search per sub-question, one
/// synthesis completion.
pub fn verify_with_agent(
    claim: &str,
    model: &dyn ModelBackend,
    search: &dyn SearchBackend,
    bundle: &PromptBundle,
    options: &AgentOptions,
) -> Result<(ParsedVerdict, AgentTrace), AgentError> {
    let mut trace = AgentTrace {
        claim: claim.to_owned(),
        ..AgentTrace::default()
    };
    macro_rules! bail {
        ($err:expr) => {
            return Err(AgentError {
                failure: $err.into(),
                trace,
            })
        };
    }
    if options.max_steps < 1 {
        bail!(AgentFailure::NoSteps);
    }
    let request = |prompt: String| ModelRequest {
        temperature: options.temperature,
        max_tokens: options.max_tokens,
        ..ModelRequest::single(options.model_id.clone(), prompt)
    };

    let plan_prompt = match build_agent_plan_prompt_with(&options.plan_template, claim, options.max_steps) {
        Ok(p) => p,
        Err(e) => bail!(e),
    };
    let plan_raw = match model.complete(&request(plan_prompt)) {
        Ok(answer) => answer,
        Err(e) => bail!(e),
    };
    trace.plan = parse_plan(&plan_raw, claim, options.max_steps);
    trace.plan_raw = plan_raw;

    let mut evidence = Vec::with_capacity(trace.plan.len());
    for sub_question in trace.plan.clone() {
        let query = sub_question.clone();
        match search.search(&query, options.search_k) {
            Ok(results) => {
                evidence.push(Evidence {
                    query: query.clone(),
                    results: results.clone(),
                });
                trace.steps.push(AgentStep {
                    sub_question,
                    query,
                    results,
                    error: None,
                });
                trace.step_count = trace.steps.len();
            }
            Err(e) => {
                trace.steps.push(AgentStep {
                    sub_question,
                    query,
                    results: Vec::new(),
                    error: Some(e.to_string()),
                });
                trace.step_count = trace.steps.len();
                bail!(e);
            }
        }
    }

    let synthesis = match build_agent_synthesis_prompt(claim, &evidence, bundle, options.evidence_budget) {
        Ok(p) => p,
        Err(e) => bail!(e),
    };
    let final_raw = match model.complete(&request(synthesis)) {
        Ok(answer) => answer,
        Err(e) => bail!(e),
    };
    trace.final_raw = final_raw.clone();
    match parse_verdict(&RawAnswer::new(final_raw, Strategy::Agent)) {
        Ok(parsed) => Ok((parsed, trace)),
        Err(e) => bail!(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_markers() {
        let answer = "Here is the plan:\n1. First question?\n2) Second question\n- Third\n* Fourth\nnot an item";
        assert_eq!(
            parse_plan(answer, "c", 10),
            ["First question?", "Second question", "Third", "Fourth"]
        );
        assert_eq!(parse_plan(answer, "c", 2), ["First question?", "Second question"]);
    }

    #[test]
    fn degenerate_plan_falls_back_to_claim() {
        assert_eq!(parse_plan("I would just search it.", " The claim. ", 5), ["The claim."]);
        assert_eq!(parse_plan("", "c", 5), ["c"]);
    }

    #[test]
    fn bold_items_are_unwrapped() {
        assert_eq!(parse_plan("1. **Who said it?**", "c", 5), ["Who said it?"]);
    }
}
