//! One statement in, one verdict out, under either strategy.

use std::sync::Arc;

use thiserror::Error;

use crate::agent::{verify_with_agent, AgentError, AgentFailure, AgentOptions, AgentTrace, DEFAULT_MAX_STEPS};
use crate::claims::{Strategy, Verdict};
use crate::prompting::{build_fewshot_prompt, PromptBundle, PromptError, DEFAULT_EVIDENCE_BUDGET, DEFAULT_PLAN_TEMPLATE};
use crate::provider::{ModelBackend, ModelRequest, ProviderError, SearchBackend, DEFAULT_MAX_TOKENS, DEFAULT_SEARCH_RESULTS};
use crate::verdict_parse::{attach_spans, parse_verdict, ParseError, RawAnswer};

#[derive(Debug, Clone)]
pub struct Judgment {
    pub verdict: Verdict,
    /// The answer the verdict was parsed from.
    pub raw: String,
    pub warnings: Vec<String>,
    pub trace: Option<AgentTrace>,
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(ProviderError),
    #[error(transparent)]
    Parse(ParseError),
    #[error("agent strategy needs a search backend")]
    NoSearch,
    #[error("max_steps must be at least 1")]
    NoSteps,
}

/// A judge failure plus the partial agent trace, when there is one.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct JudgeFailure {
    pub error: JudgeError,
    pub trace: Option<AgentTrace>,
}

impl JudgeFailure {
    /// The raw answer that failed to parse, if that was the failure.
    pub fn raw_answer(&self) -> Option<&str> {
        match &self.error {
            JudgeError::Parse(e) => Some(&e.raw),
            _ => None,
        }
    }
}

impl From<JudgeError> for JudgeFailure {
    fn from(error: JudgeError) -> Self {
        JudgeFailure { error, trace: None }
    }
}

impl From<AgentError> for JudgeFailure {
    fn from(err: AgentError) -> Self {
        let error = match err.failure {
            AgentFailure::Prompt(e) => JudgeError::Prompt(e),
            AgentFailure::Provider(e) => JudgeError::Provider(e),
            AgentFailure::Parse(e) => JudgeError::Parse(e),
            AgentFailure::NoSteps => JudgeError::NoSteps,
        };
        JudgeFailure {
            error,
            trace: Some(err.trace),
        }
    }
}

#[derive(Clone)]
pub struct Judge {
    pub strategy: Strategy,
    pub model: Arc<dyn ModelBackend>,
    pub search: Option<Arc<dyn SearchBackend>>,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub bundle: PromptBundle,
    pub plan_template: String,
    pub max_steps: usize,
    pub search_k: usize,
    pub evidence_budget: usize,
}

impl Judge {
    pub fn new(strategy: Strategy, model: Arc<dyn ModelBackend>, model_id: impl Into<String>) -> Self {
        Judge {
            strategy,
            model,
            search: None,
            model_id: model_id.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            bundle: PromptBundle::default(),
            plan_template: DEFAULT_PLAN_TEMPLATE.to_owned(),
            max_steps: DEFAULT_MAX_STEPS,
            search_k: DEFAULT_SEARCH_RESULTS,
            evidence_budget: DEFAULT_EVIDENCE_BUDGET,
        }
    }

    pub fn with_search(mut self, search: Arc<dyn SearchBackend>) -> Self {
        self.search = Some(search);
        self
    }

    /// Judges `statement`. Whitespace is collapsed for the prompt; false
    /// parts are located against the statement as given.
    pub fn judge(&self, statement: &str) -> Result<Judgment, JudgeFailure> {
        let question = statement.split_whitespace().collect::<Vec<_>>().join(" ");
        let (parsed, raw, trace) = match self.strategy {
            Strategy::FewShot => {
                let prompt = build_fewshot_prompt(&question, &self.bundle).map_err(JudgeError::from)?;
                let request = ModelRequest {
                    temperature: self.temperature,
                    max_tokens: self.max_tokens,
                    ..ModelRequest::single(self.model_id.clone(), prompt)
                };
                let raw = self.model.complete(&request).map_err(JudgeError::Provider)?;
                let parsed = parse_verdict(&RawAnswer::new(raw.clone(), Strategy::FewShot))
                    .map_err(JudgeError::Parse)?;
                (parsed, raw, None)
            }
            Strategy::Agent => {
                let search = self.search.as_deref().ok_or(JudgeError::NoSearch)?;
                let options = AgentOptions {
                    model_id: self.model_id.clone(),
                    temperature: self.temperature,
                    max_tokens: self.max_tokens,
                    max_steps: self.max_steps,
                    search_k: self.search_k,
                    evidence_budget: self.evidence_budget,
                    plan_template: self.plan_template.clone(),
                };
                let (parsed, trace) = verify_with_agent(&question, &*self.model, search, &self.bundle, &options)?;
                let raw = trace.final_raw.clone();
                (parsed, raw, Some(trace))
            }
        };
        let mut warnings = parsed.warnings;
        let verdict = attach_spans(parsed.verdict, statement);
        for part in verdict.false_parts() {
            if part.span.is_none() {
                warnings.push(format!("false part {:?} not found in the sentence", part.text));
            }
        }
        Ok(Judgment {
            verdict,
            raw,
            warnings,
            trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::CharRange;
    use crate::provider::{Fixtures, MockModel, MockSearch};

    const EASTWOOD: &str = "Clint Eastwood said that a Mitt Romney presidency would result in rioting.";

    #[test]
    fn fewshot_locates_false_part() {
        let fixtures = Fixtures::default().answer(
            EASTWOOD,
            "Veracity score: 0% (False), False Part: Clint Eastwood said",
        );
        let judge = Judge::new(Strategy::FewShot, Arc::new(MockModel::new(&fixtures)), "mock");
        let judgment = judge.judge(EASTWOOD).unwrap();
        assert_eq!(judgment.verdict.score(), Some(0));
        assert_eq!(judgment.verdict.false_parts()[0].span, Some(CharRange::new(0, 19)));
        assert!(judgment.warnings.is_empty());
    }

    #[test]
    fn gibberish_is_a_parse_failure_with_raw() {
        let fixtures = Fixtures::default().answer(EASTWOOD, "lorem ipsum");
        let judge = Judge::new(Strategy::FewShot, Arc::new(MockModel::new(&fixtures)), "mock");
        let failure = judge.judge(EASTWOOD).unwrap_err();
        assert_eq!(failure.raw_answer(), Some("lorem ipsum"));
    }

    #[test]
    fn agent_requires_search() {
        let judge = Judge::new(Strategy::Agent, Arc::new(MockModel::new(&Fixtures::default())), "mock");
        assert!(matches!(judge.judge("x").unwrap_err().error, JudgeError::NoSearch));
    }

    #[test]
    fn agent_call_budget() {
        let claim = "The moon is made of cheese.";
        let fixtures = Fixtures::default()
            .answer_for(crate::provider::FixtureKind::Plan, claim, "1. a\n2. b\n3. c\n4. d\n5. e\n6. f\n7. g")
            .answer_for(crate::provider::FixtureKind::Synthesis, claim, "Veracity score: 0% (False), False Part: made of cheese");
        let model = Arc::new(MockModel::new(&fixtures));
        let search = Arc::new(MockSearch::new(&fixtures));
        let mut judge = Judge::new(Strategy::Agent, model.clone(), "mock").with_search(search.clone());
        judge.max_steps = 3;
        let judgment = judge.judge(claim).unwrap();
        let trace = judgment.trace.unwrap();
        assert_eq!(trace.step_count, 3);
        assert!(model.calls() + search.calls() <= 2 + judge.max_steps);
        assert_eq!(judgment.verdict.false_parts()[0].span, Some(CharRange::new(12, 26)));
    }
}
