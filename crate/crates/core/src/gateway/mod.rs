//! Entry points: the command line and the chat bot, plus the backend wiring
//! they share.

pub mod bot;
pub mod cli;
pub mod config;
pub mod fetch;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::claims::{Strategy, Verdict};
use crate::judge::Judge;
use crate::prompting::PromptBundle;
use crate::provider::{
    CacheMode, Fixtures, HttpModel, HttpSearch, MockModel, MockSearch, ModelBackend, RecordReplayModel,
    RecordReplaySearch, ResponseCache, SearchBackend,
};
use crate::segment::{Abbreviations, Segmenter, DEFAULT_MAX_SENTENCE_CHARS};

pub use config::AppConfig;

pub const DEFAULT_CACHE_PATH: &str = "verity-cache.jsonl";

/// Plain-text verdict, as printed by `check` and sent by the bot.
pub fn format_verdict(verdict: &Verdict) -> String {
    match verdict {
        Verdict::Judged {
            score,
            label,
            false_parts,
            reason,
        } => {
            let parts = if false_parts.is_empty() {
                "—".to_owned()
            } else {
                false_parts.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join("; ")
            };
            let reason = if reason.is_empty() { "—" } else { reason };
            format!(
                "Veracity score: {score}% ({})\nFalse part: {parts}\nReason: {reason}",
                label.display_name()
            )
        }
        Verdict::NonVerifiable => "Not verifiable: the statement is not objective or checkable.".to_owned(),
        Verdict::UnableToJudge => "Unable to judge: the authenticity of the statement could not be determined.".to_owned(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BackendKind {
    /// HTTP model and search endpoints from the configuration.
    Live,
    /// Canned answers from a fixtures file.
    Mock,
    /// Live calls (or fixture answers with `--fixtures`), each response
    /// appended to the cache.
    Record,
    /// Cached responses only; nothing leaves the machine.
    Replay,
}

#[derive(Debug, Clone)]
pub struct BackendOptions {
    pub kind: BackendKind,
    pub fixtures: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

impl BackendOptions {
    fn cache_path(&self) -> &Path {
        self.cache.as_deref().unwrap_or(Path::new(DEFAULT_CACHE_PATH))
    }
}

fn live_search(config: &AppConfig) -> Option<Arc<dyn SearchBackend>> {
    config
        .search
        .clone()
        .map(|c| Arc::new(HttpSearch::new(c)) as Arc<dyn SearchBackend>)
}

/// Builds the judge for `strategy` over the backends `options` selects.
pub fn build_judge(config: &AppConfig, strategy: Strategy, options: &BackendOptions) -> Result<Judge, String> {
    let needs_search = strategy == Strategy::Agent;
    let no_search = || "the agent strategy needs a search endpoint ([search] in the config or VERITY_SEARCH_ENDPOINT)".to_owned();
    let (model, search): (Arc<dyn ModelBackend>, Option<Arc<dyn SearchBackend>>) = match options.kind {
        BackendKind::Live => {
            let search = live_search(config);
            if needs_search && search.is_none() {
                return Err(no_search());
            }
            (Arc::new(HttpModel::new(config.provider.clone())), search)
        }
        BackendKind::Mock => {
            let path = options.fixtures.as_ref().ok_or("--backend mock needs --fixtures FILE")?;
            let fixtures = Fixtures::load(path).map_err(|e| e.to_string())?;
            (Arc::new(MockModel::new(&fixtures)), Some(Arc::new(MockSearch::new(&fixtures))))
        }
        BackendKind::Record | BackendKind::Replay => {
            let cache = Arc::new(ResponseCache::open(options.cache_path()).map_err(|e| e.to_string())?);
            if options.kind == BackendKind::Replay {
                (
                    Arc::new(RecordReplayModel::replay(cache.clone())),
                    Some(Arc::new(RecordReplaySearch::replay(cache))),
                )
            } else {
                let (inner, inner_search) = match &options.fixtures {
                    Some(path) => {
                        let fixtures = Fixtures::load(path).map_err(|e| e.to_string())?;
                        (
                            Arc::new(MockModel::new(&fixtures)) as Arc<dyn ModelBackend>,
                            Some(Arc::new(MockSearch::new(&fixtures)) as Arc<dyn SearchBackend>),
                        )
                    }
                    None => (
                        Arc::new(HttpModel::new(config.provider.clone())) as Arc<dyn ModelBackend>,
                        live_search(config),
                    ),
                };
                let search = match inner_search {
                    Some(inner) => Some(Arc::new(RecordReplaySearch::new(Some(inner), cache.clone(), CacheMode::Record))
                        as Arc<dyn SearchBackend>),
                    None if needs_search => return Err(no_search()),
                    None => None,
                };
                (Arc::new(RecordReplayModel::new(Some(inner), cache, CacheMode::Record)), search)
            }
        }
    };
    let mut judge = Judge::new(strategy, model, config.model_id.clone());
    judge.search = search;
    judge.temperature = config.temperature;
    judge.max_steps = config.max_steps;
    if let Some(path) = &config.template {
        judge.bundle = PromptBundle::load(path).map_err(|e| format!("template {}: {e}", path.display()))?;
    }
    Ok(judge)
}

pub fn build_segmenter(config: &AppConfig) -> Result<Segmenter, String> {
    let mut abbreviations = Abbreviations::default();
    if let Some(path) = &config.abbreviations {
        let extra = std::fs::read_to_string(path).map_err(|e| format!("abbreviations {}: {e}", path.display()))?;
        abbreviations.extend_from(&extra);
    }
    Ok(Segmenter::new(abbreviations, DEFAULT_MAX_SENTENCE_CHARS))
}
