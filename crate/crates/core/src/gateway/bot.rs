//! Long-polling chat bot over the Telegram Bot API (`getUpdates`,
//! `sendMessage`).
//!
//! Each poll's batch is grouped by chat; chats are served concurrently and
//! messages within a chat strictly in arrival order. The offset cursor only
//! moves forward, and update ids already handled are remembered so a
//! redelivered update never gets a second reply.

use std::collections::{HashSet, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use super::config::BotConfig;
use super::format_verdict;
use crate::claims::Verdict;
use crate::judge::{Judge, JudgeError};
use crate::pool::map_ordered;
use crate::provider::{send_with_retry, AttemptError, Clock, ProviderError, RetryPolicy, SystemClock};

pub const USAGE: &str = "Send me a statement and I will rate how truthful it is.\n\
I reply with a veracity score from 0% (False) to 100% (True), the part of the statement that looks wrong, and the reasoning.\n\
Commands: /help shows this message.";
pub const APOLOGY: &str = "Sorry, I could not check that statement right now. Please try again later.";
/// Telegram rejects longer messages.
const MAX_MESSAGE_CHARS: usize = 4096;
const REMEMBERED_IDS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BotUpdate {
    pub update_id: i64,
    pub chat_id: i64,
    pub message_text: Option<String>,
}

/// One `getUpdates` result: the chat messages plus the highest update id
/// seen, which also covers updates that carry no message.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UpdateBatch {
    pub updates: Vec<BotUpdate>,
    pub max_update_id: Option<i64>,
}

pub fn parse_updates(value: &Value) -> Result<UpdateBatch, ProviderError> {
    if value.get("ok").and_then(Value::as_bool) != Some(true) {
        let description = value.get("description").and_then(Value::as_str).unwrap_or("no description");
        return Err(ProviderError::MalformedResponse(format!("getUpdates not ok: {description}")));
    }
    let items = value
        .get("result")
        .and_then(Value::as_array)
        .ok_or_else(|| ProviderError::MalformedResponse("getUpdates result is not a list".into()))?;
    let mut batch = UpdateBatch::default();
    for item in items {
        let Some(update_id) = item.get("update_id").and_then(Value::as_i64) else {
            continue;
        };
        batch.max_update_id = Some(batch.max_update_id.map_or(update_id, |m| m.max(update_id)));
        let Some(message) = item.get("message") else { continue };
        let Some(chat_id) = message.pointer("/chat/id").and_then(Value::as_i64) else {
            continue;
        };
        batch.updates.push(BotUpdate {
            update_id,
            chat_id,
            message_text: message.get("text").and_then(Value::as_str).map(str::to_owned),
        });
    }
    Ok(batch)
}

/// Minimal Bot API client. The token only ever appears in request URLs and
/// is scrubbed from every error it could leak into.
pub struct TelegramApi {
    base: String,
    token: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
    clock: Arc<dyn Clock>,
}

impl TelegramApi {
    pub fn new(config: &BotConfig, token: impl Into<String>) -> Self {
        Self::with_clock(config, token, Arc::new(SystemClock::new()))
    }

    pub fn with_clock(config: &BotConfig, token: impl Into<String>, clock: Arc<dyn Clock>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.poll_timeout_secs + 15))
            .build();
        TelegramApi {
            base: config.api_base.trim_end_matches('/').to_owned(),
            token: token.into(),
            agent,
            retry: config.retry,
            clock,
        }
    }

    fn url(&self, method: &str) -> String {
        format!("{}/bot{}/{}", self.base, self.token, method)
    }

    fn call(&self, request: impl Fn() -> Result<ureq::Response, ureq::Error>) -> Result<Value, ProviderError> {
        let secrets = [self.token.as_str()];
        send_with_retry(&self.retry, self.clock.as_ref(), None, || {
            let response = request().map_err(|e| AttemptError::from_ureq(e, &secrets))?;
            response.into_json::<Value>().map_err(|e| {
                AttemptError::Transient {
                    message: format!("unreadable response: {e}"),
                    retry_after: None,
                }
            })
        })
    }

    pub fn get_updates(&self, offset: i64, timeout_secs: u64) -> Result<UpdateBatch, ProviderError> {
        let value = self.call(|| {
            self.agent
                .get(&self.url("getUpdates"))
                .query("offset", &offset.to_string())
                .query("timeout", &timeout_secs.to_string())
                .call()
        })?;
        parse_updates(&value)
    }

    pub fn send_message(&self, chat_id: i64, text: &str) -> Result<(), ProviderError> {
        let text: String = text.chars().take(MAX_MESSAGE_CHARS).collect();
        self.call(|| {
            self.agent
                .post(&self.url("sendMessage"))
                .send_json(json!({ "chat_id": chat_id, "text": text }))
        })?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BotError {
    #[error("bot token rejected: {0}")]
    Auth(ProviderError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BotStats {
    pub updates: usize,
    pub replies: usize,
    pub duplicates: usize,
    pub send_failures: usize,
    pub poll_failures: usize,
}

/// What the bot says back to one message.
pub fn reply_for(judge: &Judge, text: Option<&str>) -> String {
    let Some(text) = text.map(str::trim).filter(|t| !t.is_empty()) else {
        return USAGE.to_owned();
    };
    if let Some(command) = text.strip_prefix('/') {
        let name = command.split_whitespace().next().unwrap_or("");
        let name = name.split('@').next().unwrap_or(name);
        return match name {
            "start" | "help" => USAGE.to_owned(),
            _ => format!("Unknown command /{name}.\n{USAGE}"),
        };
    }
    match judge.judge(text) {
        Ok(judgment) => format_verdict(&judgment.verdict),
        Err(failure) => match failure.error {
            JudgeError::Parse(_) => format_verdict(&Verdict::UnableToJudge),
            error => {
                log::warn!("pipeline error: {error}");
                APOLOGY.to_owned()
            }
        },
    }
}

pub struct Bot {
    api: TelegramApi,
    judge: Judge,
    workers: usize,
    poll_timeout_secs: u64,
    poll_interval: Duration,
    offset: i64,
    seen: HashSet<i64>,
    seen_order: VecDeque<i64>,
    stats: BotStats,
}

impl Bot {
    pub fn new(api: TelegramApi, judge: Judge, config: &BotConfig, workers: usize) -> Self {
        Bot {
            api,
            judge,
            workers: workers.max(1),
            poll_timeout_secs: config.poll_timeout_secs,
            poll_interval: Duration::from_millis(config.poll_interval_ms),
            offset: 0,
            seen: HashSet::new(),
            seen_order: VecDeque::new(),
            stats: BotStats::default(),
        }
    }

    pub fn stats(&self) -> BotStats {
        self.stats
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    fn remember(&mut self, update_id: i64) -> bool {
        if update_id < self.offset || !self.seen.insert(update_id) {
            return false;
        }
        self.seen_order.push_back(update_id);
        if self.seen_order.len() > REMEMBERED_IDS {
            if let Some(old) = self.seen_order.pop_front() {
                self.seen.remove(&old);
            }
        }
        true
    }

    /// One `getUpdates` round trip and the replies for it. Returns the
    /// number of new updates handled.
    pub fn poll_once(&mut self) -> Result<usize, ProviderError> {
        let batch = self.api.get_updates(self.offset, self.poll_timeout_secs)?;
        let mut fresh = Vec::new();
        for update in batch.updates {
            if self.remember(update.update_id) {
                fresh.push(update);
            } else {
                self.stats.duplicates += 1;
            }
        }

        let mut chats: Vec<(i64, Vec<BotUpdate>)> = Vec::new();
        for update in &fresh {
            match chats.iter_mut().find(|(id, _)| *id == update.chat_id) {
                Some((_, queue)) => queue.push(update.clone()),
                None => chats.push((update.chat_id, vec![update.clone()])),
            }
        }
        let replies = AtomicUsize::new(0);
        let failures = AtomicUsize::new(0);
        let (api, judge) = (&self.api, &self.judge);
        map_ordered(&chats, self.workers, |_, (chat_id, queue)| {
            for update in queue {
                let reply = reply_for(judge, update.message_text.as_deref());
                match api.send_message(*chat_id, &reply) {
                    Ok(()) => {
                        replies.fetch_add(1, Ordering::SeqCst);
                    }
                    Err(e) => {
                        failures.fetch_add(1, Ordering::SeqCst);
                        log::warn!("sendMessage for update {} failed: {e}", update.update_id);
                    }
                }
            }
        });
        self.stats.updates += fresh.len();
        self.stats.replies += replies.into_inner();
        self.stats.send_failures += failures.into_inner();
        if let Some(max) = batch.max_update_id {
            self.offset = self.offset.max(max + 1);
        }
        Ok(fresh.len())
    }

    /// Polls until `shutdown` is set. A batch in progress is always
    /// finished. Only a rejected token stops the loop early.
    pub fn run(&mut self, shutdown: &AtomicBool) -> Result<BotStats, BotError> {
        while !shutdown.load(Ordering::SeqCst) {
            match self.poll_once() {
                Ok(_) => {}
                Err(e @ ProviderError::Auth { .. }) => return Err(BotError::Auth(e)),
                Err(e) => {
                    self.stats.poll_failures += 1;
                    log::warn!("getUpdates failed: {e}");
                    self.pause(shutdown);
                }
            }
        }
        Ok(self.stats)
    }

    fn pause(&self, shutdown: &AtomicBool) {
        let step = Duration::from_millis(50);
        let mut waited = Duration::ZERO;
        while waited < self.poll_interval && !shutdown.load(Ordering::SeqCst) {
            std::thread::sleep(step.min(self.poll_interval - waited));
            waited += step;
        }
    }
}
