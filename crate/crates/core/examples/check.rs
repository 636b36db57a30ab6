//! Judge a single statement.
//!
//! Runs against canned answers by default. Set `VERITY_MODEL_ENDPOINT` (and
//! `VERITY_MODEL_KEY`) to ask a chat-completion endpoint instead.
//!
//! ```text
//! cargo run --example check -- "Bats are blind."
//! ```

use std::sync::Arc;

use verity::claims::Strategy;
use verity::gateway::format_verdict;
use verity::judge::Judge;
use verity::provider::{Fixtures, HttpModel, MockModel, ModelBackend, ProviderConfig, MODEL_ENDPOINT_ENV};

fn main() {
    let statement = std::env::args().nth(1).unwrap_or_else(|| "Bats are blind.".to_owned());
    let model: Arc<dyn ModelBackend> = match std::env::var(MODEL_ENDPOINT_ENV) {
        Ok(endpoint) => Arc::new(HttpModel::new(ProviderConfig::new(endpoint))),
        Err(_) => Arc::new(MockModel::new(&Fixtures::default().answer(
            "Bats are blind.",
            "Veracity score: 0% (False), False Part: blind, Reason: All bat species can see, and many have good night vision.",
        ).fallback("Unable to judge."))),
    };
    let judge = Judge::new(Strategy::FewShot, model, "gpt-4");
    match judge.judge(&statement) {
        Ok(judgment) => {
            println!("{}", format_verdict(&judgment.verdict));
            for w in judgment.warnings {
                eprintln!("warning: {w}");
            }
        }
        Err(failure) => {
            eprintln!("error: {}", failure.error);
            std::process::exit(1);
        }
    }
}
