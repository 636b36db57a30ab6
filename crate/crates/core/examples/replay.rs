//! Record every model and search response once, then replay them offline.
//! Replayed runs are byte-identical to the recording at any concurrency.

use std::path::Path;
use std::sync::Arc;

use verity::claims::Strategy;
use verity::eval::{load_dataset, run_eval, DatasetFormat, EvalOptions};
use verity::judge::Judge;
use verity::provider::{
    CacheMode, Fixtures, MockModel, MockSearch, RecordReplayModel, RecordReplaySearch, ResponseCache,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dataset = load_dataset(dir.join("eval20.csv"), DatasetFormat::Csv)?;
    let fixtures = Fixtures::load(dir.join("eval20.json"))?;
    let cache_path = std::env::temp_dir().join(format!("verity-replay-{}.jsonl", std::process::id()));
    let cache = Arc::new(ResponseCache::open(&cache_path)?);

    let recorder = Judge::new(
        Strategy::Agent,
        Arc::new(RecordReplayModel::new(Some(Arc::new(MockModel::new(&fixtures))), cache.clone(), CacheMode::Record)),
        "mock",
    )
    .with_search(Arc::new(RecordReplaySearch::new(Some(Arc::new(MockSearch::new(&fixtures))), cache.clone(), CacheMode::Record)));
    let recorded = run_eval(&dataset.items, &recorder, &EvalOptions::default()).items_jsonl();
    println!("recorded {} responses to {}", cache.len(), cache_path.display());

    let cache = Arc::new(ResponseCache::open(&cache_path)?);
    let replayer = Judge::new(Strategy::Agent, Arc::new(RecordReplayModel::replay(cache.clone())), "mock")
        .with_search(Arc::new(RecordReplaySearch::replay(cache)));
    for concurrency in [1, 4] {
        let options = EvalOptions {
            concurrency,
            ..EvalOptions::default()
        };
        let replayed = run_eval(&dataset.items, &replayer, &options);
        println!(
            "concurrency {concurrency}: {}  identical: {}",
            replayed.summary.table_row("agent"),
            replayed.items_jsonl() == recorded
        );
    }
    std::fs::remove_file(cache_path)?;
    Ok(())
}
