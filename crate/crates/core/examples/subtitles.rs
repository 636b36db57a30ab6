//! Score a subtitle file; each sentence keeps the time span of its cues.

use std::path::Path;
use std::sync::Arc;

use verity::claims::Strategy;
use verity::ingest::{extract, SourceKind};
use verity::judge::Judge;
use verity::provider::{Fixtures, MockModel};
use verity::report::{assess_document, AssessOptions};

fn timestamp(ms: u64) -> String {
    format!("{:02}:{:02}.{:03}", ms / 60_000, ms / 1000 % 60, ms % 1000)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let doc = extract(&std::fs::read(dir.join("docs/lecture.srt"))?, SourceKind::Srt)?;
    let fixtures = Fixtures::load(dir.join("docs.json"))?;
    let judge = Judge::new(Strategy::FewShot, Arc::new(MockModel::new(&fixtures)), "mock");
    let report = assess_document(&doc, &judge, &AssessOptions::default())?;

    for (sentence, sv) in report.sentences.iter().zip(&report.verdicts) {
        let when = sentence
            .time_ms
            .map_or_else(String::new, |[a, b]| format!("{} --> {}", timestamp(a), timestamp(b)));
        let score = sv.verdict.score().map_or("-".to_owned(), |s| format!("{s}%"));
        println!("{when:<22} {score:>4}  {}", sentence.text);
    }
    println!("prefix series: {:?}", report.global.prefix_series);
    Ok(())
}
