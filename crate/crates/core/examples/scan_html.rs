//! Assess an HTML page sentence by sentence and write `report.json` and
//! `report.html`.
//!
//! ```text
//! cargo run --example scan_html -- out/
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use verity::claims::Strategy;
use verity::ingest::{extract, SourceKind};
use verity::judge::Judge;
use verity::provider::{Fixtures, MockModel};
use verity::report::{assess_document, render_html, render_json, AssessOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);

    let raw = std::fs::read(fixtures_dir.join("docs/science_notes.html"))?;
    let doc = extract(&raw, SourceKind::Html)?.with_origin("science_notes.html");
    let fixtures = Fixtures::load(fixtures_dir.join("docs.json"))?;
    let judge = Judge::new(Strategy::FewShot, Arc::new(MockModel::new(&fixtures)), "mock");

    let report = assess_document(&doc, &judge, &AssessOptions::default())?;
    for (sentence, sv) in report.sentences.iter().zip(&report.verdicts) {
        let score = sv.verdict.score().map_or("  -".to_owned(), |s| format!("{s:>3}"));
        println!("{score}  {}", sentence.text);
    }
    match report.global.mean_percent {
        Some(mean) => println!("global veracity {mean}%"),
        None => println!("global veracity n/a"),
    }

    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("report.json"), render_json(&report))?;
    std::fs::write(out.join("report.html"), render_html(&report))?;
    println!("wrote {}", out.join("report.html").display());
    Ok(())
}
