//! Accuracy of both strategies on the labeled sample, one results row each.

use std::path::Path;
use std::sync::Arc;

use verity::claims::Strategy;
use verity::eval::{load_dataset, run_eval, Correctness, DatasetFormat, EvalOptions};
use verity::judge::Judge;
use verity::provider::{Fixtures, MockModel, MockSearch};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dataset = load_dataset(dir.join("eval20.csv"), DatasetFormat::Csv)?;
    let fixtures = Fixtures::load(dir.join("eval20.json"))?;

    for strategy in [Strategy::FewShot, Strategy::Agent] {
        let judge = Judge::new(strategy, Arc::new(MockModel::new(&fixtures)), "mock")
            .with_search(Arc::new(MockSearch::new(&fixtures)));
        let run = run_eval(&dataset.items, &judge, &EvalOptions::default());
        println!("{}", run.summary.table_row(strategy.as_str()));
        for item in run.items.iter().filter(|i| i.correctness == Correctness::Wrong) {
            println!("    wrong: {} ({}) {}", item.id, item.ground_label, item.statement);
        }
    }
    Ok(())
}
