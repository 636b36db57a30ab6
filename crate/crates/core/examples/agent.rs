//! Plan, search, synthesize: the agent strategy on one claim, with its
//! full trace.

use std::path::Path;

use verity::agent::{verify_with_agent, AgentOptions};
use verity::gateway::format_verdict;
use verity::prompting::PromptBundle;
use verity::provider::{Fixtures, MockModel, MockSearch};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Fixtures::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/factchecks.json"))?;
    let claim = "MoveOn.org says \"McCain opposes a woman's right to choose.\"";
    let model = MockModel::new(&fixtures);
    let search = MockSearch::new(&fixtures);

    let (parsed, trace) = verify_with_agent(claim, &model, &search, &PromptBundle::default(), &AgentOptions::default())?;
    for (n, step) in trace.steps.iter().enumerate() {
        println!("step {}: {}", n + 1, step.sub_question);
        for result in &step.results {
            println!("    {} <{}>", result.title, result.url);
        }
    }
    println!("\n{}", format_verdict(&parsed.verdict));
    println!("\n{} model calls, {} searches", model.calls(), search.calls());
    Ok(())
}
