//! Build the few-shot prompt for a statement, then parse a model answer and
//! locate its false part in the statement.

use verity::claims::Strategy;
use verity::prompting::{build_fewshot_prompt, PromptBundle};
use verity::verdict_parse::{attach_spans, parse_verdict, RawAnswer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let statement = "The Great Wall of China is visible from the Moon with the naked eye.";
    let prompt = build_fewshot_prompt(statement, &PromptBundle::default())?;
    println!("{prompt}\n");

    let answer = "Veracity score: 0% (False), False Part: visible from the Moon, Reason: It is far too narrow to see from that distance.";
    let parsed = parse_verdict(&RawAnswer::new(answer, Strategy::FewShot))?;
    let verdict = attach_spans(parsed.verdict, statement);
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    for w in parsed.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
