//! Property checks shared by the property tests and the acceptance run.
//! Each returns `Err` with the minimal failing input on violation.

use chrono::{DateTime, Utc};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use scraper::{Html, Selector};

use verity::claims::{global_score, label_from_score, CharRange, FalsePart, SentenceVerdict, Strategy as Method, VeracityLabel, Verdict};
use verity::eval::{Correctness, EvalSummary};
use verity::ingest::SourceKind;
use verity::report::{parse_json, render_html, render_json, Report, ReportSentence, SCHEMA_VERSION};
use verity::segment::Segmenter;
use verity::verdict_parse::{locate_false_part, parse_verdict, RawAnswer};

pub const CASES: u32 = 1000;

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

fn verdict() -> impl Strategy<Value = Verdict> {
    prop_oneof![
        6 => (0i64..=100, "[a-z ]{0,12}").prop_map(|(s, r)| Verdict::judged(s, vec![], r).unwrap()),
        1 => Just(Verdict::NonVerifiable),
        1 => Just(Verdict::UnableToJudge),
    ]
}

fn indexed(verdicts: Vec<Verdict>) -> Vec<SentenceVerdict> {
    verdicts
        .into_iter()
        .enumerate()
        .map(|(i, v)| SentenceVerdict::new(i, v))
        .collect()
}

fn half_up_mean(scores: &[u8]) -> Option<u8> {
    let n = scores.len() as u64;
    let sum: u64 = scores.iter().map(|&s| u64::from(s)).sum();
    (n > 0).then(|| ((2 * sum + n) / (2 * n)) as u8)
}

/// The mean ignores excluded sentences, is order-independent, and the last
/// prefix entry equals it.
pub fn global_score_laws() -> Result<(), String> {
    let input = prop::collection::vec(verdict(), 0..40)
        .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()));
    check(input, |(verdicts, shuffled)| {
        let judged: Vec<u8> = verdicts.iter().filter_map(Verdict::score).collect();
        let g = global_score(&indexed(verdicts.clone()));
        prop_assert_eq!(g.mean_percent, half_up_mean(&judged));
        prop_assert_eq!(g.judged_count, judged.len());
        prop_assert_eq!(g.excluded_count, verdicts.len() - judged.len());
        prop_assert_eq!(g.prefix_series.len(), verdicts.len());
        prop_assert_eq!(g.prefix_series.last().copied().flatten(), g.mean_percent);
        prop_assert_eq!(global_score(&indexed(shuffled)).mean_percent, g.mean_percent);
        let only_judged: Vec<Verdict> = verdicts.into_iter().filter(Verdict::is_judged).collect();
        prop_assert_eq!(global_score(&indexed(only_judged)).mean_percent, g.mean_percent);
        Ok(())
    })
}

/// Every integer either maps to exactly one label (0..=100) or is rejected,
/// and the mapping is monotone with each anchor in its own band.
pub fn label_totality() -> Result<(), String> {
    for label in VeracityLabel::ALL {
        if label_from_score(i64::from(label.anchor_score())) != Ok(label) {
            return Err(format!("anchor of {label} maps elsewhere"));
        }
    }
    for score in 0..=100i64 {
        let expected = match score {
            0..=15 => VeracityLabel::False,
            16..=49 => VeracityLabel::MostlyFalse,
            50..=85 => VeracityLabel::MostlyTrue,
            _ => VeracityLabel::True,
        };
        if label_from_score(score) != Ok(expected) {
            return Err(format!("score {score} maps to {:?}", label_from_score(score)));
        }
    }
    check((any::<i64>(), 0i64..=100, 0i64..=100), |(any_score, a, b)| {
        prop_assert_eq!(label_from_score(any_score).is_ok(), (0..=100).contains(&any_score));
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(label_from_score(lo).unwrap() <= label_from_score(hi).unwrap());
        Ok(())
    })
}

fn prose() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        4 => "[A-Za-z]{1,8}",
        2 => Just(" ".to_owned()),
        1 => prop::sample::select(vec![". ", "! ", "? ", "… ", ".", "\n", "\n\n", "  \t", "。", "！", "Dr. ", "e.g. ", "U.S. ", "3.5", "\"", "é", "日本"])
            .prop_map(str::to_owned),
    ];
    prop::collection::vec(piece, 0..60).prop_map(|p| p.concat())
}

/// Sentence ranges slice the source, are increasing and disjoint, cover
/// every non-whitespace character, and re-splitting a sentence yields it
/// unchanged.
pub fn segmentation_laws() -> Result<(), String> {
    let segmenter = Segmenter::default();
    check(prose(), |text| {
        let sentences = segmenter.split(&text);
        let chars: Vec<char> = text.chars().collect();
        let mut covered = vec![false; chars.len()];
        let mut last_end = 0;
        for (i, s) in sentences.iter().enumerate() {
            prop_assert_eq!(s.index, i);
            prop_assert!(s.range.start >= last_end && s.range.start < s.range.end);
            prop_assert_eq!(s.range.slice(&text), s.text.as_str());
            prop_assert_eq!(s.text.trim(), s.text.as_str());
            covered[s.range.as_range()].iter_mut().for_each(|c| *c = true);
            last_end = s.range.end;

            let again = segmenter.split(&s.text);
            prop_assert_eq!(again.len(), 1, "re-split of {:?} gave {:?}", s.text, again);
            prop_assert_eq!(&again[0].text, &s.text);
        }
        for (c, covered) in chars.iter().zip(&covered) {
            prop_assert!(*covered || c.is_whitespace(), "{:?} not covered in {:?}", c, text);
        }
        Ok(())
    })
}

fn label_name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["True", "Mostly True", "Mostly False", "False", "mostly-true", "Bogus", ""])
        .prop_map(str::to_owned)
}

/// The parser never panics, and any judged result carries the label its
/// score implies, whatever label the text claimed.
pub fn parser_laws() -> Result<(), String> {
    let arbitrary = check((any::<String>(), any::<bool>()), |(text, agent)| {
        let strategy = if agent { Method::Agent } else { Method::FewShot };
        if let Ok(parsed) = parse_verdict(&RawAnswer::new(text, strategy)) {
            if let Some(score) = parsed.verdict.score() {
                prop_assert_eq!(parsed.verdict.label(), label_from_score(i64::from(score)).ok());
            }
        }
        Ok(())
    });
    arbitrary?;
    let structured = (0i64..=150, label_name(), "[a-zA-Z ,]{0,30}", "[a-zA-Z .]{0,40}", "[ *`\n]{0,3}");
    check(structured, |(score, label, part, reason, noise)| {
        let text = format!("{noise}\nVeracity score: {score}% ({label})\nFalse part: {part}\nReason: {reason}{noise}");
        let parsed = parse_verdict(&RawAnswer::new(text.clone(), Method::FewShot));
        if score > 100 {
            prop_assert!(parsed.is_err(), "accepted {:?}", text);
            return Ok(());
        }
        let parsed = parsed.map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(parsed.verdict.score(), Some(score as u8));
        prop_assert_eq!(parsed.verdict.label(), label_from_score(score).ok());
        Ok(())
    })
}

/// Locating never panics, stays inside the sentence, and finds any exact
/// substring at its first occurrence.
pub fn locate_laws() -> Result<(), String> {
    check((any::<String>(), any::<String>()), |(sentence, phrase)| {
        if let Some(found) = locate_false_part(&sentence, &phrase) {
            prop_assert!(found.range.start < found.range.end);
            prop_assert!(found.range.end <= sentence.chars().count());
        }
        Ok(())
    })?;
    let input = "[a-zA-Z ,'\"é]{1,60}".prop_flat_map(|s| {
        let n = s.chars().count();
        (Just(s), 0..n, 1..=n)
    });
    check(input, |(sentence, a, b)| {
        let (start, end) = (a.min(b - 1), a.max(b));
        let phrase: String = sentence.chars().skip(start).take(end - start).collect();
        if phrase.trim() != phrase || phrase.is_empty() {
            return Ok(());
        }
        let found = locate_false_part(&sentence, &phrase);
        prop_assert!(found.is_some(), "{:?} not found in {:?}", phrase, sentence);
        prop_assert_eq!(found.unwrap().range.slice(&sentence), phrase.as_str());
        Ok(())
    })
}

/// A sentence with up to three disjoint false-part spans.
fn annotated_sentence() -> impl Strategy<Value = (String, Verdict)> {
    ("[A-Za-z<>&\"' ]{1,40}", verdict(), prop::collection::vec((0usize..40, 1usize..6), 0..3)).prop_map(
        |(text, verdict, cuts)| {
            let n = text.chars().count();
            let mut spans: Vec<CharRange> = Vec::new();
            for (start, len) in cuts {
                let start = start % n;
                let span = CharRange::new(start, (start + len).min(n));
                if spans.iter().all(|s| !s.overlaps(&span) && s.end != span.start && span.end != s.start) {
                    spans.push(span);
                }
            }
            let verdict = match verdict {
                Verdict::Judged { score, label, reason, .. } => Verdict::Judged {
                    score,
                    label,
                    reason,
                    false_parts: spans
                        .into_iter()
                        .map(|s| FalsePart {
                            text: s.slice(&text).to_owned(),
                            span: Some(s),
                        })
                        .collect(),
                },
                other => other,
            };
            (text, verdict)
        },
    )
}

fn report_from(items: Vec<(String, Verdict)>, gaps: Vec<bool>) -> Report {
    let mut sentences = Vec::new();
    let mut verdicts = Vec::new();
    let mut at = 0;
    for (i, ((text, verdict), gap)) in items.into_iter().zip(gaps.into_iter().chain(std::iter::repeat(false))).enumerate() {
        let n = text.chars().count();
        sentences.push(ReportSentence {
            index: i,
            span: CharRange::new(at, at + n),
            time_ms: (i % 2 == 0).then_some([i as u64 * 1000, i as u64 * 1000 + 900]),
            text,
        });
        at += n + if gap { 2 } else { 1 };
        verdicts.push(SentenceVerdict::new(i, verdict));
    }
    Report {
        schema_version: SCHEMA_VERSION,
        origin: "generated <doc>".into(),
        kind: SourceKind::Plaintext,
        strategy: Method::FewShot,
        model_id: "mock".into(),
        created_at: DateTime::<Utc>::from_timestamp(1_700_000_000, 0).unwrap(),
        global: global_score(&verdicts),
        sentences,
        verdicts,
        warnings: vec!["sentence 1: \"quoted\" & <odd>".into()],
        agent_trace: None,
    }
}

fn report() -> impl Strategy<Value = Report> {
    (
        prop::collection::vec(annotated_sentence(), 0..12),
        prop::collection::vec(any::<bool>(), 0..12),
    )
        .prop_map(|(items, gaps)| report_from(items, gaps))
}

/// Report JSON survives a round trip and re-serializes to the same bytes.
pub fn report_json_round_trip() -> Result<(), String> {
    check(report(), |report| {
        prop_assert!(report.validate().is_ok());
        let bytes = render_json(&report);
        let back = parse_json(&bytes).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&back, &report);
        prop_assert_eq!(render_json(&back), bytes);
        Ok(())
    })
}

/// The page marks exactly the located false parts and the zero-score
/// sentences, and its sentence elements spell out the sentences.
pub fn html_marks() -> Result<(), String> {
    let false_part = Selector::parse("span.false-part").unwrap();
    let zero = Selector::parse("span.zero-score").unwrap();
    let sentence = Selector::parse("span.sentence").unwrap();
    let bars = Selector::parse("div.bar-row").unwrap();
    check(report(), |report| {
        let page = Html::parse_document(&render_html(&report));
        let located: usize = report
            .verdicts
            .iter()
            .map(|v| v.verdict.false_parts().iter().filter(|p| p.span.is_some()).count())
            .sum();
        let zeros = report.verdicts.iter().filter(|v| v.verdict.score() == Some(0)).count();
        prop_assert_eq!(page.select(&false_part).count(), located);
        prop_assert_eq!(page.select(&zero).count(), zeros);
        prop_assert_eq!(page.select(&bars).count(), report.sentences.len());
        let rendered: Vec<String> = page.select(&sentence).map(|e| e.text().collect()).collect();
        let expected: Vec<String> = report.sentences.iter().map(|s| s.text.clone()).collect();
        prop_assert_eq!(rendered, expected);
        Ok(())
    })
}

fn correctness() -> impl Strategy<Value = Correctness> {
    prop_oneof![Just(Correctness::Correct), Just(Correctness::Wrong), Just(Correctness::Unable)]
}

/// Tallies ignore order, counts add up, and accuracy is the rounded share of
/// correct among judged.
pub fn eval_tally_laws() -> Result<(), String> {
    let input = prop::collection::vec(correctness(), 0..80).prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()));
    check(input, |(outcomes, shuffled)| {
        let summary = EvalSummary::tally(&outcomes);
        prop_assert_eq!(summary, EvalSummary::tally(&shuffled));
        prop_assert_eq!(summary.total, outcomes.len());
        prop_assert_eq!(summary.correct + summary.wrong + summary.unable, summary.total);
        let judged = summary.correct + summary.wrong;
        match summary.accuracy_percent {
            None => prop_assert_eq!(judged, 0),
            Some(a) => {
                let exact = 100.0 * summary.correct as f64 / judged as f64;
                prop_assert!((f64::from(a) - exact).abs() <= 0.5 + 1e-9);
            }
        }
        Ok(())
    })
}

pub const ALL: [(&str, fn() -> Result<(), String>); 8] = [
    ("global score laws", global_score_laws),
    ("label totality", label_totality),
    ("segmentation laws", segmentation_laws),
    ("parser laws", parser_laws),
    ("locate laws", locate_laws),
    ("report json round trip", report_json_round_trip),
    ("html marks", html_marks),
    ("eval tally laws", eval_tally_laws),
];
