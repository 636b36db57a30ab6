//! Static annotated HTML view of a report.
//!
//! Marks produced here, all countable by class name:
//! `class="sentence"` per sentence, `class="false-part"` per located false
//! part, `class="zero-score"` around sentences scored 0, and one
//! `class="bar-row"` per sentence in the chart.

use std::fmt::Write;

use html_escape::{encode_double_quoted_attribute, encode_text};

use super::Report;
use crate::claims::{CharRange, VeracityLabel, Verdict};

const STYLE: &str = "\
body{font-family:Georgia,serif;margin:0;padding:7.5rem 2rem 2rem;line-height:1.7;color:#222;background:#fff}
.badge{position:absolute;top:1rem;left:1rem;padding:.5rem .8rem;border-radius:.4rem;background:#222;color:#fff;font-family:sans-serif}
.badge-score{font-size:2rem;font-weight:bold;line-height:1.1}
.badge-caption{font-size:.7rem;text-transform:uppercase;letter-spacing:.05em;opacity:.8}
.sparkline{display:block;margin-top:.3rem}
.origin{font-family:sans-serif;font-size:.8rem;color:#666}
.false-part{text-decoration:underline dashed #d00;text-decoration-thickness:2px;text-underline-offset:3px}
.zero-score{background:#cfe3ff}
.sentence.excluded{color:#999}
.chart{margin-top:2rem;font-family:sans-serif;font-size:.8rem;max-width:40rem}
.bar-row{display:flex;align-items:center;gap:.5rem;margin:.15rem 0}
.bar-label{width:2rem;text-align:right;color:#666}
.bar-track{flex:1;height:.8rem;background:#eee;position:relative}
.bar{height:100%}
.bar.false{background:#d33}.bar.mostly-false{background:#e98}.bar.mostly-true{background:#8c8}.bar.true{background:#393}
.bar-track.excluded{background:repeating-linear-gradient(45deg,#eee 0 4px,#ccc 4px 8px)}
.bar-value{width:5.5rem;color:#444}
.warnings{font-family:sans-serif;font-size:.75rem;color:#a60}";

const SPARK_WIDTH: f64 = 120.0;
const SPARK_HEIGHT: f64 = 28.0;

fn label_class(label: VeracityLabel) -> &'static str {
    match label {
        VeracityLabel::False => "false",
        VeracityLabel::MostlyFalse => "mostly-false",
        VeracityLabel::MostlyTrue => "mostly-true",
        VeracityLabel::True => "true",
    }
}

fn verdict_summary(verdict: &Verdict) -> String {
    match verdict {
        Verdict::Judged {
            score,
            label,
            reason,
            ..
        } => {
            let mut s = format!("{score}% ({})", label.display_name());
            if !reason.is_empty() {
                s.push_str(": ");
                s.push_str(reason);
            }
            s
        }
        Verdict::NonVerifiable => "not verifiable".to_owned(),
        Verdict::UnableToJudge => "unable to judge".to_owned(),
    }
}

fn sparkline(series: &[Option<u8>]) -> String {
    let step = if series.len() > 1 {
        SPARK_WIDTH / (series.len() - 1) as f64
    } else {
        0.0
    };
    let points: Vec<String> = series
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            v.map(|v| {
                let x = step * i as f64;
                let y = SPARK_HEIGHT - f64::from(v) * SPARK_HEIGHT / 100.0;
                format!("{x:.1},{y:.1}")
            })
        })
        .collect();
    format!(
        "<svg class=\"sparkline\" width=\"{SPARK_WIDTH}\" height=\"{SPARK_HEIGHT}\" viewBox=\"0 0 {SPARK_WIDTH} {SPARK_HEIGHT}\" role=\"img\" aria-label=\"running global score\"><polyline fill=\"none\" stroke=\"#9cf\" stroke-width=\"1.5\" points=\"{}\"/></svg>",
        points.join(" ")
    )
}

/// Sentence text with located false parts wrapped. Overlapping spans after
/// the first are left unmarked.
fn sentence_body(text: &str, verdict: &Verdict) -> String {
    let mut spans: Vec<CharRange> = verdict
        .false_parts()
        .iter()
        .filter_map(|p| p.span)
        .filter(|s| !s.is_empty())
        .collect();
    spans.sort();
    let chars: Vec<char> = text.chars().collect();
    let piece = |a: usize, b: usize| chars[a.min(chars.len())..b.min(chars.len())].iter().collect::<String>();
    let mut out = String::new();
    let mut at = 0;
    for span in spans {
        if span.start < at || span.end > chars.len() {
            continue;
        }
        out.push_str(&encode_text(&piece(at, span.start)));
        out.push_str("<span class=\"false-part\">");
        out.push_str(&encode_text(&piece(span.start, span.end)));
        out.push_str("</span>");
        at = span.end;
    }
    out.push_str(&encode_text(&piece(at, chars.len())));
    out
}

/// Self-contained HTML page: score badge top-left with a sparkline of the
/// running score, the annotated text, and a per-sentence bar chart.
pub fn render_html(report: &Report) -> String {
    let mut html = String::new();
    let badge = report
        .global
        .mean_percent
        .map_or_else(|| "n/a".to_owned(), |m| format!("{m}%"));
    let _ = write!(
        html,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Veracity report: {}</title>\n<style>\n{STYLE}\n</style>\n</head>\n<body>\n",
        encode_text(&report.origin)
    );
    let _ = write!(
        html,
        "<div class=\"badge\"><div class=\"badge-score\">{badge}</div><div class=\"badge-caption\">Global veracity</div>{}</div>\n",
        sparkline(&report.global.prefix_series)
    );
    let _ = writeln!(
        html,
        "<main>\n<p class=\"origin\">{} &middot; {} &middot; {} &middot; {}</p>",
        encode_text(&report.origin),
        report.kind.as_str(),
        report.strategy.as_str(),
        encode_text(&report.model_id)
    );

    html.push_str("<div class=\"document\">\n<p>");
    let mut previous_end: Option<usize> = None;
    for (sentence, sv) in report.sentences.iter().zip(&report.verdicts) {
        if let Some(end) = previous_end {
            // A gap wider than one character is a paragraph break in the source.
            if sentence.span.start > end + 1 {
                html.push_str("</p>\n<p>");
            } else {
                html.push(' ');
            }
        }
        previous_end = Some(sentence.span.end);
        let verdict = &sv.verdict;
        let class = if verdict.is_judged() { "sentence" } else { "sentence excluded" };
        let body = format!(
            "<span class=\"{class}\" data-index=\"{}\" title=\"{}\">{}</span>",
            sentence.index,
            encode_double_quoted_attribute(&verdict_summary(verdict)),
            sentence_body(&sentence.text, verdict)
        );
        if verdict.score() == Some(0) {
            let _ = write!(html, "<span class=\"zero-score\">{body}</span>");
        } else {
            html.push_str(&body);
        }
    }
    html.push_str("</p>\n</div>\n</main>\n");

    html.push_str("<section class=\"chart\" aria-label=\"local veracity scores\">\n");
    for (sentence, sv) in report.sentences.iter().zip(&report.verdicts) {
        let n = sentence.index + 1;
        match &sv.verdict {
            Verdict::Judged { score, label, .. } => {
                let _ = writeln!(
                    html,
                    "<div class=\"bar-row\"><span class=\"bar-label\">{n}</span><div class=\"bar-track\"><div class=\"bar {}\" style=\"width:{score}%\"></div></div><span class=\"bar-value\">{score}%</span></div>",
                    label_class(*label)
                );
            }
            other => {
                let _ = writeln!(
                    html,
                    "<div class=\"bar-row\"><span class=\"bar-label\">{n}</span><div class=\"bar-track excluded\"></div><span class=\"bar-value\">{}</span></div>",
                    verdict_summary(other)
                );
            }
        }
    }
    html.push_str("</section>\n");

    if !report.warnings.is_empty() {
        html.push_str("<ul class=\"warnings\">\n");
        for w in &report.warnings {
            let _ = writeln!(html, "<li>{}</li>", encode_text(w));
        }
        html.push_str("</ul>\n");
    }
    html.push_str("</body>\n</html>\n");
    html
}
