//! Reading model answers back into verdicts.
//!
//! The expected answer shape is
//!
//! ```text
//! [output:] Veracity score: <int>% (<label>), False Part: <phrase> [Reason: <text>]
//! ```
//!
//! or one of the sentinels `null` (not verifiable) and `Unable to judge`.
//! Matching is case-insensitive and tolerant of markdown decoration. When
//! the label disagrees with the score's band the score wins.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{label_from_score, CharRange, FalsePart, Strategy, VeracityLabel, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAnswer {
    pub text: String,
    pub strategy: Strategy,
}

impl RawAnswer {
    pub fn new(text: impl Into<String>, strategy: Strategy) -> Self {
        RawAnswer {
            text: text.into(),
            strategy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedVerdict {
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{reason}; raw answer: {raw:?}")]
pub struct ParseError {
    pub reason: String,
    /// The full model output, kept for audit.
    pub raw: String,
}

static SCORE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)veracity[\s*_]*score[\s*_]*[:：]?[\s*_]*(\d{1,4})\s*%[\s*_]*(?:\(\s*([^)\n]*?)\s*\))?").unwrap()
});
static FALSE_PART: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)false[\s*_]*part[\s*_]*[:：]").unwrap());
static REASON: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:^|[\s,;*_(])reason(?:ing)?[\s*_]*[:：]").unwrap());
static LEADING_OUTPUT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*output\s*[:：]?\s*").unwrap());

fn strip_fences(text: &str) -> String {
    text.lines()
        .filter(|line| !line.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn trim_decoration(text: &str) -> &str {
    text.trim_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '_' | '`' | '"' | '\'' | '.' | '“' | '”'))
}

fn clean_phrase(raw: &str) -> Option<String> {
    let phrase = raw
        .trim()
        .trim_end_matches([',', ';'])
        .trim_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '_' | '`'));
    let phrase = ['"', '\'', '“']
        .iter()
        .zip(['"', '\'', '”'])
        .find_map(|(open, close)| {
            phrase
                .strip_prefix(*open)
                .and_then(|p| p.strip_suffix(close))
        })
        .unwrap_or(phrase)
        .trim();
    let lowered = phrase.to_lowercase();
    if matches!(lowered.as_str(), "" | "/" | "-" | "—" | "none" | "n/a" | "null" | "nothing") {
        None
    } else {
        Some(phrase.to_owned())
    }
}

fn squash(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses one model answer. Never panics; unrecognisable input is a
/// [`ParseError`] carrying the raw text.
pub fn parse_verdict(raw: &RawAnswer) -> Result<ParsedVerdict, ParseError> {
    let fail = |reason: &str| ParseError {
        reason: reason.to_owned(),
        raw: raw.text.clone(),
    };
    let unfenced = strip_fences(&raw.text);
    let body = LEADING_OUTPUT.replace(unfenced.trim(), "");
    let body = body.trim();

    if trim_decoration(body).eq_ignore_ascii_case("null") {
        return Ok(ParsedVerdict {
            verdict: Verdict::NonVerifiable,
            warnings: Vec::new(),
        });
    }

    let Some(caps) = SCORE.captures(body) else {
        if body.to_lowercase().contains("unable to judge") {
            return Ok(ParsedVerdict {
                verdict: Verdict::UnableToJudge,
                warnings: Vec::new(),
            });
        }
        return Err(fail("no veracity score or sentinel found"));
    };

    let mut warnings = Vec::new();
    let score: i64 = caps[1].parse().map_err(|_| fail("unreadable score"))?;
    let label = label_from_score(score).map_err(|e| fail(&e.to_string()))?;
    match caps.get(2).map(|m| m.as_str().trim()).filter(|s| !s.is_empty()) {
        Some(name) => match VeracityLabel::from_name(name) {
            Some(stated) if stated != label => warnings.push(format!(
                "label {name:?} conflicts with score {score}%; using {label}"
            )),
            Some(_) => {}
            None => warnings.push(format!("unrecognised label {name:?}; using {label}")),
        },
        None => warnings.push(format!("no label given; using {label}")),
    }

    let after_score = &body[caps.get(0).unwrap().end()..];
    let mut false_parts = Vec::new();
    let mut remainder = after_score;
    if let Some(m) = FALSE_PART.find(after_score) {
        let rest = &after_score[m.end()..];
        let line_end = rest.find('\n').unwrap_or(rest.len());
        let line = &rest[..line_end];
        let phrase_end = REASON.find(line).map_or(line.len(), |r| r.start());
        if let Some(phrase) = clean_phrase(&line[..phrase_end]) {
            false_parts.push(FalsePart::unlocated(phrase));
        }
        remainder = &rest[phrase_end..];
    }

    let reason = match REASON.find(remainder) {
        Some(m) => squash(remainder[m.end()..].trim_start_matches(['*', '_'])),
        None => squash(remainder.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | '.' | '*' | '_'))),
    };

    Ok(ParsedVerdict {
        verdict: Verdict::Judged {
            score: score as u8,
            label,
            false_parts,
            reason,
        },
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchTier {
    Exact,
    CaseInsensitive,
    WhitespaceNormalized,
    TokenRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Located {
    pub range: CharRange,
    pub tier: MatchTier,
}

/// Minimum share of phrase tokens the longest common run must cover.
pub const TOKEN_RUN_THRESHOLD: f64 = 0.8;

fn fold_char(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

fn fold_quote(c: char) -> char {
    match c {
        '“' | '”' | '„' | '«' | '»' => '"',
        '‘' | '’' | '‚' => '\'',
        other => other,
    }
}

fn find_chars(haystack: &[char], needle: &[char]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Case-, quote- and whitespace-folded characters with a map back to
/// original character offsets.
pub fn normalize_with_map(text: &str) -> (Vec<char>, Vec<usize>) {
    let mut chars = Vec::new();
    let mut map = Vec::new();
    let mut pending_space = false;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            pending_space = !chars.is_empty();
            continue;
        }
        if pending_space {
            chars.push(' ');
            map.push(i - 1);
            pending_space = false;
        }
        chars.push(fold_quote(fold_char(c)));
        map.push(i);
    }
    (chars, map)
}

struct Token {
    text: String,
    range: CharRange,
}

fn tokens(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let (mut s, mut e) = (start, i);
        while s < e && !chars[s].is_alphanumeric() {
            s += 1;
        }
        while e > s && !chars[e - 1].is_alphanumeric() {
            e -= 1;
        }
        if s < e {
            out.push(Token {
                text: chars[s..e].iter().map(|c| fold_quote(fold_char(*c))).collect(),
                range: CharRange::new(s, e),
            });
        }
    }
    out
}

/// Finds `phrase` inside `sentence`, trying progressively looser matches:
/// exact, case-insensitive, whitespace/quote-normalised, then the longest
/// common run of tokens if it covers at least 80% of the phrase's tokens.
/// The earliest match of the first successful tier wins.
pub fn locate_false_part(sentence: &str, phrase: &str) -> Option<Located> {
    let phrase = phrase.trim();
    if phrase.is_empty() {
        return None;
    }
    let phrase_len = phrase.chars().count();

    if let Some(byte) = sentence.find(phrase) {
        let start = sentence[..byte].chars().count();
        return Some(Located {
            range: CharRange::new(start, start + phrase_len),
            tier: MatchTier::Exact,
        });
    }

    let sentence_chars: Vec<char> = sentence.chars().map(fold_char).collect();
    let phrase_chars: Vec<char> = phrase.chars().map(fold_char).collect();
    if let Some(start) = find_chars(&sentence_chars, &phrase_chars) {
        return Some(Located {
            range: CharRange::new(start, start + phrase_chars.len()),
            tier: MatchTier::CaseInsensitive,
        });
    }

    let (norm_sentence, map) = normalize_with_map(sentence);
    let (norm_phrase, _) = normalize_with_map(phrase);
    if let Some(start) = find_chars(&norm_sentence, &norm_phrase) {
        let end = start + norm_phrase.len() - 1;
        return Some(Located {
            range: CharRange::new(map[start], map[end] + 1),
            tier: MatchTier::WhitespaceNormalized,
        });
    }

    let sentence_tokens = tokens(sentence);
    let phrase_tokens = tokens(phrase);
    if phrase_tokens.is_empty() || sentence_tokens.is_empty() {
        return None;
    }
    // Longest common contiguous token run; earliest in the sentence on ties.
    let mut best = (0usize, 0usize);
    let mut prev = vec![0usize; phrase_tokens.len() + 1];
    for (i, st) in sentence_tokens.iter().enumerate() {
        let mut cur = vec![0usize; phrase_tokens.len() + 1];
        for (j, pt) in phrase_tokens.iter().enumerate() {
            if st.text == pt.text {
                cur[j + 1] = prev[j] + 1;
                if cur[j + 1] > best.0 {
                    best = (cur[j + 1], i);
                }
            }
        }
        prev = cur;
    }
    let (run, last) = best;
    if run == 0 || (run as f64) < TOKEN_RUN_THRESHOLD * phrase_tokens.len() as f64 {
        return None;
    }
    let first = last + 1 - run;
    Some(Located {
        range: CharRange::new(sentence_tokens[first].range.start, sentence_tokens[last].range.end),
        tier: MatchTier::TokenRun,
    })
}

/// Locates every false part of `verdict` inside `sentence`.
///
/// A phrase containing `", "` is split into fragments only when every
/// fragment locates on its own and no two fragments overlap; otherwise it is
/// kept whole. Phrases that cannot be located keep their text with no span.
pub fn attach_spans(verdict: Verdict, sentence: &str) -> Verdict {
    let Verdict::Judged {
        score,
        label,
        false_parts,
        reason,
    } = verdict
    else {
        return verdict;
    };
    let mut resolved = Vec::new();
    for part in false_parts {
        let fragments: Vec<&str> = part.text.split(", ").map(str::trim).filter(|f| !f.is_empty()).collect();
        if fragments.len() > 1 {
            let located: Option<Vec<_>> = fragments
                .iter()
                .map(|f| locate_false_part(sentence, f).map(|l| FalsePart { text: (*f).to_owned(), span: Some(l.range) }))
                .collect();
            if let Some(parts) = located {
                let disjoint = parts.iter().enumerate().all(|(i, a)| {
                    parts[i + 1..].iter().all(|b| !a.span.unwrap().overlaps(&b.span.unwrap()))
                });
                if disjoint {
                    resolved.extend(parts);
                    continue;
                }
            }
        }
        let span = locate_false_part(sentence, &part.text).map(|l| l.range);
        resolved.push(FalsePart { text: part.text, span });
    }
    Verdict::Judged {
        score,
        label,
        false_parts: resolved,
        reason,
    }
}
