//! Rule-based sentence segmentation with character offsets.
//!
//! Boundaries fall after `.`, `!`, `?` or `…` when the next non-space
//! character starts a new sentence (an uppercase letter or an opening quote),
//! at blank lines, and unconditionally after the CJK terminators `。！？`.
//! Closing quotes and brackets stay with the sentence they close. A word
//! from the abbreviation list suppresses the boundary after its period.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::claims::CharRange;

pub const DEFAULT_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");
pub const DEFAULT_MAX_SENTENCE_CHARS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub range: CharRange,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Abbreviations(HashSet<String>);

impl Abbreviations {
    /// One token per line; blank lines and `#` comments are ignored.
    pub fn parse(source: &str) -> Self {
        let mut set = Abbreviations(HashSet::new());
        set.extend_from(source);
        set
    }

    pub fn extend_from(&mut self, source: &str) {
        for line in source.lines() {
            let token = line.split('#').next().unwrap_or("").trim();
            if !token.is_empty() {
                self.0.insert(token.to_lowercase());
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn insert(&mut self, token: &str) {
        self.0.insert(token.trim().to_lowercase());
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(&token.to_lowercase())
    }
}

impl Default for Abbreviations {
    fn default() -> Self {
        Self::parse(DEFAULT_ABBREVIATIONS)
    }
}

#[derive(Debug, Clone)]
pub struct Segmenter {
    pub abbreviations: Abbreviations,
    pub max_chars: usize,
}

impl Default for Segmenter {
    fn default() -> Self {
        Segmenter {
            abbreviations: Abbreviations::default(),
            max_chars: DEFAULT_MAX_SENTENCE_CHARS,
        }
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_cjk_terminator(c: char) -> bool {
    matches!(c, '。' | '！' | '？')
}

fn is_closer(c: char) -> bool {
    matches!(
        c,
        '"' | '\'' | '”' | '’' | ')' | ']' | '}' | '»' | '」' | '』' | '）' | '】'
    )
}

fn is_opener(c: char) -> bool {
    matches!(
        c,
        '"' | '\'' | '“' | '‘' | '(' | '[' | '«' | '¿' | '¡' | '「' | '『' | '（'
    )
}

/// Uppercase, or a letter from a script without case.
fn starts_sentence(c: char) -> bool {
    c.is_uppercase() || is_opener(c) || (c.is_alphabetic() && !c.is_lowercase())
}

impl Segmenter {
    pub fn new(abbreviations: Abbreviations, max_chars: usize) -> Self {
        Segmenter {
            abbreviations,
            max_chars: max_chars.max(1),
        }
    }

    pub fn split(&self, text: &str) -> Vec<Sentence> {
        let chars: Vec<char> = text.chars().collect();
        let mut ranges = Vec::new();
        for range in self.raw_ranges(&chars) {
            self.enforce_length(&chars, range, &mut ranges);
        }
        ranges
            .into_iter()
            .enumerate()
            .map(|(index, range)| Sentence {
                index,
                text: chars[range.as_range()].iter().collect(),
                range,
            })
            .collect()
    }

    fn raw_ranges(&self, cs: &[char]) -> Vec<CharRange> {
        let n = cs.len();
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        let mut close = |start: &mut Option<usize>, end: usize| {
            if let Some(s) = start.take() {
                let mut e = end;
                while e > s && cs[e - 1].is_whitespace() {
                    e -= 1;
                }
                if e > s {
                    out.push(CharRange::new(s, e));
                }
            }
        };

        let mut i = 0;
        while i < n {
            let c = cs[i];
            if start.is_none() {
                if c.is_whitespace() {
                    i += 1;
                    continue;
                }
                start = Some(i);
            }

            if c == '\n' {
                let mut j = i + 1;
                while j < n && cs[j] != '\n' && cs[j].is_whitespace() {
                    j += 1;
                }
                if j < n && cs[j] == '\n' {
                    close(&mut start, i);
                    i = j;
                    continue;
                }
            }

            if is_cjk_terminator(c) {
                let mut k = i + 1;
                while k < n && (is_cjk_terminator(cs[k]) || is_closer(cs[k])) {
                    k += 1;
                }
                close(&mut start, k);
                i = k;
                continue;
            }

            if is_terminator(c) {
                let mut k = i + 1;
                while k < n && is_terminator(cs[k]) {
                    k += 1;
                }
                let single_period = c == '.' && k == i + 1;
                while k < n && is_closer(cs[k]) {
                    k += 1;
                }
                if k < n && cs[k].is_whitespace() {
                    let mut m = k;
                    while m < n && cs[m].is_whitespace() {
                        m += 1;
                    }
                    let next_starts = m < n && starts_sentence(cs[m]);
                    let abbreviated = single_period && self.is_abbreviation(cs, start.unwrap(), i);
                    if next_starts && !abbreviated {
                        close(&mut start, k);
                    }
                }
                i = k;
                continue;
            }
            i += 1;
        }
        close(&mut start, n);
        out
    }

    /// Whether the word ending in the period at `dot` is a known abbreviation.
    fn is_abbreviation(&self, cs: &[char], sentence_start: usize, dot: usize) -> bool {
        let mut j = dot;
        while j > sentence_start && !cs[j - 1].is_whitespace() {
            j -= 1;
        }
        while j < dot && is_opener(cs[j]) {
            j += 1;
        }
        let token: String = cs[j..=dot].iter().collect();
        self.abbreviations.contains(&token)
    }

    fn enforce_length(&self, cs: &[char], range: CharRange, out: &mut Vec<CharRange>) {
        let mut s = range.start;
        let end = range.end;
        while end - s > self.max_chars {
            let limit = s + self.max_chars;
            // Cut at the last whitespace that keeps the piece within the limit.
            let cut = (s + 1..=limit).rev().find(|&w| cs[w].is_whitespace());
            let (piece_end, next) = match cut {
                Some(w) => {
                    let mut next = w;
                    while next < end && cs[next].is_whitespace() {
                        next += 1;
                    }
                    let mut pe = w;
                    while pe > s && cs[pe - 1].is_whitespace() {
                        pe -= 1;
                    }
                    (pe, next)
                }
                None => (limit, limit),
            };
            out.push(CharRange::new(s, piece_end));
            s = next;
        }
        if s < end {
            out.push(CharRange::new(s, end));
        }
    }
}

/// Splits with the default abbreviation list and length cap.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    Segmenter::default().split(text)
}
