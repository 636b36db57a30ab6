use std::sync::LazyLock;

use regex::Regex;

use super::{decode_utf8, normalize_newlines, Cue, IngestError, SourceDocument, SourceKind};
use crate::claims::CharRange;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubtitleFormat {
    Srt,
    Vtt,
}

// Hours are optional in WebVTT; SRT uses ',' and VTT '.', both accepted.
static TIMESTAMP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:(\d+):)?(\d{1,2}):(\d{1,2})(?:[,.](\d{1,3}))?$").unwrap()
});
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>|\{\\[^}]*\}").unwrap());
static ENTITY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"&(#[0-9]+|#[xX][0-9a-fA-F]+|[a-zA-Z]+);").unwrap());

fn parse_timestamp(raw: &str) -> Option<u64> {
    let caps = TIMESTAMP.captures(raw.trim())?;
    let num = |i: usize| caps.get(i).map_or(Ok(0), |m| m.as_str().parse::<u64>());
    let (hours, minutes, seconds) = (num(1).ok()?, num(2).ok()?, num(3).ok()?);
    if minutes >= 60 || seconds >= 60 {
        return None;
    }
    let millis = match caps.get(4) {
        // "1,5" means 500 ms
        Some(m) => {
            let digits = m.as_str();
            digits.parse::<u64>().ok()? * 10u64.pow(3 - digits.len() as u32)
        }
        None => 0,
    };
    Some(((hours * 60 + minutes) * 60 + seconds) * 1000 + millis)
}

fn parse_timing(line: &str) -> Option<(u64, u64)> {
    let (start, rest) = line.split_once("-->")?;
    // VTT cue settings follow the end timestamp.
    let end = rest.split_whitespace().next()?;
    let (start, end) = (parse_timestamp(start)?, parse_timestamp(end)?);
    (end >= start).then_some((start, end))
}

fn decode_entity(entity: &str) -> Option<String> {
    let named = match entity {
        "amp" => "&",
        "lt" => "<",
        "gt" => ">",
        "quot" => "\"",
        "apos" => "'",
        "nbsp" => " ",
        "lrm" | "rlm" => "",
        _ => {
            let code = if let Some(hex) = entity.strip_prefix("#x").or(entity.strip_prefix("#X")) {
                u32::from_str_radix(hex, 16).ok()?
            } else {
                entity.strip_prefix('#')?.parse().ok()?
            };
            return char::from_u32(code).filter(|c| *c != '\0').map(String::from);
        }
    };
    Some(named.to_owned())
}

fn clean_cue_text(lines: &[&str]) -> String {
    let joined = lines.join(" ");
    let untagged = TAG.replace_all(&joined, "");
    let decoded = ENTITY.replace_all(&untagged, |caps: &regex::Captures| {
        decode_entity(&caps[1]).unwrap_or_else(|| caps[0].to_owned())
    });
    decoded.split_whitespace().collect::<Vec<_>>().join(" ")
}

struct RawCue {
    start_ms: u64,
    end_ms: u64,
    text: String,
}

/// Subtitle file to document: one line of text per cue, in start-time order.
///
/// Malformed blocks are skipped with a warning; a file without a single
/// usable cue is an error.
pub fn extract_subtitles(raw: &[u8], format: SubtitleFormat) -> Result<SourceDocument, IngestError> {
    let mut warnings = Vec::new();
    let decoded = normalize_newlines(&decode_utf8(raw, &mut warnings));

    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut current = Vec::new();
    for line in decoded.split('\n') {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        blocks.push(current);
    }

    let mut cues = Vec::new();
    for (block_no, block) in blocks.iter().enumerate() {
        let first = block[0].trim();
        if format == SubtitleFormat::Vtt {
            if block_no == 0 && first.starts_with("WEBVTT") {
                continue;
            }
            if ["NOTE", "STYLE", "REGION"]
                .iter()
                .any(|kw| first == *kw || first.starts_with(&format!("{kw} ")))
            {
                continue;
            }
        }
        let Some(timing_at) = block.iter().position(|l| l.contains("-->")) else {
            warnings.push(format!("skipped subtitle block {}: no timing line", block_no + 1));
            continue;
        };
        let Some((start_ms, end_ms)) = parse_timing(block[timing_at]) else {
            warnings.push(format!(
                "skipped subtitle block {}: malformed timing {:?}",
                block_no + 1,
                block[timing_at].trim()
            ));
            continue;
        };
        let text = clean_cue_text(&block[timing_at + 1..]);
        if text.is_empty() {
            warnings.push(format!("skipped subtitle block {}: no text", block_no + 1));
            continue;
        }
        cues.push(RawCue {
            start_ms,
            end_ms,
            text,
        });
    }

    if cues.is_empty() {
        return Err(IngestError::NoCues);
    }
    cues.sort_by_key(|c| (c.start_ms, c.end_ms));

    let mut text = String::new();
    let mut placed = Vec::with_capacity(cues.len());
    let mut offset = 0usize;
    for (i, cue) in cues.iter().enumerate() {
        if i > 0 {
            text.push('\n');
            offset += 1;
        }
        let len = cue.text.chars().count();
        text.push_str(&cue.text);
        placed.push(Cue {
            start_ms: cue.start_ms,
            end_ms: cue.end_ms,
            range: CharRange::new(offset, offset + len),
        });
        offset += len;
    }

    Ok(SourceDocument {
        origin: String::new(),
        kind: match format {
            SubtitleFormat::Srt => SourceKind::Srt,
            SubtitleFormat::Vtt => SourceKind::Vtt,
        },
        text,
        cues: Some(placed),
        warnings,
    })
}
