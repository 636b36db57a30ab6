//! Turning raw bytes into a [`SourceDocument`].
//!
//! Every extractor is a pure function of its input bytes. Character ranges
//! throughout are Unicode scalar offsets into [`SourceDocument::text`].

mod html;
mod subtitles;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::CharRange;

pub use html::extract_html;
pub use subtitles::{extract_subtitles, SubtitleFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Plaintext,
    Html,
    Srt,
    Vtt,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Plaintext => "plaintext",
            SourceKind::Html => "html",
            SourceKind::Srt => "srt",
            SourceKind::Vtt => "vtt",
        }
    }

    pub fn parse(name: &str) -> Option<SourceKind> {
        match name.trim().to_ascii_lowercase().as_str() {
            "plaintext" | "text" | "txt" | "plain" => Some(SourceKind::Plaintext),
            "html" | "htm" => Some(SourceKind::Html),
            "srt" => Some(SourceKind::Srt),
            "vtt" | "webvtt" => Some(SourceKind::Vtt),
            _ => None,
        }
    }

    /// Guess from a file extension or URL path.
    pub fn from_path(path: &str) -> Option<SourceKind> {
        let path = path.split(['?', '#']).next().unwrap_or(path);
        let ext = path.rsplit_once('.')?.1;
        if ext.contains('/') {
            return None;
        }
        match ext.to_ascii_lowercase().as_str() {
            "txt" | "text" | "md" => Some(SourceKind::Plaintext),
            "html" | "htm" | "xhtml" => Some(SourceKind::Html),
            "srt" => Some(SourceKind::Srt),
            "vtt" => Some(SourceKind::Vtt),
            _ => None,
        }
    }

    /// Guess from an HTTP `Content-Type` header value.
    pub fn from_content_type(content_type: &str) -> Option<SourceKind> {
        let mime = content_type
            .split(';')
            .next()
            .unwrap_or("")
            .trim()
            .to_ascii_lowercase();
        match mime.as_str() {
            "text/html" | "application/xhtml+xml" => Some(SourceKind::Html),
            "text/vtt" => Some(SourceKind::Vtt),
            "application/x-subrip" | "text/srt" => Some(SourceKind::Srt),
            "text/plain" => Some(SourceKind::Plaintext),
            _ => None,
        }
    }
}

/// A subtitle cue: its time span and where its text landed in the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cue {
    pub start_ms: u64,
    pub end_ms: u64,
    pub range: CharRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub origin: String,
    pub kind: SourceKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cues: Option<Vec<Cue>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SourceDocument {
    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = origin.into();
        self
    }

    /// Time span covered by the cues overlapping `range`, if any.
    pub fn time_span(&self, range: CharRange) -> Option<(u64, u64)> {
        let cues = self.cues.as_ref()?;
        let mut hit = cues.iter().filter(|c| c.range.overlaps(&range));
        let first = hit.next()?;
        let (start, end) = hit.fold((first.start_ms, first.end_ms), |(s, e), c| {
            (s.min(c.start_ms), e.max(c.end_ms))
        });
        Some((start, end))
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no parseable cues in subtitle input")]
    NoCues,
}

/// Dispatches to the extractor for `kind`.
pub fn extract(raw: &[u8], kind: SourceKind) -> Result<SourceDocument, IngestError> {
    match kind {
        SourceKind::Plaintext => Ok(extract_plaintext(raw)),
        SourceKind::Html => Ok(extract_html(raw)),
        SourceKind::Srt => extract_subtitles(raw, SubtitleFormat::Srt),
        SourceKind::Vtt => extract_subtitles(raw, SubtitleFormat::Vtt),
    }
}

/// Decodes UTF-8 lossily, recording a warning when replacement happened.
pub(crate) fn decode_utf8(raw: &[u8], warnings: &mut Vec<String>) -> String {
    let raw = raw.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(raw);
    let text = match String::from_utf8_lossy(raw) {
        std::borrow::Cow::Borrowed(s) => s.to_owned(),
        std::borrow::Cow::Owned(s) => {
            let literal = raw.windows(3).filter(|w| *w == b"\xEF\xBF\xBD").count();
            let invalid = s.matches('\u{FFFD}').count() - literal;
            warnings.push(format!(
                "input contained {invalid} invalid UTF-8 sequence(s); replaced with U+FFFD"
            ));
            s
        }
    };
    if text.contains('\0') {
        warnings.push("NUL characters removed from input".to_owned());
        text.replace('\0', "")
    } else {
        text
    }
}

pub(crate) fn normalize_newlines(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Plain UTF-8 text: line endings become LF and each line is trimmed.
pub fn extract_plaintext(raw: &[u8]) -> SourceDocument {
    let mut warnings = Vec::new();
    let decoded = decode_utf8(raw, &mut warnings);
    let normalized = normalize_newlines(&decoded);
    let text = normalized
        .split('\n')
        .map(str::trim)
        .collect::<Vec<_>>()
        .join("\n");
    SourceDocument {
        origin: String::new(),
        kind: SourceKind::Plaintext,
        text: text.trim_matches('\n').to_owned(),
        cues: None,
        warnings,
    }
}
