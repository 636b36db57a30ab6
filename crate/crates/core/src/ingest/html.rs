use ego_tree::NodeRef;
use scraper::{Html, Node};

use super::{decode_utf8, SourceDocument, SourceKind};

/// Elements whose content is never visible text.
const SKIPPED: &[&str] = &[
    "script", "style", "noscript", "head", "template", "iframe", "object", "svg", "math",
];

/// Elements that start and end a paragraph.
const BLOCKS: &[&str] = &[
    "p", "div", "li", "h1", "h2", "h3", "h4", "h5", "h6", "tr", "ul", "ol", "dl", "dt", "dd",
    "table", "section", "article", "header", "footer", "nav", "aside", "main", "blockquote",
    "pre", "figure", "figcaption", "form", "hr", "address", "fieldset", "details", "summary",
    "caption",
];

/// Builds text with whitespace collapsed inside lines and explicit breaks
/// between blocks.
#[derive(Default)]
struct TextSink {
    out: String,
    pending_space: bool,
    pending_breaks: u8,
}

impl TextSink {
    fn push_text(&mut self, text: &str) {
        for c in text.chars() {
            if c == '\0' {
                continue;
            }
            if c.is_whitespace() {
                self.pending_space = true;
                continue;
            }
            if !self.out.is_empty() {
                if self.pending_breaks > 0 {
                    for _ in 0..self.pending_breaks {
                        self.out.push('\n');
                    }
                } else if self.pending_space {
                    self.out.push(' ');
                }
            }
            self.pending_breaks = 0;
            self.pending_space = false;
            self.out.push(c);
        }
    }

    fn paragraph_break(&mut self) {
        self.pending_breaks = 2;
    }

    fn line_break(&mut self) {
        self.pending_breaks = (self.pending_breaks + 1).min(2);
    }

    fn cell_gap(&mut self) {
        self.pending_space = true;
    }
}

enum Step<'a> {
    Enter(NodeRef<'a, Node>),
    Leave(&'a str),
}

/// Visible text of an HTML page.
///
/// Script-like content and the document head are dropped, block elements
/// become blank-line separated paragraphs, `<br>` becomes a newline, and
/// runs of whitespace collapse to a single space. Malformed markup goes
/// through the HTML5 recovery rules.
pub fn extract_html(raw: &[u8]) -> SourceDocument {
    let mut warnings = Vec::new();
    let decoded = decode_utf8(raw, &mut warnings);
    let document = Html::parse_document(&decoded);

    let mut sink = TextSink::default();
    let mut stack = vec![Step::Enter(document.tree.root())];
    while let Some(step) = stack.pop() {
        match step {
            Step::Leave(name) => {
                if BLOCKS.contains(&name) {
                    sink.paragraph_break();
                } else if name == "td" || name == "th" {
                    sink.cell_gap();
                }
            }
            Step::Enter(node) => match node.value() {
                Node::Text(text) => sink.push_text(text),
                Node::Element(element) => {
                    let name = element.name();
                    if SKIPPED.contains(&name) {
                        continue;
                    }
                    if name == "br" {
                        sink.line_break();
                        continue;
                    }
                    if BLOCKS.contains(&name) {
                        sink.paragraph_break();
                    }
                    stack.push(Step::Leave(name));
                    let children: Vec<_> = node.children().collect();
                    stack.extend(children.into_iter().rev().map(Step::Enter));
                }
                Node::Document | Node::Fragment => {
                    let children: Vec<_> = node.children().collect();
                    stack.extend(children.into_iter().rev().map(Step::Enter));
                }
                _ => {}
            },
        }
    }

    SourceDocument {
        origin: String::new(),
        kind: SourceKind::Html,
        text: sink.out,
        cues: None,
        warnings,
    }
}
