//! Split text into sentences with character offsets.
//!
//! ```text
//! cargo run --example segment -- "Dr. Smith arrived at 3 p.m. on Monday. Was he late? Nobody knows."
//! ```

use verity::segment::Segmenter;

fn main() {
    let text = std::env::args().nth(1).unwrap_or_else(|| {
        "Dr. Smith arrived at 3.30 p.m. on Monday. Was he late? Nobody knows.\n\nA new paragraph starts here".to_owned()
    });
    for sentence in Segmenter::default().split(&text) {
        println!("{:>3} [{:>3}, {:>3})  {}", sentence.index, sentence.range.start, sentence.range.end, sentence.text);
    }
}
