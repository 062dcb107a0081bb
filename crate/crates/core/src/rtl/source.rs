use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Half-open byte range into a [`SourceUnit`]'s text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn to(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

/// A Verilog source text with a byte-offset to line/column index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub file_id: String,
    text: Arc<str>,
    /// Byte offset at which each line starts.
    line_starts: Arc<[usize]>,
}

impl SourceUnit {
    pub fn new(file_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text: String = text.into();
        let mut starts = vec![0];
        starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        SourceUnit {
            file_id: file_id.into(),
            text: text.into(),
            line_starts: starts.into(),
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(path.display().to_string(), text))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn line_count(&self) -> usize {
        self.line_starts.len()
    }

    /// 1-based `(line, column)` of a byte offset. Offsets past the end map to
    /// the last position.
    pub fn line_col(&self, offset: usize) -> (usize, usize) {
        let offset = offset.min(self.text.len());
        let line = self.line_starts.partition_point(|s| *s <= offset);
        (line, offset - self.line_starts[line - 1] + 1)
    }

    /// Text of a 1-based line without its terminator.
    pub fn line_text(&self, line: usize) -> Option<&str> {
        let start = *self.line_starts.get(line.checked_sub(1)?)?;
        let end = self
            .line_starts
            .get(line)
            .map(|e| e - 1)
            .unwrap_or(self.text.len());
        Some(self.text[start..end].trim_end_matches('\r'))
    }

    pub fn slice(&self, span: Span) -> &str {
        &self.text[span.start..span.end]
    }

    /// A new unit with `span` replaced by `with`.
    pub fn splice(&self, span: Span, with: &str) -> SourceUnit {
        let mut text = String::with_capacity(self.text.len() + with.len());
        text.push_str(&self.text[..span.start]);
        text.push_str(with);
        text.push_str(&self.text[span.end..]);
        SourceUnit::new(self.file_id.clone(), text)
    }
}
