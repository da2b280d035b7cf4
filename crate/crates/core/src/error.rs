use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON parse error at byte {offset} (line {line}, column {column}): {message}")]
    Json {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}:{line}: {message}")]
    LabelLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("tagging error: {0}")]
    Tagging(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("report error: {0}")]
    Report(String),
}

impl Error {
    /// Short stable name of the variant, used in machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Validation(_) => "validation",
            Error::LabelLine { .. } => "label_line",
            Error::Image { .. } => "image",
            Error::Tagging(_) => "tagging",
            Error::Index(_) => "index",
            Error::Degenerate(_) => "degenerate",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::Config(_) => "config",
            Error::Sampling(_) => "sampling",
            Error::Report(_) => "report",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Maps a serde_json error onto a byte offset within `text`.
    pub fn json(text: &str, err: &serde_json::Error) -> Self {
        let (line, column) = (err.line(), err.column());
        let offset = byte_offset(text, line, column);
        Error::Json {
            offset,
            line,
            column,
            message: err.to_string(),
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_points_at_failure() {
        let text = "{\n  \"a\": ]\n}";
        let err = serde_json::from_str::<serde_json::Value>(text).unwrap_err();
        match Error::json(text, &err) {
            Error::Json { offset, .. } => assert_eq!(&text[offset..offset + 1], "]"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
