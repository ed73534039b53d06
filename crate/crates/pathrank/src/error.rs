use thiserror::Error;

/// Library-wide error type. Variants map onto the failure categories the CLI
/// reports (`io`, `parse`, `validation`, `config`, ...).
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file. `line` is 1-based; 0 means the position is not
    /// line-addressable (e.g. a JSON document).
    #[error("parse: line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Input violated a precondition (bad vertex id, non-simple path, ...).
    #[error("validation: {0}")]
    Validation(String),

    /// A parameter combination is rejected before any work starts.
    #[error("config: {0}")]
    Config(String),

    #[error("no path from vertex {from} to vertex {to}")]
    NoPath { from: u32, to: u32 },

    /// Training produced a non-finite loss; the run is aborted rather than
    /// letting NaNs propagate into a checkpoint.
    #[error("training diverged at epoch {epoch}: {msg}")]
    Diverged { epoch: usize, msg: String },
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_includes_category_prefix() {
        let e = Error::validation("path must visit at least 2 vertices");
        assert!(e.to_string().starts_with("validation:"));
        let e = Error::parse(7, "expected 5 fields");
        assert_eq!(e.to_string(), "parse: line 7: expected 5 fields");
        let e = Error::NoPath { from: 3, to: 9 };
        assert!(e.to_string().contains("vertex 3"));
        assert!(e.to_string().contains("vertex 9"));
    }
}
