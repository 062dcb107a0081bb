use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: syntax error, expected {expected}")]
    Syntax { line: usize, expected: String },
    #[error("line {line}: unsupported construct: {construct}")]
    Unsupported { line: usize, construct: String },
    #[error("multiple drivers for `{signal}`")]
    MultipleDrivers { signal: String },
    #[error("line {line}: undeclared signal `{name}`")]
    Undeclared { line: usize, name: String },
    #[error("line {line}: duplicate declaration of `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: `{signal}` cannot be assigned here: {why}")]
    InvalidTarget {
        line: usize,
        signal: String,
        why: String,
    },
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::Unsupported { line, .. }
            | ParseError::Undeclared { line, .. }
            | ParseError::Duplicate { line, .. }
            | ParseError::InvalidTarget { line, .. } => Some(*line),
            ParseError::MultipleDrivers { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("combinational loop through {}", signals.join(", "))]
    CombinationalLoop { signals: Vec<String> },
    #[error("missing value for input `{0}`")]
    MissingInput(String),
    #[error("`{0}` is not an input of the module")]
    NotAnInput(String),
    #[error("input `{name}` is {expected} bits wide, got {got}")]
    WidthMismatch {
        name: String,
        expected: u32,
        got: u32,
    },
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("cycle {cycle}: {source}")]
    AtCycle {
        cycle: usize,
        #[source]
        source: Box<SimError>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConeError {
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("cone depth must be at least 1")]
    ZeroDepth,
}
