use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: duplicate ids: {}", format_dups(.duplicates))]
    DuplicateId {
        path: PathBuf,
        /// `(id, line numbers)` for every id seen more than once.
        duplicates: Vec<(String, Vec<usize>)>,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no usable pairs for {0}")]
    NoUsablePairs(String),
    #[error("no eligible pairs for {0}")]
    NoEligiblePairs(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("scheme mismatch: {0} vs {1}")]
    SchemeMismatch(String, String),
    #[error("not a probability vector: {0}")]
    NotSimplex(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("missing lexicon file for {0}")]
    MissingLexiconFile(&'static str),
    #[error("scorer {scorer} returned {value}, outside [{lo}, {hi}]")]
    ScorerOutOfRange {
        scorer: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("scorer {scorer} failed: {message}")]
    Scorer { scorer: String, message: String },
    #[error("report consistency: {0}")]
    Consistency(String),
    #[error("report is missing required section `{0}`")]
    MissingSection(String),
    #[error("model archive: {0}")]
    Model(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_dups(dups: &[(String, Vec<usize>)]) -> String {
    dups.iter()
        .map(|(id, lines)| {
            let lines: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
            format!("\"{id}\" (lines {})", lines.join(", "))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
