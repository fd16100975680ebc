use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}: non-finite loss at sample {sample}")]
    NonFinite { epoch: usize, sample: usize },

    #[error("parse error at row {row}, column {column}: cannot read {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),

    #[error("invalid labels: {0}")]
    Labels(String),

    #[error("matrix is rank deficient ({rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("refusing to enumerate 2^{n} subsets (limit is n <= {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
