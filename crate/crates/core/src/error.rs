use std::path::PathBuf;

use thiserror::Error;

use crate::domain::Species;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {species}{site} is empty; relative velocity is undefined")]
    EmptyNode { species: Species, site: usize },

    #[error("cross-section needs at least {needed} objects, node has {found}")]
    ZeroPairs { needed: usize, found: usize },

    #[error("pair selection matrix has no positive entry")]
    NoPair,

    #[error("negative event rate {0}")]
    NegativeRate(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid site grid: {0}")]
    Grid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("mixture fit failed: {0}")]
    Fit(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("malformed header in {path}: {msg}")]
    Header { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
