use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("SMILES syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("valence error on atom {atom} ({symbol}): {msg}")]
    Valence { atom: usize, symbol: String, msg: String },
    #[error("invalid molecule: {0}")]
    InvalidMolecule(String),
    #[error("substructure search exceeded {limit} unique hits")]
    HitLimitExceeded { limit: usize },
    #[error("fragment enumeration exceeded {limit} candidate block unions")]
    CombinatorialLimit { limit: usize },
    #[error("no fragment survived library filtering")]
    EmptyLibrary,
    #[error("probe set is empty")]
    EmptyProbe,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("value error: {0}")]
    Value(String),
    #[error("sequence of length {len} exceeds the {max}-residue limit")]
    Length { len: usize, max: usize },
    #[error("index error: {0}")]
    Index(String),
    #[error("unknown protein: {0}")]
    UnknownProtein(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("not enough distinct entities to split: {0}")]
    InsufficientEntities(String),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },
    #[error("no positive attribution")]
    NoPositiveAttribution,
    #[error("unknown fragment: {0}")]
    UnknownFragment(String),
    #[error("score tables disagree on molecule ids: {0}")]
    IdMismatch(String),
    #[error("ranking contains no actives")]
    NoActives,
    #[error("truth labels contain a single class")]
    DegenerateTruth,
    #[error("empty point set")]
    EmptySet,
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("bad {kind} file: {msg}")]
    Format { kind: &'static str, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn syntax(pos: usize, msg: impl Into<String>) -> Self {
        Error::Syntax { pos, msg: msg.into() }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
