use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vertex set")]
    EmptySet,
    #[error("invalid vertex id {0}")]
    InvalidVertex(usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("image vertex {0} missing in target graph")]
    MissingImage(usize),
    #[error("no common ancestor")]
    NoCommonAncestor,
    #[error("vertex not in source graph")]
    NotInSource,
    #[error("unreachable exit")]
    UnreachableExit,
    #[error("truncation too small")]
    TruncationTooSmall,
    #[error("increase truncation: relative bracket width {0:.4}")]
    IncreaseTruncation(f64),
    #[error("target set not inside box")]
    NotInBox,
    #[error("insufficient records per bin: {0}")]
    InsufficientRecords(String),
    #[error("window exceeds isomorphism domain")]
    WindowOutsideDomain,
    #[error("grid infeasible: {0}")]
    GridInfeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
