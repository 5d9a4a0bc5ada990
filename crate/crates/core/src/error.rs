use thiserror::Error;

/// Errors surfaced by the simulation kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("site {index} out of range for a lattice of {site_count} sites")]
    InvalidSite { index: usize, site_count: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("state space of 3^{sites} configurations exceeds the cap of {cap}")]
    StateSpaceTooLarge { sites: usize, cap: usize },
    #[error("invalid time: {0}")]
    InvalidTime(String),
    #[error("configuration has {found} sites, expected {expected}")]
    LatticeMismatch { expected: usize, found: usize },
    #[error("coupling precondition violated: {0}")]
    Coupling(String),
    #[error("bracket does not straddle the threshold: {0}")]
    Bracket(String),
    #[error("malformed event dump at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
