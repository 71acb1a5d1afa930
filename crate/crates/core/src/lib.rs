//! Spherical Hecke algebras of unramified groups, computed exactly on the dual
//! side: twisted characters, Satake and inverse Satake matrices, Plancherel
//! pairings and endoscopic branching.

pub mod cli;
pub mod endoscopy;
pub mod group_algebra;
pub mod lattice;
pub mod lie;
pub mod oracle;
pub mod partition;
pub mod root_datum;
pub mod scalar;
pub mod spherical;

pub use scalar::{CycloLaurent, CycloRational};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid root datum: {0}")]
    InvalidDatum(String),
    #[error("unknown preset: {0}")]
    UnknownPreset(String),
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
    #[error("coefficient at {0:?} lies outside the certified region")]
    OutsideRegion(Vec<i64>),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("size cap exceeded: {0}")]
    Cap(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("consistency check failed: {0}")]
    Mismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
