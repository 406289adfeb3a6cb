use thiserror::Error;

/// Errors raised by the behavior, subspace and synthesis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("range error: {0}")]
    Range(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("infeasible rank: requested {requested} but the matrix is only {rows}x{cols}")]
    InfeasibleRank {
        requested: usize,
        rows: usize,
        cols: usize,
    },

    #[error("model is not minimal: {0}")]
    Minimality(String),

    #[error("model generation failed after {0} draws")]
    Generation(usize),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("horizon too small: L = {horizon} must exceed the lag bound {lag_bound}")]
    Horizon { horizon: usize, lag_bound: usize },

    #[error("empty subspace: {0}")]
    Empty(String),

    #[error("interconnection is not well posed: {0}")]
    NotWellPosed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
