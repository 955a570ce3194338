use thiserror::Error;

use crate::atom::Chart;

/// Errors raised by the symbolic engine.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("power of an expression with odd atoms was not resolved: {0}")]
    OddBase(String),
    #[error("atoms from charts {0} and {1} mixed in one expression")]
    ChartMix(Chart, Chart),
    #[error("parity mismatch: {0}")]
    ParityMismatch(String),
    #[error("nilpotent part is not nilpotent: {0}")]
    NonNilpotent(String),
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("lagrangian contains derivatives of order >= 2 of field {0}")]
    HigherOrder(String),
    #[error("cannot isolate the leading power of c: {0}")]
    IndeterminateLeadingTerm(String),
    #[error("limit c -> infinity diverges; surviving terms: {0}")]
    DivergentLimit(String),
    #[error("power base evaluates to a non-positive value: {0}")]
    NegativeBase(String),
    #[error("no value assigned to atom {0}")]
    UnassignedAtom(String),
    #[error("oracle limit exceeded: {0}")]
    OracleCapacity(String),
    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
