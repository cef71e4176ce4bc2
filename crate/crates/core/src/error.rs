use crate::interference::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid interference structure: {}", format_violations(.0))]
    InvalidStructure(Vec<Violation>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("design probability must lie strictly between 0 and 1, got {0}")]
    InvalidProbability(f64),

    #[error("n = {n} exceeds the exhaustive enumeration bound {bound}")]
    BoundExceeded { n: usize, bound: usize },

    #[error("transform cannot be applied: {0}")]
    Transform(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("adversarial instance rejected: {0}")]
    Adversarial(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

pub(crate) fn check_bound(n: usize, bound: usize) -> Result<()> {
    if n > bound || n > crate::MAX_EXHAUSTIVE_BOUND {
        Err(Error::BoundExceeded { n, bound: bound.min(crate::MAX_EXHAUSTIVE_BOUND) })
    } else {
        Ok(())
    }
}
