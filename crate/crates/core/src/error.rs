use std::fmt;

/// Errors raised by every stage of a simulation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("kernel is singular at t = {t}")]
    Singular { t: f64 },
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("crack touches the boundary at node {node}")]
    CrackTouchesBoundary { node: usize },
    #[error("crack path does not follow mesh facets: {0}")]
    NonConforming(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("linear solve failed at step {step}: {reason}")]
    Solve { step: usize, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid file format: {0}")]
    Format(String),
    #[error("{}", ConfigErrors(.0))]
    Config(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct ConfigErrors<'a>(&'a [String]);

impl fmt::Display for ConfigErrors<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s)", self.0.len())?;
        for e in self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
