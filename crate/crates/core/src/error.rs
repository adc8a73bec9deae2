use thiserror::Error;

/// Errors produced by mesh construction, assembly, solves and the optimiser.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural mesh error: {0}")]
    Structure(String),

    #[error("non-conforming mesh: {0}")]
    Conformity(String),

    #[error("field/mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("assembly error in element {element}: {message}")]
    Assembly { element: usize, message: String },

    #[error("incompatible right-hand side: sum of mass sources is {sum:e}")]
    Compatibility { sum: f64 },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("time {t} outside [0, {final_time}]")]
    TimeRange { t: f64, final_time: f64 },

    #[error("state error: {0}")]
    State(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("pressure step {m}, saturation step {n}: {source}")]
    AtStep {
        m: usize,
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_step(self, m: usize, n: usize) -> Self {
        Error::AtStep {
            m,
            n,
            source: Box::new(self),
        }
    }

    /// Innermost error, with step annotations removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
