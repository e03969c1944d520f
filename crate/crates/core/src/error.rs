use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported modulation order {0}")]
    UnsupportedOrder(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("distance must be positive, got {0} km")]
    NonPositiveDistance(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{stage}: non-finite state at iteration {iteration}")]
    NumericalDivergence { stage: &'static str, iteration: usize },

    #[error("detected active set is empty")]
    EmptyActiveSet,

    #[error("overdetermined channel estimation problem (T = {slots} >= detected users = {users})")]
    Overdetermined { slots: usize, users: usize },

    #[error("regularized normal matrix is singular")]
    SingularSystem,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Wraps an error with the name of the detection stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage labels peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
