use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("eigendecomposition did not converge")]
    NumericalFailure,

    #[error("matrix is singular to tolerance")]
    SingularMatrix,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("infeasible weights: {0}")]
    InfeasibleWeights(String),

    #[error("no draw with |S| <= {k} in {attempts} attempts")]
    NoSizeFeasibleDraw { k: usize, attempts: usize },

    #[error("exhaustive enumeration needs n <= {max}, got {n}")]
    TooLarge { n: usize, max: usize },

    #[error("every row of the design matrix is zero")]
    AllZeroRows,

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status: 1 for bad arguments, 2 for data problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidInput(_) | Error::InfeasibleWeights(_) | Error::TooFewValues { .. } | Error::TooLarge { .. } => 1,
            Error::Parse { .. } | Error::Io(_) | Error::Csv(_) | Error::AllZeroRows => 2,
            Error::NumericalFailure | Error::SingularMatrix | Error::NoSizeFeasibleDraw { .. } => 3,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
