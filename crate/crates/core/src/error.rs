use thiserror::Error;

pub type Result<T, E = VineError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VineError {
    // input data
    #[error("target column `{0}` not found in header")]
    MissingTarget(String),
    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("target column has a non-numeric value at row {row}: `{value}`")]
    NonNumericTarget { row: usize, value: String },
    #[error("dataset is empty or has fewer than two rows")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("feature {0} is constant; a quantile grid needs at least two distinct values")]
    ConstantFeature(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("batch has {got} columns, model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    // oracle
    #[error("failed to launch model process `{command}`: {source}")]
    ProcessSpawnFailure {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model process protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("model process exited")]
    ChildExited,
    #[error("model returned a non-finite prediction at row {0}")]
    NonFinitePrediction(usize),

    // algorithms
    #[error("curve grid has fewer than two points")]
    DegenerateGrid,
    #[error("requested {k} clusters for {n} curves")]
    KTooLarge { k: usize, n: usize },
    #[error("no split separates the cluster from the remaining rows")]
    DegenerateSplit,
    #[error("cannot compute DTW distance of an empty series")]
    EmptySeries,
    #[error("no clusters survived anywhere in the dataset")]
    NoClusters,

    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl VineError {
    /// True for failures originating in the prediction oracle.
    pub fn is_oracle_error(&self) -> bool {
        matches!(
            self,
            VineError::ProcessSpawnFailure { .. }
                | VineError::ProtocolViolation(_)
                | VineError::ChildExited
                | VineError::NonFinitePrediction(_)
        )
    }

    /// True for failures caused by user-supplied data or arguments.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            VineError::MissingTarget(_)
                | VineError::MissingValue { .. }
                | VineError::NonNumericTarget { .. }
                | VineError::EmptyDataset
                | VineError::InvalidDataset(_)
                | VineError::ConstantFeature(_)
                | VineError::InvalidArgument(_)
                | VineError::ShapeMismatch { .. }
                | VineError::Csv(_)
                | VineError::Io(_)
                | VineError::Json(_)
        )
    }
}
