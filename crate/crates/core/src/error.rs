use thiserror::Error;

#[derive(Debug, Error)]
pub enum SskError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("point {re}{im:+}i lies on the branch cut: {context}")]
    BranchCut { re: f64, im: f64, context: String },

    #[error("z = {re}{im:+}i coincides with an eigenvalue")]
    Pole { re: f64, im: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e}); {hint}")]
    Quadrature {
        tol: f64,
        estimate: f64,
        hint: String,
    },

    #[error("unsupported dimension {n}: {reason}")]
    UnsupportedDimension { n: usize, reason: String },

    #[error("eigensolver failed for matrix seed {seed}: {reason}")]
    Eigen { seed: u64, reason: String },

    #[error("sampler stalled: acceptance rate {rate:e} over {window} proposals (b = {b})")]
    Stall { rate: f64, window: usize, b: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl SskError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            SskError::Config(_) | SskError::Io(_) | SskError::Json(_) | SskError::Csv(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, SskError>;
