use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in the forward and inverse pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the closed domain of radius {radius}")]
    OutsideDomain { point: Vec<f64>, radius: f64 },

    #[error("curve leaves the domain at parameter {parameter}")]
    CurveOutsideDomain { parameter: f64 },

    #[error("invalid Randers data: validity margin {margin} is not positive")]
    InvalidNorm { margin: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("fundamental tensor is singular at {point:?}")]
    Convexity { point: Vec<f64> },

    #[error("geodesic did not reach the boundary within {steps} steps")]
    TrappedGeodesic { steps: usize },

    #[error("no geodesic found between boundary angles {from} and {to}")]
    Connectivity { from: f64, to: f64 },

    #[error("{branches} distinct geodesics join boundary angles {from} and {to}")]
    NonAdmissible { from: f64, to: f64, branches: usize },

    #[error("shooting did not converge: miss {miss} exceeds tolerance {tolerance}")]
    NotConverged { miss: f64, tolerance: f64 },

    #[error("pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("flow speed reaches {speed} (must stay below 1 in the background metric)")]
    FlowTooFast { speed: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("path was produced by spec {path_tag}, not {spec_tag}")]
    TagMismatch { path_tag: String, spec_tag: String },

    #[error("domain is not simply connected")]
    NotSimplyConnected,

    #[error("inversion hypothesis violated: {0}")]
    Inversion(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unit error at line {line}, column {column}: {message}")]
    Unit {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutsideDomain { .. } | Error::CurveOutsideDomain { .. } => "domain",
            Error::InvalidNorm { .. } | Error::FlowTooFast { .. } => "invalid_norm",
            Error::Degenerate(_) => "degenerate",
            Error::Convexity { .. } => "convexity",
            Error::TrappedGeodesic { .. } => "trapped",
            Error::Connectivity { .. } => "connectivity",
            Error::NonAdmissible { .. } => "non_admissible",
            Error::NotConverged { .. } => "not_converged",
            Error::Pair { source, .. } => source.kind(),
            Error::Dimension { .. } => "dimension",
            Error::TagMismatch { .. } => "tag_mismatch",
            Error::NotSimplyConnected => "topology",
            Error::Inversion(_) => "inversion",
            Error::Parse { .. } => "parse",
            Error::Unit { .. } => "unit",
            Error::Structural(_) => "structural",
            Error::InvalidArgument(_) => "argument",
            Error::Io(_) => "io",
        }
    }

    /// True when the error means an assumption of the theory failed on the
    /// given data rather than a malfunction.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self.kind(),
            "invalid_norm" | "trapped" | "connectivity" | "non_admissible" | "inversion" | "topology"
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
