use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected: no path from vertex `{a}` to vertex `{b}`")]
    Disconnected { a: String, b: String },

    #[error("edge ({u}, {v}) has nonpositive or non-finite weight {weight}")]
    NonPositiveWeight { u: String, v: String, weight: f64 },

    #[error("vertex `{vertex}` has nonpositive or non-finite measure {measure}")]
    NonPositiveMeasure { vertex: String, measure: f64 },

    #[error("edge ({u}, {v}) listed twice with conflicting weights {first} and {second}")]
    ConflictingEdge { u: String, v: String, first: f64, second: f64 },

    #[error("asymmetric weights: b({u},{v}) = {forward} but b({v},{u}) = {backward}")]
    Asymmetric { u: String, v: String, forward: f64, backward: f64 },

    #[error("self-loop at vertex `{0}`")]
    SelfLoop(String),

    #[error("vertex `{0}` is isolated (zero degree)")]
    IsolatedVertex(String),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("invalid vertex id {0:?}: ids must be non-empty, contain no whitespace and not start with '#'")]
    InvalidVertexId(String),

    #[error("vertex `{0}` declared twice")]
    DuplicateVertex(String),

    #[error("custom measure has no value for vertex `{0}`")]
    MissingMeasure(String),

    #[error("graph has no vertices")]
    EmptyGraph,

    #[error("invalid family spec `{spec}`: {reason}")]
    InvalidFamily { spec: String, reason: String },

    #[error("line {line}, field {field}: {message}")]
    Parse { line: usize, field: usize, message: String },

    #[error("table shape mismatch: expected {expected} entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("radius must be nonnegative and finite, got {0}")]
    NegativeRadius(f64),

    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },

    #[error("({u}, {v}) is not an edge")]
    NotAnEdge { u: String, v: String },

    #[error("edge ({u}, {v}) has no metric weight")]
    MissingEdgeWeight { u: String, v: String },

    #[error("dense decomposition refused: {vertices} vertices exceeds the limit of {limit}")]
    TooLarge { vertices: usize, limit: usize },

    #[error("time must be nonnegative and finite, got {0}")]
    NegativeTime(f64),

    #[error("eigendecomposition check failed: {0}")]
    Decomposition(String),

    #[error("stiff integrator failed: {0}")]
    Integrator(String),

    #[error("exp(omega) overflows at vertex `{0}`")]
    OmegaOverflow(String),

    #[error("guard violated: {inequality} ({detail})")]
    Guard { inequality: String, detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("function is nonzero at vertex `{0}` outside the ball")]
    SupportOutsideBall(String),

    #[error("function vanishes identically on the ball")]
    ZeroFunction,

    #[error("missing hypothesis: {0}")]
    MissingHypothesis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn guard(inequality: &str, detail: impl Into<String>) -> Self {
        Error::Guard { inequality: inequality.to_string(), detail: detail.into() }
    }

    pub(crate) fn parse(line: usize, field: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, field, message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
