use std::fmt;

use thiserror::Error;

/// A single failed check in a run configuration, addressed by its field path.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConfigViolation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge ({context}): error estimate {estimate:e} > target {target:e}")]
    QuadratureNotConverged {
        context: String,
        estimate: f64,
        target: f64,
    },

    #[error("cluster size cap of {cap} exceeded")]
    ClusterSizeCapExceeded { cap: usize },

    #[error("generation cap of {cap} exceeded")]
    GenerationCapExceeded { cap: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-finite time at line {line}")]
    NonFiniteTime { line: usize },

    #[error("negative density {value:e} at x = {x}")]
    NegativeDensity { x: f64, value: f64 },

    #[error("radicand {radicand:e} below branch guard {guard:e} at omega = {omega}")]
    BranchViolation { omega: f64, radicand: f64, guard: f64 },

    #[error("rejection sampler stalled after {0} consecutive rejections")]
    RejectionStall(usize),

    #[error("kernel `{0}` is not closed under time scaling")]
    UnsupportedKernelScaling(String),

    #[error("H = {h} is outside the grid half-width {half_width}")]
    HOutOfRange { h: f64, half_width: f64 },

    #[error("test-function support radius {radius} exceeds grid half-width {half_width}")]
    SupportExceedsGrid { radius: f64, half_width: f64 },

    #[error("alpha = {0} is outside (0, 2]")]
    AlphaOutOfRange(f64),

    #[error("kernel `{0}` is not a monotone one-sided kernel")]
    NonMonotoneKernel(String),

    #[error("unknown kernel family `{0}`; valid families: exp, lomax, uhalf, slap, match, tab")]
    UnknownKernelFamily(String),

    #[error("test function has no transform factor H_g")]
    MissingTransformFactor,

    #[error("invalid configuration: {}", join_violations(.0))]
    Config(Vec<ConfigViolation>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[ConfigViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
