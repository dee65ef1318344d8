use thiserror::Error;

pub type Result<T> = std::result::Result<T, QsdcError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsdcError {
    #[error("parameter `{name}` = {value} is outside its domain ({expected})")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("index {index} out of range 0..{len}")]
    Index { index: i64, len: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("no tabulated recurrence parameters for k = {0}")]
    UnknownParameter(usize),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("OAM label {ell} left the window [{lo}, {hi}]")]
    Overflow { ell: i32, lo: i32, hi: i32 },

    #[error("mode l = {ell} does not interfere to a single port at alpha = {alpha}")]
    NonBinaryInterference { ell: i32, alpha: f64 },

    #[error("layout is not unitary on the walk space (distance {distance:.3e})")]
    LayoutInvalid { distance: f64 },

    #[error("layout parse error on line {line}: {message}")]
    LayoutParse { line: usize, message: String },

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("message needs {needed} digits but only {capacity} message photons are available")]
    Capacity { needed: usize, capacity: usize },

    #[error("{0}")]
    Domain(String),
}
