use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension limit exceeded: fock dimension {dim} > limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("slot index {index} out of range 0..={max}")]
    SlotOutOfRange { index: usize, max: usize },

    /// An object occupies slots that the requested operation would push off the grid.
    #[error("horizon violation in {context}: needs horizon <= {allowed}, got {actual}")]
    Horizon {
        context: &'static str,
        allowed: usize,
        actual: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("input is already ampliated")]
    AlreadyAmpliated,

    #[error("not an orthogonal projection (defect {defect:.3e})")]
    NotProjection { defect: f64 },

    #[error("not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    /// A stop-time invariant failed; `rule` names the violated property.
    #[error("invalid stop time: {rule} violated ({detail})")]
    StopTime { rule: &'static str, detail: String },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("cocycle is not {expected}-adapted (defect {defect:.3e})")]
    Adaptedness { expected: &'static str, defect: f64 },

    #[error("incompatible operator tails: {0}")]
    Tail(String),
}

pub type Result<T> = std::result::Result<T, Error>;
