use thiserror::Error;

/// Errors raised by the geometry engine.
///
/// Each variant maps onto one of the CLI exit classes: everything here is an
/// input or degeneracy error (exit 1). Tolerance failures are not errors; they
/// are reported as `pass = false` in the suite reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("frequency degree {degree} exceeds the configured cap {cap}")]
    DegreeOverflow { degree: i32, cap: i32 },

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("non-finite sample value at grid index {index}")]
    NonFinite { index: usize },

    #[error("degenerate metric: |det h| = {det:e} at point {point:?}")]
    Degenerate { det: f64, point: Vec<f64> },

    #[error("raw components are not J-invariant (defect {defect:e})")]
    NotJInvariant { defect: f64 },

    #[error("raw components are not symmetric")]
    NotSymmetric,

    #[error("metric is not pseudo-Kähler at the evaluation point (defect {defect:e})")]
    NotKahler { defect: f64 },

    #[error("operation requires a potential-only metric")]
    NotPotentialMetric,

    #[error("invalid signature ({neg}, {pos}) for complex dimension {mbar}")]
    InvalidSignature { neg: usize, pos: usize, mbar: usize },

    #[error("invariant degree k = {k} must satisfy k < m̄ = {mbar}")]
    DegreeNotBelowDimension { k: usize, mbar: usize },

    #[error("Chern index {j} out of range 1..={l}")]
    ChernIndex { j: usize, l: usize },

    #[error("form degree mismatch: {left} vs {right}")]
    FormDegreeMismatch { left: usize, right: usize },

    #[error("jet order {order} exceeds the supported order {max}")]
    JetOrder { order: usize, max: usize },

    #[error("invalid jet key: {0}")]
    InvalidJetKey(String),

    #[error("prescribed jets are not Hermitian: c({a:?};{b:?}) != conj c({b:?};{a:?})")]
    NonHermitianTargets { a: Vec<usize>, b: Vec<usize> },

    #[error("singular linear system while solving for normal coordinates")]
    SingularSystem,

    #[error("finite-difference schedule unhealthy: {0}")]
    Richardson(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
