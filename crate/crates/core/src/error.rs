use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not skew-Hermitian (residual {residual:.3e})")]
    NotSkewHermitian { residual: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cannot build a zeroing rotation from the pair (0, 0)")]
    GivensZeroPair,

    #[error("unknown scheme {scheme:?} for family {family:?}")]
    UnknownScheme { family: String, scheme: String },

    #[error("truncation too small: need at least {needed} levels, got {got}")]
    TruncationTooSmall { needed: usize, got: usize },

    #[error("invalid basis label {label:?}: {reason}")]
    InvalidLabel { label: String, reason: String },

    #[error("basis state {label} is outside the truncation")]
    OutOfRange { label: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("system is not finitely controllable (verdict: {kind}); no synthesis certificate")]
    NotFinitelyControllable { kind: String },

    #[error("input support touches the guard band at index {index}")]
    SupportInGuard { index: usize },

    #[error(
        "dark transition: operator {op} edge ({i}, {j}) has coupling magnitude {magnitude:.3e} below 1e-12"
    )]
    DarkEdge {
        op: String,
        i: usize,
        j: usize,
        magnitude: f64,
    },

    #[error("no transfer path between eigenstates {from} and {to}")]
    NoEigenstatePath { from: usize, to: usize },

    #[error("pulse on non-matching operator {op}: vertex {vertex} has degree >= 2")]
    PulseOnNonMatching { op: String, vertex: usize },

    #[error("unknown operator id {op:?}")]
    UnknownOperator { op: String },

    #[error("edge ({i}, {j}) is not an edge of operator {op}")]
    EdgeNotInOperator { op: String, i: usize, j: usize },

    #[error("guard-band leakage {leakage:.3e} exceeds {threshold:.3e}; increase the truncation")]
    GuardLeakage { leakage: f64, threshold: f64 },

    #[error("descent invariant violated at vertex {vertex}: residual amplitude {amplitude:.3e}")]
    DescentViolated { vertex: usize, amplitude: f64 },

    #[error("max_dim {max_dim} is below the generator count {generators}")]
    MaxDimTooSmall { max_dim: usize, generators: usize },

    #[error("state norm is {norm}; expected 1 within 1e-9 (set normalize to rescale)")]
    NormNotUnit { norm: f64 },

    #[error("serialization failed: {0}")]
    Serialize(String),
}
