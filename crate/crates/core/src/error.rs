use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{0} qubits exceeds the supported range 1..={max}", max = crate::statevec::MAX_QUBITS)]
    Capacity(usize),

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid circuit spec: {0}")]
    InvalidSpec(String),

    #[error("depth {p} exceeds p_max = {p_max}")]
    Depth { p: usize, p_max: usize },

    #[error("operation requires the {expected} variant")]
    Variant { expected: &'static str },

    #[error("singular system (smallest eigenvalue {0:e})")]
    Singular(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fidelity already converged (K = {0})")]
    Converged(f64),

    #[error("stationary point (|grad| = {0:e})")]
    Stationary(f64),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("sensing protocol violated for parameter {index}: {reason}")]
    Protocol { index: usize, reason: String },

    #[error("basis index collision: {0}")]
    Collision(String),

    #[error("degenerate target: reference and target parameters coincide")]
    DegenerateTarget,
}
