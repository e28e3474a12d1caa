use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("total energy is zero; the initial state cannot be normalized")]
    ZeroEnergy,
    #[error("fixed-point value {value} outside [0, {scale}]")]
    FixedPointRange { value: f64, scale: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("qubit cap exceeded: {requested} qubits requested, cap is {cap}")]
    QubitCap { requested: usize, cap: usize },
    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),
    #[error("projection has zero probability")]
    ZeroProbability,
    #[error("amplitude amplification failed: {0}")]
    Amplification(String),
    #[error("QSP phase solver did not converge: residual {residual:e} after {iterations} iterations")]
    QspNonConvergence { residual: f64, iterations: usize },
    #[error("postselection probability {probability:e} below floor {floor:e}")]
    Postselection { probability: f64, floor: f64 },
    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("no spectral peaks found")]
    NoPeaks,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
