use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("integration exceeded {0} steps")]
    TooManySteps(usize),
    #[error("force has a root at phi = {phi} inside the integration interval")]
    RootInInterval { phi: f64 },
    #[error("time of flight diverges: endpoint phi = {phi} is a fixed point")]
    Divergent { phi: f64 },
    #[error("quadrature failed to reach tolerance")]
    QuadratureFailed,
    #[error("no saddle-node point found near the guess")]
    NoSaddleFound,
    #[error("eigensolver did not converge: {0}")]
    EigenNoConvergence(String),
    #[error("spectral gap collapsed at theta = {theta} (gap {gap:e})")]
    GapCollapse { theta: f64, gap: f64 },
    #[error("edge leakage {weight:e} at the {edge} cutoff")]
    EdgeLeakage { edge: &'static str, weight: f64 },
    #[error("singular banded system")]
    Singular,
    #[error("norm drift {0:e} exceeds tolerance")]
    NormDrift(f64),
    #[error("time step too coarse: dt*k_max^2/(2 m_e) = {0}")]
    StepResolution(f64),
    #[error("demodulation failed: {0}")]
    Demodulation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
