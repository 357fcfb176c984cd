use thiserror::Error;

/// Errors produced by model construction and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate pump: gamma_p + gamma_d = 0, D_0 is undefined")]
    DegeneratePump,

    #[error("target inversion d0 = {0} is outside [-1, 1)")]
    InversionOutOfRange(f64),

    #[error("stationary formulas are singular at d0 = 0")]
    ZeroInversion,

    #[error("stationarity system is singular at d0 = {0}")]
    SingularStationarySystem(f64),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("no discriminant sign change in d0 interval [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("eigenvalues coalesce at d0 = {d0} but eigenvector overlap {overlap} < 0.999; diabolic-point suspect")]
    DiabolicSuspect { d0: f64, overlap: f64 },

    #[error("rank-deficient eigenproblem: both null-space methods failed")]
    RankDeficient,

    #[error("density matrix positivity violated: min eigenvalue {0}")]
    PositivityViolation(f64),

    #[error("dissipator rate audit failed: worst relative error {0:e} exceeds the gate")]
    OracleMismatch(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
