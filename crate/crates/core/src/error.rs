use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),
    #[error("degenerate transverse-field direction (H2^2+H3^2 below floor)")]
    DegenerateDirection,
    #[error("index contract violated: {0}")]
    IndexContract(String),
    #[error("eigenvalue oracle failed: {0}")]
    OracleFailure(String),
    #[error("finite-difference stencil crosses an eigenvalue-order change")]
    StencilCrossing,
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),
    #[error("coefficient singularity detected: {0}")]
    SingularityDetected(String),
    #[error("state left the hyperbolicity ball (|Phi| = {0:.3e} > 2*delta = {1:.3e})")]
    BallExit(f64, f64),
    #[error("CFL violation: dt = {0:.3e} exceeds limit {1:.3e}")]
    CflViolation(f64, f64),
    #[error("non-finite state encountered at t = {0:.6}; post-shock continuation refused")]
    NonFiniteState(f64),
    #[error("characteristic-speed groups are not separated (sigma = {0:.3e} <= 0)")]
    GroupSeparation(f64),
    #[error("no shock within the configured time horizon (t_max = {0})")]
    ShockTimeout(f64),
    #[error("Riccati bound domain error: Gamma*W0*t = {0:.3} >= 1")]
    RiccatiDomain(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
