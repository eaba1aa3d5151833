use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no convergence: {0}")]
    NonConvergent(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("finite-difference stencil left the domain at x = {0}")]
    StencilOutOfDomain(f64),

    #[error("the origin has no action-angle coordinates")]
    OriginState,

    #[error("orbit blew up at t = {t} (|x| + |y| = {amplitude:e})")]
    BlowUp { t: f64, amplitude: f64 },

    #[error("angle is not monotone along the orbit near t = {t}; energy too low")]
    AngleNotMonotone { t: f64 },

    #[error("orbit came too close to the origin near t = {t}")]
    OriginApproach { t: f64 },

    #[error("degenerate least-squares fit")]
    DegenerateFit,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
