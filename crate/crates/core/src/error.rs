use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("exponential overflow evaluating the nonlinearity at s = {0}")]
    Overflow(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("fixed-point map is not contracting: measured factor {factor:.4} (threshold {threshold}); increase lambda")]
    NonContraction { factor: f64, threshold: f64 },
    #[error("fixed-point iteration did not converge in {iterations} iterations (last difference {last:e})")]
    NoConvergence { iterations: usize, last: f64 },
    #[error("tail remainder {bound:e} exceeds budget {budget:e}; increase rho_max")]
    TailBound { bound: f64, budget: f64 },
    #[error("quadrature did not converge on [{a}, {b}] (error estimate {err:e})")]
    Quadrature { a: f64, b: f64, err: f64 },
    #[error("step size underflow at r = {r}")]
    StepUnderflow { r: f64 },
    #[error("profile blew up at r = {r} (u = {u}, du = {du})")]
    BlowUp { r: f64, u: f64, du: f64 },
    #[error("no zero crossing before r = {0}")]
    NoZero(f64),
    #[error("bisection failed: {0}")]
    Bisection(String),
    #[error("profile check failed: {0}")]
    Profile(String),
    #[error("iterate left the ball: weighted norm {norm} > 1")]
    LeftBall { norm: f64 },
    #[error("envelope violated at t = {t:e}, r = {r:e}: ratio {ratio}")]
    Envelope { t: f64, r: f64, ratio: f64 },
    #[error("{0} out of range")]
    OutOfRange(String),
    #[error("malformed data: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
