use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside its physical domain.
    InvalidParameter { name: &'static str, value: f64 },
    /// The time grid would need more steps than the integrator allows.
    StepOverflow { steps: u64 },
    /// The QR iteration failed to converge while diagonalizing a generator.
    EigenNoConvergence,
    /// A matrix that had to be inverted is numerically singular.
    Singular,
    /// A stationary mode carries weight into an unbounded time integral.
    DivergentIntegral { weight: f64 },
    /// Doubling the real-time horizon moved the normalized matrix too much.
    NonConvergence { max_change: f64 },
    /// A two-photon matrix is not a valid normalized density matrix.
    NotADensityMatrix { reason: &'static str },
    /// A closed-form oracle was handed a matrix outside its domain.
    NotXShaped { leakage: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, value } => {
                write!(f, "invalid parameter {name} = {value}")
            }
            Error::StepOverflow { steps } => {
                write!(f, "time grid requires {steps} steps (limit 1e8)")
            }
            Error::EigenNoConvergence => f.write_str("eigenvalue iteration did not converge"),
            Error::Singular => f.write_str("matrix is numerically singular"),
            Error::DivergentIntegral { weight } => {
                write!(f, "stationary mode with weight {weight:e} makes the integral diverge")
            }
            Error::NonConvergence { max_change } => write!(
                f,
                "real-time integral not converged: doubling t_max changed an element by {max_change:e}"
            ),
            Error::NotADensityMatrix { reason } => write!(f, "not a density matrix: {reason}"),
            Error::NotXShaped { leakage } => {
                write!(f, "matrix is not X-shaped (off-X magnitude {leakage:e})")
            }
        }
    }
}

impl core::error::Error for Error {}
