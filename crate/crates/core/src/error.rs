use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong in the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A point had the wrong number of coordinates.
    DimensionMismatch { expected: usize, found: usize },
    /// A parameter violated its documented range.
    InvalidParameter { name: &'static str, reason: &'static str },
    /// A coordinate was NaN or infinite.
    NonFinite,
    /// A starting point (or a bumped start) is not in the closed domain.
    OutsideDomain { particle: usize },
    /// The coefficient field carries no Jacobians.
    MissingGradients,
    /// A particle index beyond the ensemble.
    ParticleOutOfRange { index: usize, len: usize },
    /// A time index beyond the grid, or `s > t`.
    StepOutOfRange { index: usize, n_steps: usize },
    /// Positions at this step were not kept by the recording policy.
    NotRecorded { step: usize },
    /// The operation is only defined for another domain kind.
    UnsupportedDomain(&'static str),
    /// Measure and flow disagree on the particles.
    IndexMismatch,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::NonFinite => f.write_str("non-finite coordinate"),
            Error::OutsideDomain { particle } => {
                write!(f, "point {particle} lies outside the closed domain")
            }
            Error::MissingGradients => f.write_str("coefficient field has no gradients"),
            Error::ParticleOutOfRange { index, len } => {
                write!(f, "particle index {index} out of range (ensemble of {len})")
            }
            Error::StepOutOfRange { index, n_steps } => {
                write!(f, "time index {index} out of range (grid has {n_steps} steps)")
            }
            Error::NotRecorded { step } => write!(f, "step {step} was not recorded"),
            Error::UnsupportedDomain(what) => write!(f, "unsupported domain: {what}"),
            Error::IndexMismatch => f.write_str("measure points do not match the flow's initial points"),
        }
    }
}

impl core::error::Error for Error {}
