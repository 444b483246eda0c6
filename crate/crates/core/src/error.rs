use alloc::string::String;

/// Errors raised by the distribution, estimation and simulation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Scale parameter is zero, negative, or not finite.
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    /// A location or shape parameter is NaN or infinite.
    #[error("parameter `{name}` must be finite, got {value}")]
    NonFiniteParameter { name: &'static str, value: f64 },
    /// Caller supplied an argument outside the operation's domain.
    #[error("invalid input: {0}")]
    Input(String),
    /// Data have no dispersion, so scale-type statistics are undefined.
    #[error("data have zero dispersion")]
    Degenerate,
    /// The population L-moments of the requested distribution are infinite.
    #[error("L-moments do not exist for k = {k}, h = {h}")]
    NonexistentMoments { k: f64, h: f64 },
    /// An operation needed a converged fit and did not get one.
    #[error("the fit did not converge")]
    NotConverged,
    /// Profiling reached a lower objective than the fit it started from, so
    /// the fit is only a local optimum and the interval is undefined.
    #[error("the profile found a lower objective ({objective}) at return level {return_level} than the fit; the fit is a local optimum only")]
    LocalOptimum { return_level: f64, objective: f64 },
    /// A configuration is internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! input_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Input(alloc::format!($($arg)*))
    };
}
pub(crate) use input_err;
