//! Four-parameter kappa distribution: evaluation, L-moment and (penalized)
//! maximum likelihood estimation, goodness of fit, and the machinery for
//! Monte Carlo comparisons of those estimators.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the command
//! line and parallel execution live in the `kappa4` companion crate.
//!
//! * [`distribution`]: density, distribution and quantile functions, support,
//!   sampling and special-case classification.
//! * [`lmoments`]: sample and population L-moments and the L-moment estimator.
//! * [`penalties`]: penalty functions on the two shape parameters and their
//!   18 joint combinations.
//! * [`likelihood`]: negative log-likelihood, maximum (penalized) likelihood
//!   fits, standard errors and return levels.
//! * [`profile`]: profile-likelihood confidence intervals for return levels.
//! * [`gof`]: MPAE, Anderson–Darling and Kolmogorov–Smirnov statistics with
//!   parametric-bootstrap p-values.
//! * [`study`]: replicated simulation studies reporting relative bias and
//!   relative RMSE of quantile estimates.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod distribution;
pub mod error;
pub mod estimate;
pub mod gof;
pub mod likelihood;
pub mod lmoments;
pub mod math;
pub mod optimize;
pub mod penalties;
pub mod profile;
pub mod rng;
pub mod study;

pub use distribution::{
    classify_special_case, BranchPolicy, Endpoint, K4Params, Kappa4, SpecialCase, Support,
};
pub use error::{Error, Result};
pub use estimate::Method;
pub use likelihood::{FitResult, MethodTag, OptimizerConfig, StartStrategy};
pub use lmoments::{FailureReason, LMomentSet, LmeOutcome};
pub use penalties::{HPenalty, KPenalty, PenaltyCombo};
