//! Uniform handle over the three estimator families.

use alloc::string::String;
use alloc::vec::Vec;

use crate::distribution::K4Params;
use crate::error::Result;
use crate::likelihood::{self, FitResult, MethodTag, OptimizerConfig};
use crate::lmoments::{self, FailureReason, LmeOutcome};
use crate::penalties::{enumerate_combos, PenaltyCombo};

/// An estimation method.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    Mle,
    Lme,
    Mple(PenaltyCombo),
}

impl Method {
    /// `MLE`, `LME`, or the combination name.
    pub fn name(&self) -> String {
        self.tag().name()
    }

    pub fn tag(&self) -> MethodTag {
        match self {
            Method::Mle => MethodTag::Mle,
            Method::Lme => MethodTag::Lme,
            Method::Mple(c) => MethodTag::Mple(*c),
        }
    }

    /// Parses `mle`, `lme` (case-insensitive) or a combination name.
    pub fn parse(name: &str) -> Result<Self> {
        let trimmed = name.trim();
        if trimmed.eq_ignore_ascii_case("mle") {
            Ok(Method::Mle)
        } else if trimmed.eq_ignore_ascii_case("lme") {
            Ok(Method::Lme)
        } else {
            PenaltyCombo::from_name(trimmed).map(Method::Mple)
        }
    }

    /// MLE, LME and the 18 penalized estimators.
    pub fn all() -> Vec<Method> {
        let mut v = alloc::vec![Method::Mle, Method::Lme];
        v.extend(enumerate_combos().into_iter().map(Method::Mple));
        v
    }

    /// Fit `data`. `lme` is the L-moment outcome on the same data when the
    /// caller already has it; it is reused as a start point.
    pub fn fit_with(
        &self,
        data: &[f64],
        cfg: &OptimizerConfig,
        lme: Option<&LmeOutcome>,
    ) -> Result<MethodFit> {
        let (result, failure) = match self {
            Method::Lme => {
                let outcome = match lme {
                    Some(o) => o.clone(),
                    None => lmoments::fit_lme(data)?,
                };
                match outcome {
                    LmeOutcome::Fitted(r) => (Some(r), FailureReason::None),
                    LmeOutcome::Failed(reason) => (None, reason),
                }
            }
            Method::Mle => {
                let mut r = likelihood::fit_penalized(data, &PenaltyCombo::none(), cfg, lme)?;
                r.method = MethodTag::Mle;
                (Some(r), FailureReason::None)
            }
            Method::Mple(combo) => (
                Some(likelihood::fit_penalized(data, combo, cfg, lme)?),
                FailureReason::None,
            ),
        };
        Ok(MethodFit {
            method: *self,
            result,
            lme_failure: failure,
        })
    }

    pub fn fit(&self, data: &[f64], cfg: &OptimizerConfig) -> Result<MethodFit> {
        self.fit_with(data, cfg, None)
    }

    /// Penalty combination whose objective this method optimizes, for
    /// standard errors and profiles. LME is treated as unpenalized.
    pub fn combo(&self) -> PenaltyCombo {
        match self {
            Method::Mple(c) => *c,
            _ => PenaltyCombo::none(),
        }
    }
}

/// One method's fit of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodFit {
    pub method: Method,
    /// Present unless the L-moment estimator failed.
    pub result: Option<FitResult>,
    pub lme_failure: FailureReason,
}

impl MethodFit {
    /// Parameters of a successful (converged) fit.
    pub fn usable_params(&self) -> Option<K4Params> {
        self.result
            .as_ref()
            .filter(|r| r.converged)
            .map(|r| r.params)
    }

    pub fn converged(&self) -> bool {
        self.usable_params().is_some()
    }
}

/// Fit several methods to the same data, computing the L-moment estimate
/// once and sharing it.
pub fn fit_methods(data: &[f64], methods: &[Method], cfg: &OptimizerConfig) -> Result<Vec<MethodFit>> {
    let lme = lmoments::fit_lme(data)?;
    methods
        .iter()
        .map(|m| m.fit_with(data, cfg, Some(&lme)))
        .collect()
}

/// Something that maps a sample to parameter estimates; used by the
/// simulation and bootstrap harnesses so tests can inject stubs.
pub trait Estimator {
    fn label(&self) -> String;
    fn estimate(&self, data: &[f64]) -> Option<K4Params>;
}

/// A [`Method`] bound to an optimizer configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodEstimator {
    pub method: Method,
    pub cfg: OptimizerConfig,
}

impl Estimator for MethodEstimator {
    fn label(&self) -> String {
        self.method.name()
    }

    fn estimate(&self, data: &[f64]) -> Option<K4Params> {
        self.method.fit(data, &self.cfg).ok()?.usable_params()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!(Method::parse("mle").unwrap(), Method::Mle);
        assert_eq!(Method::parse("LME").unwrap(), Method::Lme);
        assert_eq!(Method::parse("MPLE.MSo(k)MSo(h)").unwrap().name(), "MPLE.MSo(k)MSo(h)");
        assert!(Method::parse("MPLE.XX(k)").is_err());
        assert_eq!(Method::all().len(), 20);
    }
}
