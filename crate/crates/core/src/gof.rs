//! Goodness-of-fit statistics.
//!
//! AD and KS use their fully specified forms with the fitted parameters
//! plugged in. Because the parameters are estimated, the classical null
//! tables do not apply; p-values come from a parametric bootstrap that refits
//! every synthetic sample with the same estimator.

use alloc::vec::Vec;

use crate::distribution::{K4Params, Kappa4};
use crate::error::{input_err, Result};
use crate::estimate::Estimator;
use crate::math;
use crate::rng;

/// Probabilities below/above which cdf values are clamped inside the AD logs.
pub const AD_CLAMP: f64 = 1e-12;

fn sorted(data: &[f64]) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(input_err!("data must not be empty"));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(input_err!("data must be finite"));
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Plotting positions `(i - 0.35) / n` for `i = 1..=n`.
pub fn plotting_positions(n: usize) -> Vec<f64> {
    (1..=n).map(|i| (i as f64 - 0.35) / n as f64).collect()
}

/// Mean absolute difference between order statistics and fitted quantiles
/// at the plotting positions.
pub fn mpae(data: &[f64], params: &K4Params) -> Result<f64> {
    let x = sorted(data)?;
    let dist = params.dist();
    let n = x.len() as f64;
    let mut total = 0.0;
    for (xi, p) in x.iter().zip(plotting_positions(x.len())) {
        total += math::abs(xi - dist.quantile(p)?);
    }
    Ok(total / n)
}

/// Anderson–Darling statistic and whether any cdf value had to be clamped
/// (i.e. an observation sits at or beyond the support).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdStatistic {
    pub value: f64,
    pub clamped: bool,
}

pub fn ad_statistic(data: &[f64], params: &K4Params) -> Result<AdStatistic> {
    let x = sorted(data)?;
    if x.len() < 2 {
        return Err(input_err!("Anderson-Darling needs at least 2 observations"));
    }
    let dist = params.dist();
    let mut clamped = false;
    let f: Vec<f64> = x
        .iter()
        .map(|&xi| {
            let v = dist.cdf_unchecked(xi);
            let c = v.clamp(AD_CLAMP, 1.0 - AD_CLAMP);
            clamped |= c != v;
            c
        })
        .collect();
    let n = f.len();
    let mut s = 0.0;
    for i in 0..n {
        let w = (2 * i + 1) as f64;
        s += w * (math::ln(f[i]) + math::ln_1p(-f[n - 1 - i]));
    }
    Ok(AdStatistic {
        value: -(n as f64) - s / n as f64,
        clamped,
    })
}

/// Kolmogorov–Smirnov distance between the empirical and fitted cdf.
pub fn ks_statistic(data: &[f64], params: &K4Params) -> Result<f64> {
    let x = sorted(data)?;
    Ok(ks_sorted(&x, &params.dist()))
}

fn ks_sorted(x: &[f64], dist: &Kappa4) -> f64 {
    let n = x.len() as f64;
    x.iter().enumerate().fold(0.0f64, |d, (i, &xi)| {
        let f = dist.cdf_unchecked(xi);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}

/// `(1 + #{b >= observed}) / (B + 1)`.
pub fn bootstrap_pvalue(observed: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|&&b| b >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

/// Parametric-bootstrap p-values for AD and KS.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BootstrapPvalues {
    pub ad: f64,
    pub ks: f64,
    /// Replicates requested.
    pub reps: usize,
    /// Replicates whose refit failed and were excluded.
    pub failures: usize,
    /// False when more than 20% of refits failed.
    pub reliable: bool,
}

pub const MIN_BOOTSTRAP_REPS: usize = 99;

/// Fit `data` with `estimator`, then draw `reps` samples of the same size from
/// the fit, refit each, and compare statistics.
pub fn bootstrap_pvalues<E: Estimator + ?Sized>(
    data: &[f64],
    estimator: &E,
    reps: usize,
    seed: u64,
) -> Result<BootstrapPvalues> {
    let fitted = estimator
        .estimate(data)
        .ok_or_else(|| input_err!("estimator `{}` failed on the observed data", estimator.label()))?;
    bootstrap_from_fit(data, &fitted, estimator, reps, seed)
}

/// Bootstrap around parameters already fitted to `data` by `estimator`.
pub fn bootstrap_from_fit<E: Estimator + ?Sized>(
    data: &[f64],
    fitted: &K4Params,
    estimator: &E,
    reps: usize,
    seed: u64,
) -> Result<BootstrapPvalues> {
    check_bootstrap_reps(reps)?;
    let observed_ad = ad_statistic(data, fitted)?.value;
    let observed_ks = ks_statistic(data, fitted)?;
    let replicates: Vec<Option<(f64, f64)>> = (0..reps)
        .map(|b| bootstrap_replicate(fitted, data.len(), estimator, seed, b))
        .collect();
    Ok(summarize_bootstrap(observed_ad, observed_ks, &replicates))
}

pub fn check_bootstrap_reps(reps: usize) -> Result<()> {
    if reps < MIN_BOOTSTRAP_REPS {
        return Err(input_err!(
            "bootstrap needs at least {MIN_BOOTSTRAP_REPS} replicates, got {reps}"
        ));
    }
    Ok(())
}

/// `(AD, KS)` of replicate `b`: a size-`n` sample from `fitted` drawn from
/// random substream `b` of `seed`, refitted with `estimator`. `None` when the
/// refit fails.
pub fn bootstrap_replicate<E: Estimator + ?Sized>(
    fitted: &K4Params,
    n: usize,
    estimator: &E,
    seed: u64,
    b: usize,
) -> Option<(f64, f64)> {
    let mut rng = rng::substream(seed, b as u64);
    let synthetic = fitted.dist().sample_with(&mut rng, n);
    let refit = estimator.estimate(&synthetic)?;
    let ad = ad_statistic(&synthetic, &refit).ok()?.value;
    let ks = ks_statistic(&synthetic, &refit).ok()?;
    Some((ad, ks))
}

/// Combine per-replicate statistics (`None` = failed refit) into p-values.
pub fn summarize_bootstrap(observed_ad: f64, observed_ks: f64, replicates: &[Option<(f64, f64)>]) -> BootstrapPvalues {
    let ok: Vec<(f64, f64)> = replicates.iter().flatten().copied().collect();
    let failures = replicates.len() - ok.len();
    let ads: Vec<f64> = ok.iter().map(|r| r.0).collect();
    let kss: Vec<f64> = ok.iter().map(|r| r.1).collect();
    BootstrapPvalues {
        ad: bootstrap_pvalue(observed_ad, &ads),
        ks: bootstrap_pvalue(observed_ks, &kss),
        reps: replicates.len(),
        failures,
        reliable: (failures as f64) <= 0.2 * replicates.len() as f64,
    }
}

/// MPAE, AD and KS for one fit, with optional bootstrap p-values.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GofReport {
    pub mpae: f64,
    pub ad: f64,
    pub ad_clamped: bool,
    pub ks: f64,
    pub ad_pvalue: Option<f64>,
    pub ks_pvalue: Option<f64>,
    pub bootstrap_reps: usize,
    pub bootstrap_failures: usize,
}

impl GofReport {
    pub fn new(data: &[f64], params: &K4Params) -> Result<Self> {
        let ad = ad_statistic(data, params)?;
        Ok(Self {
            mpae: mpae(data, params)?,
            ad: ad.value,
            ad_clamped: ad.clamped,
            ks: ks_statistic(data, params)?,
            ad_pvalue: None,
            ks_pvalue: None,
            bootstrap_reps: 0,
            bootstrap_failures: 0,
        })
    }

    pub fn with_bootstrap(mut self, p: &BootstrapPvalues) -> Self {
        self.ad_pvalue = Some(p.ad);
        self.ks_pvalue = Some(p.ks);
        self.bootstrap_reps = p.reps;
        self.bootstrap_failures = p.failures;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> K4Params {
        K4Params::new(0.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn mpae_cases() {
        let p = K4Params::new(0.0, 1.0, -0.2, -0.2).unwrap();
        let d = p.dist();
        let n = 7;
        let exact: Vec<f64> = plotting_positions(n).iter().map(|&q| d.quantile(q).unwrap()).collect();
        assert!(mpae(&exact, &p).unwrap() < 1e-14);
        let shifted: Vec<f64> = exact.iter().map(|x| x + 0.3).collect();
        assert!((mpae(&shifted, &p).unwrap() - 0.3).abs() < 1e-14);
        let v = mpae(&[0.9, 0.2, 0.5], &uniform()).unwrap();
        let expected = ((0.2f64 - 0.65 / 3.0).abs() + (0.5f64 - 1.65 / 3.0).abs() + (0.9f64 - 2.65 / 3.0).abs()) / 3.0;
        assert!((v - expected).abs() < 1e-15);
        assert!(mpae(&[], &uniform()).is_err());
    }

    #[test]
    fn ad_two_points() {
        // -2 - (1/2)[ (ln 1/3 + ln 1/3) + 3 (ln 2/3 + ln 2/3) ]
        let a = ad_statistic(&[2.0 / 3.0, 1.0 / 3.0], &uniform()).unwrap();
        assert!((a.value - 0.315_007_612_992_602_8).abs() < 1e-14, "{a:?}");
        assert!(!a.clamped);
        assert!(ad_statistic(&[0.5], &uniform()).is_err());
    }

    #[test]
    fn ad_flags_points_outside_support() {
        let a = ad_statistic(&[0.2, 0.5, 1.5], &uniform()).unwrap();
        assert!(a.clamped && a.value.is_finite());
    }

    #[test]
    fn ks_cases() {
        let n = 8;
        let data: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        assert!((ks_statistic(&data, &uniform()).unwrap() - 0.5 / n as f64).abs() < 1e-15);
        assert!((ks_statistic(&[0.5], &uniform()).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pvalue_counting() {
        assert!((bootstrap_pvalue(0.1, &[0.5; 99]) - 1.0).abs() < 1e-15);
        assert!((bootstrap_pvalue(1.0, &[0.5; 99]) - 0.01).abs() < 1e-15);
        let s = summarize_bootstrap(1.0, 1.0, &[None, Some((2.0, 0.5)), Some((0.5, 0.5))]);
        assert_eq!(s.failures, 1);
        assert!(!s.reliable);
        assert!((s.ad - 2.0 / 3.0).abs() < 1e-15);
    }
}
