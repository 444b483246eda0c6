//! Likelihood-based estimation.
//!
//! For `k != 0`, `h != 0` the negative log-likelihood is
//!
//! ```text
//! -l = n ln sigma - (1 - h) sum ln F(x_i) - ((1 - k) / k) sum ln G_i,
//! G_i = 1 - k (x_i - mu) / sigma
//! ```
//!
//! and the `k = 0` / `h = 0` limits follow from summing the log-density.
//! Points where `G_i <= 0` or `F(x_i)` leaves `(0, 1)` make the objective
//! `+inf`, which is the barrier the optimizer works against. The penalized
//! objective subtracts `ln p(k, h)`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::distribution::{locate, std_ln_pdf, BranchPolicy, K4Params, Kappa4, Position};
use crate::error::{input_err, Error, Result};
use crate::lmoments::{self, LmeOutcome};
use crate::math;
use crate::optimize::{self, NelderMeadOptions};
use crate::penalties::PenaltyCombo;

/// How the first simplex is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StartStrategy {
    /// L-moment estimate, falling back to the moment and grid starts.
    LmeStart,
    /// Gumbel method-of-moments start, falling back to the grid start.
    MomentStart,
    /// Best point of a coarse shape grid, falling back to the moment start.
    GridStart,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerConfig {
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub start_strategy: StartStrategy,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-10,
            max_iterations: 2000,
            restarts: 3,
            start_strategy: StartStrategy::LmeStart,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0) {
            return Err(Error::Config("rel_tolerance must be positive".into()));
        }
        if self.restarts < 1 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which estimator produced a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MethodTag {
    Mle,
    Lme,
    Mple(PenaltyCombo),
}

impl MethodTag {
    pub fn name(&self) -> String {
        match self {
            MethodTag::Mle => "MLE".into(),
            MethodTag::Lme => "LME".into(),
            MethodTag::Mple(c) => c.name(),
        }
    }
}

/// Outcome of one estimation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub params: K4Params,
    /// Standard errors of `(mu, sigma, k, h)`; `None` when the observed
    /// information is not positive definite or was not computed.
    pub se: Option<[f64; 4]>,
    pub nll: f64,
    pub penalized_nll: f64,
    pub converged: bool,
    pub iterations: usize,
    pub method: MethodTag,
}

/// Standardized residuals, `G_i` and cdf values at the data.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodWorkspace {
    pub y: Vec<f64>,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
}

impl LikelihoodWorkspace {
    pub fn new(params: &K4Params, data: &[f64]) -> Self {
        let dist = params.dist();
        let y: Vec<f64> = data
            .iter()
            .map(|x| (x - params.mu()) / params.sigma())
            .collect();
        let g = y.iter().map(|y| 1.0 - params.k() * y).collect();
        let f = data.iter().map(|&x| dist.cdf_unchecked(x)).collect();
        Self { y, g, f }
    }

    /// `G_i > 0` and `0 < F_i < 1` for every observation.
    pub fn is_feasible(&self) -> bool {
        self.g.iter().all(|&g| g > 0.0) && self.f.iter().all(|&f| f > 0.0 && f < 1.0)
    }
}

fn check_data(data: &[f64], min_len: usize) -> Result<()> {
    if data.len() < min_len {
        return Err(input_err!(
            "need at least {min_len} observations, got {}",
            data.len()
        ));
    }
    if let Some(x) = data.iter().find(|x| !x.is_finite()) {
        return Err(input_err!("data must be finite, found {x}"));
    }
    Ok(())
}

#[inline]
pub(crate) fn nll_raw(mu: f64, sigma: f64, k: f64, h: f64, data: &[f64], policy: &BranchPolicy) -> f64 {
    if !(sigma > 0.0) || !sigma.is_finite() || !k.is_finite() || !h.is_finite() || !mu.is_finite() {
        return f64::INFINITY;
    }
    let inv = 1.0 / sigma;
    let mut sum = 0.0;
    for &x in data {
        let l = std_ln_pdf(k, h, (x - mu) * inv, policy);
        if !(l > f64::NEG_INFINITY) {
            return f64::INFINITY;
        }
        sum += l;
    }
    let v = data.len() as f64 * math::ln(sigma) - sum;
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

pub(crate) fn neg_log_likelihood_unchecked(params: &K4Params, data: &[f64], policy: &BranchPolicy) -> f64 {
    nll_raw(params.mu(), params.sigma(), params.k(), params.h(), data, policy)
}

/// Negative log-likelihood; `+inf` when any observation is outside the
/// support.
pub fn neg_log_likelihood(params: &K4Params, data: &[f64]) -> Result<f64> {
    check_data(data, 1)?;
    Ok(neg_log_likelihood_unchecked(params, data, &BranchPolicy::default()))
}

/// `-ln L - ln p(k, h)`.
pub fn penalized_nll(params: &K4Params, data: &[f64], combo: &PenaltyCombo) -> Result<f64> {
    check_data(data, 1)?;
    Ok(penalized_raw(
        params.mu(),
        params.sigma(),
        params.k(),
        params.h(),
        data,
        combo,
        &BranchPolicy::default(),
    ))
}

#[inline]
pub(crate) fn penalized_raw(
    mu: f64,
    sigma: f64,
    k: f64,
    h: f64,
    data: &[f64],
    combo: &PenaltyCombo,
    policy: &BranchPolicy,
) -> f64 {
    let lp = combo.ln_value(k, h);
    if lp == f64::NEG_INFINITY || lp.is_nan() {
        return f64::INFINITY;
    }
    nll_raw(mu, sigma, k, h, data, policy) - lp
}

/// Maximum likelihood fit.
pub fn fit_mle(data: &[f64], cfg: &OptimizerConfig) -> Result<FitResult> {
    fit_penalized(data, &PenaltyCombo::none(), cfg, None).map(|mut r| {
        r.method = MethodTag::Mle;
        r
    })
}

/// Maximum penalized likelihood fit for one penalty combination.
pub fn fit_mple(data: &[f64], combo: &PenaltyCombo, cfg: &OptimizerConfig) -> Result<FitResult> {
    fit_penalized(data, combo, cfg, None)
}

/// Shared driver. `lme_hint` lets callers that already ran the L-moment
/// estimator on `data` skip recomputing it for the start point. The result
/// is tagged `Mple(combo)`; callers relabel plain likelihood fits.
pub fn fit_penalized(
    data: &[f64],
    combo: &PenaltyCombo,
    cfg: &OptimizerConfig,
    lme_hint: Option<&LmeOutcome>,
) -> Result<FitResult> {
    check_data(data, 5)?;
    cfg.validate()?;
    combo.validate()?;
    let policy = BranchPolicy::default();
    let objective = |t: &[f64; 4]| penalized_raw(t[0], math::exp(t[1]), t[2], t[3], data, combo, &policy);

    let start = choose_start(data, combo, cfg, lme_hint, &objective)?;
    let Some(start) = start else {
        // nothing feasible: report the moment start, unconverged
        let p = moment_start(data)?;
        let nll = neg_log_likelihood_unchecked(&p, data, &policy);
        return Ok(FitResult {
            params: p,
            se: None,
            nll,
            penalized_nll: penalized_raw(p.mu(), p.sigma(), p.k(), p.h(), data, combo, &policy),
            converged: false,
            iterations: 0,
            method: MethodTag::Mple(*combo),
        });
    };

    // Optimize on standardized data so the result does not depend on the
    // data's location and units; shapes are unaffected.
    let (center, spread) = standardization(data);
    let z: Vec<f64> = data.iter().map(|x| (x - center) / spread).collect();
    let z_objective = |t: &[f64; 4]| penalized_raw(t[0], math::exp(t[1]), t[2], t[3], &z, combo, &policy);
    let z_start = [(start.mu() - center) / spread, math::ln(start.sigma() / spread), start.k(), start.h()];
    let (zt, _, iterations, converged) = minimize(&z_objective, z_start, start.sigma() / spread, cfg);
    let theta = [center + spread * zt[0], zt[1] + math::ln(spread), zt[2], zt[3]];
    let params = from_theta(&theta)?;
    let f = objective(&theta);
    let converged = converged && f.is_finite();
    let nll = neg_log_likelihood_unchecked(&params, data, &policy);
    let se = if converged {
        standard_errors_at(&params, data, combo)
    } else {
        None
    };
    Ok(FitResult {
        params,
        se,
        nll,
        penalized_nll: f,
        converged,
        iterations,
        method: MethodTag::Mple(*combo),
    })
}

fn to_theta(p: &K4Params) -> [f64; 4] {
    [p.mu(), math::ln(p.sigma()), p.k(), p.h()]
}

fn from_theta(t: &[f64; 4]) -> Result<K4Params> {
    K4Params::new(t[0], math::exp(t[1]), t[2], t[3])
}

/// Nelder–Mead with restarts, then a quasi-Newton polish. Returns
/// `(theta, f, iterations, converged)`.
pub(crate) fn minimize<const N: usize, F>(
    objective: &F,
    x0: [f64; N],
    scale: f64,
    cfg: &OptimizerConfig,
) -> ([f64; N], f64, usize, bool)
where
    F: Fn(&[f64; N]) -> f64,
{
    let opts = NelderMeadOptions {
        max_iterations: cfg.max_iterations,
        rel_tolerance: cfg.rel_tolerance,
        x_tolerance: 1e-8,
    };
    let mut x = x0;
    let mut f = objective(&x);
    let mut iterations = 0;
    let mut last_converged = false;
    let mut stable = cfg.restarts == 1;
    for round in 0..cfg.restarts {
        let m = optimize::nelder_mead(objective, x, initial_step::<N>(scale), &opts);
        iterations += m.iterations;
        last_converged = m.converged;
        let improvement = f - m.f;
        if m.f <= f {
            x = m.x;
            f = m.f;
        }
        if round > 0 && improvement <= 1e-8 * (1.0 + math::abs(f)) {
            stable = true;
            break;
        }
    }
    let polished = optimize::bfgs_polish(objective, x, 200);
    iterations += polished.iterations;
    if polished.f < f {
        x = polished.x;
        f = polished.f;
    }
    let converged = f.is_finite() && last_converged && stable;
    (x, f, iterations, converged)
}

/// Simplex edges: location in data units, the rest dimensionless.
fn initial_step<const N: usize>(scale: f64) -> [f64; N] {
    let mut s = [0.1; N];
    if N == 4 {
        s[0] = 0.25 * scale;
        s[1] = 0.25;
        s[2] = 0.1;
        s[3] = 0.2;
    } else {
        // profile problems: (ln sigma, k, h)
        for (i, v) in s.iter_mut().enumerate() {
            *v = if i == 0 { 0.2 } else { 0.1 };
        }
    }
    s
}

/// Sample mean and standard deviation, or `(0, 1)` for constant data.
fn standardization(data: &[f64]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    if var > 0.0 && var.is_finite() {
        (mean, math::sqrt(var))
    } else {
        (0.0, 1.0)
    }
}

fn moment_start(data: &[f64]) -> Result<K4Params> {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::Degenerate);
    }
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let sigma = math::sqrt(6.0 * var) / core::f64::consts::PI;
    K4Params::new(mean - EULER_GAMMA * sigma, sigma, 0.0, 0.0)
}

fn grid_start<F: Fn(&[f64; 4]) -> f64>(data: &[f64], combo: &PenaltyCombo, objective: &F) -> Option<K4Params> {
    let l = lmoments::sample_lmoments(data).ok()?;
    let mut best: Option<(f64, K4Params)> = None;
    for k in [-0.4, -0.2, 0.0, 0.2, 0.4] {
        for h in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let (k, h) = clamp_shapes(k, h, combo);
            let Some(std) = lmoments::standard_location_scale(k, h) else {
                continue;
            };
            let sigma = l.lambda2 / std.1;
            let Ok(p) = K4Params::new(l.lambda1 - sigma * std.0, sigma, k, h) else {
                continue;
            };
            let v = objective(&to_theta(&p));
            if v.is_finite() && best.map_or(true, |(b, _)| v < b) {
                best = Some((v, p));
            }
        }
    }
    best.map(|(_, p)| p)
}

fn clamp_into(x: f64, (lo, hi): (f64, f64)) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let margin = 0.05 * (hi - lo);
            x.clamp(lo + margin, hi - margin)
        }
        (true, false) => x.max(lo + 0.1),
        (false, true) => x.min(hi - 0.1),
        (false, false) => x,
    }
}

fn clamp_shapes(k: f64, h: f64, combo: &PenaltyCombo) -> (f64, f64) {
    (
        clamp_into(k, combo.k_pen.support()),
        clamp_into(h, combo.h_pen.support()),
    )
}

fn choose_start<F: Fn(&[f64; 4]) -> f64>(
    data: &[f64],
    combo: &PenaltyCombo,
    cfg: &OptimizerConfig,
    lme_hint: Option<&LmeOutcome>,
    objective: &F,
) -> Result<Option<K4Params>> {
    let feasible = |p: K4Params| objective(&to_theta(&p)).is_finite().then_some(p);
    let lme = || -> Option<K4Params> {
        let p = match lme_hint {
            Some(outcome) => outcome.params()?,
            None => lmoments::fit_lme(data).ok()?.params()?,
        };
        let (k, h) = clamp_shapes(p.k(), p.h(), combo);
        feasible(K4Params::new(p.mu(), p.sigma(), k, h).ok()?)
    };
    let moment = || -> Option<K4Params> { feasible(moment_start(data).ok()?) };
    let grid = || grid_start(data, combo, objective);

    // degenerate data surface as an error rather than an unconverged fit
    moment_start(data)?;
    Ok(match cfg.start_strategy {
        StartStrategy::LmeStart => lme().or_else(moment).or_else(grid),
        StartStrategy::MomentStart => moment().or_else(grid),
        StartStrategy::GridStart => grid().or_else(moment),
    })
}

/// Observed-information covariance of `(mu, sigma, k, h)` for the penalized
/// objective at `params`.
pub fn covariance(params: &K4Params, data: &[f64], combo: &PenaltyCombo) -> Option<[[f64; 4]; 4]> {
    let policy = BranchPolicy::default();
    let f = |t: &[f64; 4]| penalized_raw(t[0], t[1], t[2], t[3], data, combo, &policy);
    let h = optimize::hessian(f, &params.to_array())?;
    optimize::spd_inverse(&h)
}

fn standard_errors_at(params: &K4Params, data: &[f64], combo: &PenaltyCombo) -> Option<[f64; 4]> {
    covariance(params, data, combo).map(|c| diag_sqrt(&c))
}

fn diag_sqrt<const N: usize>(c: &[[f64; N]; N]) -> [f64; N] {
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = math::sqrt(c[i][i]);
    }
    out
}

/// Standard errors for a converged fit; `None` when the fit did not converge
/// or the Hessian is not positive definite.
pub fn standard_errors(result: &FitResult, data: &[f64], combo: &PenaltyCombo) -> Option<[f64; 4]> {
    if !result.converged {
        return None;
    }
    standard_errors_at(&result.params, data, combo)
}

/// Standard errors `sqrt(diag(H^-1))` of an arbitrary objective at `theta`.
pub fn standard_errors_of<const N: usize, F>(objective: F, theta: &[f64; N]) -> Option<[f64; N]>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let h = optimize::hessian(objective, theta)?;
    optimize::spd_inverse(&h).map(|c| diag_sqrt(&c))
}

/// The `T`-year return level, the quantile at `1 - 1/T`.
pub fn return_level(params: &K4Params, years: f64) -> Result<f64> {
    if !(years > 1.0) || !years.is_finite() {
        return Err(input_err!("return period must exceed 1, got {years}"));
    }
    params.dist().quantile_upper(1.0 / years)
}

/// Delta-method standard error of the return level given a parameter
/// covariance.
pub fn return_level_se(params: &K4Params, cov: &[[f64; 4]; 4], years: f64) -> Result<f64> {
    let base = params.to_array();
    let mut grad = [0.0; 4];
    for i in 0..4 {
        let step = 1e-6 * (1.0 + math::abs(base[i]));
        let mut up = base;
        up[i] += step;
        let mut down = base;
        down[i] -= step;
        let fu = return_level(&K4Params::from_array(up)?, years)?;
        let fd = return_level(&K4Params::from_array(down)?, years)?;
        grad[i] = (fu - fd) / (2.0 * step);
    }
    let mut var = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            var += grad[i] * cov[i][j] * grad[j];
        }
    }
    if var >= 0.0 {
        Ok(math::sqrt(var))
    } else {
        Err(input_err!("covariance is not positive semi-definite"))
    }
}

/// Whether every observation lies strictly inside the support.
pub fn data_in_support(params: &K4Params, data: &[f64]) -> bool {
    let policy = BranchPolicy::default();
    data.iter().all(|&x| {
        let y = (x - params.mu()) / params.sigma();
        matches!(locate(params.k(), params.h(), y, &policy), Position::Inside { ln_cdf, .. } if ln_cdf > f64::NEG_INFINITY && ln_cdf < 0.0)
    })
}

/// Shorthand for the distribution of a fit.
pub fn fitted_distribution(result: &FitResult) -> Kappa4 {
    result.params.dist()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalties::{HPenalty, KPenalty};

    fn p(mu: f64, sigma: f64, k: f64, h: f64) -> K4Params {
        K4Params::new(mu, sigma, k, h).unwrap()
    }

    #[test]
    fn uniform_nll_is_zero() {
        let v = neg_log_likelihood(&p(0.0, 1.0, 1.0, 1.0), &[0.1, 0.5, 0.9]).unwrap();
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn barrier_outside_support() {
        let v = neg_log_likelihood(&p(0.0, 1.0, -0.2, -0.2), &[0.5, -6.0]).unwrap();
        assert_eq!(v, f64::INFINITY);
        assert!(neg_log_likelihood(&p(0.0, 1.0, 0.1, 0.1), &[]).is_err());
    }

    #[test]
    fn nll_matches_extended_precision_value() {
        // 40-digit evaluation of the closed-form negative log-likelihood
        let v = neg_log_likelihood(&p(0.0, 1.0, -0.2, -0.2), &[0.1, 0.5, 1.3]).unwrap();
        assert!((v - 4.145_041_887_763_257).abs() < 1e-12, "{v}");
    }

    #[test]
    fn penalized_objective_composition() {
        let data = [0.1, 0.5, 1.3, 2.0, -0.4];
        let params = p(0.0, 1.0, 0.0, 0.0);
        let nll = neg_log_likelihood(&params, &data).unwrap();
        assert_eq!(penalized_nll(&params, &data, &PenaltyCombo::none()).unwrap(), nll);
        let cd = PenaltyCombo::new(KPenalty::cd(), HPenalty::cd_a());
        let pos = p(0.0, 1.0, 0.1, 0.2);
        assert_eq!(
            penalized_nll(&pos, &data, &cd).unwrap(),
            neg_log_likelihood(&pos, &data).unwrap()
        );
        let ms = PenaltyCombo::new(KPenalty::ms(), HPenalty::ms_a());
        let expected = nll - 2.199_462_890_625f64.ln() - 0.916_442_871_093_750_03f64.ln();
        assert!((penalized_nll(&params, &data, &ms).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn workspace_feasibility_matches_barrier() {
        let params = p(0.0, 1.0, 0.5, 0.3);
        for data in [vec![0.1, 0.5], vec![0.1, 2.5], vec![-5.0, 0.2]] {
            let ws = LikelihoodWorkspace::new(&params, &data);
            let nll = neg_log_likelihood(&params, &data).unwrap();
            assert_eq!(ws.is_feasible(), nll.is_finite(), "{data:?}");
        }
    }

    #[test]
    fn return_levels() {
        assert!((return_level(&p(0.0, 1.0, 1.0, 1.0), 20.0).unwrap() - 0.95).abs() < 1e-14);
        let g = return_level(&p(0.0, 1.0, 0.0, 0.0), 20.0).unwrap();
        assert!((g - 2.970_195_249_042_165).abs() < 1e-12, "{g}");
        let v = return_level(&p(0.0, 1.0, -0.2, -0.2), 100.0).unwrap();
        assert!((v - 7.544_304_243_288_287).abs() < 1e-10, "{v}");
        assert!(return_level(&p(0.0, 1.0, 0.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn quadratic_standard_errors() {
        let a = [4.0, 0.25, 9.0];
        let c = [1.0, 2.0, -1.0];
        let se = standard_errors_of(
            |x: &[f64; 3]| 0.5 * (0..3).map(|j| a[j] * (x[j] - c[j]).powi(2)).sum::<f64>(),
            &c,
        )
        .unwrap();
        for j in 0..3 {
            assert!((se[j] - 1.0 / a[j].sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_rejects_short_or_degenerate_data() {
        let cfg = OptimizerConfig::default();
        assert!(fit_mle(&[1.0, 2.0, 3.0, 4.0], &cfg).is_err());
        assert_eq!(fit_mle(&[2.0; 8], &cfg), Err(Error::Degenerate));
        let bad = OptimizerConfig {
            restarts: 0,
            ..cfg
        };
        assert!(fit_mle(&[1.0, 2.0, 3.0, 4.0, 5.0], &bad).is_err());
    }
}
