//! The four-parameter kappa distribution.
//!
//! With `y = (x - mu) / sigma` the distribution function is
//!
//! ```text
//! F(x) = (1 - h (1 - k y)^(1/k))^(1/h)
//! ```
//!
//! and the quantile function is
//!
//! ```text
//! x(F) = mu + sigma / k * (1 - ((1 - F^h) / h)^k)
//! ```
//!
//! `k = 0` and `h = 0` are limits: `(1 - k y)^(1/k) -> exp(-y)` and
//! `(1 - h u)^(1/h) -> exp(-u)`. Special cases include the generalized Pareto
//! (`h = 1`), GEV (`h = 0`), generalized logistic (`h = -1`) and generalized
//! Gumbel (`k = 0`) distributions.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{input_err, Error, Result};
use crate::math;
use crate::rng;

/// Location, scale and the two shape parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct K4Params {
    mu: f64,
    sigma: f64,
    k: f64,
    h: f64,
}

impl K4Params {
    pub fn new(mu: f64, sigma: f64, k: f64, h: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidScale(sigma));
        }
        for (name, value) in [("mu", mu), ("k", k), ("h", h)] {
            if !value.is_finite() {
                return Err(Error::NonFiniteParameter { name, value });
            }
        }
        Ok(Self { mu, sigma, k, h })
    }

    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn k(&self) -> f64 {
        self.k
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// `[mu, sigma, k, h]`
    pub fn to_array(&self) -> [f64; 4] {
        [self.mu, self.sigma, self.k, self.h]
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Distribution with the default branch policy.
    pub fn dist(self) -> Kappa4 {
        Kappa4::new(self)
    }
}

/// How close to zero a shape parameter must be before the closed-form limit
/// branch is used instead of the general formula.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchPolicy {
    shape_zero_threshold: f64,
}

impl BranchPolicy {
    pub const DEFAULT_THRESHOLD: f64 = 1e-9;

    pub fn new(shape_zero_threshold: f64) -> Result<Self> {
        if !(shape_zero_threshold > 0.0 && shape_zero_threshold < 1e-4) {
            return Err(input_err!(
                "shape-zero threshold must lie in (0, 1e-4), got {shape_zero_threshold}"
            ));
        }
        Ok(Self {
            shape_zero_threshold,
        })
    }

    #[inline]
    pub fn threshold(&self) -> f64 {
        self.shape_zero_threshold
    }

    #[inline]
    pub(crate) fn is_zero(&self, shape: f64) -> bool {
        math::abs(shape) < self.shape_zero_threshold
    }
}

impl Default for BranchPolicy {
    fn default() -> Self {
        Self {
            shape_zero_threshold: Self::DEFAULT_THRESHOLD,
        }
    }
}

/// One end of the support: either a finite value or unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Endpoint {
    Unbounded,
    Finite(f64),
}

impl Endpoint {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            Endpoint::Finite(v) => Some(v),
            Endpoint::Unbounded => None,
        }
    }
}

/// The closure of the set where the density is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Support {
    pub lower: Endpoint,
    pub upper: Endpoint,
}

impl Support {
    /// Lower bound as an `f64`, `-inf` when unbounded.
    pub fn lower_value(&self) -> f64 {
        self.lower.finite().unwrap_or(f64::NEG_INFINITY)
    }

    /// Upper bound as an `f64`, `+inf` when unbounded.
    pub fn upper_value(&self) -> f64 {
        self.upper.finite().unwrap_or(f64::INFINITY)
    }

    /// Whether `x` lies strictly inside the support.
    pub fn contains(&self, x: f64) -> bool {
        x > self.lower_value() && x < self.upper_value()
    }
}

/// Named distributions reached by fixing a shape parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SpecialCase {
    GeneralizedPareto,
    GeneralizedExtremeValue,
    GeneralizedLogistic,
    GeneralizedGumbel,
    General,
}

/// Where a standardized point falls relative to the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Position {
    Below,
    Above,
    /// `t = ln (1 - k y)^(1/k)` and `ln_cdf = ln F`.
    Inside { t: f64, ln_cdf: f64 },
}

/// Locate the standardized point `y` and evaluate the log-cdf pieces.
#[inline]
pub(crate) fn locate(k: f64, h: f64, y: f64, policy: &BranchPolicy) -> Position {
    let t = if policy.is_zero(k) {
        -y
    } else {
        let g = 1.0 - k * y;
        if !(g > 0.0) {
            return if k > 0.0 {
                Position::Above
            } else {
                Position::Below
            };
        }
        math::ln_1p(-k * y) / k
    };
    let u = math::exp(t);
    let ln_cdf = if policy.is_zero(h) {
        -u
    } else {
        let a = h * u;
        if !(a < 1.0) {
            return Position::Below;
        }
        math::ln_1p(-a) / h
    };
    if ln_cdf.is_nan() {
        return Position::Below;
    }
    Position::Inside { t, ln_cdf }
}

/// Log-density of the standardized variable (`sigma = 1`).
#[inline]
pub(crate) fn std_ln_pdf(k: f64, h: f64, y: f64, policy: &BranchPolicy) -> f64 {
    match locate(k, h, y, policy) {
        Position::Inside { t, ln_cdf } => {
            if ln_cdf == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            (1.0 - k) * t + (1.0 - h) * ln_cdf
        }
        _ => f64::NEG_INFINITY,
    }
}

/// Standardized quantile `z` with `x = mu + sigma z`, given `p` and `1 - p`
/// (both supplied so the upper tail keeps full precision).
#[inline]
pub(crate) fn std_quantile(k: f64, h: f64, p: f64, p_complement: f64, policy: &BranchPolicy) -> f64 {
    let ln_p = if p <= 0.5 {
        math::ln(p)
    } else {
        math::ln_1p(-p_complement)
    };
    // a = ln((1 - p^h) / h), or ln(-ln p) in the h -> 0 limit
    let a = if policy.is_zero(h) {
        math::ln(-ln_p)
    } else {
        math::ln(-math::exp_m1(h * ln_p) / h)
    };
    if policy.is_zero(k) {
        -a
    } else {
        -math::exp_m1(k * a) / k
    }
}

/// The distribution: parameters plus the branch policy used to evaluate them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa4 {
    params: K4Params,
    policy: BranchPolicy,
}

impl Kappa4 {
    pub fn new(params: K4Params) -> Self {
        Self {
            params,
            policy: BranchPolicy::default(),
        }
    }

    pub fn with_policy(params: K4Params, policy: BranchPolicy) -> Self {
        Self { params, policy }
    }

    pub fn params(&self) -> &K4Params {
        &self.params
    }

    pub fn policy(&self) -> &BranchPolicy {
        &self.policy
    }

    #[inline]
    fn standardize(&self, x: f64) -> f64 {
        (x - self.params.mu) / self.params.sigma
    }

    fn check_x(x: f64) -> Result<()> {
        if x.is_finite() {
            Ok(())
        } else {
            Err(input_err!("evaluation point must be finite, got {x}"))
        }
    }

    /// Log-density; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        Self::check_x(x)?;
        let p = &self.params;
        Ok(std_ln_pdf(p.k, p.h, self.standardize(x), &self.policy) - math::ln(p.sigma))
    }

    /// Density; zero outside the support and at its endpoints.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.ln_pdf(x).map(math::exp)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Self::check_x(x)?;
        Ok(self.cdf_unchecked(x))
    }

    #[inline]
    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        let p = &self.params;
        match locate(p.k, p.h, self.standardize(x), &self.policy) {
            Position::Below => 0.0,
            Position::Above => 1.0,
            Position::Inside { ln_cdf, .. } => math::exp(ln_cdf),
        }
    }

    /// Inverse of [`cdf`](Self::cdf) for `0 < p < 1`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(input_err!("probability must lie in (0, 1), got {p}"));
        }
        Ok(self.quantile_unchecked(p, 1.0 - p))
    }

    /// Quantile at `p` where `1 - p` is known more precisely than `p` itself.
    pub fn quantile_upper(&self, p_complement: f64) -> Result<f64> {
        if !(p_complement > 0.0 && p_complement < 1.0) {
            return Err(input_err!(
                "tail probability must lie in (0, 1), got {p_complement}"
            ));
        }
        Ok(self.quantile_unchecked(1.0 - p_complement, p_complement))
    }

    #[inline]
    pub(crate) fn quantile_unchecked(&self, p: f64, p_complement: f64) -> f64 {
        let par = &self.params;
        par.mu + par.sigma * std_quantile(par.k, par.h, p, p_complement, &self.policy)
    }

    pub fn support(&self) -> Support {
        let p = &self.params;
        let zero_k = self.policy.is_zero(p.k);
        let upper = if p.k > 0.0 && !zero_k {
            Endpoint::Finite(p.mu + p.sigma / p.k)
        } else {
            Endpoint::Unbounded
        };
        let lower = if p.h > 0.0 && !self.policy.is_zero(p.h) {
            let y = if zero_k {
                math::ln(p.h)
            } else {
                -math::exp_m1(-p.k * math::ln(p.h)) / p.k
            };
            Endpoint::Finite(p.mu + p.sigma * y)
        } else if p.k < 0.0 && !zero_k {
            Endpoint::Finite(p.mu + p.sigma / p.k)
        } else {
            Endpoint::Unbounded
        };
        Support { lower, upper }
    }

    /// `n` independent draws by inversion, seeded deterministically.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(input_err!("sample size must be at least 1"));
        }
        let mut rng = rng::seeded(seed);
        Ok(self.sample_with(&mut rng, n))
    }

    /// `n` draws from a caller-provided generator.
    pub fn sample_with<R: RngCore + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u = rng::open_unit(rng);
                self.quantile_unchecked(u, 1.0 - u)
            })
            .collect()
    }

    /// Named special cases within `tol` of the current shape parameters.
    pub fn special_cases(&self, tol: f64) -> Vec<SpecialCase> {
        classify_special_case(&self.params, tol)
    }
}

/// Every named special case the parameters fall within `tol` of, `h`-based
/// tags first. Returns `[General]` when nothing matches.
pub fn classify_special_case(params: &K4Params, tol: f64) -> Vec<SpecialCase> {
    let tol = tol.max(0.0);
    let mut tags = Vec::new();
    let h = params.h();
    if math::abs(h - 1.0) <= tol {
        tags.push(SpecialCase::GeneralizedPareto);
    }
    if math::abs(h) <= tol {
        tags.push(SpecialCase::GeneralizedExtremeValue);
    }
    if math::abs(h + 1.0) <= tol {
        tags.push(SpecialCase::GeneralizedLogistic);
    }
    if math::abs(params.k()) <= tol {
        tags.push(SpecialCase::GeneralizedGumbel);
    }
    if tags.is_empty() {
        tags.push(SpecialCase::General);
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(mu: f64, sigma: f64, k: f64, h: f64) -> Kappa4 {
        K4Params::new(mu, sigma, k, h).unwrap().dist()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(K4Params::new(0.0, 0.0, 0.1, 0.1), Err(Error::InvalidScale(0.0)));
        assert!(K4Params::new(0.0, -1.0, 0.1, 0.1).is_err());
        assert!(K4Params::new(f64::NAN, 1.0, 0.1, 0.1).is_err());
        assert!(K4Params::new(0.0, 1.0, f64::INFINITY, 0.1).is_err());
        assert!(K4Params::new(0.0, f64::INFINITY, 0.1, 0.1).is_err());
    }

    #[test]
    fn branch_policy_range() {
        assert!(BranchPolicy::new(0.0).is_err());
        assert!(BranchPolicy::new(1e-3).is_err());
        assert!(BranchPolicy::new(1e-6).is_ok());
    }

    #[test]
    fn uniform_case() {
        let d = dist(0.0, 1.0, 1.0, 1.0);
        assert!((d.pdf(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((d.cdf(0.25).unwrap() - 0.25).abs() < 1e-15);
        assert!((d.quantile(0.75).unwrap() - 0.75).abs() < 1e-15);
        let s = d.support();
        assert_eq!(s.lower, Endpoint::Finite(0.0));
        assert_eq!(s.upper, Endpoint::Finite(1.0));
    }

    #[test]
    fn gumbel_case() {
        let d = dist(0.0, 1.0, 0.0, 0.0);
        assert!((d.cdf(0.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(d.quantile((-1.0f64).exp()).unwrap().abs() < 1e-15);
        let s = d.support();
        assert_eq!(s.lower, Endpoint::Unbounded);
        assert_eq!(s.upper, Endpoint::Unbounded);
    }

    #[test]
    fn outside_support_and_boundaries() {
        let d = dist(0.0, 1.0, -0.2, -0.2);
        assert_eq!(d.support().lower, Endpoint::Finite(-5.0));
        assert_eq!(d.pdf(-6.0).unwrap(), 0.0);
        assert_eq!(d.ln_pdf(-6.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(d.cdf(-5.0).unwrap(), 0.0);
        assert_eq!(d.pdf(-5.0).unwrap(), 0.0);
        assert!(d.cdf(-5.0 + 1e-6).unwrap() > 0.0);
        assert_eq!(d.cdf(-5.0 - 1e-6).unwrap(), 0.0);

        let u = dist(0.0, 1.0, 1.0, 1.0);
        assert_eq!(u.cdf(1.0).unwrap(), 1.0);
        assert_eq!(u.cdf(2.0).unwrap(), 1.0);
        assert_eq!(u.cdf(0.0).unwrap(), 0.0);
        assert_eq!(u.pdf(1.5).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let d = dist(0.0, 1.0, 0.1, 0.1);
        assert!(d.cdf(f64::NAN).is_err());
        assert!(d.pdf(f64::INFINITY).is_err());
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
        assert!(d.quantile(f64::NAN).is_err());
    }

    #[test]
    fn support_h_positive_small_k_limit() {
        // k -> 0 lower bound mu + sigma ln h
        let d = dist(1.0, 2.0, 0.0, 0.5);
        let lower = d.support().lower.finite().unwrap();
        assert!((lower - (1.0 + 2.0 * 0.5f64.ln())).abs() < 1e-14);
        let near = dist(1.0, 2.0, 1e-7, 0.5).support().lower.finite().unwrap();
        assert!((near - lower).abs() < 1e-6);
    }

    #[test]
    fn support_bounds_bracket_cdf() {
        for &(k, h) in &[(0.3, 0.4), (-0.3, 0.4), (0.3, -0.4), (-0.3, -0.4), (0.2, 1.0), (0.0, 0.7)] {
            let d = dist(0.5, 1.5, k, h);
            let s = d.support();
            if let Some(lo) = s.lower.finite() {
                let eps = 1e-7 * (1.0 + lo.abs());
                assert!(d.cdf(lo + 1e4 * eps).unwrap() > 0.0, "k={k} h={h}");
                assert_eq!(d.cdf(lo - eps).unwrap(), 0.0, "k={k} h={h}");
            }
            if let Some(hi) = s.upper.finite() {
                let eps = 1e-7 * (1.0 + hi.abs());
                // the upper tail decays like (distance)^(1/k), so step in further
                assert!(d.cdf(hi - 1e4 * eps).unwrap() < 1.0, "k={k} h={h}");
                assert_eq!(d.cdf(hi + eps).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn classification() {
        let p = |k, h| K4Params::new(0.0, 1.0, k, h).unwrap();
        assert_eq!(classify_special_case(&p(0.1, 0.0), 1e-9), [SpecialCase::GeneralizedExtremeValue]);
        assert_eq!(classify_special_case(&p(0.0, 0.5), 1e-9), [SpecialCase::GeneralizedGumbel]);
        assert_eq!(classify_special_case(&p(0.3, -1.0), 1e-9), [SpecialCase::GeneralizedLogistic]);
        assert_eq!(classify_special_case(&p(0.3, 1.0), 0.0), [SpecialCase::GeneralizedPareto]);
        assert_eq!(classify_special_case(&p(0.3, 0.4), 1e-3), [SpecialCase::General]);
        assert_eq!(
            classify_special_case(&p(0.0, 0.0), 1e-9),
            [SpecialCase::GeneralizedExtremeValue, SpecialCase::GeneralizedGumbel]
        );
    }

    #[test]
    fn sampling_is_deterministic_and_in_support() {
        let d = dist(0.0, 1.0, -0.2, -0.2);
        let a = d.sample(5, 17).unwrap();
        let b = d.sample(5, 17).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d.sample(5, 18).unwrap());
        assert!(a.iter().all(|&x| d.support().contains(x)));
        assert!(d.sample(0, 1).is_err());
    }
}
