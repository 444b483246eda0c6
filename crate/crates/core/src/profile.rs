//! Profile-likelihood intervals for return levels.
//!
//! The location is eliminated through `mu = x_T - sigma z(k, h)`, where `z`
//! is the standardized quantile at `1 - 1/T`, so the return level `x_T`
//! becomes a parameter. For each `x_T` the penalized objective is minimized
//! over `(ln sigma, k, h)`; the interval collects the `x_T` whose deviance
//! `2 (profile - minimum)` stays below the chi-square(1) cutoff.

use alloc::vec::Vec;

use crate::distribution::{std_quantile, BranchPolicy};
use crate::error::{input_err, Error, Result};
use crate::likelihood::{self, penalized_raw, FitResult, OptimizerConfig};
use crate::math;
use crate::penalties::PenaltyCombo;

/// Grid and bracketing controls.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfileOptions {
    /// Points in the base grid, centred on the point estimate.
    pub grid_points: usize,
    /// Half-width of the base grid in asymptotic standard errors.
    pub half_width_se: f64,
    /// How many further half-grids to walk when the cutoff is not reached.
    pub max_extensions: usize,
    /// Endpoint accuracy on the deviance scale.
    pub deviance_tolerance: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            grid_points: 101,
            half_width_se: 6.0,
            max_extensions: 4,
            deviance_tolerance: 1e-4,
        }
    }
}

impl ProfileOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 3 {
            return Err(Error::Config(alloc::format!(
                "profile grid needs at least 3 points, got {}",
                self.grid_points
            )));
        }
        if !(self.half_width_se > 0.0) || !self.half_width_se.is_finite() {
            return Err(Error::Config(alloc::format!(
                "profile half-width must be positive, got {}",
                self.half_width_se
            )));
        }
        if !(self.deviance_tolerance > 0.0) {
            return Err(Error::Config(alloc::format!(
                "deviance tolerance must be positive, got {}",
                self.deviance_tolerance
            )));
        }
        Ok(())
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfilePoint {
    pub return_level: f64,
    /// Minimized penalized negative log-likelihood (`+inf` if infeasible).
    pub profile_nll: f64,
    pub deviance: f64,
}

/// An interval endpoint. When `open` is set the cutoff was never crossed and
/// `value` is the farthest point scanned.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfileBound {
    pub value: f64,
    pub deviance: f64,
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfileCi {
    pub years: f64,
    pub level: f64,
    /// Chi-square(1) quantile at `level`.
    pub cutoff: f64,
    pub point: f64,
    /// Delta-method standard error used to size the grid, if available.
    pub se: Option<f64>,
    /// Smallest objective value seen (fit or profile).
    pub minimum: f64,
    pub lower: ProfileBound,
    pub upper: ProfileBound,
    /// Grid points sorted by return level.
    pub trace: Vec<ProfilePoint>,
}

impl ProfileCi {
    pub fn is_open(&self) -> bool {
        self.lower.open || self.upper.open
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower.value <= x && x <= self.upper.value
    }
}

struct Profiler<'a> {
    data: &'a [f64],
    combo: PenaltyCombo,
    p: f64,
    pc: f64,
    policy: BranchPolicy,
    cfg: OptimizerConfig,
    fallback: [f64; 3],
}

impl Profiler<'_> {
    fn objective(&self, xt: f64, t: &[f64; 3]) -> f64 {
        let sigma = math::exp(t[0]);
        let z = std_quantile(t[1], t[2], self.p, self.pc, &self.policy);
        if !z.is_finite() {
            return f64::INFINITY;
        }
        penalized_raw(xt - sigma * z, sigma, t[1], t[2], self.data, &self.combo, &self.policy)
    }

    /// Minimize at `xt` from `warm` and from the fitted shape, keeping the
    /// better result; each start is nudged until it is feasible at `xt`.
    fn eval(&self, xt: f64, warm: &[f64; 3]) -> (f64, [f64; 3]) {
        let f = |t: &[f64; 3]| self.objective(xt, t);
        let feasible_near = |base: [f64; 3]| {
            core::iter::once(base)
                .chain([0.4, 0.8, 1.2, -0.4].map(|dl| [base[0] + dl, base[1] * 0.5, base[2]]))
                .find(|c| f(c).is_finite())
        };
        let mut best = (f64::INFINITY, *warm);
        let mut tried: Option<[f64; 3]> = None;
        for base in [*warm, self.fallback] {
            let Some(start) = feasible_near(base) else {
                continue;
            };
            if tried == Some(start) {
                continue;
            }
            tried = Some(start);
            let (x, v, _, _) = likelihood::minimize(&f, start, 1.0, &self.cfg);
            if v < best.0 {
                best = (v, x);
            }
        }
        best
    }
}

/// Fit `data` with `combo` and profile its `years`-year return level.
pub fn profile_likelihood_ci(
    data: &[f64],
    years: f64,
    level: f64,
    combo: &PenaltyCombo,
    cfg: &OptimizerConfig,
) -> Result<ProfileCi> {
    let fit = likelihood::fit_penalized(data, combo, cfg, None)?;
    profile_from_fit(data, &fit, years, level, combo, cfg, &ProfileOptions::default())
}

/// Profile the return level around an existing converged fit of the same
/// objective.
pub fn profile_from_fit(
    data: &[f64],
    fit: &FitResult,
    years: f64,
    level: f64,
    combo: &PenaltyCombo,
    cfg: &OptimizerConfig,
    opts: &ProfileOptions,
) -> Result<ProfileCi> {
    if !(level > 0.0 && level < 1.0) {
        return Err(input_err!("confidence level must lie in (0, 1), got {level}"));
    }
    opts.validate()?;
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let point = likelihood::return_level(&fit.params, years)?;
    let cutoff = math::chi_square_quantile(level, 1.0);
    let se = likelihood::covariance(&fit.params, data, combo)
        .and_then(|c| likelihood::return_level_se(&fit.params, &c, years).ok())
        .filter(|s| s.is_finite() && *s > 0.0);
    let half = match se {
        Some(s) => opts.half_width_se * s,
        None => opts.half_width_se * 0.5 * fit.params.sigma(),
    };
    let half_n = opts.grid_points / 2;
    let step = half / half_n as f64;

    let theta_hat = [math::ln(fit.params.sigma()), fit.params.k(), fit.params.h()];
    let profiler = Profiler {
        data,
        combo: *combo,
        p: 1.0 - 1.0 / years,
        pc: 1.0 / years,
        policy: BranchPolicy::default(),
        cfg: OptimizerConfig {
            restarts: cfg.restarts.min(2),
            ..*cfg
        },
        fallback: theta_hat,
    };

    let (f0, t0) = profiler.eval(point, &theta_hat);
    let mut minimum = fit.penalized_nll.min(f0);

    // walk each side from the centre, warm-starting from the neighbour
    let mut sides: [Vec<(f64, f64, [f64; 3])>; 2] = [Vec::new(), Vec::new()];
    for (side, dir) in [(0usize, -1.0), (1, 1.0)] {
        let mut warm = t0;
        let limit = half_n * (1 + opts.max_extensions);
        for i in 1..=limit {
            let x = point + dir * step * i as f64;
            let (f, t) = profiler.eval(x, &warm);
            if f.is_finite() {
                warm = t;
                minimum = minimum.min(f);
            }
            sides[side].push((x, f, t));
            if i >= half_n && 2.0 * (f - minimum) > cutoff {
                break;
            }
        }
    }

    let slack = 0.5 * opts.deviance_tolerance;
    if minimum < fit.penalized_nll - slack {
        let at = sides
            .iter()
            .flatten()
            .filter(|s| s.1 == minimum)
            .map(|s| s.0)
            .next()
            .unwrap_or(point);
        return Err(Error::LocalOptimum {
            return_level: at,
            objective: minimum,
        });
    }

    let deviance = |f: f64| if f.is_finite() { (2.0 * (f - minimum)).max(0.0) } else { f64::INFINITY };
    let mut bounds = [None, None];
    for side in 0..2 {
        let mut inside = (point, f0, t0);
        let mut bound = None;
        for &(x, f, t) in &sides[side] {
            if deviance(f) > cutoff {
                bound = Some(bisect_endpoint(&profiler, inside, (x, f), cutoff, &deviance, opts));
                break;
            }
            inside = (x, f, t);
        }
        bounds[side] = Some(bound.unwrap_or(ProfileBound {
            value: inside.0,
            deviance: deviance(inside.1),
            open: true,
        }));
    }

    let mut trace: Vec<ProfilePoint> = sides[0]
        .iter()
        .rev()
        .chain(core::iter::once(&(point, f0, t0)))
        .chain(sides[1].iter())
        .map(|&(x, f, _)| ProfilePoint {
            return_level: x,
            profile_nll: f,
            deviance: deviance(f),
        })
        .collect();
    trace.sort_by(|a, b| a.return_level.total_cmp(&b.return_level));

    let [lower, upper] = bounds.map(|b| b.expect("both sides processed"));
    Ok(ProfileCi {
        years,
        level,
        cutoff,
        point,
        se,
        minimum,
        lower,
        upper,
        trace,
    })
}

fn bisect_endpoint<D: Fn(f64) -> f64>(
    profiler: &Profiler<'_>,
    inside: (f64, f64, [f64; 3]),
    outside: (f64, f64),
    cutoff: f64,
    deviance: &D,
    opts: &ProfileOptions,
) -> ProfileBound {
    let (mut lo, mut lo_f, mut warm) = inside;
    let mut hi = outside.0;
    let mut hi_f = outside.1;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (f, t) = profiler.eval(mid, &warm);
        let d = deviance(f);
        if math::abs(d - cutoff) <= opts.deviance_tolerance {
            return ProfileBound {
                value: mid,
                deviance: d,
                open: false,
            };
        }
        if d > cutoff {
            hi = mid;
            hi_f = f;
        } else {
            lo = mid;
            lo_f = f;
            warm = t;
        }
        if math::abs(hi - lo) <= 1e-13 * (1.0 + math::abs(lo)) {
            break;
        }
    }
    // deviance jumps across the cutoff; report the closer side
    let (dl, dh) = (deviance(lo_f), deviance(hi_f));
    if math::abs(dh - cutoff) < math::abs(dl - cutoff) {
        ProfileBound {
            value: hi,
            deviance: dh,
            open: false,
        }
    } else {
        ProfileBound {
            value: lo,
            deviance: dl,
            open: false,
        }
    }
}
