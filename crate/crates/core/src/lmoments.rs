//! L-moments and the L-moment estimator.
//!
//! Population L-moments are computed by integrating the quantile function
//! against shifted Legendre polynomials,
//! `lambda_{r+1} = integral_0^1 x(F) P*_r(F) dF`, with tanh-sinh quadrature
//! so that the endpoint singularities of heavy-tailed members do not spoil
//! accuracy. The estimator matches `(tau3, tau4)` with a damped Newton
//! iteration in `(k, h)`, then recovers scale and location from `lambda2`
//! and `lambda1`.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use crate::distribution::{std_quantile, BranchPolicy, K4Params};
use crate::error::{input_err, Error, Result};
use crate::likelihood::{neg_log_likelihood_unchecked, FitResult, MethodTag};
use crate::math;

/// `(lambda1, lambda2, tau3, tau4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LMomentSet {
    pub lambda1: f64,
    pub lambda2: f64,
    pub tau3: f64,
    pub tau4: f64,
}

impl LMomentSet {
    /// Whether the ratios satisfy the bounds every distribution obeys:
    /// `lambda2 > 0`, `|tau3| < 1` and `(5 tau3^2 - 1) / 4 <= tau4 < 1`.
    pub fn is_feasible(&self) -> bool {
        self.lambda2 > 0.0
            && math::abs(self.tau3) < 1.0
            && self.tau4 < 1.0
            && self.tau4 >= (5.0 * self.tau3 * self.tau3 - 1.0) / 4.0
    }
}

/// Unbiased sample L-moments via probability-weighted moments.
pub fn sample_lmoments(data: &[f64]) -> Result<LMomentSet> {
    let n = data.len();
    if n < 4 {
        return Err(input_err!("sample L-moments need at least 4 values, got {n}"));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(input_err!("data must be finite"));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[n - 1] {
        return Err(Error::Degenerate);
    }
    let nf = n as f64;
    let (mut b0, mut b1, mut b2, mut b3) = (0.0, 0.0, 0.0, 0.0);
    for (i, &x) in sorted.iter().enumerate() {
        let j = i as f64;
        let w1 = j / (nf - 1.0);
        let w2 = w1 * (j - 1.0) / (nf - 2.0);
        let w3 = w2 * (j - 2.0) / (nf - 3.0);
        b0 += x;
        b1 += w1 * x;
        b2 += w2 * x;
        b3 += w3 * x;
    }
    b0 /= nf;
    b1 /= nf;
    b2 /= nf;
    b3 /= nf;
    let l2 = 2.0 * b1 - b0;
    let l3 = 6.0 * b2 - 6.0 * b1 + b0;
    let l4 = 20.0 * b3 - 30.0 * b2 + 12.0 * b1 - b0;
    if !(l2 > 0.0) {
        return Err(Error::Degenerate);
    }
    Ok(LMomentSet {
        lambda1: b0,
        lambda2: l2,
        tau3: l3 / l2,
        tau4: l4 / l2,
    })
}

/// Whether the first four L-moments are finite: `k > -1` and, for `h < 0`,
/// `k < -1/h`.
pub fn lmoments_exist(k: f64, h: f64) -> bool {
    k > -1.0 && (h >= 0.0 || h * k > -1.0)
}

/// Quadrature effort for the standardized L-moments.
#[derive(Debug, Clone, Copy)]
enum Precision {
    /// Fixed step 1/8; good to a few digits, used for start values.
    Coarse,
    /// Fixed step 1/32, for the cached scanning grid.
    Scan,
    /// Refined until successive levels agree to 1e-13.
    Full,
}

/// `[lambda1, lambda2, lambda3, lambda4]` of the `mu = 0`, `sigma = 1` member.
fn standard_lmoments(k: f64, h: f64, precision: Precision) -> [f64; 4] {
    let policy = BranchPolicy::default();
    let (tol, level) = match precision {
        Precision::Coarse => (0.0, 2),
        Precision::Scan => (0.0, 4),
        Precision::Full => (1e-13, 9),
    };
    math::tanh_sinh_unit(
        |u, uc| {
            let z = std_quantile(k, h, u, uc, &policy);
            // shifted Legendre polynomials in s = 2u - 1 = u - uc
            let s = u - uc;
            let p2 = 1.5 * s * s - 0.5;
            let p3 = (2.5 * s * s - 1.5) * s;
            [z, z * s, z * p2, z * p3]
        },
        tol,
        level,
    )
}

fn ratios(l: &[f64; 4]) -> Option<(f64, f64)> {
    if !(l[1] > 0.0) || l.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((l[2] / l[1], l[3] / l[1]))
}

/// `(lambda1, lambda2)` of the standardized member, at scanning precision.
pub(crate) fn standard_location_scale(k: f64, h: f64) -> Option<(f64, f64)> {
    if !lmoments_exist(k, h) {
        return None;
    }
    let l = standard_lmoments(k, h, Precision::Coarse);
    (l[1] > 0.0 && l[0].is_finite() && l[1].is_finite()).then_some((l[0], l[1]))
}

/// Population L-moments of the distribution.
pub fn population_lmoments(params: &K4Params) -> Result<LMomentSet> {
    let (k, h) = (params.k(), params.h());
    if !lmoments_exist(k, h) {
        return Err(Error::NonexistentMoments { k, h });
    }
    let l = standard_lmoments(k, h, Precision::Full);
    let (tau3, tau4) = ratios(&l).ok_or(Error::NonexistentMoments { k, h })?;
    Ok(LMomentSet {
        lambda1: params.mu() + params.sigma() * l[0],
        lambda2: params.sigma() * l[1],
        tau3,
        tau4,
    })
}

/// Why the L-moment estimator produced no estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FailureReason {
    /// Newton iteration did not reach the sample ratios.
    RootSolveDiverged,
    /// Sample ratios lie outside the region the distribution can reach.
    TauOutsideFeasible,
    None,
}

/// Result of the L-moment estimator: an estimate or the reason there is none.
#[derive(Debug, Clone, PartialEq)]
pub enum LmeOutcome {
    Fitted(FitResult),
    Failed(FailureReason),
}

impl LmeOutcome {
    pub fn result(&self) -> Option<&FitResult> {
        match self {
            LmeOutcome::Fitted(r) => Some(r),
            LmeOutcome::Failed(_) => None,
        }
    }

    pub fn failure_reason(&self) -> FailureReason {
        match self {
            LmeOutcome::Fitted(_) => FailureReason::None,
            LmeOutcome::Failed(r) => *r,
        }
    }

    pub fn params(&self) -> Option<K4Params> {
        self.result().map(|r| r.params)
    }
}

const K_GRID: (f64, f64, usize) = (-0.95, 0.95, 39);
const H_GRID: (f64, f64, usize) = (-1.2, 1.2, 49);
const GRID_LEN: usize = K_GRID.2 * H_GRID.2;
const H_FLOOR: f64 = -1.2;
const RESIDUAL_TOL: f64 = 1e-11;
const MAX_NEWTON: usize = 60;
const NEWTON_STARTS: usize = 3;
/// Targets this far above every ratio the grid reaches skip the root search.
const BOUNDARY_MARGIN: f64 = 1e-3;

fn grid_k(i: usize) -> f64 {
    K_GRID.0 + (K_GRID.1 - K_GRID.0) * i as f64 / (K_GRID.2 - 1) as f64
}

fn grid_h(j: usize) -> f64 {
    H_GRID.0 + (H_GRID.1 - H_GRID.0) * j as f64 / (H_GRID.2 - 1) as f64
}

/// `(tau3, tau4)` on the scanning grid, filled on first use. Entries are
/// NaN where the L-moments do not exist. Concurrent first calls compute
/// identical values, so the race is harmless.
struct RatioGrid;

#[allow(clippy::declare_interior_mutable_const)]
const UNSET: AtomicU64 = AtomicU64::new(0);
static GRID_TAU: [AtomicU64; 2 * GRID_LEN] = [UNSET; 2 * GRID_LEN];
static GRID_READY: AtomicBool = AtomicBool::new(false);

impl RatioGrid {
    fn get() -> RatioGrid {
        if !GRID_READY.load(Ordering::Acquire) {
            for i in 0..K_GRID.2 {
                for j in 0..H_GRID.2 {
                    let (k, h) = (grid_k(i), grid_h(j));
                    let t = if lmoments_exist(k, h) {
                        ratios(&standard_lmoments(k, h, Precision::Scan)).unwrap_or((f64::NAN, f64::NAN))
                    } else {
                        (f64::NAN, f64::NAN)
                    };
                    let idx = 2 * (i * H_GRID.2 + j);
                    GRID_TAU[idx].store(t.0.to_bits(), Ordering::Relaxed);
                    GRID_TAU[idx + 1].store(t.1.to_bits(), Ordering::Relaxed);
                }
            }
            GRID_READY.store(true, Ordering::Release);
        }
        RatioGrid
    }

    fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let idx = 2 * (i * H_GRID.2 + j);
        (
            f64::from_bits(GRID_TAU[idx].load(Ordering::Relaxed)),
            f64::from_bits(GRID_TAU[idx + 1].load(Ordering::Relaxed)),
        )
    }

    /// Upper envelope of the grid image: the largest `tau4` reached at
    /// `tau3`, by linear interpolation along every grid row and column;
    /// `None` when no grid segment spans `tau3`. The image folds, so the
    /// `h = H_FLOOR` row alone is not the boundary.
    fn ceiling_tau4(&self, tau3: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut segment = |a: (f64, f64), b: (f64, f64)| {
            if !(a.0.is_finite() && a.1.is_finite() && b.0.is_finite() && b.1.is_finite()) {
                return;
            }
            let (lo, hi) = if a.0 <= b.0 { (a, b) } else { (b, a) };
            if lo.0 <= tau3 && tau3 <= hi.0 {
                let v = if hi.0 > lo.0 {
                    lo.1 + (tau3 - lo.0) / (hi.0 - lo.0) * (hi.1 - lo.1)
                } else {
                    lo.1.max(hi.1)
                };
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        };
        for i in 0..K_GRID.2 {
            for j in 0..H_GRID.2 {
                if i + 1 < K_GRID.2 {
                    segment(self.at(i, j), self.at(i + 1, j));
                }
                if j + 1 < H_GRID.2 {
                    segment(self.at(i, j), self.at(i, j + 1));
                }
            }
        }
        best
    }
}

/// Solution of the L-moment equations with the Newton iteration count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmeSolution {
    pub params: K4Params,
    pub iterations: usize,
}

/// Solve the L-moment equations for the given (sample) L-moments.
pub fn solve_lme(target: &LMomentSet) -> core::result::Result<LmeSolution, FailureReason> {
    if !target.is_feasible() {
        return Err(FailureReason::TauOutsideFeasible);
    }
    let goal = (target.tau3, target.tau4);
    let grid = RatioGrid::get();
    if grid.ceiling_tau4(goal.0).is_some_and(|b| goal.1 > b + BOUNDARY_MARGIN) {
        return Err(FailureReason::TauOutsideFeasible);
    }

    let mut candidates: Vec<(f64, f64, f64)> = Vec::with_capacity(GRID_LEN);
    for i in 0..K_GRID.2 {
        for j in 0..H_GRID.2 {
            let t = grid.at(i, j);
            if t.0.is_finite() && t.1.is_finite() {
                let d = (t.0 - goal.0, t.1 - goal.1);
                candidates.push((d.0 * d.0 + d.1 * d.1, grid_k(i), grid_h(j)));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut total_iterations = 0;
    for &(_, k0, h0) in candidates.iter().take(NEWTON_STARTS) {
        match newton(k0, h0, goal) {
            Ok((k, h, it)) => {
                total_iterations += it;
                let l = standard_lmoments(k, h, Precision::Full);
                let sigma = target.lambda2 / l[1];
                let mu = target.lambda1 - sigma * l[0];
                if let Ok(params) = K4Params::new(mu, sigma, k, h) {
                    return Ok(LmeSolution {
                        params,
                        iterations: total_iterations,
                    });
                }
            }
            Err(it) => total_iterations += it,
        }
    }

    // Above the generalized logistic line the ratios need h < -1.
    let glo_line = (1.0 + 5.0 * goal.0 * goal.0) / 6.0;
    if goal.1 >= glo_line {
        Err(FailureReason::TauOutsideFeasible)
    } else {
        Err(FailureReason::RootSolveDiverged)
    }
}

fn residual(k: f64, h: f64, goal: (f64, f64)) -> Option<(f64, f64)> {
    if !lmoments_exist(k, h) || h < H_FLOOR {
        return None;
    }
    let t = ratios(&standard_lmoments(k, h, Precision::Full))?;
    Some((t.0 - goal.0, t.1 - goal.1))
}

fn norm(r: (f64, f64)) -> f64 {
    math::abs(r.0).max(math::abs(r.1))
}

/// Damped Newton on `tau(k, h) = goal`. Returns the root and iteration count,
/// or the iterations spent before giving up.
fn newton(mut k: f64, mut h: f64, goal: (f64, f64)) -> core::result::Result<(f64, f64, usize), usize> {
    const FD_STEP: f64 = 1e-6;
    const STALL_WINDOW: usize = 8;
    let mut r = residual(k, h, goal).ok_or(0usize)?;
    let mut checkpoint = norm(r);
    for it in 0..MAX_NEWTON {
        // creeping along the h floor: the residual stops shrinking
        if it > 0 && it % STALL_WINDOW == 0 {
            if norm(r) > 0.5 * checkpoint {
                return Err(it);
            }
            checkpoint = norm(r);
        }
        if norm(r) <= RESIDUAL_TOL {
            return Ok((k, h, it));
        }
        let dk = |s: f64| residual(k + s, h, goal);
        let dh = |s: f64| residual(k, h + s, goal);
        let col = |plus: Option<(f64, f64)>, minus: Option<(f64, f64)>, step: f64| {
            match (plus, minus) {
                (Some(p), Some(m)) => Some(((p.0 - m.0) / (2.0 * step), (p.1 - m.1) / (2.0 * step))),
                (Some(p), None) => Some(((p.0 - r.0) / step, (p.1 - r.1) / step)),
                (None, Some(m)) => Some(((r.0 - m.0) / step, (r.1 - m.1) / step)),
                (None, None) => None,
            }
        };
        let jk = col(dk(FD_STEP), dk(-FD_STEP), FD_STEP).ok_or(it)?;
        let jh = col(dh(FD_STEP), dh(-FD_STEP), FD_STEP).ok_or(it)?;
        // J = [[jk.0, jh.0], [jk.1, jh.1]]
        let det = jk.0 * jh.1 - jh.0 * jk.1;
        if !(math::abs(det) > 1e-300) || !det.is_finite() {
            return Err(it);
        }
        let step_k = -(jh.1 * r.0 - jh.0 * r.1) / det;
        let step_h = -(-jk.1 * r.0 + jk.0 * r.1) / det;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..16 {
            let (kn, hn) = (k + t * step_k, h + t * step_h);
            if let Some(rn) = residual(kn, hn, goal) {
                if norm(rn) < norm(r) {
                    accepted = Some((kn, hn, rn));
                    break;
                }
            }
            t *= 0.5;
        }
        let (kn, hn, rn) = accepted.ok_or(it)?;
        let moved = math::abs(kn - k).max(math::abs(hn - h));
        k = kn;
        h = hn;
        r = rn;
        if moved < 1e-13 && norm(r) > RESIDUAL_TOL {
            return Err(it + 1);
        }
    }
    if norm(r) <= RESIDUAL_TOL {
        Ok((k, h, MAX_NEWTON))
    } else {
        Err(MAX_NEWTON)
    }
}

/// L-moment estimate from data.
pub fn fit_lme(data: &[f64]) -> Result<LmeOutcome> {
    let set = sample_lmoments(data)?;
    Ok(match solve_lme(&set) {
        Ok(sol) => {
            let nll = neg_log_likelihood_unchecked(&sol.params, data, &BranchPolicy::default());
            LmeOutcome::Fitted(FitResult {
                params: sol.params,
                se: None,
                nll,
                penalized_nll: nll,
                converged: true,
                iterations: sol.iterations,
                method: MethodTag::Lme,
            })
        }
        Err(reason) => LmeOutcome::Failed(reason),
    })
}
