//! Scalar special functions and quadrature.
//!
//! The crate is `no_std`, so every transcendental goes through `libm`. Keeping
//! them behind one module also means unit tests and downstream binaries
//! evaluate exactly the same floating-point routines.

use core::f64::consts::PI;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

/// Natural log of the gamma function for positive arguments.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln B(p, q)`.
pub fn ln_beta(p: f64, q: f64) -> f64 {
    ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)
}

/// Regularized lower incomplete gamma `P(a, x)`.
///
/// Series for `x < a + 1`, Lentz continued fraction for the complement
/// otherwise.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefix = a * ln(x) - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if abs(term) < abs(sum) * 1e-17 {
                break;
            }
        }
        (sum * exp(log_prefix)).min(1.0)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if abs(d) < TINY {
                d = TINY;
            }
            c = b + an / c;
            if abs(c) < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if abs(delta - 1.0) < 1e-16 {
                break;
            }
        }
        (1.0 - exp(log_prefix) * h).max(0.0)
    }
}

/// CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_cdf(x: f64, dof: f64) -> f64 {
    gamma_p(0.5 * dof, 0.5 * x)
}

/// Quantile of the chi-square distribution, by bracketing bisection on
/// [`chi_square_cdf`].
pub fn chi_square_quantile(level: f64, dof: f64) -> f64 {
    debug_assert!(level > 0.0 && level < 1.0);
    let mut lo = 0.0;
    let mut hi = dof.max(1.0);
    while chi_square_cdf(hi, dof) < level {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_square_cdf(mid, dof) < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Tanh-sinh integration over `(0, 1)`.
///
/// The integrand receives both the abscissa `u` and its complement `1 - u`,
/// each computed without cancellation, so functions with integrable endpoint
/// singularities (quantile functions of unbounded distributions) can be
/// evaluated accurately arbitrarily close to either end.
///
/// Levels halve the step size starting from `h = 1/2`; the loop stops once
/// successive estimates agree to `rel_tol` or `max_level` is reached.
pub fn tanh_sinh_unit<F, const N: usize>(mut f: F, rel_tol: f64, max_level: u32) -> [f64; N]
where
    F: FnMut(f64, f64) -> [f64; N],
{
    // Nodes beyond |t| = 6 have complements below 1e-300.
    const T_MAX: f64 = 6.0;

    let mut step = 0.5;
    let mut sum = [0.0; N];
    add_nodes(&mut f, &mut sum, 0.0, 1.0);
    let mut j = 1;
    loop {
        let t = j as f64 * step;
        if t > T_MAX {
            break;
        }
        add_nodes(&mut f, &mut sum, t, 1.0);
        add_nodes(&mut f, &mut sum, -t, 1.0);
        j += 1;
    }
    let mut estimate = scale(&sum, step);

    for _ in 1..=max_level {
        step *= 0.5;
        // only the odd multiples of the new step are new nodes
        let mut j = 1;
        loop {
            let t = j as f64 * step;
            if t > T_MAX {
                break;
            }
            add_nodes(&mut f, &mut sum, t, 1.0);
            add_nodes(&mut f, &mut sum, -t, 1.0);
            j += 2;
        }
        let next = scale(&sum, step);
        let converged = next
            .iter()
            .zip(estimate.iter())
            .all(|(a, b)| abs(a - b) <= rel_tol * abs(*a).max(1e-300));
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

fn scale<const N: usize>(sum: &[f64; N], step: f64) -> [f64; N] {
    let mut out = *sum;
    for v in out.iter_mut() {
        *v *= step;
    }
    out
}

fn add_nodes<F, const N: usize>(f: &mut F, sum: &mut [f64; N], t: f64, factor: f64)
where
    F: FnMut(f64, f64) -> [f64; N],
{
    let s = 0.5 * PI * libm::sinh(t);
    // u = 1 / (1 + e^{-2s}), 1 - u = 1 / (1 + e^{2s})
    let e = exp(-2.0 * abs(s));
    let small = e / (1.0 + e);
    let large = 1.0 / (1.0 + e);
    let (u, uc) = if s >= 0.0 { (large, small) } else { (small, large) };
    if u <= 0.0 || uc <= 0.0 {
        return;
    }
    // du/dt = (pi/2) cosh t * u * (1 - u) * 2
    let weight = PI * libm::cosh(t) * u * uc * factor;
    if weight == 0.0 {
        return;
    }
    let values = f(u, uc);
    for (acc, v) in sum.iter_mut().zip(values.iter()) {
        let contribution = v * weight;
        if contribution.is_finite() {
            *acc += contribution;
        }
    }
}

/// Adaptive Gauss–Kronrod (7/15) integration over a finite interval.
///
/// Returns the integral estimate; subintervals are bisected until the
/// Kronrod/Gauss difference on each falls below its share of `abs_tol`.
pub fn integrate<F>(f: F, a: f64, b: f64, abs_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    gk_recursive(&f, a, b, abs_tol, 0)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * GK_WEIGHTS_K[7];
    let mut gauss = fc * GK_WEIGHTS_G[3];
    for i in 0..7 {
        let dx = half * GK_NODES[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += GK_WEIGHTS_K[i] * pair;
        if i % 2 == 1 {
            gauss += GK_WEIGHTS_G[i / 2] * pair;
        }
    }
    (kronrod * half, abs((kronrod - gauss) * half))
}

fn gk_recursive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth >= 48 || !(b - a > 1e-15 * (abs(a) + abs(b))) {
        return value;
    }
    let mid = 0.5 * (a + b);
    gk_recursive(f, a, mid, 0.5 * tol, depth + 1) + gk_recursive(f, mid, b, 0.5 * tol, depth + 1)
}

/// Bisection root finder on a sign-changing bracket.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if abs(hi - lo) <= x_tol || mid == lo || mid == hi {
            return mid;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
