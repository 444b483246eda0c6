//! Derivative-free minimization for small, barrier-constrained objectives.
//!
//! Objectives return `+inf` outside their feasible set. Nelder–Mead copes
//! with that directly; the quasi-Newton polish uses finite-difference
//! gradients and a backtracking line search that rejects infinite trial
//! points.

use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop when the spread of simplex values is below
    /// `rel_tolerance * (|f_best| + rel_tolerance)`.
    pub rel_tolerance: f64,
    /// ...and every vertex is within this distance of the best one.
    pub x_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            rel_tolerance: 1e-10,
            x_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<const N: usize> {
    pub x: [f64; N],
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Nelder–Mead with standard coefficients. `step[i]` sets the initial
/// simplex edge along coordinate `i`; infeasible vertices are pulled towards
/// `x0` (and tried on the other side) until they evaluate finite.
pub fn nelder_mead<const N: usize, F>(
    mut f: F,
    x0: [f64; N],
    step: [f64; N],
    opts: &NelderMeadOptions,
) -> Minimum<N>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let f0 = sanitize(f(&x0));
    if !f0.is_finite() {
        return Minimum {
            x: x0,
            f: f0,
            iterations: 0,
            converged: false,
        };
    }
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((x0, f0));
    for i in 0..N {
        let mut s = if step[i] != 0.0 { step[i] } else { 1e-3 };
        let mut vertex = (x0, f64::INFINITY);
        for _ in 0..30 {
            for sign in [1.0, -1.0] {
                let mut x = x0;
                x[i] += sign * s;
                let fx = sanitize(f(&x));
                if fx.is_finite() {
                    vertex = (x, fx);
                    break;
                }
            }
            if vertex.1.is_finite() {
                break;
            }
            s *= 0.5;
        }
        if !vertex.1.is_finite() {
            // degenerate direction: keep a tiny finite perturbation anyway
            vertex.0[i] += s;
        }
        simplex.push(vertex);
    }

    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0];
        let worst = simplex[N];
        let spread = worst.1 - best.1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best.0.iter()).map(|(a, b)| math::abs(a - b)))
            .fold(0.0, f64::max);
        if spread.is_finite()
            && spread <= opts.rel_tolerance * (math::abs(best.1) + opts.rel_tolerance)
            && size <= opts.x_tolerance.max(1e-8 * max_abs(&best.0))
        {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for j in 0..N {
                centroid[j] += x[j];
            }
        }
        for c in centroid.iter_mut() {
            *c /= N as f64;
        }
        let toward = |coef: f64| {
            let mut x = [0.0; N];
            for j in 0..N {
                x[j] = centroid[j] + coef * (centroid[j] - worst.0[j]);
            }
            x
        };

        let xr = toward(REFLECT);
        let fr = sanitize(f(&xr));
        if fr < best.1 {
            let xe = toward(EXPAND);
            let fe = sanitize(f(&xe));
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = toward(CONTRACT);
            (xc, sanitize(f(&xc)))
        } else {
            let xc = toward(-CONTRACT);
            (xc, sanitize(f(&xc)))
        };
        if fc < worst.1.min(fr) {
            simplex[N] = (xc, fc);
            continue;
        }
        for v in simplex.iter_mut().skip(1) {
            for j in 0..N {
                v.0[j] = best.0[j] + SHRINK * (v.0[j] - best.0[j]);
            }
            v.1 = sanitize(f(&v.0));
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Minimum {
        x: simplex[0].0,
        f: simplex[0].1,
        iterations,
        converged,
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(math::abs(*v)))
}

/// Central-difference gradient; falls back to one-sided differences next to
/// a barrier. `None` when neither side is finite along some coordinate.
pub fn gradient<const N: usize, F>(f: &mut F, x: &[f64; N], fx: f64) -> Option<[f64; N]>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let mut g = [0.0; N];
    for i in 0..N {
        let h = 1e-6 * (1.0 + math::abs(x[i]));
        let mut xp = *x;
        xp[i] += h;
        let mut xm = *x;
        xm[i] -= h;
        let fp = sanitize(f(&xp));
        let fm = sanitize(f(&xm));
        g[i] = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * h),
            (true, false) => (fp - fx) / h,
            (false, true) => (fx - fm) / h,
            (false, false) => return None,
        };
    }
    Some(g)
}

/// BFGS with finite-difference gradients and Armijo backtracking, used to
/// polish a Nelder–Mead solution. Never returns a point worse than `x0`.
pub fn bfgs_polish<const N: usize, F>(mut f: F, x0: [f64; N], max_iterations: usize) -> Minimum<N>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let mut x = x0;
    let mut fx = sanitize(f(&x));
    let mut result = Minimum {
        x,
        f: fx,
        iterations: 0,
        converged: false,
    };
    if !fx.is_finite() {
        return result;
    }
    let Some(mut g) = gradient(&mut f, &x, fx) else {
        return result;
    };
    let mut hinv = [[0.0; N]; N];
    for (i, row) in hinv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for it in 0..max_iterations {
        result.iterations = it;
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
        if gnorm <= 1e-9 * (1.0 + math::abs(fx)) {
            result.converged = true;
            break;
        }
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = -(0..N).map(|j| hinv[i][j] * g[j]).sum::<f64>();
        }
        let mut slope: f64 = (0..N).map(|i| d[i] * g[i]).sum();
        if !(slope < 0.0) {
            // reset to steepest descent
            for (i, row) in hinv.iter_mut().enumerate() {
                *row = [0.0; N];
                row[i] = 1.0;
            }
            for i in 0..N {
                d[i] = -g[i];
            }
            slope = -(0..N).map(|i| g[i] * g[i]).sum::<f64>();
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..50 {
            let mut xn = x;
            for i in 0..N {
                xn[i] += t * d[i];
            }
            let fnew = sanitize(f(&xn));
            if fnew.is_finite() && fnew <= fx + 1e-4 * t * slope {
                next = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = next else {
            break;
        };
        let Some(gn) = gradient(&mut f, &xn, fnew) else {
            break;
        };
        let mut s = [0.0; N];
        let mut y = [0.0; N];
        for i in 0..N {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        let sy: f64 = (0..N).map(|i| s[i] * y[i]).sum();
        if sy > 1e-14 {
            let mut hy = [0.0; N];
            for i in 0..N {
                hy[i] = (0..N).map(|j| hinv[i][j] * y[j]).sum();
            }
            let yhy: f64 = (0..N).map(|i| y[i] * hy[i]).sum();
            for i in 0..N {
                for j in 0..N {
                    hinv[i][j] += ((sy + yhy) * s[i] * s[j]) / (sy * sy)
                        - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if fx < result.f {
            result.x = x;
            result.f = fx;
        }
        if improvement <= 1e-15 * (1.0 + math::abs(fx)) {
            result.converged = true;
            break;
        }
    }
    result
}

/// Central-difference Hessian with per-coordinate steps
/// `max(1e-5, 1e-5 |x_i|)`. `None` if any evaluation is not finite.
pub fn hessian<const N: usize, F>(mut f: F, x: &[f64; N]) -> Option<[[f64; N]; N]>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let f0 = f(x);
    if !f0.is_finite() {
        return None;
    }
    let mut steps = [0.0; N];
    for i in 0..N {
        steps[i] = (1e-5 * math::abs(x[i])).max(1e-5);
    }
    let mut eval = |di: &[(usize, f64)]| {
        let mut xp = *x;
        for &(i, s) in di {
            xp[i] += s;
        }
        f(&xp)
    };
    let mut hess = [[0.0; N]; N];
    for i in 0..N {
        let hi = steps[i];
        let fp = eval(&[(i, hi)]);
        let fm = eval(&[(i, -hi)]);
        hess[i][i] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let fpp = eval(&[(i, hi), (j, hj)]);
            let fpm = eval(&[(i, hi), (j, -hj)]);
            let fmp = eval(&[(i, -hi), (j, hj)]);
            let fmm = eval(&[(i, -hi), (j, -hj)]);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess.iter()
        .all(|row| row.iter().all(|v| v.is_finite()))
        .then_some(hess)
}

/// Inverse of a symmetric positive-definite matrix via Cholesky. `None` when
/// the matrix is not positive definite.
pub fn spd_inverse<const N: usize>(a: &[[f64; N]; N]) -> Option<[[f64; N]; N]> {
    let mut l = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..=i {
            let mut s = a[i][j];
            for m in 0..j {
                s -= l[i][m] * l[j][m];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = math::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // invert L, then A^-1 = L^-T L^-1
    let mut linv = [[0.0; N]; N];
    for i in 0..N {
        linv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let mut s = 0.0;
            for m in j..i {
                s -= l[i][m] * linv[m][j];
            }
            linv[i][j] = s / l[i][i];
        }
    }
    let mut inv = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..=i {
            let mut s = 0.0;
            for m in i..N {
                s += linv[m][i] * linv[m][j];
            }
            inv[i][j] = s;
            inv[j][i] = s;
        }
    }
    inv.iter()
        .all(|row| row.iter().all(|v| v.is_finite()))
        .then_some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64; 2]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let m = nelder_mead(rosenbrock, [-1.2, 1.0], [0.5, 0.5], &NelderMeadOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{m:?}");
        let p = bfgs_polish(rosenbrock, m.x, 200);
        assert!(p.f <= m.f);
        assert!((p.x[0] - 1.0).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn nelder_mead_respects_barrier() {
        // minimum of (x - 2)^2 restricted to x < 1 sits against the barrier
        let f = |x: &[f64; 1]| if x[0] < 1.0 { (x[0] - 2.0).powi(2) } else { f64::INFINITY };
        let m = nelder_mead(f, [0.0], [2.0], &NelderMeadOptions::default());
        assert!(m.f.is_finite() && m.x[0] < 1.0 && m.x[0] > 0.999);
    }

    #[test]
    fn infeasible_start_is_reported() {
        let m = nelder_mead(|_: &[f64; 2]| f64::INFINITY, [0.0, 0.0], [1.0, 1.0], &NelderMeadOptions::default());
        assert!(!m.converged);
    }

    #[test]
    fn quadratic_hessian_and_inverse() {
        let a = [2.0, 8.0, 0.5];
        let c = [1.0, -3.0, 10.0];
        let f = |x: &[f64; 3]| 0.5 * (0..3).map(|j| a[j] * (x[j] - c[j]).powi(2)).sum::<f64>();
        let h = hessian(f, &c).unwrap();
        let inv = spd_inverse(&h).unwrap();
        for j in 0..3 {
            assert!((inv[j][j].sqrt() - 1.0 / a[j].sqrt()).abs() < 1e-5);
        }
        assert!(spd_inverse(&[[1.0, 2.0], [2.0, 1.0]]).is_none());
    }
}
