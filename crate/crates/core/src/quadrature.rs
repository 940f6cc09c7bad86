//! Composite Simpson quadrature with grid doubling, and bisection.

use crate::error::{EngineError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Accepted |S(2n) − S(n)| relative to ∫|f|.
    pub rel_tol: f64,
    /// Floor for integrals whose ∫|f| is itself tiny.
    pub abs_tol: f64,
    /// How many times the starting grid may be doubled.
    pub max_doublings: u32,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_doublings: 14,
        }
    }
}

/// Result of integrating N integrands on one shared grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<const N: usize> {
    pub values: [f64; N],
    /// |S(2n) − S(n)| at acceptance.
    pub error: [f64; N],
    /// Grid points used by the final rule.
    pub points: usize,
}

impl<const N: usize> Integral<N> {
    fn zero() -> Self {
        Integral {
            values: [0.0; N],
            error: [0.0; N],
            points: 0,
        }
    }
}

/// Composite Simpson over uniformly spaced samples (odd count ≥ 3).
fn simpson<const N: usize>(samples: &[[f64; N]], h: f64, abs: bool) -> [f64; N] {
    let n = samples.len() - 1;
    debug_assert!(n.is_multiple_of(2) && n >= 2);
    let mut out = [0.0; N];
    for (i, s) in samples.iter().enumerate() {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        for k in 0..N {
            out[k] += w * if abs { s[k].abs() } else { s[k] };
        }
    }
    out.map(|v| v * h / 3.0)
}

/// Integrates `f` over `[a, b]` (signed, `b < a` allowed) starting from a grid
/// of at least `n_points` points and doubling until every component passes
/// the tolerance. Returns the Richardson-extrapolated values
/// `(16 S(2n) − S(n)) / 15`.
pub fn integrate<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    n_points: usize,
    opts: &QuadratureOptions,
) -> Result<Integral<N>>
where
    F: FnMut(f64) -> Result<[f64; N]>,
{
    if a == b {
        return Ok(Integral::zero());
    }
    let mut intervals = n_points.saturating_sub(1).max(2);
    intervals += intervals % 2;
    let step = |n: usize| (b - a) / n as f64;
    let mut samples = (0..=intervals)
        .map(|i| {
            f(if i == intervals {
                b
            } else {
                a + step(intervals) * i as f64
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut coarse = simpson(&samples, step(intervals), false);
    let mut last_error = [f64::INFINITY; N];

    for _ in 0..=opts.max_doublings {
        let fine_n = 2 * intervals;
        let h = step(fine_n);
        let mut fine = Vec::with_capacity(fine_n + 1);
        for (i, s) in samples.iter().enumerate() {
            fine.push(*s);
            if i < intervals {
                fine.push(f(a + h * (2 * i + 1) as f64)?);
            }
        }
        let value = simpson(&fine, h, false);
        let magnitude = simpson(&fine, h, true);
        let mut error = [0.0; N];
        let mut converged = true;
        for k in 0..N {
            error[k] = (value[k] - coarse[k]).abs();
            if error[k] > (opts.rel_tol * magnitude[k].abs()).max(opts.abs_tol) {
                converged = false;
            }
        }
        if converged {
            let mut values = [0.0; N];
            for k in 0..N {
                values[k] = value[k] + (value[k] - coarse[k]) / 15.0;
            }
            return Ok(Integral {
                values,
                error,
                points: fine_n + 1,
            });
        }
        samples = fine;
        intervals = fine_n;
        coarse = value;
        last_error = error;
    }
    let worst = (0..N)
        .max_by(|&i, &j| last_error[i].total_cmp(&last_error[j]))
        .unwrap_or(0);
    Err(EngineError::Quadrature {
        from: a,
        to: b,
        points: intervals + 1,
        estimate: coarse[worst],
        error: last_error[worst],
    })
}

/// Locates a sign change of `f` inside `[lo, hi]` by bisection until the
/// bracket is narrower than `rel_width · max(|lo|, |hi|)`.
///
/// `f_lo` is `f(lo)`; `f(lo)` and `f(hi)` must have opposite signs.
pub fn bisect_root<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    rel_width: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let scale = lo.abs().max(hi.abs());
    for _ in 0..200 {
        if (hi - lo).abs() <= rel_width * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
