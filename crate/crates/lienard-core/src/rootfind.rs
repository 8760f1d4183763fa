//! Scalar root finding by bracketing and bisection.
//!
//! Every scalar equation in this crate (flux constants, a priori bound
//! constants, averaged-map roots) is solved the same way: certify a sign
//! change, bisect to a relative width, then polish with one secant step
//! clamped to the bracket. No derivatives, no closed forms, so exponents
//! may be any real > 1.

use alloc::vec::Vec;

use crate::math;

/// Failure modes of the bracketing solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum RootError {
    /// No sign change found after expanding the bracket to the stated span.
    NoBracket { lo: f64, hi: f64 },
    /// The function returned a non-finite value at `x`.
    NonFinite { x: f64 },
}

impl core::fmt::Display for RootError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RootError::NoBracket { lo, hi } => {
                write!(f, "no sign change in [{lo:e}, {hi:e}]")
            }
            RootError::NonFinite { x } => write!(f, "non-finite function value at x = {x:e}"),
        }
    }
}

impl core::error::Error for RootError {}

/// Expands `[lo, hi]` geometrically until `f` changes sign across it.
///
/// Both endpoints move outward by doubling; the expansion stops with
/// `NoBracket` once both |endpoints| exceed `span_limit`.
pub fn expand_bracket<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    span_limit: f64,
) -> Result<(f64, f64), RootError> {
    debug_assert!(lo < hi);
    let mut flo = checked(&f, lo)?;
    let mut fhi = checked(&f, hi)?;
    loop {
        if flo == 0.0 {
            return Ok((lo, lo));
        }
        if fhi == 0.0 {
            return Ok((hi, hi));
        }
        if flo * fhi < 0.0 {
            return Ok((lo, hi));
        }
        if lo.abs() > span_limit && hi.abs() > span_limit {
            return Err(RootError::NoBracket { lo, hi });
        }
        let width = hi - lo;
        lo -= width;
        hi += width;
        flo = checked(&f, lo)?;
        fhi = checked(&f, hi)?;
    }
}

/// Bisection on a certified bracket, to relative width `rel_width`,
/// followed by a single clamped secant polish.
///
/// `f(lo)` and `f(hi)` must have opposite signs (or one of them may be
/// an exact zero, which is returned directly).
pub fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    rel_width: f64,
) -> Result<f64, RootError> {
    if lo > hi {
        core::mem::swap(&mut lo, &mut hi);
    }
    let mut flo = checked(&f, lo)?;
    let mut fhi = checked(&f, hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo * fhi > 0.0 {
        return Err(RootError::NoBracket { lo, hi });
    }
    // 200 halvings always reach f64 resolution; the width test exits earlier.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval at machine resolution
        }
        let fmid = checked(&f, mid)?;
        if fmid == 0.0 {
            return Ok(mid);
        }
        if flo * fmid < 0.0 {
            hi = mid;
            fhi = fmid;
        } else {
            lo = mid;
            flo = fmid;
        }
        let scale = 1.0 + lo.abs().max(hi.abs());
        if hi - lo <= rel_width * scale {
            break;
        }
    }
    // One secant step inside the final bracket sharpens the last digits.
    let root = if fhi != flo {
        let s = lo - flo * (hi - lo) / (fhi - flo);
        if s > lo && s < hi {
            s
        } else {
            0.5 * (lo + hi)
        }
    } else {
        0.5 * (lo + hi)
    };
    Ok(root)
}

/// Scans `points` in order and returns every adjacent pair across which
/// `f` changes sign. A root landing exactly on a grid point is counted
/// once, as the pair entering it (degenerate `(x, x)` for a zero at the
/// first point).
pub fn scan_sign_changes<F: Fn(f64) -> f64>(f: F, points: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if points.len() < 2 {
        return out;
    }
    let mut prev_x = points[0];
    let mut prev_f = f(prev_x);
    if prev_f == 0.0 {
        out.push((prev_x, prev_x));
    }
    for &x in &points[1..] {
        let fx = f(x);
        if prev_f.is_finite() && fx.is_finite() {
            let crossing = prev_f * fx < 0.0;
            let enters_zero = fx == 0.0 && prev_f != 0.0;
            if crossing || enters_zero {
                out.push((prev_x, x));
            }
        }
        prev_x = x;
        prev_f = fx;
    }
    out
}

/// `n` uniformly spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// `n` logarithmically spaced points covering `[lo, hi]`, `0 < lo < hi`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo, "logspace needs 0 < lo < hi");
    let (llo, lhi) = (math::log(lo), math::log(hi));
    linspace(llo, lhi, n)
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            if i == n - 1 {
                hi
            } else if i == 0 {
                lo
            } else {
                math::exp(x)
            }
        })
        .collect()
}

fn checked<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, RootError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(RootError::NonFinite { x })
    }
}
