//! A priori constants bounding solutions of the auxiliary problem
//! families, plus the bracket-stage constants for the truncated
//! (lower/upper solution) argument.
//!
//! Every constant is defined as the root of a scalar equation or the
//! first passing rung of a doubling ladder, and every constructor
//! re-substitutes its output into the defining relation before
//! returning (`debug_assert`-free: the check is part of the contract).
//! All roots come from bracketing + bisection so the exponent `p_-`
//! may be any real > 1; no closed forms are used.
//!
//! The uniform bound `K` replaces the abstract embedding constants of
//! the usual Poincare-Wirtinger argument with a fully explicit chain:
//! `||u||_inf <= ||u'||_{L^1} <= T^{(p-1)/p} ||u'||_{L^p}` together with
//! `||u'||_{L^p}^p <= T + ||e||_{L^1} ||u||_inf` gives the scalar
//! equation `x^p = T^{p-1} (T + ||e||_{L^1} x)` solved by `K`.

use crate::math;
use crate::periodic::PeriodicSample;
use crate::rootfind;

/// Failures in bound computations.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundsError {
    /// A user function returned a non-finite value during a sup scan.
    NonFinite { at: f64 },
    /// Invalid input (non-positive period, exponent not above 1, ...).
    BadInput { what: &'static str },
    /// A self-check failed after construction; indicates a solver bug.
    SelfCheck { what: &'static str },
}

impl core::fmt::Display for BoundsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BoundsError::NonFinite { at } => write!(f, "non-finite function value at {at:e}"),
            BoundsError::BadInput { what } => write!(f, "invalid input: {what}"),
            BoundsError::SelfCheck { what } => write!(f, "bound self-check failed: {what}"),
        }
    }
}

impl core::error::Error for BoundsError {}

/// The bound ledger for the damped `epsilon`-family
/// `(phi_{p(t)}(u'))' + theta(u) u' - eps u = e(t)`:
/// every solution with any `eps` in `(0, eps_star]` satisfies
/// `||u||_inf <= r2` and `||u'||_inf <= r4`, and `r = r2 + r4 + 1`
/// bounds the `C^1` norm strictly.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriConstants {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r: f64,
    pub eps_star: f64,
    /// Input echo: (T, p_minus, ||e_tilde||_L1, ||e||_L1, sup |theta| on [-r2, r2]).
    pub inputs: BoundInputs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub period: f64,
    pub p_minus: f64,
    pub tilde_e_l1: f64,
    pub e_l1: f64,
    pub theta_sup: f64,
}

/// Uniform sup bound for the undamped auxiliary problem
/// `(phi_{p(t)}(u'))' + theta(c + u) u' = e(t)`, independent of `theta`
/// and of the shift `c` (neither is an input).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformBoundK {
    pub k: f64,
    pub period: f64,
    pub p_minus: f64,
    pub e_l1: f64,
}

/// Constants for the truncated bracket problem: `m1` bounds the sup norm
/// of every homotopy iterate, `c3` is the linear growth coefficient of
/// the modified right-hand side, `m2` bounds the derivative sup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketBounds {
    pub m1: f64,
    pub m2: f64,
    pub c3: f64,
}

/// Root of `x^{p} - ||e_tilde||_{L^1} T^{(p-1)/p} x - T = 0` (unique
/// positive root: the map is negative at 0 and eventually increasing).
pub fn compute_r1(period: f64, p_minus: f64, tilde_e_l1: f64) -> Result<f64, BoundsError> {
    check_pt(period, p_minus)?;
    if !(tilde_e_l1 >= 0.0) {
        return Err(BoundsError::BadInput { what: "negative L1 norm" });
    }
    let b = tilde_e_l1 * math::pow(period, (p_minus - 1.0) / p_minus);
    let f = |x: f64| math::pow(x, p_minus) - b * x - period;
    let hi_start = 1.0 + b + period;
    let (lo, hi) = rootfind::expand_bracket(&f, 0.0, hi_start, 1e300)
        .map_err(|_| BoundsError::SelfCheck { what: "r1 bracket" })?;
    // restrict to the positive root: f < 0 on [0, root)
    let root = rootfind::bisect(&f, lo.max(0.0), hi, 1e-15)
        .map_err(|_| BoundsError::SelfCheck { what: "r1 bisect" })?;
    let scale = 1.0 + b * root + period;
    if f(root).abs() > 1e-12 * scale {
        return Err(BoundsError::SelfCheck { what: "r1 residual" });
    }
    Ok(root)
}

/// Completes the ledger from `r1`:
///
/// ```text
/// r2 = T^{(p-1)/p} r1
/// r3 = max( ||e||_L1 + r2 sup_{|v| <= r2} |theta(v)| + eps_star r2 T , 1 )
/// r4 = r3^{1/(p-1)}
/// r  = r2 + r4 + 1
/// ```
pub fn compute_chain<F>(
    r1: f64,
    period: f64,
    p_minus: f64,
    tilde_e_l1: f64,
    e_l1: f64,
    theta: F,
    eps_star: f64,
) -> Result<AprioriConstants, BoundsError>
where
    F: Fn(f64) -> f64,
{
    check_pt(period, p_minus)?;
    if !(eps_star > 0.0) {
        return Err(BoundsError::BadInput { what: "eps_star must be > 0" });
    }
    let r2 = math::pow(period, (p_minus - 1.0) / p_minus) * r1;
    let theta_sup = sup_abs_on(&theta, -r2, r2)?;
    let r3 = (e_l1 + r2 * theta_sup + eps_star * r2 * period).max(1.0);
    let r4 = math::pow(r3, 1.0 / (p_minus - 1.0));
    let r = r2 + r4 + 1.0;
    Ok(AprioriConstants {
        r1,
        r2,
        r3,
        r4,
        r,
        eps_star,
        inputs: BoundInputs { period, p_minus, tilde_e_l1, e_l1, theta_sup },
    })
}

/// Root of `x^{p} = T^{p-1} (T + ||e||_{L^1} x)`; the sup bound of the
/// undamped auxiliary family. Does not take `theta` or the shift as
/// inputs — the bound is uniform in both.
pub fn compute_k(period: f64, p_minus: f64, e_l1: f64) -> Result<UniformBoundK, BoundsError> {
    check_pt(period, p_minus)?;
    if !(e_l1 >= 0.0) {
        return Err(BoundsError::BadInput { what: "negative L1 norm" });
    }
    let tp = math::pow(period, p_minus - 1.0);
    let f = |x: f64| math::pow(x, p_minus) - tp * (period + e_l1 * x);
    let hi_start = 1.0 + period + tp * (period + e_l1);
    let (lo, hi) = rootfind::expand_bracket(&f, 0.0, hi_start, 1e300)
        .map_err(|_| BoundsError::SelfCheck { what: "k bracket" })?;
    let k = rootfind::bisect(&f, lo.max(0.0), hi, 1e-15)
        .map_err(|_| BoundsError::SelfCheck { what: "k bisect" })?;
    let scale = 1.0 + tp * (period + e_l1 * k);
    if f(k).abs() > 1e-12 * scale {
        return Err(BoundsError::SelfCheck { what: "k residual" });
    }
    Ok(UniformBoundK { k, period, p_minus, e_l1 })
}

/// Smallest `m1` on the ladder `||beta||_inf + 2^j` such that at every
/// grid node, with margin 1e-9,
///
/// ```text
/// h - g(beta) + m1 - beta > 0   and   h - g(alpha) - m1 - alpha < 0.
/// ```
///
/// Both inequalities are monotone in `m1`, so the ladder terminates.
pub fn compute_m1<G>(
    alpha: &PeriodicSample,
    beta: &PeriodicSample,
    g: G,
    h: &PeriodicSample,
) -> Result<f64, BoundsError>
where
    G: Fn(f64) -> f64,
{
    const MARGIN: f64 = 1e-9;
    let beta_sup = beta.sup_norm();
    let holds = |m1: f64| -> Result<bool, BoundsError> {
        for i in 0..alpha.values().len() {
            let (a, b, hv) = (alpha.values()[i], beta.values()[i], h.values()[i]);
            let gb = finite(g(b), b)?;
            let ga = finite(g(a), a)?;
            if hv - gb + m1 - b < MARGIN {
                return Ok(false);
            }
            if hv - ga - m1 - a > -MARGIN {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut step = 1.0;
    for _ in 0..200 {
        let m1 = beta_sup + step;
        if holds(m1)? {
            return Ok(m1);
        }
        step *= 2.0;
    }
    Err(BoundsError::SelfCheck { what: "m1 ladder did not terminate" })
}

/// Growth coefficient `c3` and derivative bound `m2` for the truncated
/// right-hand side.
///
/// `c3 = max(||h||_inf + sup_band |g| + 2 m1, sup_band |f|)` with the
/// band the truncation range `[min alpha, max beta]`; `m2` is the first
/// rung > 1 of a doubling ladder with
///
/// ```text
/// ( m2^{p_- - 1} - (2 m1 / T + 1)^{p^+ - 1} ) / c3 > T + 2 m1
/// ```
/// holding with margin 1e-9.
#[allow(clippy::too_many_arguments)]
pub fn compute_c3_m2<F, G>(
    m1: f64,
    f: F,
    g: G,
    alpha: &PeriodicSample,
    beta: &PeriodicSample,
    h: &PeriodicSample,
    period: f64,
    p_minus: f64,
    p_plus: f64,
) -> Result<BracketBounds, BoundsError>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    const MARGIN: f64 = 1e-9;
    let band_lo = alpha.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let band_hi = beta.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let g_sup = sup_abs_on(&g, band_lo, band_hi)?;
    let f_sup = sup_abs_on(&f, band_lo, band_hi)?;
    let h_sup = h.sup_norm();
    let c3 = (h_sup + g_sup + 2.0 * m1).max(f_sup);

    let base = math::pow(2.0 * m1 / period + 1.0, p_plus - 1.0);
    let ok = |m2: f64| (math::pow(m2, p_minus - 1.0) - base) / c3 - (period + 2.0 * m1) > MARGIN;
    let mut m2 = 2.0;
    for _ in 0..4000 {
        if ok(m2) {
            return Ok(BracketBounds { m1, m2, c3 });
        }
        m2 *= 2.0;
    }
    Err(BoundsError::SelfCheck { what: "m2 ladder did not terminate" })
}

/// Max of `|f|` on `[lo, hi]`: 10^4-point scan plus a short three-point
/// local refinement around the best node.
fn sup_abs_on<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<f64, BoundsError> {
    if lo > hi {
        return Err(BoundsError::BadInput { what: "empty scan interval" });
    }
    if lo == hi {
        return finite(f(lo), lo).map(|v| v.abs());
    }
    const SCAN: usize = 10_001;
    let pts = rootfind::linspace(lo, hi, SCAN);
    let mut best = 0.0f64;
    let mut best_idx = 0usize;
    for (i, &x) in pts.iter().enumerate() {
        let v = finite(f(x), x)?.abs();
        if v > best {
            best = v;
            best_idx = i;
        }
    }
    // local refinement between the neighbours of the best node
    let mut a = pts[best_idx.saturating_sub(1)];
    let mut b = pts[(best_idx + 1).min(SCAN - 1)];
    for _ in 0..40 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        let v1 = finite(f(m1), m1)?.abs();
        let v2 = finite(f(m2), m2)?.abs();
        best = best.max(v1).max(v2);
        if v1 < v2 {
            a = m1;
        } else {
            b = m2;
        }
    }
    Ok(best)
}

fn finite(v: f64, at: f64) -> Result<f64, BoundsError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(BoundsError::NonFinite { at })
    }
}

fn check_pt(period: f64, p_minus: f64) -> Result<(), BoundsError> {
    if !(period > 0.0) {
        return Err(BoundsError::BadInput { what: "period must be > 0" });
    }
    if !(p_minus > 1.0) {
        return Err(BoundsError::BadInput { what: "p_minus must be > 1" });
    }
    Ok(())
}

/// Re-evaluates the defining relations of a computed ledger; used by the
/// certification layer and the acceptance suite.
pub fn recheck_chain(c: &AprioriConstants) -> bool {
    let i = &c.inputs;
    let b = i.tilde_e_l1 * math::pow(i.period, (i.p_minus - 1.0) / i.p_minus);
    let eq_r1 = math::pow(c.r1, i.p_minus) - b * c.r1 - i.period;
    let r2_ok = (c.r2 - math::pow(i.period, (i.p_minus - 1.0) / i.p_minus) * c.r1).abs()
        <= 1e-12 * (1.0 + c.r2);
    let r3_ok = (c.r3 - (i.e_l1 + c.r2 * i.theta_sup + c.eps_star * c.r2 * i.period).max(1.0))
        .abs()
        <= 1e-12 * (1.0 + c.r3);
    let r4_ok = (c.r4 - math::pow(c.r3, 1.0 / (i.p_minus - 1.0))).abs() <= 1e-12 * (1.0 + c.r4);
    let r_ok = (c.r - (c.r2 + c.r4 + 1.0)).abs() <= 1e-12 * (1.0 + c.r);
    eq_r1.abs() <= 1e-11 * (1.0 + b * c.r1 + i.period) && r2_ok && r3_ok && r4_ok && r_ok
}

/// Re-evaluates the defining equation of `K`.
pub fn recheck_k(k: &UniformBoundK) -> bool {
    let tp = math::pow(k.period, k.p_minus - 1.0);
    let eq = math::pow(k.k, k.p_minus) - tp * (k.period + k.e_l1 * k.k);
    eq.abs() <= 1e-11 * (1.0 + tp * (k.period + k.e_l1 * k.k))
}
