//! The periodic solution operator for `(phi_{p(t)}(u'))' = w` and the
//! maps built from it.
//!
//! The operator `K` is constructed through the flux identity: with
//! `w_tilde = w - mean(w)` and `W(t) = int_0^t w_tilde`, the derivative
//! of the solution satisfies
//!
//! ```text
//! phi_{p(t)}(u'(t)) = a + W(t),
//! ```
//!
//! where the flux constant `a` is the unique root of
//! `A(a) = int_0^T phi_inv(p(s), a + W(s)) ds` — uniqueness follows from
//! strict monotonicity of `phi_inv`. Then `u' = phi_inv(p, a + W)` has
//! zero mean by construction, `u = int_0^t u'` closes periodically, and
//! `u'(0) = u'(T)` because `W(0) = W(T) = 0` and `p(0) = p(T)`.
//!
//! Fixed points of the map `G(v) = v(0) + Q N(v) + K N(v)` are discrete
//! solutions of the boundary value problem `(phi_{p(t)}(u'))' = l(t,u,u')`;
//! `G` is exposed for residual certification and as a fallback step for
//! the continuation corrector, not as the production solver (it has no
//! contraction guarantee).

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::periodic::{phi, phi_inv, ExponentField, PeriodicError, PeriodicSample};
use crate::rootfind::{self, RootError};

/// Errors from operator-layer evaluations.
#[derive(Debug)]
pub enum OperatorError {
    /// The iterate left the admissible range of the right-hand side (or
    /// the right-hand side returned a non-finite value) at a grid node.
    Domain { node: usize, x: f64 },
    /// Flux-constant bracketing expanded to the span limit without a
    /// sign change — inputs are effectively non-finite.
    BracketFailure { lo: f64, hi: f64 },
    /// Underlying sample problem (missing channel, closure violation).
    Periodic(PeriodicError),
}

impl core::fmt::Display for OperatorError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OperatorError::Domain { node, x } => {
                write!(f, "right-hand side not admissible at node {node} (x = {x:e})")
            }
            OperatorError::BracketFailure { lo, hi } => {
                write!(f, "no flux-constant bracket in [{lo:e}, {hi:e}]")
            }
            OperatorError::Periodic(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for OperatorError {}

impl From<PeriodicError> for OperatorError {
    fn from(e: PeriodicError) -> Self {
        OperatorError::Periodic(e)
    }
}

type RhsFn = dyn Fn(usize, f64, f64, f64) -> f64 + Send + Sync;

/// A right-hand side `l(t, x, y)` with an admissible open range for `x`.
///
/// Outside the guard the evaluation reports a domain error instead of
/// silently returning NaN; this is how singular restoring forces are
/// kept away from their pole. Evaluators receive the grid node index as
/// well as the time, so right-hand sides tabulated on the grid (like the
/// truncated bracket modification) can look data up directly.
pub struct Rhs {
    eval: Box<RhsFn>,
    guard: (f64, f64),
}

impl Rhs {
    /// Wraps a plain `l(t, x, y)` with an unbounded guard.
    pub fn new<F>(f: F) -> Rhs
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        Rhs {
            eval: Box::new(move |_, t, x, y| f(t, x, y)),
            guard: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Wraps an evaluator that also receives the grid node index.
    pub fn from_node_fn<F>(f: F) -> Rhs
    where
        F: Fn(usize, f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        Rhs { eval: Box::new(f), guard: (f64::NEG_INFINITY, f64::INFINITY) }
    }

    /// Lienard form `l(t, x, y) = h(t) - g(x) - f(x) y`.
    pub fn lienard<F, G, H>(f: F, g: G, h: H) -> Rhs
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Rhs::new(move |t, x, y| h(t) - g(x) - f(x) * y)
    }

    /// Restricts the admissible `x` range to the open interval `(lo, hi)`.
    pub fn with_guard(mut self, lo: f64, hi: f64) -> Rhs {
        self.guard = (lo, hi);
        self
    }

    pub fn guard(&self) -> (f64, f64) {
        self.guard
    }

    /// Guarded evaluation at grid node `node`, time `t`.
    pub fn eval(&self, node: usize, t: f64, x: f64, y: f64) -> Result<f64, OperatorError> {
        if !(x > self.guard.0 && x < self.guard.1) {
            return Err(OperatorError::Domain { node, x });
        }
        let v = (self.eval)(node, t, x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(OperatorError::Domain { node, x })
        }
    }
}

impl core::fmt::Debug for Rhs {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Rhs").field("guard", &self.guard).finish_non_exhaustive()
    }
}

/// Output of [`k_op`]: the periodic pair, the flux constant and the
/// discrete residual of the equation it solves.
#[derive(Debug, Clone)]
pub struct OperatorResult {
    pub u: PeriodicSample,
    pub a_star: f64,
    pub residual: f64,
}

/// Pointwise composition `N_l(v)(t) = l(t, v(t), v'(t))` at the grid
/// nodes. Requires both channels; reports the node index when the
/// iterate leaves the admissible region.
pub fn nemytskii(rhs: &Rhs, v: &PeriodicSample) -> Result<PeriodicSample, OperatorError> {
    let d = v.require_derivative()?;
    let grid = *v.grid();
    let mut out = Vec::with_capacity(grid.n_nodes());
    for i in 0..grid.n_nodes() {
        out.push(rhs.eval(i, grid.node(i), v.values()[i], d[i])?);
    }
    Ok(PeriodicSample::from_parts_unchecked(grid, out, None))
}

/// Projector `P: v -> v(0)` (constant sample).
pub fn proj_p(v: &PeriodicSample) -> PeriodicSample {
    PeriodicSample::constant(*v.grid(), v.values()[0])
}

/// Projector `Q: w -> mean(w)` (constant sample, trapezoid mean).
pub fn proj_q(w: &PeriodicSample) -> PeriodicSample {
    PeriodicSample::constant(*w.grid(), w.mean())
}

/// Finds the unique flux constant `a` with
/// `A(a) = int_0^T phi_inv(p(s), a + W(s)) ds = 0`.
///
/// `w_cumint` is the cumulative integral of a zero-mean forcing. The
/// bracket expands geometrically from `[-1, 1]`; failure to find a sign
/// change by span 1e12 signals non-finite input. Bisection runs to
/// relative width 1e-14 with a secant polish, then a few extra secant
/// iterations sharpen `|A(a)|` toward the 1e-12 T target.
pub fn solve_flux_constant(
    pf: &ExponentField,
    w_cumint: &PeriodicSample,
) -> Result<f64, OperatorError> {
    let grid = *w_cumint.grid();
    let w = w_cumint.values();
    let a_of = |a: f64| {
        let vals: Vec<f64> = (0..grid.n_nodes())
            .map(|i| phi_inv(pf.at(i), a + w[i]))
            .collect();
        crate::periodic::trapezoid(&grid, &vals)
    };
    // Exact-zero fast path keeps equilibrium problems bit-exact.
    let a0 = a_of(0.0);
    if a0 == 0.0 {
        return Ok(0.0);
    }
    let sup_w = w_cumint.sup_norm();
    let half = (1.0 + sup_w).max(1.0);
    let (lo, hi) = match rootfind::expand_bracket(&a_of, -half, half, 1e12) {
        Ok(b) => b,
        Err(RootError::NoBracket { lo, hi }) => {
            return Err(OperatorError::BracketFailure { lo, hi })
        }
        Err(RootError::NonFinite { x }) => {
            return Err(OperatorError::BracketFailure { lo: x, hi: x })
        }
    };
    let mut a = rootfind::bisect(&a_of, lo, hi, 1e-15)
        .map_err(|_| OperatorError::BracketFailure { lo, hi })?;
    // Secant sharpening: A is strictly increasing but only piecewise
    // smooth (kinks where a + W crosses zero for p > 2).
    let target = 0.5e-12 * grid.period();
    let mut fa = a_of(a);
    if fa.abs() > target {
        let mut b = a + 1e-13 * (1.0 + a.abs());
        let mut fb = a_of(b);
        for _ in 0..8 {
            if fa.abs() <= target || fb == fa {
                break;
            }
            let c = a - fa * (b - a) / (fb - fa);
            if !c.is_finite() {
                break;
            }
            b = a;
            fb = fa;
            a = c;
            fa = a_of(a);
        }
    }
    Ok(a)
}

/// The periodic solution operator: solves `(phi_{p(t)}(u'))' = w - mean(w)`
/// with `u(0) = 0` and both periodic closures.
///
/// The mean is subtracted internally so the operator is total; at a true
/// solution of the full problem the projected mean vanishes anyway.
pub fn k_op(pf: &ExponentField, w: &PeriodicSample) -> Result<OperatorResult, OperatorError> {
    let grid = *w.grid();
    let (_, w_tilde) = w.decompose();
    let w_cum = w_tilde.cumint();
    let a = solve_flux_constant(pf, &w_cum)?;
    let d: Vec<f64> = (0..grid.n_nodes())
        .map(|i| phi_inv(pf.at(i), a + w_cum.values()[i]))
        .collect();
    let d_sample = PeriodicSample::from_parts_unchecked(grid, d, None);
    let u_vals = d_sample.cumint();
    let u = PeriodicSample::from_parts_unchecked(
        grid,
        u_vals.values().to_vec(),
        Some(d_sample.values().to_vec()),
    );
    let residual = flux_residual_sup(pf, &u, &w_tilde);
    Ok(OperatorResult { u, a_star: a, residual })
}

/// Fixed-point map `G(v) = P v + Q N(v) + K N(v)`.
pub fn g_map(
    pf: &ExponentField,
    rhs: &Rhs,
    v: &PeriodicSample,
) -> Result<PeriodicSample, OperatorError> {
    let n = nemytskii(rhs, v)?;
    let q = n.mean();
    let k = k_op(pf, &n)?;
    let base = v.values()[0] + q;
    let grid = *v.grid();
    let values = k.u.values().iter().map(|u| base + u).collect();
    let derivative = k.u.derivative().map(|d| d.to_vec());
    Ok(PeriodicSample::from_parts_unchecked(grid, values, derivative))
}

/// Signed per-node residual `D[phi_{p}(u')](t_i) - l(t_i, u_i, u'_i)`,
/// with the divergence term taken as the cyclic centered difference of
/// the node values of `phi_{p(t_i)}(u'(t_i))`.
pub fn residual_profile(
    pf: &ExponentField,
    rhs: &Rhs,
    u: &PeriodicSample,
) -> Result<Vec<f64>, OperatorError> {
    let d = u.require_derivative()?;
    let grid = *u.grid();
    let n = grid.cells();
    let dt = grid.spacing();
    let flux: Vec<f64> = (0..n).map(|i| phi(pf.at(i), d[i])).collect();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let prev = flux[(i + n - 1) % n];
        let next = flux[(i + 1) % n];
        let dphi = (next - prev) / (2.0 * dt);
        let ell = rhs.eval(i, grid.node(i), u.values()[i], d[i])?;
        out.push(dphi - ell);
    }
    out.push(out[0]);
    Ok(out)
}

/// Sup-norm of [`residual_profile`] — the certificate residual.
pub fn bvp_residual(
    pf: &ExponentField,
    rhs: &Rhs,
    u: &PeriodicSample,
) -> Result<f64, OperatorError> {
    let profile = residual_profile(pf, rhs, u)?;
    Ok(profile.iter().fold(0.0f64, |m, r| m.max(r.abs())))
}

/// Residual of `(phi(u'))' = w` for a known forcing sample (no
/// right-hand-side callable involved).
fn flux_residual_sup(pf: &ExponentField, u: &PeriodicSample, w: &PeriodicSample) -> f64 {
    let d = match u.derivative() {
        Some(d) => d,
        None => return f64::INFINITY,
    };
    let grid = *u.grid();
    let n = grid.cells();
    let dt = grid.spacing();
    let flux: Vec<f64> = (0..n).map(|i| phi(pf.at(i), d[i])).collect();
    let mut sup = 0.0f64;
    for i in 0..n {
        let prev = flux[(i + n - 1) % n];
        let next = flux[(i + 1) % n];
        let dphi = (next - prev) / (2.0 * dt);
        sup = sup.max((dphi - w.values()[i]).abs());
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::Grid;
    use core::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    #[test]
    fn nemytskii_examples() {
        let g = grid(32);
        let pf_x = Rhs::new(|_, x, _| x);
        let v = PeriodicSample::constant(g, 3.0);
        let out = nemytskii(&pf_x, &v).unwrap();
        assert!(out.values().iter().all(|v| *v == 3.0));

        // equilibrium of the singular model problem
        let rhs = Rhs::lienard(|_| 0.0, |x| 1.0 / x, |_| 1.0).with_guard(0.0, f64::INFINITY);
        let one = PeriodicSample::constant(g, 1.0);
        let out = nemytskii(&rhs, &one).unwrap();
        assert!(out.values().iter().all(|v| *v == 0.0));

        // derivative passthrough
        let rhs_y = Rhs::new(|_, _, y| y);
        let v = PeriodicSample::from_fn_with_derivative(
            g,
            |t| (2.0 * PI * t).sin(),
            |t| 2.0 * PI * (2.0 * PI * t).cos(),
        )
        .unwrap();
        let out = nemytskii(&rhs_y, &v).unwrap();
        for (o, d) in out.values().iter().zip(v.derivative().unwrap()) {
            assert_eq!(o, d);
        }
    }

    #[test]
    fn nemytskii_guard_reports_node() {
        let g = grid(32);
        let rhs = Rhs::lienard(|_| 0.0, |x| 1.0 / x, |_| 1.0).with_guard(0.0, f64::INFINITY);
        let v = PeriodicSample::constant(g, -1.0);
        match nemytskii(&rhs, &v) {
            Err(OperatorError::Domain { node, .. }) => assert_eq!(node, 0),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn projectors() {
        let g = grid(64);
        let v = PeriodicSample::from_fn(g, |t| 2.0 + (2.0 * PI * t).sin()).unwrap();
        assert!(proj_p(&v).values().iter().all(|x| *x == 2.0));

        let w = PeriodicSample::from_fn(g, |t| (2.0 * PI * t).cos()).unwrap();
        assert!(proj_q(&w).values()[0].abs() <= 1e-13);

        let c = PeriodicSample::constant(g, 7.5);
        assert!((proj_q(&c).values()[0] - 7.5).abs() <= 1e-13);
    }

    #[test]
    fn flux_constant_examples() {
        let g = grid(256);
        let pf = ExponentField::constant(g, 2.0).unwrap();

        // zero cumulative integral -> a = 0 exactly
        let zero = PeriodicSample::constant(g, 0.0);
        assert_eq!(solve_flux_constant(&pf, &zero).unwrap(), 0.0);

        // odd-symmetric cumulative integral (from w = cos) -> a = 0
        let w = PeriodicSample::from_fn(g, |t| (2.0 * PI * t).cos()).unwrap();
        let cum = w.cumint();
        let a = solve_flux_constant(&pf, &cum).unwrap();
        assert!(a.abs() < 1e-12, "a = {a:e}");

        // p = 2, W(s) = s - s^2: A(a) = a + trapz(s - s^2), root near -1/6
        let ws = PeriodicSample::from_fn(g, |s| s - s * s).unwrap();
        let a = solve_flux_constant(&pf, &ws).unwrap();
        assert!((a + 1.0 / 6.0).abs() < 1e-4, "a = {a}");
        // independent scalar bisection on the same discrete map
        let quad = crate::periodic::trapezoid(&g, ws.values());
        assert!((a + quad).abs() < 1e-12);
    }

    #[test]
    fn k_op_double_integration() {
        let g = Grid::new(2.0 * PI, 256).unwrap();
        let pf = ExponentField::constant(g, 2.0).unwrap();
        let w = PeriodicSample::from_fn(g, |t| t.cos()).unwrap();
        let res = k_op(&pf, &w).unwrap();
        assert!(res.a_star.abs() < 1e-10);
        for (i, t) in g.nodes().enumerate() {
            let expected = 1.0 - t.cos();
            assert!(
                (res.u.values()[i] - expected).abs() < 2e-3,
                "node {i}: {} vs {expected}",
                res.u.values()[i]
            );
        }
        assert!(res.u.values()[0].abs() < 1e-12);
        assert!(res.u.values()[g.cells()].abs() < 1e-10);
    }

    #[test]
    fn k_op_zero_forcing() {
        let g = grid(64);
        let pf = ExponentField::from_fn(g, |t| 3.0 + (2.0 * PI * t).sin()).unwrap();
        let zero = PeriodicSample::constant(g, 0.0);
        let res = k_op(&pf, &zero).unwrap();
        assert!(res.u.values().iter().all(|v| *v == 0.0));
        assert!(res.u.derivative().unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(res.residual, 0.0);
    }

    #[test]
    fn k_op_halflinear_residual() {
        let g = grid(256);
        let pf = ExponentField::constant(g, 3.0).unwrap();
        let w = PeriodicSample::from_fn(g, |t| (2.0 * PI * t).sin()).unwrap();
        let res = k_op(&pf, &w).unwrap();
        assert!(res.residual <= 1e-4, "residual {:e}", res.residual);
        // closures
        let d = res.u.derivative().unwrap();
        assert!((d[0] - d[g.cells()]).abs() <= 1e-10);
        assert!((res.u.values()[0] - res.u.values()[g.cells()]).abs() <= 1e-10);
    }

    #[test]
    fn g_map_examples() {
        let g = grid(128);
        let pf = ExponentField::constant(g, 2.0).unwrap();

        // equilibrium fixed point, exact
        let rhs = Rhs::lienard(|_| 0.0, |x| 1.0 / x, |_| 1.0).with_guard(0.0, f64::INFINITY);
        let one = PeriodicSample::constant(g, 1.0);
        let gv = g_map(&pf, &rhs, &one).unwrap();
        for v in gv.values() {
            assert_eq!(*v, 1.0);
        }

        // zero right-hand side: G(v) = v(0)
        let zero_rhs = Rhs::new(|_, _, _| 0.0);
        let v = PeriodicSample::from_fn_with_derivative(
            g,
            |t| 2.0 + (2.0 * PI * t).sin(),
            |t| 2.0 * PI * (2.0 * PI * t).cos(),
        )
        .unwrap();
        let gv = g_map(&pf, &zero_rhs, &v).unwrap();
        for x in gv.values() {
            assert_eq!(*x, 2.0);
        }

        // l = sin(2 pi t), v = 0: closed form -sin(2 pi t)/(4 pi^2)
        let rhs_sin = Rhs::new(|t, _, _| (2.0 * PI * t).sin());
        let zero = PeriodicSample::constant(g, 0.0);
        let gv = g_map(&pf, &rhs_sin, &zero).unwrap();
        for (i, t) in g.nodes().enumerate() {
            let expected = -(2.0 * PI * t).sin() / (4.0 * PI * PI);
            assert!(
                (gv.values()[i] - expected).abs() < 1e-4,
                "node {i}: {} vs {expected}",
                gv.values()[i]
            );
        }
    }

    #[test]
    fn residual_zero_at_equilibrium() {
        let g = grid(128);
        let pf = ExponentField::from_fn(g, |t| 3.0 + (2.0 * PI * t).sin()).unwrap();
        let rhs = Rhs::lienard(|_| 0.0, |x| 1.0 / x, |_| 1.0).with_guard(0.0, f64::INFINITY);
        let one = PeriodicSample::constant(g, 1.0);
        assert_eq!(bvp_residual(&pf, &rhs, &one).unwrap(), 0.0);
    }

    #[test]
    fn residual_detects_corruption() {
        let g = grid(128);
        let pf = ExponentField::constant(g, 2.0).unwrap();
        let w = PeriodicSample::from_fn(g, |t| (2.0 * PI * t).sin()).unwrap();
        let res = k_op(&pf, &w).unwrap();
        let rhs = Rhs::new(move |t: f64, _, _| (2.0 * PI * t).sin());
        let base = bvp_residual(&pf, &rhs, &res.u).unwrap();

        let mut deriv = res.u.derivative().unwrap().to_vec();
        deriv[40] += 0.1;
        let corrupted = PeriodicSample::from_parts_unchecked(
            *res.u.grid(),
            res.u.values().to_vec(),
            Some(deriv),
        );
        let bad = bvp_residual(&pf, &rhs, &corrupted).unwrap();
        assert!(bad > 10.0 * base.max(1e-6), "base {base:e}, corrupted {bad:e}");
    }
}
