//! Homotopy continuation from the averaged root to the full problem.
//!
//! The path follows the family `(phi_{p(t)}(u'))' = lambda l(t, u, u')`
//! from a root of the averaged map
//! `L(a) = (1/T) int_0^T l(t, a, 0) dt` (where solutions concentrate as
//! `lambda -> 0`) up to `lambda = 1`. Before starting, a one-dimensional
//! Brouwer degree check on the certified sign-change interval gates the
//! solve: no degree, no path.
//!
//! The corrector at fixed `lambda` is damped Newton on the collocated
//! residual
//!
//! ```text
//! F_i(u) = [ phi(s_{i+1/2}) - phi(s_{i-1/2}) ] / dt - lambda l(t_i, u_i, d_i),
//! ```
//!
//! with `s` the cell difference quotients of the unknown node values and
//! `d` the derivative recovered through the flux construction from the
//! current right-hand side (recomputed every iteration, frozen during
//! the line search). The Jacobian keeps the analytic, regularized `phi'`
//! stencil and the diagonal `x`-coupling; the smoothing coupling through
//! `d` is left to the outer iteration. When Newton stalls, one step of
//! the compact fixed-point map `G` re-seeds the iterate — this is also
//! how the path leaves the degenerate constant initial state on fields
//! with `p < 2` or `p > 2`.
//!
//! The damped auxiliary family `(phi(u'))' + theta(u) u' - eps u = e`
//! has mean-zero solutions, so its corrector pins the mean exactly with
//! a bordered system and a scalar equation offset absorbing the
//! quadrature defect.

use alloc::vec;
use alloc::vec::Vec;

use crate::bounds::{self, AprioriConstants, BoundsError};
use crate::linalg::{solve_bordered, CyclicTridiag, LinalgError};
use crate::math;
use crate::operator::{self, OperatorError, Rhs};
use crate::periodic::{phi_inv, ExponentField, Grid, PeriodicError, PeriodicSample};
use crate::rootfind;

/// Continuation failures.
#[derive(Debug)]
pub enum ContinuationError {
    /// The averaged map has no sign change on the scan grid; the degree
    /// hypothesis cannot be certified.
    NoBracket { lo: f64, hi: f64 },
    /// The averaged map vanishes at a degree interval endpoint.
    BoundaryZero { at: f64 },
    /// Zero Brouwer degree on the scan interval.
    DegreeZero { lo: f64, hi: f64 },
    /// The lambda step underflowed the floor; continuation is stuck.
    StepCollapse { lambda: f64, step: f64 },
    /// An iterate left the certified ball; flags boundary-solution risk.
    BoundaryHit { norm: f64, r_bound: f64 },
    /// Converged algebraically but the certificate residual stayed
    /// above the requested tolerance (grid too coarse for the target).
    ResidualAboveTol { residual: f64, tol: f64 },
    /// A converged solution violated an a priori bound.
    BoundViolation { what: &'static str, value: f64, bound: f64 },
    /// The forcing term must have zero mean.
    NonzeroMean { mean: f64 },
    Operator(OperatorError),
    Linalg(LinalgError),
    Bounds(BoundsError),
    Periodic(PeriodicError),
}

impl core::fmt::Display for ContinuationError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ContinuationError::NoBracket { lo, hi } => {
                write!(f, "averaged map has no root bracket in [{lo:e}, {hi:e}]")
            }
            ContinuationError::BoundaryZero { at } => {
                write!(f, "averaged map vanishes at interval endpoint {at:e}")
            }
            ContinuationError::DegreeZero { lo, hi } => {
                write!(f, "Brouwer degree is zero on [{lo:e}, {hi:e}]")
            }
            ContinuationError::StepCollapse { lambda, step } => {
                write!(f, "lambda step collapsed to {step:e} at lambda = {lambda}")
            }
            ContinuationError::BoundaryHit { norm, r_bound } => {
                write!(f, "iterate norm {norm:e} exceeded certified bound {r_bound:e}")
            }
            ContinuationError::ResidualAboveTol { residual, tol } => {
                write!(f, "certificate residual {residual:e} above tolerance {tol:e}")
            }
            ContinuationError::BoundViolation { what, value, bound } => {
                write!(f, "{what} = {value:e} violates a priori bound {bound:e}")
            }
            ContinuationError::NonzeroMean { mean } => {
                write!(f, "forcing mean {mean:e} is not zero")
            }
            ContinuationError::Operator(e) => write!(f, "{e}"),
            ContinuationError::Linalg(e) => write!(f, "{e}"),
            ContinuationError::Bounds(e) => write!(f, "{e}"),
            ContinuationError::Periodic(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ContinuationError {}

impl From<OperatorError> for ContinuationError {
    fn from(e: OperatorError) -> Self {
        ContinuationError::Operator(e)
    }
}

impl From<LinalgError> for ContinuationError {
    fn from(e: LinalgError) -> Self {
        ContinuationError::Linalg(e)
    }
}

impl From<BoundsError> for ContinuationError {
    fn from(e: BoundsError) -> Self {
        ContinuationError::Bounds(e)
    }
}

impl From<PeriodicError> for ContinuationError {
    fn from(e: PeriodicError) -> Self {
        ContinuationError::Periodic(e)
    }
}

/// The averaged (mean-field) map `a -> (1/T) int_0^T l(t, a, 0) dt`.
pub struct AveragedMap<'a> {
    rhs: &'a Rhs,
    grid: Grid,
}

impl<'a> AveragedMap<'a> {
    pub fn new(rhs: &'a Rhs, grid: Grid) -> Self {
        AveragedMap { rhs, grid }
    }

    /// Trapezoid evaluation; NaN when `a` is outside the admissible
    /// range, so scans can skip such points.
    pub fn eval(&self, a: f64) -> f64 {
        let mut vals = Vec::with_capacity(self.grid.n_nodes());
        for i in 0..self.grid.n_nodes() {
            match self.rhs.eval(i, self.grid.node(i), a, 0.0) {
                Ok(v) => vals.push(v),
                Err(_) => return f64::NAN,
            }
        }
        crate::periodic::trapezoid(&self.grid, &vals) / self.grid.period()
    }
}

/// `L(a)` for a single `a`.
pub fn averaged_eval(rhs: &Rhs, grid: &Grid, a: f64) -> f64 {
    AveragedMap::new(rhs, *grid).eval(a)
}

/// Root of the averaged map found by a 512-point scan of `[lo, hi]`
/// (log-spaced when `lo > 0`, uniform otherwise) plus bisection.
///
/// All sign changes are recorded; the smallest root is reported first.
#[derive(Debug, Clone)]
pub struct AveragedRoot {
    pub root: f64,
    /// Scan interval across which the sign change was certified.
    pub bracket: (f64, f64),
    /// Every root found on the scan grid, ascending.
    pub roots: Vec<f64>,
}

pub fn averaged_root(
    rhs: &Rhs,
    grid: &Grid,
    lo: f64,
    hi: f64,
) -> Result<AveragedRoot, ContinuationError> {
    let map = AveragedMap::new(rhs, *grid);
    let pts = if lo > 0.0 {
        rootfind::logspace(lo, hi, 512)
    } else {
        rootfind::linspace(lo, hi, 512)
    };
    let f = |a: f64| map.eval(a);
    let brackets = rootfind::scan_sign_changes(f, &pts);
    if brackets.is_empty() {
        return Err(ContinuationError::NoBracket { lo, hi });
    }
    let mut roots = Vec::with_capacity(brackets.len());
    for (a, b) in &brackets {
        if let Ok(r) = rootfind::bisect(f, *a, *b, 1e-13) {
            roots.push(r);
        }
    }
    if roots.is_empty() {
        return Err(ContinuationError::NoBracket { lo, hi });
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(AveragedRoot { root: roots[0], bracket: brackets[0], roots })
}

/// One-dimensional Brouwer degree data on an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeResult {
    pub sign_left: i8,
    pub sign_right: i8,
    /// `(sign_right - sign_left) / 2`.
    pub degree: i32,
}

/// Degree of the averaged map on the symmetric interval `(-radius, radius)`.
pub fn brouwer_degree(map: &AveragedMap, radius: f64) -> Result<DegreeResult, ContinuationError> {
    brouwer_degree_on(map, -radius, radius)
}

/// Degree on a general interval `(lo, hi)`; endpoints must not be roots.
pub fn brouwer_degree_on(
    map: &AveragedMap,
    lo: f64,
    hi: f64,
) -> Result<DegreeResult, ContinuationError> {
    let fl = map.eval(lo);
    let fr = map.eval(hi);
    if fl == 0.0 || fl.is_nan() {
        return Err(ContinuationError::BoundaryZero { at: lo });
    }
    if fr == 0.0 || fr.is_nan() {
        return Err(ContinuationError::BoundaryZero { at: hi });
    }
    let sign_left = if fl > 0.0 { 1 } else { -1 };
    let sign_right = if fr > 0.0 { 1 } else { -1 };
    Ok(DegreeResult {
        sign_left,
        sign_right,
        degree: (sign_right as i32 - sign_left as i32) / 2,
    })
}

/// One recorded rung of the lambda ladder.
#[derive(Debug, Clone)]
pub struct HomotopyState {
    pub lambda: f64,
    pub iterate: PeriodicSample,
    pub step: f64,
    pub corrector_tol: f64,
    pub corrector_iters: usize,
    /// Algebraic sup-norm residual of the lambda-problem at acceptance.
    pub residual: f64,
}

/// Options for [`homotopy_solve`].
#[derive(Debug, Clone, Copy)]
pub struct HomotopyOptions {
    /// Certificate residual target at `lambda = 1`. The centered
    /// residual measure has an `O(N^-2)` discretization floor on smooth
    /// problems, so the grid must be chosen consistently with this.
    pub tol: f64,
    pub lambda0: f64,
    pub step_floor: f64,
    pub max_corrector_iters: usize,
    /// Pin the solution mean to zero (bordered corrector with a scalar
    /// equation offset). Used by the auxiliary families whose solutions
    /// have zero mean by structure.
    pub mean_zero: bool,
    /// Averaged-root scan interval; defaults to the guard range clipped
    /// to the certified ball.
    pub scan: Option<(f64, f64)>,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        HomotopyOptions {
            tol: 1e-8,
            lambda0: 1e-3,
            step_floor: 1e-6,
            max_corrector_iters: 25,
            mean_zero: false,
            scan: None,
        }
    }
}

/// Result of a continuation run.
#[derive(Debug, Clone)]
pub struct HomotopySolution {
    pub u: PeriodicSample,
    pub trace: Vec<HomotopyState>,
    /// Root of the averaged map the path started from.
    pub averaged_root: f64,
    /// Degree certificate on the sign-change interval (absent in
    /// mean-pinned mode, where the start point is structural).
    pub degree: Option<DegreeResult>,
    /// Certificate residual of the returned solution at `lambda = 1`.
    pub residual: f64,
}

/// Follows the homotopy from the averaged root to `lambda = 1`.
///
/// Preconditions: a root of the averaged map exists on the scan range
/// and carries nonzero degree. All iterates are monitored against
/// `r_bound` (sup of values plus sup of derivative); exceeding it
/// reports [`ContinuationError::BoundaryHit`] so the caller can retry
/// with a larger certified bound. The returned solution always satisfies
/// `residual <= opts.tol`; otherwise an error is returned instead.
pub fn homotopy_solve(
    pf: &ExponentField,
    rhs: &Rhs,
    r_bound: f64,
    opts: &HomotopyOptions,
) -> Result<HomotopySolution, ContinuationError> {
    let grid = *pf.grid();
    let (a_star, degree) = if opts.mean_zero {
        (0.0, None)
    } else {
        let (scan_lo, scan_hi) = match opts.scan {
            Some(s) => s,
            None => {
                let (glo, ghi) = rhs.guard();
                let hi = ghi.min(r_bound);
                let lo = if glo > f64::NEG_INFINITY && glo >= 0.0 {
                    (glo + 1e-12).max(1e-9)
                } else {
                    -r_bound
                };
                (lo, hi)
            }
        };
        let found = averaged_root(rhs, &grid, scan_lo, scan_hi)?;
        let map = AveragedMap::new(rhs, grid);
        let deg = brouwer_degree_on(&map, found.bracket.0, found.bracket.1)?;
        if deg.degree == 0 {
            return Err(ContinuationError::DegreeZero {
                lo: found.bracket.0,
                hi: found.bracket.1,
            });
        }
        (found.root, Some(deg))
    };

    let corrector = Corrector {
        pf,
        rhs,
        mean_zero: opts.mean_zero,
        max_iters: opts.max_corrector_iters,
    };

    let n = grid.cells();
    let mut x = vec![a_star; n];
    if opts.mean_zero {
        // start on the constraint manifold
        let m = mean_rect(&x);
        for xi in &mut x {
            *xi -= m;
        }
    }
    let mut d = vec![0.0; n + 1];
    let mut trace: Vec<HomotopyState> = Vec::new();

    let mut lambda_good = 0.0f64;
    let mut step = opts.lambda0;
    let mut first_rung = true;
    for _ in 0..400 {
        if step < opts.step_floor {
            return Err(ContinuationError::StepCollapse { lambda: lambda_good, step });
        }
        let lambda = (lambda_good + step).min(1.0);
        let mut x_try = x.clone();
        let mut d_try = d.clone();
        if first_rung {
            // one compact-map step re-seeds the degenerate constant
            // iterate (exact no-op at an equilibrium)
            let _ = corrector.g_step(&mut x_try, &mut d_try, lambda);
        }
        match corrector.run(&mut x_try, &mut d_try, lambda) {
            Ok(report) => {
                first_rung = false;
                x = x_try;
                d = d_try;
                lambda_good = lambda;
                let norm = sup(&x) + sup(&d);
                if norm > r_bound {
                    return Err(ContinuationError::BoundaryHit { norm, r_bound });
                }
                trace.push(HomotopyState {
                    lambda,
                    iterate: close_sample(&grid, &x, &d),
                    step,
                    corrector_tol: report.tol,
                    corrector_iters: report.iters,
                    residual: report.residual,
                });
                if lambda >= 1.0 {
                    let u = close_sample(&grid, &x, &d);
                    let residual = operator::bvp_residual(pf, rhs, &u)?;
                    if residual > opts.tol {
                        return Err(ContinuationError::ResidualAboveTol {
                            residual,
                            tol: opts.tol,
                        });
                    }
                    return Ok(HomotopySolution {
                        u,
                        trace,
                        averaged_root: a_star,
                        degree,
                        residual,
                    });
                }
                if report.iters <= 4 {
                    step *= 2.0;
                }
            }
            Err(_) => {
                step *= 0.5;
            }
        }
    }
    Err(ContinuationError::StepCollapse { lambda: lambda_good, step })
}

/// Solution of one damped auxiliary problem
/// `(phi_{p(t)}(u'))' + theta(u) u' - eps u = e(t)`.
#[derive(Debug, Clone)]
pub struct EpsSolution {
    pub u: PeriodicSample,
    pub trace: Vec<HomotopyState>,
    /// Bound ledger used for the compliance check (present when `eps > 0`).
    pub constants: Option<AprioriConstants>,
}

/// Solves the auxiliary problem for `eps >= 0`; `eps = 0` is the
/// undamped limit case solved directly.
///
/// The forcing must have zero mean (to 1e-12). Solutions have their
/// mean pinned to zero exactly; for `eps > 0` the result is checked
/// against the a priori ledger (`||u||_inf <= r2`, `||u'||_inf <= r4`
/// with `eps_star = eps`).
pub fn solve_eps_problem<F>(
    pf: &ExponentField,
    theta: F,
    e: &PeriodicSample,
    eps: f64,
    opts: &HomotopyOptions,
) -> Result<EpsSolution, ContinuationError>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let grid = *pf.grid();
    let e_mean = e.mean();
    if e_mean.abs() > 1e-12 * (1.0 + e.sup_norm()) {
        return Err(ContinuationError::NonzeroMean { mean: e_mean });
    }
    let e_l1 = e.norms(1.0, pf.p_minus()).l1;

    let constants = if eps > 0.0 {
        let r1 = bounds::compute_r1(grid.period(), pf.p_minus(), e_l1)?;
        Some(bounds::compute_chain(
            r1,
            grid.period(),
            pf.p_minus(),
            e_l1,
            e_l1,
            &theta,
            eps,
        )?)
    } else {
        None
    };
    let r_bound = constants.as_ref().map(|c| c.r).unwrap_or(f64::INFINITY);

    let e_vals = e.values().to_vec();
    let rhs = Rhs::from_node_fn(move |i, _t, x, y| e_vals[i] + eps * x - theta(x) * y);

    let mut local = *opts;
    local.mean_zero = true;
    let sol = homotopy_solve(pf, &rhs, r_bound, &local)?;

    let u_mean = sol.u.mean();
    if u_mean.abs() > 1e-10 {
        return Err(ContinuationError::BoundViolation {
            what: "solution mean",
            value: u_mean.abs(),
            bound: 1e-10,
        });
    }
    if let Some(c) = &constants {
        let sup_u = sol.u.sup_norm();
        if sup_u > c.r2 + 1e-8 {
            return Err(ContinuationError::BoundViolation {
                what: "||u||_inf",
                value: sup_u,
                bound: c.r2,
            });
        }
        let sup_d = sol
            .u
            .derivative()
            .map(|d| d.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .unwrap_or(f64::INFINITY);
        if sup_d > c.r4 + 1e-8 {
            return Err(ContinuationError::BoundViolation {
                what: "||u'||_inf",
                value: sup_d,
                bound: c.r4,
            });
        }
    }
    Ok(EpsSolution { u: sol.u, trace: sol.trace, constants })
}

// ---------------------------------------------------------------------
// corrector internals
// ---------------------------------------------------------------------

struct Corrector<'a> {
    pf: &'a ExponentField,
    rhs: &'a Rhs,
    mean_zero: bool,
    max_iters: usize,
}

struct CorrectorReport {
    iters: usize,
    residual: f64,
    tol: f64,
}

#[derive(Debug)]
enum CorrectorFailure {
    Stalled,
    Domain,
    Singular,
}

impl From<OperatorError> for CorrectorFailure {
    fn from(_: OperatorError) -> Self {
        CorrectorFailure::Domain
    }
}

impl From<LinalgError> for CorrectorFailure {
    fn from(_: LinalgError) -> Self {
        CorrectorFailure::Singular
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn mean_rect(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn close_sample(grid: &Grid, x: &[f64], d: &[f64]) -> PeriodicSample {
    let mut values = x.to_vec();
    values.push(x[0]);
    PeriodicSample::from_parts_unchecked(*grid, values, Some(d.to_vec()))
}

fn phi_prime_reg(p: f64, s: f64) -> f64 {
    const EPS_REG: f64 = 1e-10;
    (p - 1.0) * math::pow(s * s + EPS_REG * EPS_REG, 0.5 * (p - 2.0))
}

impl<'a> Corrector<'a> {
    /// Right-hand side `lambda l` along the iterate, using the lagged
    /// flux derivative in the `y` slot.
    fn forcing(&self, x: &[f64], d: &[f64], lambda: f64) -> Result<Vec<f64>, CorrectorFailure> {
        let grid = self.pf.grid();
        let n = grid.cells();
        let mut w = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let xi = if i == n { x[0] } else { x[i] };
            w.push(lambda * self.rhs.eval(i, grid.node(i), xi, d[i])?);
        }
        Ok(w)
    }

    /// Flux recovery: `d = phi_inv(p, a + cumint(w - mean w))`.
    fn recover_derivative(&self, w: &[f64]) -> Result<Vec<f64>, CorrectorFailure> {
        let grid = *self.pf.grid();
        let w_sample = PeriodicSample::from_parts_unchecked(grid, w.to_vec(), None);
        let (_, w_tilde) = w_sample.decompose();
        let w_cum = w_tilde.cumint();
        let a = operator::solve_flux_constant(self.pf, &w_cum)
            .map_err(|_| CorrectorFailure::Domain)?;
        Ok((0..grid.n_nodes())
            .map(|i| phi_inv(self.pf.at(i), a + w_cum.values()[i]))
            .collect())
    }

    /// Collocated residual with `d` frozen; `offset` is the scalar
    /// equation shift used by the mean-pinned mode.
    fn residual(
        &self,
        x: &[f64],
        d: &[f64],
        lambda: f64,
        offset: f64,
    ) -> Result<Vec<f64>, CorrectorFailure> {
        let grid = self.pf.grid();
        let n = grid.cells();
        let dt = grid.spacing();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let im = (i + n - 1) % n;
            let ip = (i + 1) % n;
            let s_plus = (x[ip] - x[i]) / dt;
            let s_minus = (x[i] - x[im]) / dt;
            let flux = (crate::periodic::phi(self.pf.mid(i), s_plus)
                - crate::periodic::phi(self.pf.mid(im), s_minus))
                / dt;
            let ell = self.rhs.eval(i, grid.node(i), x[i], d[i])?;
            out.push(flux - lambda * ell - offset);
        }
        Ok(out)
    }

    /// Jacobian of [`residual`] in the frozen-`d` sense: analytic
    /// regularized `phi'` on the stencil plus the centred-difference
    /// `x`-coupling of the right-hand side on the diagonal.
    fn jacobian(
        &self,
        x: &[f64],
        d: &[f64],
        lambda: f64,
    ) -> Result<CyclicTridiag, CorrectorFailure> {
        let grid = self.pf.grid();
        let n = grid.cells();
        let dt = grid.spacing();
        let mut jac = CyclicTridiag::zeros(n);
        for i in 0..n {
            let im = (i + n - 1) % n;
            let ip = (i + 1) % n;
            let s_plus = (x[ip] - x[i]) / dt;
            let s_minus = (x[i] - x[im]) / dt;
            let dp = phi_prime_reg(self.pf.mid(i), s_plus) / (dt * dt);
            let dm = phi_prime_reg(self.pf.mid(im), s_minus) / (dt * dt);
            jac.sup[i] += dp;
            jac.diag[i] -= dp + dm;
            jac.sub[i] += dm;

            let t = grid.node(i);
            let hx = 1e-7 * (1.0 + x[i].abs());
            let lx = (self.rhs.eval(i, t, x[i] + hx, d[i])?
                - self.rhs.eval(i, t, x[i] - hx, d[i])?)
                / (2.0 * hx);
            jac.diag[i] -= lambda * lx;
        }
        Ok(jac)
    }

    /// One compact-map iteration `v <- P v + Q N(v) + K N(v)` at the
    /// given `lambda`, used to (re-)seed Newton.
    fn g_step(&self, x: &mut Vec<f64>, d: &mut Vec<f64>, lambda: f64) -> Result<(), CorrectorFailure> {
        let grid = *self.pf.grid();
        let n = grid.cells();
        let w = self.forcing(x, d, lambda)?;
        let w_sample = PeriodicSample::from_parts_unchecked(grid, w, None);
        let q = w_sample.mean();
        let k = operator::k_op(self.pf, &w_sample).map_err(|_| CorrectorFailure::Domain)?;
        let base = x[0] + q;
        let mut x_new: Vec<f64> = (0..n).map(|i| base + k.u.values()[i]).collect();
        if self.mean_zero {
            let m = mean_rect(&x_new);
            for xi in &mut x_new {
                *xi -= m;
            }
        }
        *x = x_new;
        *d = k.u.derivative().unwrap().to_vec();
        Ok(())
    }

    fn run(
        &self,
        x: &mut Vec<f64>,
        d: &mut Vec<f64>,
        lambda: f64,
    ) -> Result<CorrectorReport, CorrectorFailure> {
        let n = x.len();
        let grid = self.pf.grid();
        let dt = grid.spacing();
        let mut offset = 0.0f64;

        // residual scale and algebraic tolerance, fixed for the run
        let w0 = self.forcing(x, d, lambda)?;
        let scale_f = 1.0 + sup(&w0);
        // rounding floor of the flux difference quotients
        let mut phi_mag = 0.0f64;
        for i in 0..n {
            let ip = (i + 1) % n;
            let s = (x[ip] - x[i]) / dt;
            phi_mag = phi_mag.max(crate::periodic::phi(self.pf.mid(i), s).abs());
        }
        let floor = 8.0 * f64::EPSILON * phi_mag / dt;
        let tol = (1e-11 * scale_f).max(floor);

        let mut d_new = self.recover_derivative(&w0)?;
        let mut res = self.residual(x, &d_new, lambda, offset)?;
        let mut norm = sup(&res);
        let mut g_rescues = 0usize;

        for iter in 0..self.max_iters {
            let d_settled = d_new
                .iter()
                .zip(d.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            *d = d_new.clone();
            if norm <= tol && d_settled {
                return Ok(CorrectorReport { iters: iter, residual: norm, tol });
            }

            let jac = self.jacobian(x, d, lambda)?;
            let neg: Vec<f64> = res.iter().map(|r| -r).collect();
            let (mut dx, ds) = if self.mean_zero {
                let col = vec![-1.0; n];
                let row = vec![1.0 / n as f64; n];
                let (dx, ds) = solve_bordered(&jac, &col, &row, &neg, -mean_rect(x))?;
                (dx, ds)
            } else {
                (jac.solve(&neg)?, 0.0)
            };

            // trust cap keeps trial iterates out of catastrophic territory
            let cap = 0.5 * (1.0 + sup(x));
            let dx_norm = sup(&dx);
            if dx_norm > cap {
                let sca = cap / dx_norm;
                for v in &mut dx {
                    *v *= sca;
                }
            }

            let mut t_damp = 1.0f64;
            let mut accepted = false;
            for _ in 0..20 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + t_damp * b).collect();
                let trial_offset = offset + t_damp * ds;
                match self.residual(&trial, d, lambda, trial_offset) {
                    Ok(r) => {
                        let tn = sup(&r);
                        if tn < norm || tn <= tol {
                            *x = trial;
                            offset = trial_offset;
                            accepted = true;
                            break;
                        }
                    }
                    Err(CorrectorFailure::Domain) => {}
                    Err(e) => return Err(e),
                }
                t_damp *= 0.5;
            }

            if !accepted {
                if g_rescues < 2 {
                    g_rescues += 1;
                    self.g_step(x, d, lambda)?;
                } else {
                    return Err(CorrectorFailure::Stalled);
                }
            }

            let w = self.forcing(x, d, lambda)?;
            d_new = self.recover_derivative(&w)?;
            res = self.residual(x, &d_new, lambda, offset)?;
            norm = sup(&res);
        }
        let d_settled = d_new
            .iter()
            .zip(d.iter())
            .all(|(a, b)| (a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        *d = d_new;
        if norm <= tol && d_settled {
            Ok(CorrectorReport { iters: self.max_iters, residual: norm, tol })
        } else {
            Err(CorrectorFailure::Stalled)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    #[test]
    fn averaged_map_examples() {
        let g = grid(64);
        // l(t, a, 0) = e(t) + eps a with zero-mean e: L(a) = eps a
        let eps = 0.25;
        let rhs = Rhs::new(move |t, x, _| (2.0 * PI * t).sin() + eps * x);
        let map = AveragedMap::new(&rhs, g);
        assert!((map.eval(2.0) - 0.5).abs() < 1e-12);
        let root = averaged_root(&rhs, &g, -3.0, 3.0).unwrap();
        assert!(root.root.abs() < 1e-10);

        // singular model: L(a) = 1 - 1/a, root at 1
        let rhs = Rhs::lienard(|_| 0.0, |x| 1.0 / x, |_| 1.0).with_guard(0.0, f64::INFINITY);
        let root = averaged_root(&rhs, &g, 1e-3, 10.0).unwrap();
        assert!((root.root - 1.0).abs() < 1e-9, "root {}", root.root);

        // h = -1: L(a) = -1 - 1/a < 0 on (0, inf)
        let rhs = Rhs::lienard(|_| 0.0, |x| 1.0 / x, |_| -1.0).with_guard(0.0, f64::INFINITY);
        assert!(matches!(
            averaged_root(&rhs, &g, 1e-3, 10.0),
            Err(ContinuationError::NoBracket { .. })
        ));
    }

    #[test]
    fn degree_examples() {
        let g = grid(32);
        let eps = 1.0;
        let linear = Rhs::new(move |_, x, _| eps * x);
        let map = AveragedMap::new(&linear, g);
        let d = brouwer_degree(&map, 4.37).unwrap();
        assert_eq!(d.degree, 1);

        let same_sign = Rhs::new(|_, x, _| x * x + 1.0);
        let map = AveragedMap::new(&same_sign, g);
        assert_eq!(brouwer_degree(&map, 2.0).unwrap().degree, 0);

        let reversed = Rhs::new(|_, x, _| -x);
        let map = AveragedMap::new(&reversed, g);
        assert_eq!(brouwer_degree(&map, 1.0).unwrap().degree, -1);

        // endpoint root violates the boundary hypothesis
        let shifted = Rhs::new(|_, x, _| x - 1.0);
        let map = AveragedMap::new(&shifted, g);
        assert!(matches!(
            brouwer_degree(&map, 1.0),
            Err(ContinuationError::BoundaryZero { .. })
        ));
    }

    #[test]
    fn degree_invariant_under_positive_rescaling() {
        let g = grid(32);
        for k in 1..=10 {
            let c = k as f64 * 0.37;
            let rhs = Rhs::new(move |_, x, _| c * (x - 0.5));
            let map = AveragedMap::new(&rhs, g);
            assert_eq!(brouwer_degree(&map, 2.0).unwrap().degree, 1);
        }
    }

    #[test]
    fn homotopy_equilibrium_is_exact() {
        let g = grid(128);
        let pf = ExponentField::from_fn(g, |t| 3.0 + (2.0 * PI * t).sin()).unwrap();
        let rhs = Rhs::lienard(|_| 0.0, |x| 1.0 / x, |_| 1.0).with_guard(0.0, f64::INFINITY);
        let opts = HomotopyOptions { scan: Some((1e-3, 10.0)), ..Default::default() };
        let sol = homotopy_solve(&pf, &rhs, 50.0, &opts).unwrap();
        assert!(sol.u.values().iter().all(|v| *v == 1.0));
        assert_eq!(sol.residual, 0.0);
        assert_eq!(sol.degree.unwrap().degree, 1);
        // lambda ladder is strictly increasing and ends at 1
        let lambdas: Vec<f64> = sol.trace.iter().map(|s| s.lambda).collect();
        assert!(lambdas.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*lambdas.last().unwrap(), 1.0);
    }

    #[test]
    fn homotopy_forced_problem_converges() {
        let g = Grid::new(1.0, 1024).unwrap();
        let pf = ExponentField::constant(g, 2.0).unwrap();
        let rhs = Rhs::lienard(|_| 0.0, |x| 1.0 / x, |t| 1.0 + 0.1 * (2.0 * PI * t).cos())
            .with_guard(0.0, f64::INFINITY);
        let opts = HomotopyOptions {
            tol: 1e-5,
            scan: Some((1e-3, 10.0)),
            ..Default::default()
        };
        let sol = homotopy_solve(&pf, &rhs, 50.0, &opts).unwrap();
        assert!(sol.residual <= 1e-5);
        // solution stays near the averaged root 1
        assert!((sol.u.mean() - 1.0).abs() < 0.05);
        // solution-to-residual contract: never above tol
        assert!(sol.residual <= opts.tol);
    }

    #[test]
    fn homotopy_refuses_without_averaged_root() {
        let g = grid(64);
        let pf = ExponentField::constant(g, 2.0).unwrap();
        let rhs = Rhs::lienard(|_| 0.0, |x| 1.0 / x, |_| -1.0).with_guard(0.0, f64::INFINITY);
        let opts = HomotopyOptions { scan: Some((1e-3, 10.0)), ..Default::default() };
        assert!(matches!(
            homotopy_solve(&pf, &rhs, 50.0, &opts),
            Err(ContinuationError::NoBracket { .. })
        ));
    }

    #[test]
    fn eps_problem_linear_closed_form() {
        // theta = 0, p = 2, eps = 1, e = sin(2 pi t):
        // u'' - u = e  =>  u = -sin(2 pi t)/(1 + 4 pi^2)
        let g = Grid::new(1.0, 2048).unwrap();
        let pf = ExponentField::constant(g, 2.0).unwrap();
        let e = PeriodicSample::from_fn(g, |t| (2.0 * PI * t).sin()).unwrap();
        let opts = HomotopyOptions { tol: 1e-5, ..Default::default() };
        let sol = solve_eps_problem(&pf, |_| 0.0, &e, 1.0, &opts).unwrap();
        let amp = 1.0 / (1.0 + 4.0 * PI * PI);
        for (i, t) in g.nodes().enumerate() {
            let expected = -amp * (2.0 * PI * t).sin();
            assert!(
                (sol.u.values()[i] - expected).abs() < 1e-6,
                "node {i}: {} vs {expected}",
                sol.u.values()[i]
            );
        }
        assert!(sol.u.mean().abs() <= 1e-10);
        let c = sol.constants.unwrap();
        assert!(sol.u.sup_norm() <= c.r2 + 1e-8);
    }

    #[test]
    fn eps_problem_zero_forcing() {
        let g = grid(64);
        let pf = ExponentField::from_fn(g, |t| 3.0 + (2.0 * PI * t).sin()).unwrap();
        let e = PeriodicSample::constant(g, 0.0);
        let sol = solve_eps_problem(&pf, |x| x, &e, 0.5, &HomotopyOptions::default()).unwrap();
        assert!(sol.u.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn eps_problem_rejects_nonzero_mean() {
        let g = grid(64);
        let pf = ExponentField::constant(g, 2.0).unwrap();
        let e = PeriodicSample::constant(g, 0.5);
        assert!(matches!(
            solve_eps_problem(&pf, |_| 0.0, &e, 1.0, &HomotopyOptions::default()),
            Err(ContinuationError::NonzeroMean { .. })
        ));
    }

    #[test]
    fn eps_problem_nonlinear_mean_pinned() {
        // theta(x) = x, varying exponent, eps = 0.1
        let g = Grid::new(1.0, 1024).unwrap();
        let pf = ExponentField::from_fn(g, |t| 3.0 + (2.0 * PI * t).sin()).unwrap();
        let e = PeriodicSample::from_fn(g, |t| (2.0 * PI * t).sin()).unwrap();
        let opts = HomotopyOptions { tol: 1e-4, ..Default::default() };
        let sol = solve_eps_problem(&pf, |x| x, &e, 0.1, &opts).unwrap();
        assert!(sol.u.mean().abs() <= 1e-10, "mean {:e}", sol.u.mean());
        let c = sol.constants.unwrap();
        assert!(sol.u.sup_norm() <= c.r2 + 1e-8);
        let sup_d = sol
            .u
            .derivative()
            .unwrap()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(sup_d <= c.r4 + 1e-8);
    }
}
