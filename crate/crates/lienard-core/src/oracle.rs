//! Independent finite-difference Newton solver for the same periodic
//! problems, used to cross-validate the continuation path.
//!
//! The discretization is deliberately different from the production
//! solver: a conservative local stencil with midpoint exponents,
//!
//! ```text
//! F_i = [ phi_{p_{i+1/2}}((u_{i+1}-u_i)/dt) - phi_{p_{i-1/2}}((u_i-u_{i-1})/dt) ] / dt
//!       - l(t_i, u_i, (u_{i+1}-u_{i-1})/(2 dt)),
//! ```
//!
//! with cyclic indices, plain Newton with step damping, and a cyclic
//! tridiagonal Jacobian. No continuation, no bracket logic; convergence
//! from poor initial guesses is out of scope.

use alloc::vec::Vec;

use crate::linalg::{CyclicTridiag, LinalgError};
use crate::operator::{OperatorError, Rhs};
use crate::periodic::{phi, ExponentField, PeriodicSample};

/// Newton solver failures.
#[derive(Debug)]
pub enum OracleError {
    /// Residual stayed above tolerance after the iteration budget.
    MaxIter { residual: f64 },
    /// The cyclic tridiagonal solve failed.
    SingularJacobian,
    /// The iterate left the admissible range of the right-hand side.
    Domain { node: usize, x: f64 },
}

impl core::fmt::Display for OracleError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OracleError::MaxIter { residual } => {
                write!(f, "Newton did not converge (residual {residual:e})")
            }
            OracleError::SingularJacobian => write!(f, "singular Jacobian"),
            OracleError::Domain { node, x } => {
                write!(f, "iterate left admissible range at node {node} (x = {x:e})")
            }
        }
    }
}

impl core::error::Error for OracleError {}

impl From<OperatorError> for OracleError {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::Domain { node, x } => OracleError::Domain { node, x },
            _ => OracleError::SingularJacobian,
        }
    }
}

impl From<LinalgError> for OracleError {
    fn from(_: LinalgError) -> Self {
        OracleError::SingularJacobian
    }
}

/// Discretized periodic problem: grid, midpoint exponents and the
/// Jacobian regularization floor.
#[derive(Debug, Clone)]
pub struct FdSystem {
    pf: ExponentField,
    /// Regularization inside `phi'` only; the residual stays unbiased.
    pub eps_reg: f64,
}

impl FdSystem {
    pub fn new(pf: &ExponentField) -> FdSystem {
        FdSystem { pf: pf.clone(), eps_reg: 1e-10 }
    }

    pub fn exponents(&self) -> &ExponentField {
        &self.pf
    }

    fn unknowns(&self) -> usize {
        self.pf.grid().cells()
    }
}

/// Regularized derivative of `phi_p`: `(p-1)(s^2 + eps^2)^{(p-2)/2}`.
///
/// For `p > 2` the true derivative vanishes at `s = 0` and for `p < 2`
/// it blows up; the floor keeps Newton steps finite in both regimes.
fn phi_prime_reg(p: f64, s: f64, eps: f64) -> f64 {
    (p - 1.0) * crate::math::pow(s * s + eps * eps, 0.5 * (p - 2.0))
}

/// Residual of the collocated system at node values `u` (length = cell
/// count; node N is identified with node 0).
pub fn fd_residual(sys: &FdSystem, u: &[f64], rhs: &Rhs) -> Result<Vec<f64>, OracleError> {
    let n = sys.unknowns();
    assert_eq!(u.len(), n);
    let grid = sys.pf.grid();
    let dt = grid.spacing();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let im = (i + n - 1) % n;
        let ip = (i + 1) % n;
        let s_plus = (u[ip] - u[i]) / dt;
        let s_minus = (u[i] - u[im]) / dt;
        let flux = (phi(sys.pf.mid(i), s_plus) - phi(sys.pf.mid(im), s_minus)) / dt;
        let y = (u[ip] - u[im]) / (2.0 * dt);
        let ell = rhs.eval(i, grid.node(i), u[i], y)?;
        out.push(flux - ell);
    }
    Ok(out)
}

/// Analytic Jacobian of [`fd_residual`]: `phi` differentiated exactly
/// (with regularization), the right-hand side differenced centrally
/// with steps `1e-7 (1 + |x|)` and `1e-7 (1 + |y|)`.
pub fn fd_jacobian(sys: &FdSystem, u: &[f64], rhs: &Rhs) -> Result<CyclicTridiag, OracleError> {
    let n = sys.unknowns();
    assert_eq!(u.len(), n);
    let grid = sys.pf.grid();
    let dt = grid.spacing();
    let mut jac = CyclicTridiag::zeros(n);
    for i in 0..n {
        let im = (i + n - 1) % n;
        let ip = (i + 1) % n;
        let s_plus = (u[ip] - u[i]) / dt;
        let s_minus = (u[i] - u[im]) / dt;
        let dp = phi_prime_reg(sys.pf.mid(i), s_plus, sys.eps_reg) / (dt * dt);
        let dm = phi_prime_reg(sys.pf.mid(im), s_minus, sys.eps_reg) / (dt * dt);
        jac.sup[i] += dp;
        jac.diag[i] -= dp + dm;
        jac.sub[i] += dm;

        let t = grid.node(i);
        let y = (u[ip] - u[im]) / (2.0 * dt);
        let hx = 1e-7 * (1.0 + u[i].abs());
        let lx = (rhs.eval(i, t, u[i] + hx, y)? - rhs.eval(i, t, u[i] - hx, y)?) / (2.0 * hx);
        let hy = 1e-7 * (1.0 + y.abs());
        let ly = (rhs.eval(i, t, u[i], y + hy)? - rhs.eval(i, t, u[i], y - hy)?) / (2.0 * hy);
        jac.diag[i] -= lx;
        jac.sup[i] -= ly / (2.0 * dt);
        jac.sub[i] += ly / (2.0 * dt);
    }
    Ok(jac)
}

/// Options for [`newton_solve`].
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Sup-norm residual target.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 50 }
    }
}

/// Damped Newton on the collocated system, starting from `init`.
///
/// The step is halved up to 20 times whenever the residual norm fails
/// to decrease. Returns the solution as a periodic sample with a
/// centered-difference derivative channel (the same `y` the residual
/// itself uses).
pub fn newton_solve(
    sys: &FdSystem,
    rhs: &Rhs,
    init: &PeriodicSample,
    opts: NewtonOptions,
) -> Result<PeriodicSample, OracleError> {
    let n = sys.unknowns();
    let mut u: Vec<f64> = init.values()[..n].to_vec();
    let mut res = fd_residual(sys, &u, rhs)?;
    let mut norm = sup(&res);
    for _ in 0..opts.max_iter {
        if norm <= opts.tol {
            return Ok(close_sample(sys, u));
        }
        let jac = fd_jacobian(sys, &u, rhs)?;
        let neg: Vec<f64> = res.iter().map(|r| -r).collect();
        let step = jac.solve(&neg)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(ui, si)| ui + t * si).collect();
            match fd_residual(sys, &trial, rhs) {
                Ok(r) => {
                    let tn = sup(&r);
                    if tn < norm {
                        u = trial;
                        res = r;
                        norm = tn;
                        accepted = true;
                        break;
                    }
                }
                Err(OracleError::Domain { .. }) => {} // shrink back into range
                Err(e) => return Err(e),
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(OracleError::MaxIter { residual: norm });
        }
    }
    if norm <= opts.tol {
        Ok(close_sample(sys, u))
    } else {
        Err(OracleError::MaxIter { residual: norm })
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn close_sample(sys: &FdSystem, mut u: Vec<f64>) -> PeriodicSample {
    u.push(u[0]);
    PeriodicSample::from_parts_unchecked(*sys.pf.grid(), u, None).with_fd_derivative()
}
