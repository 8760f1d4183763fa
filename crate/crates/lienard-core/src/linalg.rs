//! Cyclic tridiagonal linear systems.
//!
//! Periodic collocation Jacobians couple each node to its two cyclic
//! neighbours, so every linear solve in this crate is either a cyclic
//! tridiagonal system (Thomas algorithm plus a rank-one Sherman-Morrison
//! correction for the wrap-around corners) or such a system bordered by
//! one scalar row/column (the mean-pinned variant).

use alloc::vec;
use alloc::vec::Vec;

/// Linear solve failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinalgError {
    /// A pivot vanished during elimination.
    SingularMatrix,
}

impl core::fmt::Display for LinalgError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            LinalgError::SingularMatrix => write!(f, "singular matrix in tridiagonal solve"),
        }
    }
}

impl core::error::Error for LinalgError {}

/// Cyclic tridiagonal matrix in row form.
///
/// Row `i` holds `sub[i] * x[i-1] + diag[i] * x[i] + sup[i] * x[i+1]`
/// with indices wrapping modulo `n`; `sub[0]` and `sup[n-1]` are the
/// wrap-around corners.
#[derive(Debug, Clone)]
pub struct CyclicTridiag {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl CyclicTridiag {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 3, "cyclic tridiagonal needs at least 3 rows");
        CyclicTridiag {
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Dense `A * x`, used by tests and the Jacobian consistency checks.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let im = (i + n - 1) % n;
                let ip = (i + 1) % n;
                self.sub[i] * x[im] + self.diag[i] * x[i] + self.sup[i] * x[ip]
            })
            .collect()
    }

    /// Solves `A x = rhs` by the Sherman-Morrison rank-one correction of
    /// a non-cyclic Thomas solve.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        let alpha = self.sup[n - 1]; // A[n-1][0]
        let beta = self.sub[0]; // A[0][n-1]

        // gamma is a free nonzero parameter; this choice keeps the
        // modified first pivot >= 1 in magnitude.
        let gamma = -(1.0 + self.diag[0].abs());
        let mut diag_mod = self.diag.clone();
        diag_mod[0] -= gamma;
        diag_mod[n - 1] -= alpha * beta / gamma;

        let y = thomas(&self.sub[1..], &diag_mod, &self.sup[..n - 1], rhs)?;
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = alpha;
        let z = thomas(&self.sub[1..], &diag_mod, &self.sup[..n - 1], &u)?;

        let denom = 1.0 + z[0] + beta * z[n - 1] / gamma;
        if denom == 0.0 || !denom.is_finite() {
            return Err(LinalgError::SingularMatrix);
        }
        let fact = (y[0] + beta * y[n - 1] / gamma) / denom;
        Ok(y.iter().zip(&z).map(|(yi, zi)| yi - fact * zi).collect())
    }
}

/// Thomas algorithm for a non-cyclic tridiagonal system.
///
/// `sub` has length `n-1` (entries below the diagonal, rows `1..n`) and
/// `sup` has length `n-1` (rows `0..n-1`).
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = diag.len();
    debug_assert_eq!(sub.len(), n - 1);
    debug_assert_eq!(sup.len(), n - 1);
    let mut c = vec![0.0; n - 1];
    let mut d = vec![0.0; n];

    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(LinalgError::SingularMatrix);
    }
    c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(LinalgError::SingularMatrix);
        }
        if i < n - 1 {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Solves the bordered system
///
/// ```text
/// [ J    col ] [x]   [b]
/// [ row   0  ] [s] = [c]
/// ```
///
/// by two cyclic solves and a scalar elimination. Returns `(x, s)`.
pub fn solve_bordered(
    j: &CyclicTridiag,
    col: &[f64],
    row: &[f64],
    b: &[f64],
    c: f64,
) -> Result<(Vec<f64>, f64), LinalgError> {
    let x1 = j.solve(b)?;
    let x2 = j.solve(col)?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let denom = dot(row, &x2);
    if denom == 0.0 || !denom.is_finite() {
        return Err(LinalgError::SingularMatrix);
    }
    let s = (dot(row, &x1) - c) / denom;
    let x = x1.iter().zip(&x2).map(|(a, z)| a - s * z).collect();
    Ok((x, s))
}

/// Gaussian elimination with partial pivoting; small-n reference used by
/// tests to validate the structured solvers.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, LinalgError> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        if a[piv][k] == 0.0 {
            return Err(LinalgError::SingularMatrix);
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_system(n: usize, seed: u64) -> (CyclicTridiag, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = CyclicTridiag::zeros(n);
        for i in 0..n {
            m.sub[i] = rng.gen_range(-1.0..1.0);
            m.sup[i] = rng.gen_range(-1.0..1.0);
            // diagonally dominant so the system is safely solvable
            m.diag[i] = 4.0 + rng.gen_range(0.0..1.0);
        }
        let rhs = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        (m, rhs)
    }

    #[test]
    fn cyclic_matches_dense() {
        for seed in 0..8 {
            let n = 16 + (seed as usize % 3) * 7;
            let (m, rhs) = random_system(n, seed);
            let x = m.solve(&rhs).unwrap();
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                dense[i][(i + n - 1) % n] += m.sub[i];
                dense[i][i] += m.diag[i];
                dense[i][(i + 1) % n] += m.sup[i];
            }
            let xd = dense_solve(dense, rhs.clone()).unwrap();
            for (a, b) in x.iter().zip(&xd) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
            // residual check
            let r = m.matvec(&x);
            for (ri, bi) in r.iter().zip(&rhs) {
                assert!((ri - bi).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bordered_solve_consistency() {
        let (m, rhs) = random_system(24, 99);
        let n = m.len();
        let col = vec![-1.0; n];
        let row: Vec<f64> = vec![1.0 / n as f64; n];
        let (x, s) = solve_bordered(&m, &col, &row, &rhs, 0.25).unwrap();
        // J x + s col = b
        let jx = m.matvec(&x);
        for i in 0..n {
            assert!((jx[i] + s * col[i] - rhs[i]).abs() < 1e-10);
        }
        // row . x = c
        let mean: f64 = row.iter().zip(&x).map(|(r, v)| r * v).sum();
        assert!((mean - 0.25).abs() < 1e-10);
    }

    #[test]
    fn singular_is_reported() {
        let m = CyclicTridiag::zeros(8);
        assert_eq!(m.solve(&vec![1.0; 8]).unwrap_err(), LinalgError::SingularMatrix);
    }
}
