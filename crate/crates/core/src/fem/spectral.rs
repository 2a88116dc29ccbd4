//! Extreme generalized eigenvalues `A x = λ B x` for SPD `B` by power and
//! inverse iteration with Rayleigh-quotient stopping.

use super::linalg::{CsrMatrix, SpdSolver, DEFAULT_SOLVER_TOL};
use crate::error::{Error, Result};

pub const EIGEN_TOL: f64 = 1e-10;
pub const EIGEN_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

fn start_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 1.0 + 0.01 * ((i * 7919) % 101) as f64 / 101.0)
        .collect()
}

fn rayleigh(a: &CsrMatrix, b: &CsrMatrix, x: &[f64]) -> f64 {
    a.quad_form(x) / b.quad_form(x)
}

fn normalize_b(b: &CsrMatrix, x: &mut [f64]) {
    let nb = b.quad_form(x).sqrt();
    x.iter_mut().for_each(|v| *v /= nb);
}

/// Runs `x <- solver(op x)` until the Rayleigh quotient of `(a, b)` settles.
fn iterate(
    a: &CsrMatrix,
    b: &CsrMatrix,
    apply: &CsrMatrix,
    solver: &SpdSolver,
    tol: f64,
    max_iter: usize,
    what: &'static str,
) -> Result<EigenPair> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::InvalidInput(format!("{what}: empty matrix")));
    }
    let mut x = start_vector(n);
    normalize_b(b, &mut x);
    let mut prev = rayleigh(a, b, &x);
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let y = apply.mul_vec(&x);
        x = solver.solve(&y)?;
        if x.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidInput(format!("{what}: iterate vanished")));
        }
        normalize_b(b, &mut x);
        let value = rayleigh(a, b, &x);
        change = (value - prev).abs();
        if it >= 2 && change <= tol * value.abs() {
            return Ok(EigenPair {
                value,
                vector: x,
                iterations: it,
            });
        }
        prev = value;
    }
    Err(Error::NoConvergence {
        solver: what,
        iterations: max_iter,
        residual: change,
    })
}

/// Smallest `λ` with `A x = λ B x`; both matrices SPD.
pub fn smallest_generalized_eigenvalue(
    a: &CsrMatrix,
    b: &CsrMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair> {
    let solver = SpdSolver::new(a, DEFAULT_SOLVER_TOL)?;
    iterate(a, b, b, &solver, tol, max_iter, "inverse iteration")
}

/// Largest `λ` with `A x = λ B x`; `A` symmetric positive semidefinite, `B` SPD.
pub fn largest_generalized_eigenvalue(
    a: &CsrMatrix,
    b: &CsrMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair> {
    let solver = SpdSolver::new(b, DEFAULT_SOLVER_TOL)?;
    iterate(a, b, a, &solver, tol, max_iter, "power iteration")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencil() {
        let a = CsrMatrix::from_diagonal(&[2.0, 6.0, 12.0]);
        let b = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let lo = smallest_generalized_eigenvalue(&a, &b, 1e-12, 10_000).unwrap();
        let hi = largest_generalized_eigenvalue(&a, &b, 1e-12, 10_000).unwrap();
        assert!((lo.value - 2.0).abs() < 1e-9);
        assert!((hi.value - 4.0).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let a = CsrMatrix::from_diagonal(&[1.0, 1.0001, 3.0]);
        let b = CsrMatrix::identity(3);
        let r = smallest_generalized_eigenvalue(&a, &b, 1e-16, 3);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }
}
