//! Sparse symmetric matrices and SPD solvers.
//!
//! Matrices are stored in compressed sparse row form. Systems with at most
//! [`DIRECT_SOLVER_LIMIT`] unknowns are factored by an envelope (skyline)
//! Cholesky decomposition in the natural node ordering; larger systems fall
//! back to conjugate gradients with a Jacobi preconditioner.

use crate::error::{shape_check, Error, Result};

/// Largest system size handled by the direct factorization.
pub const DIRECT_SOLVER_LIMIT: usize = 20_000;

/// Default relative residual tolerance for the iterative fallback.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix from (row, col, value) triplets. Duplicate
    /// entries are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `out += s * A x`
    pub fn mul_vec_add(&self, s: f64, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let acc: f64 = self.row(i).map(|(j, v)| v * x[j]).sum();
            *o += s * acc;
        }
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `a * self + b * other`
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let trips: Vec<_> = self
            .triplets()
            .map(|(i, j, v)| (i, j, a * v))
            .chain(other.triplets().map(|(i, j, v)| (i, j, b * v)))
            .collect();
        CsrMatrix::from_triplets(self.n, &trips)
    }

    /// Principal submatrix on `indices` (kept in the given order).
    pub fn principal_submatrix(&self, indices: &[usize]) -> CsrMatrix {
        let mut local = vec![usize::MAX; self.n];
        for (k, &i) in indices.iter().enumerate() {
            local[i] = k;
        }
        let mut trips = Vec::new();
        for (k, &i) in indices.iter().enumerate() {
            for (j, v) in self.row(i) {
                if local[j] != usize::MAX {
                    trips.push((k, local[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(indices.len(), &trips)
    }

    /// Row-sum lumping into a diagonal matrix.
    pub fn lumped(&self) -> CsrMatrix {
        let sums: Vec<f64> = (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect();
        CsrMatrix::from_diagonal(&sums)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        self.triplets()
            .all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol * scale)
    }

    pub fn sum_all(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Envelope Cholesky factor `A = L Lᵀ`. Row `i` of `L` is stored densely
/// from its first structural nonzero up to the diagonal.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j <= i).min().unwrap_or(i))
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            let len = i - first[i] + 1;
            offsets.push(offsets[i] + len);
        }
        let mut data = vec![0.0; offsets[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[offsets[i] + j - first[i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let oi = offsets[i];
            for j in fi..i {
                let fj = first[j];
                let oj = offsets[j];
                let start = fi.max(fj);
                let mut s = data[oi + j - fi];
                for k in start..j {
                    s -= data[oi + k - fi] * data[oj + k - fj];
                }
                let ljj = data[oj + j - fj];
                data[oi + j - fi] = s / ljj;
            }
            let diag_orig = data[oi + i - fi];
            let mut d = diag_orig;
            for k in fi..i {
                let l = data[oi + k - fi];
                d -= l * l;
            }
            if !(d > f64::EPSILON * diag_orig.abs()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { row: i, pivot: d });
            }
            data[oi + i - fi] = d.sqrt();
        }
        Ok(Self {
            n,
            first,
            offsets,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        // L y = b
        for i in 0..self.n {
            let fi = self.first[i];
            let oi = self.offsets[i];
            let row = &self.data[oi..oi + i - fi];
            let s = x[i] - row.iter().zip(&x[fi..i]).map(|(a, b)| a * b).sum::<f64>();
            x[i] = s / self.data[oi + i - fi];
        }
        // Lᵀ x = y
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let oi = self.offsets[i];
            x[i] /= self.data[oi + i - fi];
            let xi = x[i];
            for (xk, a) in x[fi..i].iter_mut().zip(&self.data[oi..oi + i - fi]) {
                *xk -= a * xi;
            }
        }
    }
}

/// Jacobi-preconditioned conjugate gradients on an SPD matrix.
pub fn pcg(a: &CsrMatrix, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.dim();
    shape_check("pcg rhs", n, rhs.len(), rhs.len() == n)?;
    let diag = a.diagonal();
    if let Some((row, &d)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(Error::NotPositiveDefinite { row, pivot: d });
    }
    let rhs_norm = norm2(rhs);
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite { row: it, pivot: pap });
        }
        let step = rz / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        if norm2(&r) <= tol * rhs_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        solver: "jacobi-pcg",
        iterations: max_iter,
        residual: norm2(&r) / rhs_norm,
    })
}

/// A prepared SPD solver for repeated right-hand sides.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Direct(SkylineCholesky),
    Iterative { matrix: CsrMatrix, tol: f64 },
}

impl SpdSolver {
    pub fn new(a: &CsrMatrix, tol: f64) -> Result<Self> {
        if a.dim() <= DIRECT_SOLVER_LIMIT {
            Ok(SpdSolver::Direct(SkylineCholesky::factor(a)?))
        } else {
            Ok(SpdSolver::Iterative {
                matrix: a.clone(),
                tol,
            })
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpdSolver::Direct(f) => f.dim(),
            SpdSolver::Iterative { matrix, .. } => matrix.dim(),
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        shape_check("spd solve rhs", self.dim(), rhs.len(), rhs.len() == self.dim())?;
        match self {
            SpdSolver::Direct(f) => {
                let mut x = rhs.to_vec();
                f.solve_in_place(&mut x);
                Ok(x)
            }
            SpdSolver::Iterative { matrix, tol } => pcg(matrix, rhs, *tol, 10 * matrix.dim() + 100),
        }
    }
}

/// Solves `A x = rhs` for SPD `A` with `‖A x − rhs‖ ≤ tol ‖rhs‖`.
///
/// The direct path is followed by up to three steps of iterative refinement
/// when the factor alone misses the requested residual.
pub fn solve_spd(a: &CsrMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("solver tolerance must be positive, got {tol}")));
    }
    let solver = SpdSolver::new(a, tol)?;
    let mut x = solver.solve(rhs)?;
    let rhs_norm = norm2(rhs);
    for _ in 0..3 {
        let mut r = rhs.to_vec();
        a.mul_vec_add(-1.0, &x, &mut r);
        let res = norm2(&r);
        if res <= tol * rhs_norm {
            return Ok(x);
        }
        let dx = solver.solve(&r)?;
        axpy(1.0, &dx, &mut x);
    }
    let mut r = rhs.to_vec();
    a.mul_vec_add(-1.0, &x, &mut r);
    let res = norm2(&r);
    if res <= tol * rhs_norm {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            solver: "cholesky refinement",
            iterations: 3,
            residual: res / rhs_norm,
        })
    }
}
