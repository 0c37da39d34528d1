//! Dense linear algebra for the covariance systems in kriging and spline
//! fitting: row-major matrices, Cholesky factorization with a jitter
//! escalation schedule, and triangular solves. Deliberately minimal — no
//! eigendecompositions, no sparsity.

use crate::error::{Error, Result};
use crate::real::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<R: Real> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> DenseMatrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        DenseMatrix { rows, cols, data: vec![R::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = R::one();
        }
        m
    }

    /// Build from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<R>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::invalid("matrix must have at least one row and column"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        let data: Vec<R> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Ok(DenseMatrix { rows: rows.len(), cols, data })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<R>) -> Result<Self> {
        if data.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::invalid("data length does not match dimensions"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Column vector from a slice.
    pub fn column(v: &[R]) -> Self {
        DenseMatrix { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[R] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self, rel_tol: R) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(R::one());
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn max_abs(&self) -> R {
        self.data.iter().fold(R::zero(), |m, &v| m.max(v.abs()))
    }

    /// Max row-sum norm.
    pub fn norm_inf(&self) -> R {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<R>())
            .fold(R::zero(), |m, v| m.max(v))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "matmul shape mismatch: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == R::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + aik * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[R]) -> Result<Vec<R>> {
        if v.len() != self.cols {
            return Err(Error::invalid("matvec length mismatch"));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    fn mean_diag(&self) -> R {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self[(i, i)]).sum::<R>() / R::of_usize(n)
    }
}

impl<R: Real> std::ops::Index<(usize, usize)> for DenseMatrix<R> {
    type Output = R;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &R {
        &self.data[i * self.cols + j]
    }
}

impl<R: Real> std::ops::IndexMut<(usize, usize)> for DenseMatrix<R> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut R {
        &mut self.data[i * self.cols + j]
    }
}

/// Escalation schedule for near-singular symmetric systems: first try the
/// matrix as-is, then add `base_jitter * mean(diag)` to the diagonal,
/// multiplying by 10 up to `max_attempts` times.
#[derive(Debug, Clone, Copy)]
pub struct JitterPolicy {
    pub base_jitter: f64,
    pub max_attempts: usize,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy { base_jitter: 1.0e-10, max_attempts: 8 }
    }
}

/// Lower-triangular Cholesky factor together with the jitter that was needed.
#[derive(Debug, Clone)]
pub struct CholeskyFactor<R: Real> {
    lower: DenseMatrix<R>,
    /// Diagonal shift delta such that L L^T = A + delta I.
    pub jitter: R,
}

impl<R: Real> CholeskyFactor<R> {
    pub fn lower(&self) -> &DenseMatrix<R> {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// log det(A + delta I) = 2 sum log L_ii.
    pub fn log_det(&self) -> R {
        let two = R::of(2.0);
        (0..self.dim()).map(|i| self.lower[(i, i)].ln()).sum::<R>() * two
    }

    /// Solve L y = b in place.
    pub fn forward_solve(&self, b: &mut [R]) -> Result<()> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::invalid("forward_solve length mismatch"));
        }
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s = s - self.lower[(i, j)] * b[j];
            }
            let d = self.lower[(i, i)];
            if d == R::zero() {
                return Err(Error::Singular(i));
            }
            b[i] = s / d;
        }
        Ok(())
    }

    /// Solve L^T x = y in place.
    pub fn backward_solve(&self, y: &mut [R]) -> Result<()> {
        let n = self.dim();
        if y.len() != n {
            return Err(Error::invalid("backward_solve length mismatch"));
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s = s - self.lower[(j, i)] * y[j];
            }
            let d = self.lower[(i, i)];
            if d == R::zero() {
                return Err(Error::Singular(i));
            }
            y[i] = s / d;
        }
        Ok(())
    }

    /// Solve (L L^T) x = b for a vector.
    pub fn solve_vec(&self, b: &[R]) -> Result<Vec<R>> {
        let mut x = b.to_vec();
        self.forward_solve(&mut x)?;
        self.backward_solve(&mut x)?;
        Ok(x)
    }

    /// Solve (L L^T) X = B column-wise.
    pub fn solve_matrix(&self, b: &DenseMatrix<R>) -> Result<DenseMatrix<R>> {
        if b.rows() != self.dim() {
            return Err(Error::invalid("solve_matrix row mismatch"));
        }
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        let mut col = vec![R::zero(); b.rows()];
        for j in 0..b.cols() {
            for i in 0..b.rows() {
                col[i] = b[(i, j)];
            }
            self.forward_solve(&mut col)?;
            self.backward_solve(&mut col)?;
            for i in 0..b.rows() {
                out[(i, j)] = col[i];
            }
        }
        Ok(out)
    }

    /// x^T (L L^T)^{-1} x via one forward solve.
    pub fn quad_form_inv(&self, x: &[R]) -> Result<R> {
        let mut y = x.to_vec();
        self.forward_solve(&mut y)?;
        Ok(y.iter().map(|&v| v * v).sum())
    }

    /// trace((L L^T)^{-1}), used by GCV.
    pub fn trace_inv(&self) -> Result<R> {
        let n = self.dim();
        let mut tr = R::zero();
        let mut e = vec![R::zero(); n];
        for i in 0..n {
            e.iter_mut().for_each(|v| *v = R::zero());
            e[i] = R::one();
            self.forward_solve(&mut e)?;
            self.backward_solve(&mut e)?;
            tr = tr + e[i];
        }
        Ok(tr)
    }
}

/// Cholesky factorization of a symmetric matrix, escalating diagonal jitter
/// until the factorization succeeds. Returns the factor and reports the
/// jitter actually applied (0 when the input is numerically SPD).
pub fn cholesky<R: Real>(a: &DenseMatrix<R>, policy: JitterPolicy) -> Result<CholeskyFactor<R>> {
    if !a.is_square() {
        return Err(Error::invalid("cholesky requires a square matrix"));
    }
    if !a.is_symmetric(R::of(1.0e-8)) {
        return Err(Error::invalid("cholesky requires a symmetric matrix"));
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cholesky requires finite entries"));
    }
    let base = R::of(policy.base_jitter) * a.mean_diag().abs().max(R::min_positive_value());
    let mut delta = R::zero();
    for attempt in 0..=policy.max_attempts {
        if attempt > 0 {
            delta = if attempt == 1 { base } else { delta * R::of(10.0) };
        }
        if let Some(lower) = try_factor(a, delta) {
            return Ok(CholeskyFactor { lower, jitter: delta });
        }
    }
    Err(Error::NotPositiveDefinite {
        attempts: policy.max_attempts,
        last_jitter: delta.to_f64_lossy(),
    })
}

fn try_factor<R: Real>(a: &DenseMatrix<R>, delta: R) -> Option<DenseMatrix<R>> {
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            if i == j {
                s = s + delta;
            }
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= R::zero() || !s.is_finite() {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}
