//! Dense 64-bit linear algebra for desk-scale problems.
//!
//! Vectors and matrices here back both the optimiser states and the exact
//! eigendecomposition oracles, so everything is plain dense storage in `f64`
//! with no attempt at sparsity or blocking. Symmetric eigendecomposition uses
//! cyclic Jacobi rotations, which is robust and plenty fast below a few
//! hundred dimensions.

use crate::error::{Error, Result};

/// Relative symmetry tolerance enforced by [`SymMatrix`] constructors.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Jacobi sweep cap for [`eig_sym`].
pub const JACOBI_MAX_SWEEPS: usize = 50;

/// Off-diagonal Frobenius threshold (relative to the matrix Frobenius norm)
/// at which the Jacobi iteration is considered converged.
pub const JACOBI_OFF_TOL: f64 = 1e-12;

/// Dense column vector of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![0.0; len],
        }
    }

    /// Standard basis vector `e_i`.
    pub fn basis(len: usize, i: usize) -> Self {
        let mut v = Self::zeros(len);
        v.data[i] = 1.0;
        v
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Euclidean norm.
    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Vector {
        Vector::from_vec(self.data.iter().map(|x| c * x).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &Vector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Cosine similarity with `other`; 0 when either vector vanishes.
    pub fn cosine(&self, other: &Vector) -> f64 {
        let denom = self.norm2() * other.norm2();
        if denom == 0.0 {
            0.0
        } else {
            self.dot(other) / denom
        }
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Self::from_vec(data)
    }
}

/// Dense rectangular matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector::from_vec((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self += other`, elementwise.
    pub fn add_in_place(&mut self, other: &DenseMatrix) {
        debug_assert_eq!(self.rows, other.rows);
        debug_assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matvec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.cols, v.len());
        let mut out = Vector::zeros(self.rows);
        for i in 0..self.rows {
            out[i] = self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// `self^T v`
    pub fn matvec_transposed(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.rows, v.len());
        let mut out = Vector::zeros(self.cols);
        for i in 0..self.rows {
            let vi = v[i];
            for j in 0..self.cols {
                out[j] += self[(i, j)] * vi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(i);
                for j in 0..other.cols {
                    out_row[j] += aik * orow[j];
                }
            }
        }
        out
    }

    /// `self * other^T`
    pub fn matmul_transposed(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "matmul_transposed shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            let out_row = out.row_mut(i);
            for (j, item) in out_row.iter_mut().enumerate() {
                *item = arow
                    .iter()
                    .zip(other.row(j))
                    .map(|(x, y)| x * y)
                    .sum();
            }
        }
        out
    }

    /// `self^T * other`
    pub fn transposed_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows, "transposed_matmul shape mismatch");
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let orow = other.row(k);
            for (i, &aki) in self.row(k).iter().enumerate() {
                if aki == 0.0 {
                    continue;
                }
                let out_row = out.row_mut(i);
                for j in 0..other.cols {
                    out_row[j] += aki * orow[j];
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense symmetric matrix. Construction enforces symmetry to within
/// [`SYMMETRY_TOL`] relative to the largest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>, // row-major dim x dim
}

impl SymMatrix {
    /// Validates squareness and symmetry of `data` (row-major `dim * dim`).
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("SymMatrix dimension must be >= 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::Dimension {
                context: "SymMatrix::new data length",
                expected: dim * dim,
                got: data.len(),
            });
        }
        let mut scale = 0.0f64;
        for &x in &data {
            scale = scale.max(x.abs());
        }
        let tol = SYMMETRY_TOL * scale.max(1.0);
        let mut defect = 0.0f64;
        for i in 0..dim {
            for j in (i + 1)..dim {
                defect = defect.max((data[i * dim + j] - data[j * dim + i]).abs());
            }
        }
        if defect > tol {
            return Err(Error::NotSymmetric {
                defect,
                tolerance: tol,
            });
        }
        Ok(Self { dim, data })
    }

    /// Builds `(M + M^T) / 2` without a symmetry check.
    pub fn symmetrized(m: &DenseMatrix) -> Self {
        assert_eq!(m.rows(), m.cols(), "symmetrized requires a square matrix");
        let dim = m.rows();
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
        Self { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let dim = entries.len();
        let mut m = Self::zeros(dim);
        for (i, &x) in entries.iter().enumerate() {
            m.data[i * dim + i] = x;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matvec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.dim, v.len());
        let mut out = Vector::zeros(self.dim);
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            out[i] = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            m.row_mut(i).copy_from_slice(&self.data[i * self.dim..(i + 1) * self.dim]);
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `beta * self + alpha * other`, symmetrised storage.
    pub fn linear_combination(&self, beta: f64, alpha: f64, other: &SymMatrix) -> Result<SymMatrix> {
        if self.dim != other.dim {
            return Err(Error::Dimension {
                context: "SymMatrix::linear_combination",
                expected: self.dim,
                got: other.dim,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| beta * a + alpha * b)
            .collect();
        Ok(SymMatrix {
            dim: self.dim,
            data,
        })
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

/// Result of [`eig_sym`]: eigenvalues ascending, eigenvectors as the columns
/// of an orthonormal matrix `Q`, so `Q diag(eigenvalues) Q^T` reconstructs the
/// input.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vector,
    pub eigenvectors: DenseMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest absolute eigenvalue.
    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0f64, |acc, &l| acc.max(l.abs()))
    }

    /// Smallest absolute eigenvalue.
    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(f64::INFINITY, |acc, &l| acc.min(l.abs()))
    }

    /// Assembles `Q diag(f(lambda)) Q^T`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.dim();
        let q = &self.eigenvectors;
        let mut out = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let fl = f(self.eigenvalues[k]);
            if fl == 0.0 {
                continue;
            }
            for i in 0..n {
                let qik = q[(i, k)] * fl;
                if qik == 0.0 {
                    continue;
                }
                let row = out.row_mut(i);
                for j in 0..n {
                    row[j] += qik * q[(j, k)];
                }
            }
        }
        SymMatrix::symmetrized(&out)
    }

    /// Applies `Q diag(f(lambda)) Q^T` to a vector without forming the matrix.
    pub fn apply_mapped(&self, f: impl Fn(f64) -> f64, v: &Vector) -> Vector {
        let mut coeffs = self.eigenvectors.matvec_transposed(v);
        for k in 0..coeffs.len() {
            coeffs[k] *= f(self.eigenvalues[k]);
        }
        self.eigenvectors.matvec(&coeffs)
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps over all off-diagonal pairs until the off-diagonal Frobenius norm
/// falls below [`JACOBI_OFF_TOL`] relative to the matrix norm, or errors out
/// after [`JACOBI_MAX_SWEEPS`] sweeps.
pub fn eig_sym(m: &SymMatrix) -> Result<EigenDecomposition> {
    let n = m.dim();
    let mut a = m.to_dense();
    let mut q = DenseMatrix::identity(n);

    let norm = a.frobenius_norm();
    if n == 1 || norm == 0.0 {
        return Ok(sorted_eigen(
            (0..n).map(|i| a[(i, i)]).collect(),
            q,
        ));
    }
    let threshold = JACOBI_OFF_TOL * norm;

    let mut converged = false;
    let mut off = off_diagonal_norm(&a);
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for r in p + 1..n {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                // Rotation angle that annihilates a[p][r]
                let tau = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - s * akr;
                    a[(k, r)] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - s * ark;
                    a[(r, k)] = s * apk + c * ark;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
        off = off_diagonal_norm(&a);
    }
    if !converged && off > threshold {
        return Err(Error::EigenNoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
            off_diagonal: off,
        });
    }

    Ok(sorted_eigen((0..n).map(|i| a[(i, i)]).collect(), q))
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

fn sorted_eigen(values: Vec<f64>, q: DenseMatrix) -> EigenDecomposition {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("non-NaN eigenvalues"));
    let mut sorted_values = Vec::with_capacity(n);
    let mut sorted_q = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_values.push(values[src]);
        for i in 0..n {
            sorted_q[(i, dst)] = q[(i, src)];
        }
    }
    EigenDecomposition {
        eigenvalues: Vector::from_vec(sorted_values),
        eigenvectors: sorted_q,
    }
}

/// Euclidean norm of a vector.
pub fn norm2(v: &Vector) -> f64 {
    v.norm2()
}

/// Spectral norm of a symmetric matrix: the largest absolute eigenvalue.
pub fn spectral_norm(m: &SymMatrix) -> Result<f64> {
    Ok(eig_sym(m)?.max_abs_eigenvalue())
}

/// Random symmetric matrix with standard-normal entries, `(G + G^T) / 2`.
pub fn random_symmetric(dim: usize, rng: &mut crate::rng::SplitMix64) -> SymMatrix {
    let mut g = DenseMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            g[(i, j)] = rng.next_normal();
        }
    }
    SymMatrix::symmetrized(&g)
}

/// Random vector with standard-normal entries.
pub fn random_vector(dim: usize, rng: &mut crate::rng::SplitMix64) -> Vector {
    Vector::from_vec((0..dim).map(|_| rng.next_normal()).collect())
}

/// Random orthonormal matrix from modified Gram-Schmidt on standard-normal
/// columns.
pub fn random_orthonormal(dim: usize, rng: &mut crate::rng::SplitMix64) -> DenseMatrix {
    let mut q = DenseMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut col = random_vector(dim, rng);
        loop {
            for k in 0..j {
                let qk = q.column(k);
                let proj = qk.dot(&col);
                col.axpy(-proj, &qk);
            }
            let norm = col.norm2();
            if norm > 1e-8 {
                col.scale_in_place(1.0 / norm);
                break;
            }
            // degenerate draw; resample
            col = random_vector(dim, rng);
        }
        for i in 0..dim {
            q[(i, j)] = col[i];
        }
    }
    q
}

/// Symmetric matrix `Q diag(eigenvalues) Q^T` with a random orthonormal `Q`.
pub fn symmetric_with_spectrum(
    eigenvalues: &[f64],
    rng: &mut crate::rng::SplitMix64,
) -> SymMatrix {
    let dim = eigenvalues.len();
    let q = random_orthonormal(dim, rng);
    let mut scaled = DenseMatrix::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            scaled[(i, j)] = q[(i, j)] * eigenvalues[j];
        }
    }
    SymMatrix::symmetrized(&scaled.matmul_transposed(&q))
}

/// Random symmetric matrix whose eigenvalue magnitudes lie in
/// `[min_abs, max_abs]` with independently random signs. Keeps the spectrum
/// away from zero so inverse-square-root series converge at practical
/// truncation lengths.
pub fn random_sym_bounded_spectrum(
    dim: usize,
    min_abs: f64,
    max_abs: f64,
    rng: &mut crate::rng::SplitMix64,
) -> SymMatrix {
    let eigenvalues: Vec<f64> = (0..dim)
        .map(|_| {
            let mag = rng.next_uniform(min_abs, max_abs);
            if rng.next_f64() < 0.5 {
                -mag
            } else {
                mag
            }
        })
        .collect();
    symmetric_with_spectrum(&eigenvalues, rng)
}
