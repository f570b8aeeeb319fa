//! Small dense complex matrices and the kernels the transceiver design needs:
//! Cholesky, triangular inversion, Hermitian eigendecomposition (cyclic
//! Jacobi), Gram–Schmidt orthonormalization and LU determinants.
//!
//! Every matrix in this problem is tiny (a handful of antennas), so the
//! storage is a flat row-major `Vec` and the algorithms favour accuracy over
//! asymptotic speed.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_traits::{One, Zero};

use crate::scalar::{re, Cx, Real};

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> fmt::Debug for CMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, " ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, " {:+.6}{:+.6}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<T: Real> CMatrix<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Cx<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Cx::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Cx::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Real diagonal matrix.
    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = re(x);
        }
        m
    }

    /// Builds a real matrix from row-major values.
    pub fn from_real(rows: usize, cols: usize, vals: &[T]) -> Self {
        assert_eq!(vals.len(), rows * cols);
        Self { rows, cols, data: vals.iter().map(|&x| re(x)).collect() }
    }

    #[inline]
    /// Converts the entries to another scalar type.
    pub fn cast<U: Real>(&self) -> CMatrix<U> {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| Cx::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64()))).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[Cx<T>] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// `selfᴴ · rhs` without materializing the adjoint.
    pub fn adj_mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "adj_mul shape mismatch");
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(k, i)].conj();
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out[(i, j)] + a * rhs[(k, j)];
                    out[(i, j)] = v;
                }
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out[(i, j)] + a * rhs[(k, j)];
                    out[(i, j)] = v;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Cx<T>]) -> Vec<Cx<T>> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                let row = &self.data[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(v).fold(Cx::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn column(&self, j: usize) -> Vec<Cx<T>> {
        (0..self.rows).map(|r| self[(r, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[Cx<T>]) {
        assert_eq!(v.len(), self.rows);
        for (r, &z) in v.iter().enumerate() {
            self[(r, j)] = z;
        }
    }

    /// Sub-matrix made of the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        assert!(k <= self.cols);
        Self::from_fn(self.rows, k, |r, c| self[(r, c)])
    }

    pub fn diag(&self) -> Vec<Cx<T>> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> Cx<T> {
        self.diag().into_iter().fold(Cx::zero(), |a, b| a + b)
    }

    pub fn frob_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// Symmetrizes `(A + Aᴴ)/2`; used to scrub round-off from Gram matrices.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        let half = T::lit(0.5);
        let mut m = Self::from_fn(self.rows, self.cols, |r, c| (self[(r, c)] + self[(c, r)].conj()) * half);
        for i in 0..self.rows {
            m[(i, i)].im = T::zero();
        }
        m
    }

    /// Lower Cholesky factor `L` with `L·Lᴴ = self` and positive real diagonal.
    ///
    /// Returns `None` when a pivot falls to or below `rel_tol · trace`.
    pub fn cholesky_lower(&self, rel_tol: T) -> Option<Self> {
        assert!(self.is_square());
        let n = self.rows;
        let floor = rel_tol * self.trace().re.abs();
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d = d - l[(j, k)].norm_sqr();
            }
            if !(d > floor) || !d.is_finite() {
                return None;
            }
            let ljj = d.sqrt();
            l[(j, j)] = re(ljj);
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(l)
    }

    /// Inverse of a lower-triangular matrix by forward substitution.
    pub fn lower_inverse(&self) -> Self {
        assert!(self.is_square());
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for j in 0..n {
            inv[(j, j)] = Cx::<T>::one() / self[(j, j)];
            for i in (j + 1)..n {
                let mut s = Cx::<T>::zero();
                for k in j..i {
                    s = s + self[(i, k)] * inv[(k, j)];
                }
                inv[(i, j)] = -s / self[(i, i)];
            }
        }
        inv
    }

    /// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Eigenvalues are returned in non-increasing order with the
    /// matching eigenvectors as columns.
    pub fn hermitian_eig(&self) -> (Vec<T>, Self) {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.hermitian_part();
        let mut v = Self::identity(n);
        let scale = a.frob_norm();
        if n > 1 && scale > T::zero() {
            let eps = T::epsilon();
            let target = (eps * scale) * (eps * scale);
            for _sweep in 0..64 {
                let mut off = T::zero();
                for p in 0..n {
                    for q in (p + 1)..n {
                        off = off + a[(p, q)].norm_sqr();
                    }
                }
                if off <= target {
                    break;
                }
                for p in 0..n {
                    for q in (p + 1)..n {
                        jacobi_rotate(&mut a, &mut v, p, q);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(j, j)].re.partial_cmp(&a[(i, i)].re).unwrap_or(std::cmp::Ordering::Equal));
        let vals = order.iter().map(|&i| a[(i, i)].re).collect();
        let vecs = Self::from_fn(n, n, |r, c| v[(r, order[c])]);
        (vals, vecs)
    }

    /// Eigenvalues only (non-increasing).
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        self.hermitian_eig().0
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> T {
        let gram = self.adj_mul(self);
        gram.hermitian_eigenvalues().first().copied().unwrap_or(T::zero()).max(T::zero()).sqrt()
    }

    /// Thin Q factor by modified Gram–Schmidt with one re-orthogonalization
    /// pass. Returns `None` if the columns are numerically dependent.
    pub fn orthonormalize_columns(&self) -> Option<Self> {
        let (m, k) = self.shape();
        let mut q = self.clone();
        let tiny = T::epsilon() * T::lit(1e3) * self.frob_norm().max(T::min_positive_value());
        for j in 0..k {
            let mut col = q.column(j);
            for _pass in 0..2 {
                for i in 0..j {
                    let qi = q.column(i);
                    let proj = qi.iter().zip(&col).fold(Cx::zero(), |acc, (a, b)| acc + a.conj() * b);
                    for r in 0..m {
                        col[r] = col[r] - qi[r] * proj;
                    }
                }
            }
            let nrm = col.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
            if !(nrm > tiny) {
                return None;
            }
            for z in col.iter_mut() {
                *z = *z / nrm;
            }
            q.set_column(j, &col);
        }
        Some(q)
    }

    /// Determinant by LU factorization with partial pivoting.
    pub fn det(&self) -> Cx<T> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut det = Cx::one();
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&i, &j| a[(i, c)].norm().partial_cmp(&a[(j, c)].norm()).unwrap_or(std::cmp::Ordering::Equal))
                .unwrap_or(c);
            if a[(piv, c)].is_zero() {
                return Cx::zero();
            }
            if piv != c {
                for j in 0..n {
                    let t = a[(c, j)];
                    a[(c, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                det = -det;
            }
            let p = a[(c, c)];
            det = det * p;
            for r in (c + 1)..n {
                let f = a[(r, c)] / p;
                if f.is_zero() {
                    continue;
                }
                for j in c..n {
                    let v = a[(r, j)] - f * a[(c, j)];
                    a[(r, j)] = v;
                }
            }
        }
        det
    }

    /// `selfᴴ·self - I` max-abs residual; zero for orthonormal columns.
    pub fn orthonormality_error(&self) -> T {
        self.adj_mul(self).max_abs_diff(&Self::identity(self.cols))
    }
}

/// One complex Jacobi rotation zeroing `a[p][q]` (and `a[q][p]`).
///
/// The off-diagonal phase is first removed with `diag(1, e^{-iφ})`, then a
/// real symmetric rotation diagonalizes the 2×2 block.
fn jacobi_rotate<T: Real>(a: &mut CMatrix<T>, v: &mut CMatrix<T>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == T::zero() {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let phase = apq / mag; // e^{iφ}
    let two = T::lit(2.0);
    let tau = (aqq - app) / (two * mag);
    let t = if tau >= T::zero() {
        T::one() / (tau + (T::one() + tau * tau).sqrt())
    } else {
        -T::one() / (-tau + (T::one() + tau * tau).sqrt())
    };
    let c = T::one() / (T::one() + t * t).sqrt();
    let s = t * c;
    // W = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
    let e = phase.conj();
    let w_pp = re(c);
    let w_pq = re(s);
    let w_qp = e * (-s);
    let w_qq = e * c;
    let n = a.rows();
    for r in 0..n {
        let x = a[(r, p)];
        let y = a[(r, q)];
        a[(r, p)] = x * w_pp + y * w_qp;
        a[(r, q)] = x * w_pq + y * w_qq;
    }
    for col in 0..n {
        let x = a[(p, col)];
        let y = a[(q, col)];
        a[(p, col)] = w_pp.conj() * x + w_qp.conj() * y;
        a[(q, col)] = w_pq.conj() * x + w_qq.conj() * y;
    }
    a[(p, q)] = Cx::zero();
    a[(q, p)] = Cx::zero();
    a[(p, p)].im = T::zero();
    a[(q, q)].im = T::zero();
    for r in 0..v.rows() {
        let x = v[(r, p)];
        let y = v[(r, q)];
        v[(r, p)] = x * w_pp + y * w_qp;
        v[(r, q)] = x * w_pq + y * w_qq;
    }
}

impl<T: Real> Index<(usize, usize)> for CMatrix<T> {
    type Output = Cx<T>;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Cx<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Cx<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.shape(), rhs.shape());
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.shape(), rhs.shape());
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(rows, cols, |_, _| cx(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn cholesky_reconstructs_gram() {
        let a = random(5, 3, 1);
        let g = a.adj_mul(&a);
        let l = g.cholesky_lower(1e-14).unwrap();
        assert!((&l * &l.adjoint()).max_abs_diff(&g) < 1e-13);
        for i in 0..3 {
            assert!(l[(i, i)].re > 0.0 && l[(i, i)].im == 0.0);
            for j in (i + 1)..3 {
                assert_eq!(l[(i, j)], Cx::zero());
            }
        }
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = CMatrix::<f64>::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(a.cholesky_lower(1e-14).is_none());
    }

    #[test]
    fn lower_inverse_is_inverse() {
        let a = random(4, 4, 2);
        let l = a.adj_mul(&a).cholesky_lower(1e-14).unwrap();
        let inv = l.lower_inverse();
        assert!((&l * &inv).max_abs_diff(&CMatrix::identity(4)) < 1e-12);
    }

    #[test]
    fn jacobi_diagonalizes_hermitian() {
        let a = random(6, 6, 3);
        let h = (&a + &a.adjoint()).hermitian_part();
        let (vals, vecs) = h.hermitian_eig();
        assert!(vecs.orthonormality_error() < 1e-13);
        let recon = &(&vecs * &CMatrix::from_diag(&vals)) * &vecs.adjoint();
        assert!(recon.max_abs_diff(&h) < 1e-13);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn jacobi_f32() {
        let a = CMatrix::<f32>::from_fn(4, 4, |r, c| cx((r + 2 * c) as f32 * 0.1, r as f32 - c as f32));
        let h = (&a + &a.adjoint()).hermitian_part();
        let (vals, vecs) = h.hermitian_eig();
        let recon = &(&vecs * &CMatrix::from_diag(&vals)) * &vecs.adjoint();
        assert!(recon.max_abs_diff(&h) < 1e-4);
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let a = random(3, 3, 4);
        let m = |r: usize, c: usize| a[(r, c)];
        let cof = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        assert!((a.det() - cof).norm() < 1e-14);
    }

    #[test]
    fn gram_schmidt_orthonormal() {
        let a = random(6, 3, 5);
        let q = a.orthonormalize_columns().unwrap();
        assert!(q.orthonormality_error() < 1e-14);
        // Q spans the same space: projection of A onto Q reproduces A.
        let proj = &q * &q.adj_mul(&a);
        assert!(proj.max_abs_diff(&a) < 1e-14);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = CMatrix::<f64>::from_diag(&[3.0, -5.0, 1.0]);
        assert!((d.spectral_norm() - 5.0).abs() < 1e-14);
    }
}
