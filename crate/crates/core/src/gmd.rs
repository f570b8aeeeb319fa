//! Equal-diagonal QR rotation of a positive diagonal matrix.
//!
//! Given `A = Diag(δ)`, find an orthogonal `V` such that `A·V = Q·R` with an
//! upper-triangular `R` whose diagonal entries all equal the geometric mean of
//! `δ`. The construction sweeps the diagonal once: at step `i` it brings an
//! entry `≥ σ̄` and an entry `≤ σ̄` into positions `(i, i+1)` and applies one
//! left and one right plane rotation that pins `R[i][i] = σ̄` while keeping the
//! 2×2 block upper triangular.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;

/// `A·v = q·r` with `v`, `q` orthogonal and `diag(r)` constant.
#[derive(Debug, Clone)]
pub struct GmdResult<T: Real> {
    pub v: CMatrix<T>,
    pub q: CMatrix<T>,
    pub r: CMatrix<T>,
}

impl<T: Real> GmdResult<T> {
    pub fn r_diag(&self) -> Vec<T> {
        self.r.diag().iter().map(|z| z.re).collect()
    }
}

/// Cosine/sine of the right rotation that maps `Diag(d1, d2)` to an upper
/// triangular block with leading entry `sigma`. Requires `sigma` between
/// `d1` and `d2`.
pub(crate) fn equalizing_rotation<T: Real>(d1: T, d2: T, sigma: T) -> (T, T) {
    let den = d1 * d1 - d2 * d2;
    if den == T::zero() {
        return (T::one(), T::zero());
    }
    let c2 = ((sigma * sigma - d2 * d2) / den).max(T::zero()).min(T::one());
    let c = c2.sqrt();
    let s = (T::one() - c2).max(T::zero()).sqrt();
    (c, s)
}

struct Dense<T> {
    n: usize,
    a: Vec<T>,
}

impl<T: Real> Dense<T> {
    fn identity(n: usize) -> Self {
        let mut a = vec![T::zero(); n * n];
        for i in 0..n {
            a[i * n + i] = T::one();
        }
        Self { n, a }
    }
    #[inline]
    fn at(&self, r: usize, c: usize) -> T {
        self.a[r * self.n + c]
    }
    #[inline]
    fn set(&mut self, r: usize, c: usize, x: T) {
        self.a[r * self.n + c] = x;
    }
    fn swap_cols(&mut self, i: usize, j: usize) {
        for r in 0..self.n {
            self.a.swap(r * self.n + i, r * self.n + j);
        }
    }
    fn swap_rows(&mut self, i: usize, j: usize) {
        for c in 0..self.n {
            self.a.swap(i * self.n + c, j * self.n + c);
        }
    }
    /// Right-multiplies columns `(i, i+1)` by `[[a, b], [c, d]]`.
    fn rotate_cols(&mut self, i: usize, rows: usize, m: [T; 4]) {
        for r in 0..rows {
            let x = self.at(r, i);
            let y = self.at(r, i + 1);
            self.set(r, i, x * m[0] + y * m[2]);
            self.set(r, i + 1, x * m[1] + y * m[3]);
        }
    }
    fn into_cmatrix(self) -> CMatrix<T> {
        CMatrix::from_real(self.n, self.n, &self.a)
    }
}

/// Computes `V`, `Q`, `R` for `A = Diag(delta)` (see module docs).
pub fn equal_diag_rotation<T: Real>(delta: &[T]) -> Result<GmdResult<T>> {
    let k = delta.len();
    if k == 0 {
        return Err(Error::Domain("empty diagonal".into()));
    }
    if let Some(bad) = delta.iter().find(|d| !(**d > T::zero()) || !d.is_finite()) {
        return Err(Error::Domain(format!("diagonal entries must be positive and finite, got {bad}")));
    }
    let kt = T::from_usize(k).unwrap();
    let sigma = (delta.iter().map(|d| d.ln()).sum::<T>() / kt).exp();

    let mut r = Dense::identity(k);
    for (i, &d) in delta.iter().enumerate() {
        r.set(i, i, d);
    }
    let mut q = Dense::identity(k);
    let mut v = Dense::identity(k);

    for i in 0..k.saturating_sub(1) {
        let (mut hi, mut lo) = (i, i);
        for j in i..k {
            if r.at(j, j) > r.at(hi, hi) {
                hi = j;
            }
            if r.at(j, j) < r.at(lo, lo) {
                lo = j;
            }
        }
        if r.at(hi, hi) == r.at(lo, lo) {
            // Remaining diagonal is already constant.
            continue;
        }
        permute(&mut r, &mut q, &mut v, i, hi);
        let lo = if lo == i { hi } else { lo };
        permute(&mut r, &mut q, &mut v, i + 1, lo);

        let d1 = r.at(i, i);
        let d2 = r.at(i + 1, i + 1);
        let (c, s) = equalizing_rotation(d1, d2, sigma);
        // Right rotation on rows above the block; the block itself is written analytically.
        r.rotate_cols(i, i, [c, -s, s, c]);
        r.set(i, i, sigma);
        r.set(i, i + 1, s * c * (d2 * d2 - d1 * d1) / sigma);
        r.set(i + 1, i, T::zero());
        r.set(i + 1, i + 1, d1 * d2 / sigma);
        v.rotate_cols(i, k, [c, -s, s, c]);
        let inv = T::one() / sigma;
        q.rotate_cols(i, k, [c * d1 * inv, -s * d2 * inv, s * d2 * inv, c * d1 * inv]);
    }

    Ok(GmdResult { v: v.into_cmatrix(), q: q.into_cmatrix(), r: r.into_cmatrix() })
}

/// Symmetric permutation of indices `i`, `j` in `r`, mirrored on the columns of `q` and `v`.
fn permute<T: Real>(r: &mut Dense<T>, q: &mut Dense<T>, v: &mut Dense<T>, i: usize, j: usize) {
    if i == j {
        return;
    }
    r.swap_rows(i, j);
    r.swap_cols(i, j);
    q.swap_cols(i, j);
    v.swap_cols(i, j);
}
