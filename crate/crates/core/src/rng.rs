//! Deterministic random streams.
//!
//! Every random draw in a campaign is keyed by `(master seed, index, ...)`
//! rather than by the order in which worker threads happen to run, so results
//! do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::CMatrix;
use crate::scalar::{cx, Cx, Real};

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p.wrapping_add(0x632b_e59b_d9b4_e019))))
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}

/// Circularly-symmetric complex Gaussian with unit variance
/// (each component `N(0, 1/2)`).
#[inline]
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Cx<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    cx(T::lit(re * s), T::lit(im * s))
}

pub fn complex_gaussian_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix<T> {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Isotropically distributed `rows × cols` matrix with orthonormal columns
/// (Gaussian draw followed by Gram–Schmidt).
pub fn random_stiefel<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix<T> {
    loop {
        let g: CMatrix<T> = complex_gaussian_matrix(rng, rows, cols);
        if let Some(q) = g.orthonormalize_columns() {
            return q;
        }
    }
}
