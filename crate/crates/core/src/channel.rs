//! System configuration, Rayleigh channel draws, and the dominant
//! eigen-basis of `HᴴH` consumed by the optimal precoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng;
use crate::scalar::{Cx, Real};

/// Antenna counts, stream count, power budget and noise level of a link.
///
/// Powers are linear. `k ≤ min(nt, nr)` is enforced at construction (and on
/// deserialization).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct SystemConfig {
    pub nt: usize,
    pub nr: usize,
    pub k: usize,
    pub p_total: f64,
    pub sigma2_n: f64,
}

#[derive(Deserialize)]
struct RawConfig {
    nt: usize,
    nr: usize,
    k: usize,
    p_total: f64,
    sigma2_n: f64,
}

impl TryFrom<RawConfig> for SystemConfig {
    type Error = Error;
    fn try_from(r: RawConfig) -> Result<Self> {
        SystemConfig::new(r.nt, r.nr, r.k, r.p_total, r.sigma2_n)
    }
}

impl SystemConfig {
    pub fn new(nt: usize, nr: usize, k: usize, p_total: f64, sigma2_n: f64) -> Result<Self> {
        if nt == 0 || nr == 0 || k == 0 {
            return Err(Error::InvalidConfig(format!("antenna and stream counts must be >= 1 (nt={nt}, nr={nr}, k={k})")));
        }
        if k > nt.min(nr) {
            return Err(Error::InvalidConfig(format!("k={k} exceeds min(nt={nt}, nr={nr})")));
        }
        if !(p_total > 0.0 && p_total.is_finite()) {
            return Err(Error::InvalidConfig(format!("p_total must be positive and finite, got {p_total}")));
        }
        if !(sigma2_n > 0.0 && sigma2_n.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma2_n must be positive and finite, got {sigma2_n}")));
        }
        Ok(Self { nt, nr, k, p_total, sigma2_n })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Signal-to-noise ratio in dB: total transmit power over total receiver
    /// noise power `nr·σ²`.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.p_total / (self.nr as f64 * self.sigma2_n)).log10()
    }

    /// Same configuration with `σ²` rescaled to hit `snr_db` at fixed power.
    pub fn with_snr_db(&self, snr_db: f64) -> Result<Self> {
        let sigma2 = self.p_total / (self.nr as f64 * 10f64.powf(snr_db / 10.0));
        Self::new(self.nt, self.nr, self.k, self.p_total, sigma2)
    }

    pub fn with_sigma2(&self, sigma2_n: f64) -> Result<Self> {
        Self::new(self.nt, self.nr, self.k, self.p_total, sigma2_n)
    }

    pub fn with_p_total(&self, p_total: f64) -> Result<Self> {
        Self::new(self.nt, self.nr, self.k, p_total, self.sigma2_n)
    }
}

/// A channel realization `H` (nr × nt) together with its link configuration.
#[derive(Debug, Clone)]
pub struct ChannelMatrix<T: Real> {
    h: CMatrix<T>,
    config: SystemConfig,
}

impl<T: Real> ChannelMatrix<T> {
    pub fn new(h: CMatrix<T>, config: SystemConfig) -> Result<Self> {
        if h.shape() != (config.nr, config.nt) {
            return Err(Error::ShapeMismatch(format!(
                "channel is {}x{}, config expects {}x{}",
                h.rows(),
                h.cols(),
                config.nr,
                config.nt
            )));
        }
        if !h.is_finite() {
            return Err(Error::Domain("channel has non-finite entries".into()));
        }
        Ok(Self { h, config })
    }

    #[inline]
    pub fn h(&self) -> &CMatrix<T> {
        &self.h
    }

    #[inline]
    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    /// Same realization under a different noise/power setting.
    pub fn with_config(&self, config: SystemConfig) -> Result<Self> {
        Self::new(self.h.clone(), config)
    }

    pub fn sigma2(&self) -> T {
        T::lit(self.config.sigma2_n)
    }

    pub fn p_total(&self) -> T {
        T::lit(self.config.p_total)
    }
}

/// Dominant `k` eigenpairs of `HᴴH`.
#[derive(Debug, Clone)]
pub struct EigBasis<T: Real> {
    /// nt × k, orthonormal columns; largest-modulus entry of each column is real positive.
    pub u1: CMatrix<T>,
    /// Non-increasing eigenvalues (squared singular values of `H`).
    pub lambda1: Vec<T>,
}

/// Draws an i.i.d. Rayleigh channel: unit-variance circularly-symmetric
/// complex Gaussian entries. Deterministic in `seed`.
pub fn generate_channel<T: Real>(config: &SystemConfig, seed: u64) -> ChannelMatrix<T> {
    let mut r = rng::stream(seed, &[]);
    let h = rng::complex_gaussian_matrix(&mut r, config.nr, config.nt);
    ChannelMatrix { h, config: *config }
}

/// Channel number `index` of the ensemble keyed by `master_seed`.
pub fn ensemble_channel<T: Real>(config: &SystemConfig, master_seed: u64, index: u64) -> ChannelMatrix<T> {
    generate_channel(config, rng::derive_seed(master_seed, &[0xC4A7, index]))
}

/// Relative threshold below which `λ_k / λ_1` declares `HᴴH` rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Top-`k` eigenpairs of `HᴴH`, eigenvalues descending.
pub fn eig_basis<T: Real>(channel: &ChannelMatrix<T>, k: usize) -> Result<EigBasis<T>> {
    let cfg = channel.config();
    if k == 0 || k > cfg.nt.min(cfg.nr) {
        return Err(Error::InvalidConfig(format!("k={k} outside 1..=min(nt, nr)")));
    }
    let gram = channel.h().adj_mul(channel.h());
    let (vals, vecs) = gram.hermitian_eig();
    let top = vals[0];
    if !(top > T::zero()) || !(vals[k - 1] >= T::tol(RANK_TOL) * top) {
        return Err(Error::RankDeficient(format!(
            "lambda_{k} = {} is below {RANK_TOL:e} * lambda_1 = {}",
            vals[k - 1], top
        )));
    }
    let mut u1 = vecs.leading_columns(k);
    fix_column_phases(&mut u1);
    Ok(EigBasis { u1, lambda1: vals[..k].to_vec() })
}

/// Rotates every column so that its largest-modulus entry is real positive.
pub(crate) fn fix_column_phases<T: Real>(m: &mut CMatrix<T>) {
    for c in 0..m.cols() {
        let col = m.column(c);
        let mut best = 0;
        for (i, z) in col.iter().enumerate() {
            if z.norm() > col[best].norm() {
                best = i;
            }
        }
        let pivot = col[best];
        let mag = pivot.norm();
        if mag == T::zero() {
            continue;
        }
        let rot: Cx<T> = pivot.conj() / mag;
        let rotated: Vec<_> = col.iter().map(|&z| z * rot).collect();
        m.set_column(c, &rotated);
        m[(best, c)].im = T::zero();
    }
}
