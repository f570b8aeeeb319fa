//! Zero-forcing DFE transceiver design.
//!
//! For a precoder `P` with `rank(HP) = K`, the zero-forcing receiver uses
//! `G = C·(HP)†` and `B = C − I`, and its error covariance is `C·N·Cᴴ` with
//! `N = σ²(PᴴHᴴHP)⁻¹`. Choosing `C = Diag(L₁₁..L_KK)·L⁻¹` from the Cholesky
//! factor `N = L·Lᴴ` makes the errors uncorrelated with per-stream MSE
//! `L_ii²`. The optimal precoder for every Schur-convex objective is
//! `√(P_total/K)·U₁·V` where `V` equalizes the diagonal of `L`.

use crate::channel::{eig_basis, ChannelMatrix, SystemConfig};
use crate::error::{Error, Result};
use crate::gmd::equal_diag_rotation;
use crate::linalg::CMatrix;
use crate::objectives::{eval_objective, ObjectiveKind};
use crate::scalar::{cx, Real};

/// Smallest admissible `σ_min(HP) / σ_max(HP)`.
pub const ZF_RANK_TOL: f64 = 1e-10;
/// Cholesky pivots at or below `CHOL_TOL · trace` are treated as singular.
pub const CHOL_TOL: f64 = 1e-14;
/// Tolerance on `PᴴP = I` for normalized precoders.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Transmit precoder, either normalized (`P̄ᴴP̄ = I`) or power-scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder<T: Real> {
    p: CMatrix<T>,
    normalized: bool,
}

impl<T: Real> Precoder<T> {
    /// Wraps a matrix with orthonormal columns.
    pub fn normalized(p: CMatrix<T>) -> Result<Self> {
        if p.cols() == 0 || p.cols() > p.rows() {
            return Err(Error::ShapeMismatch(format!("precoder must be tall, got {}x{}", p.rows(), p.cols())));
        }
        let err = p.orthonormality_error();
        if !(err <= T::tol(ORTHONORMAL_TOL)) {
            return Err(Error::Domain(format!("precoder columns are not orthonormal (error {err})")));
        }
        Ok(Self { p, normalized: true })
    }

    /// Wraps a power-scaled matrix, enforcing `tr(PᴴP) ≤ p_total`.
    pub fn power_scaled(p: CMatrix<T>, p_total: f64) -> Result<Self> {
        if p.cols() == 0 {
            return Err(Error::ShapeMismatch("precoder has no columns".into()));
        }
        let power = p.frob_norm().powi(2);
        if !(power <= T::lit(p_total) + T::tol(1e-9)) {
            return Err(Error::Domain(format!("precoder power {power} exceeds budget {p_total}")));
        }
        Ok(Self { p, normalized: false })
    }

    /// Same precoder in another scalar type.
    pub fn cast<U: Real>(&self) -> Precoder<U> {
        Precoder { p: self.p.cast(), normalized: self.normalized }
    }

    pub(crate) fn normalized_unchecked(p: CMatrix<T>) -> Self {
        Self { p, normalized: true }
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.p
    }

    #[inline]
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn nt(&self) -> usize {
        self.p.rows()
    }

    pub fn k(&self) -> usize {
        self.p.cols()
    }

    /// The matrix actually transmitted under `config`: normalized precoders are
    /// scaled by `√(p_total / k)`, power-scaled ones are used as is.
    pub fn effective(&self, config: &SystemConfig) -> CMatrix<T> {
        if self.normalized {
            self.p.scale((T::lit(config.p_total) / T::from_usize(self.k()).unwrap()).sqrt())
        } else {
            self.p.clone()
        }
    }

    /// Power-scaled copy under `config`.
    pub fn scaled(&self, config: &SystemConfig) -> Self {
        Self { p: self.effective(config), normalized: false }
    }
}

/// Error statistics of the zero-forcing DFE for one channel/precoder pair.
#[derive(Debug, Clone)]
pub struct MseAnalysis<T: Real> {
    /// `N = σ²(PᴴHᴴHP)⁻¹`
    pub n: CMatrix<T>,
    /// Lower Cholesky factor of `N` with positive diagonal.
    pub l_chol: CMatrix<T>,
    /// `ℓ_i = ln L_ii²`
    pub log_mse: Vec<T>,
    /// `1 / L_ii²`
    pub snr: Vec<T>,
    /// Eigenvalues of `N`, non-increasing.
    pub eigs_n: Vec<T>,
}

impl<T: Real> MseAnalysis<T> {
    pub fn ln_det_n(&self) -> T {
        self.log_mse.iter().copied().sum()
    }

    pub fn log_eigs_n(&self) -> Vec<T> {
        self.eigs_n.iter().map(|x| x.ln()).collect()
    }
}

/// Receiver matrices of the zero-forcing DFE.
#[derive(Debug, Clone)]
pub struct DfeDesign<T: Real> {
    /// k × nr feedforward filter.
    pub g: CMatrix<T>,
    /// Strictly lower-triangular feedback.
    pub b: CMatrix<T>,
    /// `I + B`
    pub c: CMatrix<T>,
    pub analysis: MseAnalysis<T>,
}

impl<T: Real> DfeDesign<T> {
    /// `max |G·H·P − B − I|` for the pair the design was built for.
    pub fn zero_forcing_residual(&self, channel: &ChannelMatrix<T>, precoder: &Precoder<T>) -> T {
        let p = precoder.effective(channel.config());
        let ghp = &(&self.g * channel.h()) * &p;
        (&ghp - &self.b).max_abs_diff(&CMatrix::identity(self.b.rows()))
    }
}

/// Intermediate products shared by the DFE and linear analyses.
struct Gram<T: Real> {
    hp: CMatrix<T>,
    /// `(PᴴHᴴHP)⁻¹`
    gram_inv: CMatrix<T>,
    /// Eigenvalues of `PᴴHᴴHP`, non-increasing.
    gram_eigs: Vec<T>,
}

fn gram<T: Real>(channel: &ChannelMatrix<T>, precoder: &Precoder<T>) -> Result<Gram<T>> {
    let cfg = channel.config();
    if precoder.nt() != cfg.nt {
        return Err(Error::ShapeMismatch(format!("precoder has {} rows, channel has {} inputs", precoder.nt(), cfg.nt)));
    }
    let k = precoder.k();
    if k > cfg.nr {
        return Err(Error::RankDeficient(format!("{k} streams cannot be zero-forced with {} receive antennas", cfg.nr)));
    }
    let hp = channel.h() * &precoder.effective(cfg);
    let m = hp.adj_mul(&hp).hermitian_part();
    let gram_eigs = m.hermitian_eigenvalues();
    let (hi, lo) = (gram_eigs[0], gram_eigs[k - 1]);
    if !(lo > T::zero()) || !((lo / hi).sqrt() >= T::tol(ZF_RANK_TOL)) {
        return Err(Error::RankDeficient(format!("sigma_min(HP)/sigma_max(HP) below {ZF_RANK_TOL:e}")));
    }
    let r = m
        .cholesky_lower(T::tol(CHOL_TOL))
        .ok_or_else(|| Error::RankDeficient("Gram matrix PᴴHᴴHP is not positive definite".into()))?;
    let r_inv = r.lower_inverse();
    let gram_inv = r_inv.adj_mul(&r_inv).hermitian_part();
    Ok(Gram { hp, gram_inv, gram_eigs })
}

fn analysis_from_gram<T: Real>(g: &Gram<T>, sigma2: T) -> Result<MseAnalysis<T>> {
    let n = g.gram_inv.scale(sigma2);
    let l_chol = n
        .cholesky_lower(T::tol(CHOL_TOL))
        .ok_or_else(|| Error::RankDeficient("N is not positive definite".into()))?;
    let diag: Vec<T> = l_chol.diag().iter().map(|z| z.re).collect();
    let log_mse = diag.iter().map(|d| (*d * *d).ln()).collect();
    let snr = diag.iter().map(|d| T::one() / (*d * *d)).collect();
    let eigs_n = g.gram_eigs.iter().rev().map(|mu| sigma2 / *mu).collect();
    Ok(MseAnalysis { n, l_chol, log_mse, snr, eigs_n })
}

/// MSE analysis of the zero-forcing DFE for `(channel, precoder)`.
///
/// Normalized precoders are scaled to the configured power first.
pub fn mse_analysis<T: Real>(channel: &ChannelMatrix<T>, precoder: &Precoder<T>) -> Result<MseAnalysis<T>> {
    let g = gram(channel, precoder)?;
    analysis_from_gram(&g, channel.sigma2())
}

/// Per-stream log-MSE of the DFE only; cheaper path used by codebook scans.
pub fn dfe_log_mse<T: Real>(channel: &ChannelMatrix<T>, precoder: &Precoder<T>) -> Result<Vec<T>> {
    mse_analysis(channel, precoder).map(|a| a.log_mse)
}

/// Builds `G`, `B`, `C` for the zero-forcing DFE.
pub fn design_receiver<T: Real>(channel: &ChannelMatrix<T>, precoder: &Precoder<T>) -> Result<DfeDesign<T>> {
    let g = gram(channel, precoder)?;
    let analysis = analysis_from_gram(&g, channel.sigma2())?;
    let k = analysis.l_chol.rows();
    let l_inv = analysis.l_chol.lower_inverse();
    let mut c = CMatrix::from_fn(k, k, |r, col| if col <= r { l_inv[(r, col)] * analysis.l_chol[(r, r)].re } else { cx(T::zero(), T::zero()) });
    for i in 0..k {
        c[(i, i)] = cx(T::one(), T::zero());
    }
    let mut b = c.clone();
    for i in 0..k {
        b[(i, i)] = cx(T::zero(), T::zero());
    }
    // G = C · (PᴴHᴴHP)⁻¹ · (HP)ᴴ
    let pinv = &g.gram_inv * &g.hp.adjoint();
    let g_ff = &c * &pinv;
    Ok(DfeDesign { g: g_ff, b, c, analysis })
}

/// The optimal normalized precoder `P̄ = U₁·V` (orthonormal columns).
pub fn optimal_normalized_precoder<T: Real>(channel: &ChannelMatrix<T>) -> Result<Precoder<T>> {
    let k = channel.config().k;
    let basis = eig_basis(channel, k)?;
    let delta: Vec<T> = basis.lambda1.iter().map(|l| T::one() / l.sqrt()).collect();
    let rot = equal_diag_rotation(&delta)?;
    let pbar = &basis.u1 * &rot.v;
    Ok(Precoder { p: pbar, normalized: true })
}

/// Power-scaled optimal precoder `√(P_total/K)·U₁·V`; every stream of the
/// resulting DFE has the same MSE `det(N)^{1/K}`.
pub fn optimal_precoder<T: Real>(channel: &ChannelMatrix<T>) -> Result<Precoder<T>> {
    Ok(optimal_normalized_precoder(channel)?.scaled(channel.config()))
}

/// Linear zero-forcing receiver statistics (`B = 0`).
#[derive(Debug, Clone)]
pub struct LinearZfAnalysis<T: Real> {
    pub n: CMatrix<T>,
    /// `ln N_ii`
    pub log_mse: Vec<T>,
    /// `1 / N_ii`
    pub snr: Vec<T>,
    /// `ln λ_i(N)`, non-increasing; equals `log_mse` up to order when `N` is diagonal.
    pub eig_log_mse: Vec<T>,
}

/// Linear zero-forcing receiver: filter and statistics.
#[derive(Debug, Clone)]
pub struct LinearZfDesign<T: Real> {
    /// `(HP)†`
    pub g: CMatrix<T>,
    pub analysis: LinearZfAnalysis<T>,
}

fn linear_from_gram<T: Real>(g: &Gram<T>, sigma2: T) -> LinearZfAnalysis<T> {
    let n = g.gram_inv.scale(sigma2);
    let diag: Vec<T> = n.diag().iter().map(|z| z.re).collect();
    LinearZfAnalysis {
        log_mse: diag.iter().map(|d| d.ln()).collect(),
        snr: diag.iter().map(|d| T::one() / *d).collect(),
        eig_log_mse: g.gram_eigs.iter().rev().map(|mu| (sigma2 / *mu).ln()).collect(),
        n,
    }
}

pub fn linear_zf_analysis<T: Real>(channel: &ChannelMatrix<T>, precoder: &Precoder<T>) -> Result<LinearZfAnalysis<T>> {
    let g = gram(channel, precoder)?;
    Ok(linear_from_gram(&g, channel.sigma2()))
}

pub fn design_linear_receiver<T: Real>(channel: &ChannelMatrix<T>, precoder: &Precoder<T>) -> Result<LinearZfDesign<T>> {
    let g = gram(channel, precoder)?;
    let analysis = linear_from_gram(&g, channel.sigma2());
    Ok(LinearZfDesign { g: &g.gram_inv * &g.hp.adjoint(), analysis })
}

/// Unitary DFT matrix of order `k`.
pub fn dft_matrix<T: Real>(k: usize) -> CMatrix<T> {
    let kt = T::from_usize(k).unwrap();
    let norm = T::one() / kt.sqrt();
    CMatrix::from_fn(k, k, |a, b| {
        let ang = -T::lit(2.0) * T::PI() * T::from_usize((a * b) % k).unwrap() / kt;
        cx(ang.cos() * norm, ang.sin() * norm)
    })
}

/// Best linear-ZF design over the equal-power family `√(P_total/K)·U₁·V`
/// with `V ∈ {I, DFT}`: `V = I` diagonalizes `N` (optimal for the product of
/// MSEs), the DFT equalizes its diagonal (favouring max-MSE and BER).
pub fn linear_zf_in_family<T: Real>(
    channel: &ChannelMatrix<T>,
    kind: ObjectiveKind,
) -> Result<(Precoder<T>, LinearZfAnalysis<T>)> {
    let k = channel.config().k;
    let basis = eig_basis(channel, k)?;
    let mut best: Option<(T, Precoder<T>, LinearZfAnalysis<T>)> = None;
    for v in [CMatrix::identity(k), dft_matrix(k)] {
        let pre = Precoder { p: &basis.u1 * &v, normalized: true };
        let an = linear_zf_analysis(channel, &pre)?;
        let val = eval_objective(kind, &an.log_mse);
        if best.as_ref().is_none_or(|(b, _, _)| val < *b) {
            best = Some((val, pre, an));
        }
    }
    let (_, pre, an) = best.expect("family is non-empty");
    Ok((pre.scaled(channel.config()), an))
}
