//! Receiver-side codebook selection, the ordering-feedback baselines and
//! Monte-Carlo distortion estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{eig_basis, ensemble_channel, ChannelMatrix, SystemConfig};
use crate::codebook::{permutation_rank, selection_matrix, Codebook, Metric};
use crate::error::{Error, Result};
use crate::objectives::{eval_objective, ObjectiveKind};
use crate::scalar::Real;
use crate::zfdfe::{linear_zf_analysis, mse_analysis, Precoder};

/// Receiver structure the selection metric is evaluated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Receiver {
    ZfDfe,
    LinearZf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult<T: Real> {
    pub index: usize,
    pub log_mse: Vec<T>,
    pub objective_value: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_entry_values: Option<Vec<T>>,
}

fn log_mse_for<T: Real>(channel: &ChannelMatrix<T>, precoder: &Precoder<T>, receiver: Receiver) -> Result<Option<Vec<T>>> {
    let res = match receiver {
        Receiver::ZfDfe => mse_analysis(channel, precoder).map(|a| a.log_mse),
        Receiver::LinearZf => linear_zf_analysis(channel, precoder).map(|a| a.log_mse),
    };
    match res {
        Ok(l) => Ok(Some(l)),
        Err(Error::RankDeficient(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Picks the entry minimizing `kind` for the zero-forcing DFE.
pub fn select_precoder<T: Real>(channel: &ChannelMatrix<T>, cb: &Codebook, kind: ObjectiveKind) -> Result<SelectionResult<T>> {
    select_precoder_with(channel, cb, kind, Receiver::ZfDfe, false)
}

/// Full codebook scan. Rank-deficient entries score `+∞`; exact ties go to
/// the lowest index.
pub fn select_precoder_with<T: Real>(
    channel: &ChannelMatrix<T>,
    cb: &Codebook,
    kind: ObjectiveKind,
    receiver: Receiver,
    keep_values: bool,
) -> Result<SelectionResult<T>> {
    let cfg = channel.config();
    if cb.nt() != cfg.nt || cb.k() != cfg.k {
        return Err(Error::ShapeMismatch(format!(
            "codebook is {}x{}, system expects {}x{}",
            cb.nt(),
            cb.k(),
            cfg.nt,
            cfg.k
        )));
    }
    let mut values = keep_values.then(|| Vec::with_capacity(cb.len()));
    let mut best: Option<(usize, T, Vec<T>)> = None;
    for (j, entry) in cb.entries().iter().enumerate() {
        let pre = entry.cast::<T>();
        let (value, l) = match log_mse_for(channel, &pre, receiver)? {
            Some(l) => {
                let v = eval_objective(kind, &l);
                (if v.is_nan() { T::infinity() } else { v }, Some(l))
            }
            None => (T::infinity(), None),
        };
        if let Some(vs) = values.as_mut() {
            vs.push(value);
        }
        if let Some(l) = l {
            if value < T::infinity() && best.as_ref().is_none_or(|(_, b, _)| value < *b) {
                best = Some((j, value, l));
            }
        }
    }
    let (index, objective_value, log_mse) = best.ok_or(Error::AllInfeasible)?;
    Ok(SelectionResult { index, log_mse, objective_value, per_entry_values: values })
}

fn column_norms<T: Real>(channel: &ChannelMatrix<T>) -> Vec<T> {
    let h = channel.h();
    (0..h.cols()).map(|c| h.column(c).iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()).collect()
}

fn check_k<T: Real>(channel: &ChannelMatrix<T>, k: usize) -> Result<()> {
    let nt = channel.config().nt;
    if k == 0 || k > nt {
        return Err(Error::Domain(format!("need 1 <= k <= nt, got k={k}, nt={nt}")));
    }
    Ok(())
}

/// Columns of `H` with the largest norms, by decreasing norm (ties to the
/// lower column index).
pub fn norm_order<T: Real>(channel: &ChannelMatrix<T>, k: usize) -> Vec<usize> {
    let norms = column_norms(channel);
    let mut idx: Vec<usize> = (0..norms.len()).collect();
    idx.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Greedy sorted-QR pick sequence: each step takes the remaining column with
/// the largest component orthogonal to the columns already taken.
pub fn greedy_pick_order<T: Real>(channel: &ChannelMatrix<T>, k: usize) -> Vec<usize> {
    let h = channel.h();
    let nt = h.cols();
    let mut residual: Vec<_> = (0..nt).map(|c| h.column(c)).collect();
    let mut taken = vec![false; nt];
    let mut order = Vec::with_capacity(k);
    for _ in 0..k {
        let mut pick = usize::MAX;
        let mut best = T::neg_infinity();
        for c in 0..nt {
            if taken[c] {
                continue;
            }
            let e: T = residual[c].iter().map(|z| z.norm_sqr()).sum();
            if e > best {
                best = e;
                pick = c;
            }
        }
        taken[pick] = true;
        order.push(pick);
        let q = residual[pick].clone();
        let qn: T = q.iter().map(|z| z.norm_sqr()).sum();
        if qn > T::zero() {
            for c in 0..nt {
                if taken[c] {
                    continue;
                }
                let proj = q.iter().zip(&residual[c]).fold(crate::scalar::Cx::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b) / qn;
                for (r, qv) in residual[c].iter_mut().zip(&q) {
                    *r = *r - *qv * proj;
                }
            }
        }
    }
    order
}

fn ordering_result<T: Real>(channel: &ChannelMatrix<T>, tuple: &[usize], kind: ObjectiveKind) -> SelectionResult<T> {
    let nt = channel.config().nt;
    let pre = Precoder::normalized(selection_matrix::<T>(nt, tuple)).expect("selection matrices are orthonormal");
    let (log_mse, value) = match mse_analysis(channel, &pre) {
        Ok(a) => {
            let v = eval_objective(kind, &a.log_mse);
            (a.log_mse, v)
        }
        Err(_) => (vec![T::infinity(); tuple.len()], T::infinity()),
    };
    SelectionResult { index: permutation_rank(nt, tuple), log_mse, objective_value: value, per_entry_values: None }
}

/// Norm-ordering baseline: precoder column `j` selects the `j`-th strongest
/// channel column. An infinite objective marks a rank-deficient choice.
pub fn select_ordering_norm<T: Real>(channel: &ChannelMatrix<T>, k: usize, kind: ObjectiveKind) -> Result<SelectionResult<T>> {
    check_k(channel, k)?;
    Ok(ordering_result(channel, &norm_order(channel, k), kind))
}

/// Greedy-ordering baseline. The stream detected last sees no residual
/// interference, so the first pick lands in the last precoder column, the
/// second pick in the one before it, and so on; each stream's SNR is then the
/// projected norm its pick maximized.
pub fn select_ordering_greedy<T: Real>(channel: &ChannelMatrix<T>, k: usize, kind: ObjectiveKind) -> Result<SelectionResult<T>> {
    check_k(channel, k)?;
    let mut tuple = greedy_pick_order(channel, k);
    tuple.reverse();
    Ok(ordering_result(channel, &tuple, kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistortionKind {
    /// Loss in the minimum per-stream SNR.
    MinSnrLoss,
    /// Loss in `det(P̄ᴴHᴴHP̄) / σ²`.
    DetLoss,
}

impl std::str::FromStr for DistortionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-snr-loss" | "min-snr" => Ok(Self::MinSnrLoss),
            "det-loss" | "det" => Ok(Self::DetLoss),
            other => Err(Error::Format(format!("unknown distortion kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionEstimate {
    pub mean_gap: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Channels dropped because they were rank deficient.
    pub skipped: usize,
    pub kind: DistortionKind,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn distortion_sample(cb: &Codebook, kind: DistortionKind, channel: &ChannelMatrix<f64>) -> Result<Option<f64>> {
    let cfg = channel.config();
    let k = cfg.k;
    let basis = match eig_basis(channel, k) {
        Ok(b) => b,
        Err(Error::RankDeficient(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let det_lambda: f64 = basis.lambda1.iter().product();
    let s2 = cfg.sigma2_n;
    match kind {
        DistortionKind::MinSnrLoss => {
            let opt = det_lambda.powf(1.0 / k as f64) * cfg.p_total / (k as f64 * s2);
            let mut best = 0.0f64;
            for e in cb.entries() {
                if let Some(l) = log_mse_for(channel, e, Receiver::ZfDfe)? {
                    let min_snr = l.iter().map(|x| (-x).exp()).fold(f64::INFINITY, f64::min);
                    best = best.max(min_snr);
                }
            }
            Ok(Some(opt - best))
        }
        DistortionKind::DetLoss => {
            let mut best = 0.0f64;
            for e in cb.entries() {
                let hp = channel.h() * e.matrix();
                best = best.max(hp.adj_mul(&hp).det().re);
            }
            Ok(Some((det_lambda - best) / s2))
        }
    }
}

/// Distortion of `cb` averaged over `n_samples` Rayleigh channels drawn from
/// the ensemble keyed by `seed`.
pub fn estimate_distortion(
    cb: &Codebook,
    kind: DistortionKind,
    config: &SystemConfig,
    n_samples: usize,
    seed: u64,
) -> Result<DistortionEstimate> {
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be at least 1".into()));
    }
    let channels: Vec<ChannelMatrix<f64>> = (0..n_samples as u64).map(|i| ensemble_channel(config, seed, i)).collect();
    estimate_distortion_over(cb, kind, &channels)
}

/// Same estimate over an explicit channel set.
pub fn estimate_distortion_over(cb: &Codebook, kind: DistortionKind, channels: &[ChannelMatrix<f64>]) -> Result<DistortionEstimate> {
    let samples: Vec<Option<f64>> = channels
        .par_iter()
        .map(|ch| distortion_sample(cb, kind, ch))
        .collect::<Result<_>>()?;
    let kept: Vec<f64> = samples.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::AllInfeasible);
    }
    let (mean_gap, std_error) = mean_and_se(&kept);
    Ok(DistortionEstimate { mean_gap, std_error, n_samples: kept.len(), skipped: samples.len() - kept.len(), kind })
}

/// Channel moments entering the distortion bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundMoments {
    /// `E{(det Λ_H1)^{1/k}}`
    pub geo_mean_lambda: f64,
    /// `E{σ_K²(H)}`
    pub sigma_k_sq: f64,
    /// `E{det Λ_H1}`
    pub det_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionBound {
    pub value: f64,
    pub std_error: f64,
    /// Packing distance used: proj2 for the min-SNR bound, Fubini–Study for the determinant bound.
    pub distance: f64,
    pub density: f64,
    pub moments: BoundMoments,
    pub n_samples: usize,
}

/// Right-hand side of the distortion bound for given moments.
///
/// The min-SNR bound carries the `p_total / k` power factor so that it bounds
/// [`DistortionKind::MinSnrLoss`] as estimated here; for `p_total = k` it is
/// `(E{(det Λ)^{1/k}} − E{σ_K²} D (1 − d²/4)) / σ²`.
pub fn distortion_bound_from_moments(kind: DistortionKind, m: &BoundMoments, distance: f64, density: f64, config: &SystemConfig) -> f64 {
    let s2 = config.sigma2_n;
    match kind {
        DistortionKind::MinSnrLoss => {
            let scale = config.p_total / config.k as f64;
            scale * (m.geo_mean_lambda - m.sigma_k_sq * density * (1.0 - distance * distance / 4.0)) / s2
        }
        DistortionKind::DetLoss => m.det_lambda * (1.0 - density * (distance / 2.0).cos().powi(2)) / s2,
    }
}

/// Monte-Carlo evaluation of the distortion upper bound for `cb`.
pub fn evaluate_distortion_bound(
    cb: &Codebook,
    kind: DistortionKind,
    config: &SystemConfig,
    density: Option<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<DistortionBound> {
    let density = density.ok_or(Error::MissingDensity)?;
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Domain(format!("density must lie in (0, 1], got {density}")));
    }
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be at least 1".into()));
    }
    let distance = packing_distance(cb, kind)?;
    let k = config.k;
    let rows: Vec<Option<[f64; 3]>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let ch: ChannelMatrix<f64> = ensemble_channel(config, seed, i);
            let gram = ch.h().adj_mul(ch.h()).hermitian_part();
            let eig = gram.hermitian_eigenvalues();
            let top: f64 = eig[..k].iter().product();
            if !(eig[k - 1] > 0.0) {
                return None;
            }
            Some([top.powf(1.0 / k as f64), eig[k - 1], top])
        })
        .collect();
    let kept: Vec<[f64; 3]> = rows.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::AllInfeasible);
    }
    let col = |i: usize| kept.iter().map(|r| r[i]).collect::<Vec<_>>();
    let moments = BoundMoments {
        geo_mean_lambda: mean_and_se(&col(0)).0,
        sigma_k_sq: mean_and_se(&col(1)).0,
        det_lambda: mean_and_se(&col(2)).0,
    };
    let per_sample: Vec<f64> = kept
        .iter()
        .map(|r| {
            let m = BoundMoments { geo_mean_lambda: r[0], sigma_k_sq: r[1], det_lambda: r[2] };
            distortion_bound_from_moments(kind, &m, distance, density, config)
        })
        .collect();
    let (value, std_error) = mean_and_se(&per_sample);
    Ok(DistortionBound { value, std_error, distance, density, moments, n_samples: kept.len() })
}

/// Minimum pairwise distance in the metric the bound of `kind` is stated in.
pub fn packing_distance(cb: &Codebook, kind: DistortionKind) -> Result<f64> {
    let metric = match kind {
        DistortionKind::MinSnrLoss => Metric::Proj2,
        DistortionKind::DetLoss => Metric::FubiniStudy,
    };
    if cb.metric() == metric {
        if cb.len() < 2 {
            return Err(Error::TooFewEntries(cb.len()));
        }
        return Ok(cb.min_distance());
    }
    crate::codebook::min_pairwise_distance(cb, metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_channel;
    use crate::codebook::{build_grassmann_codebook, build_permutation_codebook, permutation_tuples, CodebookKind};
    use crate::linalg::CMatrix;
    use crate::rng;
    use crate::zfdfe::optimal_normalized_precoder;

    fn config(nt: usize, nr: usize, k: usize) -> SystemConfig {
        SystemConfig::new(nt, nr, k, k as f64, 0.1).unwrap()
    }

    fn random_codebook(nt: usize, k: usize, n: usize, seed: u64) -> Vec<Precoder<f64>> {
        let mut r = rng::stream(seed, &[]);
        (0..n)
            .map(|_| {
                let g: CMatrix<f64> = rng::complex_gaussian_matrix(&mut r, nt, k);
                Precoder::normalized(g.orthonormalize_columns().unwrap()).unwrap()
            })
            .collect()
    }

    #[test]
    fn single_entry_codebook() {
        let cfg = config(4, 4, 2);
        let ch: ChannelMatrix<f64> = generate_channel(&cfg, 1);
        let cb = Codebook::new(random_codebook(4, 2, 1, 2), CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
        assert_eq!(select_precoder(&ch, &cb, ObjectiveKind::SumMse).unwrap().index, 0);
    }

    #[test]
    fn planted_optimum_is_recovered() {
        let cfg = config(4, 3, 3);
        for seed in 0..20 {
            let ch: ChannelMatrix<f64> = generate_channel(&cfg, seed);
            let opt = optimal_normalized_precoder(&ch).unwrap();
            let best = eval_objective(ObjectiveKind::SumMse, &mse_analysis(&ch, &opt).unwrap().log_mse);
            let mut entries = random_codebook(4, 3, 7, seed + 100);
            entries.insert((seed % 8) as usize, opt);
            let cb = Codebook::new(entries, CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
            for kind in [ObjectiveKind::SumMse, ObjectiveKind::MaxMse, ObjectiveKind::ProductMse] {
                let want = eval_objective(kind, &mse_analysis(&ch, &cb.entries()[(seed % 8) as usize]).unwrap().log_mse);
                let got = select_precoder(&ch, &cb, kind).unwrap();
                assert!((got.objective_value - want).abs() <= 1e-9 * want.abs().max(1.0), "{kind:?}");
            }
            let got = select_precoder(&ch, &cb, ObjectiveKind::SumMse).unwrap();
            assert!((got.objective_value - best).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_brute_force_scan() {
        let cfg = config(4, 4, 2);
        let cb = Codebook::new(random_codebook(4, 2, 16, 3), CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
        for seed in 0..30 {
            let ch: ChannelMatrix<f64> = generate_channel(&cfg, seed);
            for kind in ObjectiveKind::ALL_16QAM {
                let got = select_precoder_with(&ch, &cb, kind, Receiver::ZfDfe, true).unwrap();
                // Recompute N = σ²(PᴴHᴴHP)⁻¹ for every entry through the 2×2 closed form.
                let mut best = (usize::MAX, f64::INFINITY);
                for (j, e) in cb.entries().iter().enumerate() {
                    let p = e.matrix().scale((cfg.p_total / 2.0).sqrt());
                    let hp = ch.h() * &p;
                    let m = hp.adj_mul(&hp);
                    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
                    let n11 = cfg.sigma2_n * m[(1, 1)].re / det;
                    let n22 = cfg.sigma2_n * m[(0, 0)].re / det;
                    let n21_sq = (cfg.sigma2_n * m[(1, 0)].norm() / det).powi(2);
                    let l11 = n11;
                    let l22 = n22 - n21_sq / n11;
                    let v = eval_objective(kind, &[l11.ln(), l22.ln()]);
                    let stored = got.per_entry_values.as_ref().unwrap()[j];
                    assert!((v - stored).abs() <= 1e-9 * v.abs().max(1.0));
                    if v < best.1 {
                        best = (j, v);
                    }
                }
                assert_eq!(got.index, best.0, "{kind:?} seed {seed}");
                let min = got.per_entry_values.as_ref().unwrap().iter().cloned().fold(f64::INFINITY, f64::min);
                assert_eq!(got.objective_value, min);
            }
        }
    }

    #[test]
    fn infeasible_entries_score_infinity() {
        // Rank-one channel in C^{2x2}: entries spanning its null space are infeasible.
        let cfg = SystemConfig::new(2, 2, 1, 1.0, 1.0).unwrap();
        let h = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let ch = ChannelMatrix::new(h, cfg).unwrap();
        let e1 = Precoder::normalized(selection_matrix(2, &[0])).unwrap();
        let e2 = Precoder::normalized(selection_matrix(2, &[1])).unwrap();
        let cb = Codebook::new(vec![e2.clone(), e1], CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
        let got = select_precoder_with(&ch, &cb, ObjectiveKind::SumMse, Receiver::ZfDfe, true).unwrap();
        assert_eq!(got.index, 1);
        assert_eq!(got.per_entry_values.unwrap()[0], f64::INFINITY);
        let only_bad = Codebook::new(vec![e2], CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
        assert!(matches!(select_precoder(&ch, &only_bad, ObjectiveKind::SumMse), Err(Error::AllInfeasible)));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let cfg = config(3, 3, 1);
        let ch: ChannelMatrix<f64> = generate_channel(&cfg, 8);
        let e = random_codebook(3, 1, 1, 4).remove(0);
        let cb = Codebook::new(vec![e.clone(), e.clone(), e], CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
        assert_eq!(select_precoder(&ch, &cb, ObjectiveKind::SumMse).unwrap().index, 0);
    }

    #[test]
    fn norm_ordering_examples() {
        let cfg = SystemConfig::new(3, 3, 2, 2.0, 1.0).unwrap();
        let h = CMatrix::from_real(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let ch = ChannelMatrix::new(h, cfg).unwrap();
        assert_eq!(norm_order(&ch, 2), vec![0, 2]);
        let r = select_ordering_norm(&ch, 2, ObjectiveKind::SumMse).unwrap();
        assert_eq!(permutation_tuples(3, 2)[r.index], vec![0, 2]);

        let cfg4 = config(4, 4, 4);
        let eye = ChannelMatrix::new(CMatrix::<f64>::identity(4), cfg4).unwrap();
        assert_eq!(select_ordering_norm(&eye, 4, ObjectiveKind::SumMse).unwrap().index, 0);
        assert_eq!(select_ordering_greedy(&eye, 4, ObjectiveKind::SumMse).unwrap().index, permutation_rank(4, &[3, 2, 1, 0]));
        assert_eq!(greedy_pick_order(&eye, 4), vec![0, 1, 2, 3]);
    }

    #[test]
    fn norm_ordering_matches_exhaustive_scan() {
        let cfg = config(4, 3, 3);
        for seed in 0..50 {
            let ch: ChannelMatrix<f64> = generate_channel(&cfg, seed);
            let norms = column_norms(&ch);
            let tuples = permutation_tuples(4, 3);
            let mut best = 0;
            for (i, t) in tuples.iter().enumerate() {
                let cur: Vec<f64> = t.iter().map(|&c| norms[c]).collect();
                let inc: Vec<f64> = tuples[best].iter().map(|&c| norms[c]).collect();
                if cur.partial_cmp(&inc) == Some(std::cmp::Ordering::Greater) {
                    best = i;
                }
            }
            assert_eq!(select_ordering_norm(&ch, 3, ObjectiveKind::SumMse).unwrap().index, best);
        }
    }

    #[test]
    fn greedy_tie_rule() {
        // columns: a, a, b with b orthogonal and larger
        let cfg = SystemConfig::new(3, 3, 2, 2.0, 1.0).unwrap();
        let h = CMatrix::from_real(3, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        let ch = ChannelMatrix::new(h, cfg).unwrap();
        assert_eq!(greedy_pick_order(&ch, 2), vec![2, 0]);
        let r = select_ordering_greedy(&ch, 2, ObjectiveKind::SumMse).unwrap();
        assert_eq!(permutation_tuples(3, 2)[r.index], vec![0, 2]);
    }

    /// Independent greedy: explicit projector `I − QQᴴ` rebuilt from scratch each step.
    fn greedy_oracle(h: &CMatrix<f64>, k: usize) -> Vec<usize> {
        let (m, n) = h.shape();
        let mut chosen: Vec<usize> = Vec::new();
        for _ in 0..k {
            let q = if chosen.is_empty() {
                None
            } else {
                let sub = CMatrix::from_fn(m, chosen.len(), |r, c| h[(r, chosen[c])]);
                Some(sub.orthonormalize_columns().unwrap())
            };
            let mut best = (usize::MAX, -1.0);
            for c in 0..n {
                if chosen.contains(&c) {
                    continue;
                }
                let col = CMatrix::from_vec(m, 1, h.column(c));
                let resid = match &q {
                    None => col,
                    Some(q) => &col - &(q * &q.adj_mul(&col)),
                };
                let e = resid.frob_norm();
                if e > best.1 + 1e-12 {
                    best = (c, e);
                }
            }
            chosen.push(best.0);
        }
        chosen
    }

    #[test]
    fn greedy_matches_oracle() {
        let cfg = config(4, 4, 3);
        for seed in 0..100 {
            let ch: ChannelMatrix<f64> = generate_channel(&cfg, seed);
            assert_eq!(greedy_pick_order(&ch, 3), greedy_oracle(ch.h(), 3), "seed {seed}");
        }
    }

    #[test]
    fn greedy_last_stream_snr_is_strongest_column() {
        let cfg = config(4, 4, 3);
        for seed in 0..20 {
            let ch: ChannelMatrix<f64> = generate_channel(&cfg, seed);
            let r = select_ordering_greedy(&ch, 3, ObjectiveKind::SumMse).unwrap();
            let first = greedy_pick_order(&ch, 3)[0];
            let norm2 = column_norms(&ch)[first].powi(2);
            let snr_last = (-r.log_mse[2]).exp();
            let want = norm2 * cfg.p_total / 3.0 / cfg.sigma2_n;
            assert!((snr_last - want).abs() < 1e-9 * want);
        }
    }

    #[test]
    fn ordering_indices_point_into_permutation_codebook() {
        let cfg = config(5, 4, 4);
        let cb = build_permutation_codebook(5, 4).unwrap();
        for seed in 0..20 {
            let ch: ChannelMatrix<f64> = generate_channel(&cfg, seed);
            for r in [
                select_ordering_norm(&ch, 4, ObjectiveKind::SumMse).unwrap(),
                select_ordering_greedy(&ch, 4, ObjectiveKind::SumMse).unwrap(),
            ] {
                let a = mse_analysis(&ch, &cb.entries()[r.index]).unwrap();
                assert_eq!(a.log_mse, r.log_mse);
            }
        }
    }

    #[test]
    fn planted_distortion_is_zero() {
        let cfg = config(4, 4, 2);
        let ch: ChannelMatrix<f64> = generate_channel(&cfg, 5);
        let mut entries = random_codebook(4, 2, 5, 6);
        entries.push(optimal_normalized_precoder(&ch).unwrap());
        let cb = Codebook::new(entries, CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
        for kind in [DistortionKind::MinSnrLoss, DistortionKind::DetLoss] {
            let est = estimate_distortion_over(&cb, kind, std::slice::from_ref(&ch)).unwrap();
            assert!(est.mean_gap.abs() < 1e-9, "{kind:?}: {}", est.mean_gap);
        }
    }

    #[test]
    fn distortion_is_nonnegative_and_nested() {
        let cfg = config(4, 4, 2);
        let big = random_codebook(4, 2, 16, 7);
        let c1 = Codebook::new(big[..4].to_vec(), CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
        let c2 = Codebook::new(big, CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
        for kind in [DistortionKind::MinSnrLoss, DistortionKind::DetLoss] {
            let e1 = estimate_distortion(&c1, kind, &cfg, 300, 11).unwrap();
            let e2 = estimate_distortion(&c2, kind, &cfg, 300, 11).unwrap();
            assert!(e1.mean_gap >= -3.0 * e1.std_error);
            assert!(e2.mean_gap >= 0.0);
            assert!(e2.mean_gap <= e1.mean_gap);
            assert_eq!(e1.n_samples, 300);
        }
    }

    #[test]
    fn bound_limits() {
        let cfg = SystemConfig::new(4, 4, 2, 2.0, 0.5).unwrap();
        let m = BoundMoments { geo_mean_lambda: 3.0, sigma_k_sq: 1.2, det_lambda: 7.0 };
        let v = distortion_bound_from_moments(DistortionKind::MinSnrLoss, &m, 0.0, 1.0, &cfg);
        assert!((v - (3.0 / 0.5 - 1.2 / 0.5)).abs() < 1e-12);
        let v = distortion_bound_from_moments(DistortionKind::DetLoss, &m, std::f64::consts::PI, 1.0, &cfg);
        assert!((v - 7.0 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn bound_depends_on_distance_through_density() {
        // At a fixed density the right-hand side grows with d; it falls only
        // when the density grows with d, as it does for a fixed codebook size.
        let cfg = config(4, 4, 2);
        let m = BoundMoments { geo_mean_lambda: 4.0, sigma_k_sq: 1.0, det_lambda: 9.0 };
        let f = |d: f64, dens: f64| distortion_bound_from_moments(DistortionKind::MinSnrLoss, &m, d, dens, &cfg);
        assert!(f(0.4, 0.5) <= f(0.8, 0.5));
        assert!(f(0.8, 0.9) <= f(0.4, 0.5));
        let g = |d: f64, dens: f64| distortion_bound_from_moments(DistortionKind::DetLoss, &m, d, dens, &cfg);
        assert!(g(0.4, 0.5) <= g(0.8, 0.5));

        let tight = build_grassmann_codebook(4, 2, 8, Metric::Proj2, 4_000, 1).unwrap();
        let loose = Codebook::new(random_codebook(4, 2, 8, 9), CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
        assert!(tight.min_distance() > loose.min_distance());
        let bt = evaluate_distortion_bound(&tight, DistortionKind::MinSnrLoss, &cfg, Some(0.5), 500, 3).unwrap();
        let bl = evaluate_distortion_bound(&loose, DistortionKind::MinSnrLoss, &cfg, Some(0.5), 500, 3).unwrap();
        assert_eq!(bt.moments, bl.moments);
        assert!(bt.value >= bl.value);
        assert!(bt.std_error > 0.0);
        assert!(matches!(
            evaluate_distortion_bound(&tight, DistortionKind::DetLoss, &cfg, None, 10, 0),
            Err(Error::MissingDensity)
        ));
        let single = Codebook::new(random_codebook(4, 2, 1, 9), CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
        assert!(matches!(
            evaluate_distortion_bound(&single, DistortionKind::MinSnrLoss, &cfg, Some(0.5), 10, 0),
            Err(Error::TooFewEntries(1))
        ));
    }

    #[test]
    fn dfe_beats_linear_on_a_shared_codebook() {
        let cfg = config(5, 4, 4);
        let cb = Codebook::new(random_codebook(5, 4, 16, 12), CodebookKind::Grassmann, Metric::Proj2, 0).unwrap();
        for seed in 0..50 {
            let ch: ChannelMatrix<f64> = generate_channel(&cfg, seed);
            for kind in [ObjectiveKind::SumMse, ObjectiveKind::MaxMse, ObjectiveKind::ProductMse, ObjectiveKind::AvgBer(16)] {
                let d = select_precoder_with(&ch, &cb, kind, Receiver::ZfDfe, false).unwrap();
                let l = select_precoder_with(&ch, &cb, kind, Receiver::LinearZf, false).unwrap();
                assert!(d.objective_value <= l.objective_value + 1e-12);
            }
        }
    }
}
