use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::qam::Qam;
use crate::channel::{ensemble_channel, ChannelMatrix, SystemConfig};
use crate::codebook::{selection_matrix, Codebook};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::objectives::ObjectiveKind;
use crate::rng;
use crate::scalar::Cx;
use crate::selection::{greedy_pick_order, norm_order, select_precoder_with, Receiver};
use crate::zfdfe::{design_linear_receiver, design_receiver, linear_zf_in_family, optimal_precoder, Precoder};

/// Campaigns fail when more than this fraction of channel draws is infeasible.
pub const MAX_SKIP_FRACTION: f64 = 1e-3;

const TAG_FRAMES: u64 = 0xF7A3;

/// Transmission scheme under comparison.
#[derive(Debug, Clone)]
pub enum Scheme {
    /// Optimal precoder with full channel knowledge, ZF-DFE receiver.
    PerfectCsiZfDfe,
    /// Codebook precoder chosen by the receiver, ZF-DFE receiver.
    GrassmannZfDfe { codebook: Arc<Codebook>, objective: ObjectiveKind },
    /// Column selection by channel-column norms, ZF-DFE receiver.
    OrderingNormZfDfe,
    /// Column selection by greedy sorted-QR ordering, ZF-DFE receiver.
    OrderingGreedyZfDfe,
    /// Codebook precoder chosen for a linear ZF receiver.
    LinZfGrassmann { codebook: Arc<Codebook>, objective: ObjectiveKind },
    /// Eigenmode precoding with a linear ZF receiver.
    PerfectCsiLinZf { objective: ObjectiveKind },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::PerfectCsiZfDfe => "perfect-csi-zfdfe",
            Scheme::GrassmannZfDfe { .. } => "grassmann-zfdfe",
            Scheme::OrderingNormZfDfe => "ordering-norm-zfdfe",
            Scheme::OrderingGreedyZfDfe => "ordering-greedy-zfdfe",
            Scheme::LinZfGrassmann { .. } => "lin-zf-grassmann",
            Scheme::PerfectCsiLinZf { .. } => "perfect-csi-lin-zf",
        }
    }

    /// Name plus selection objective and codebook size where relevant.
    pub fn label(&self) -> String {
        match self {
            Scheme::GrassmannZfDfe { codebook, objective } | Scheme::LinZfGrassmann { codebook, objective } => {
                format!("{}-{}[{}]", self.name(), codebook.len(), objective)
            }
            Scheme::PerfectCsiLinZf { objective } => format!("{}[{}]", self.name(), objective),
            _ => self.name().to_string(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Scheme::LinZfGrassmann { .. } | Scheme::PerfectCsiLinZf { .. })
    }

    fn check(&self, config: &SystemConfig) -> Result<()> {
        if let Scheme::GrassmannZfDfe { codebook, .. } | Scheme::LinZfGrassmann { codebook, .. } = self {
            if codebook.nt() != config.nt || codebook.k() != config.k {
                return Err(Error::ShapeMismatch(format!(
                    "codebook is {}x{}, system expects {}x{}",
                    codebook.nt(),
                    codebook.k(),
                    config.nt,
                    config.k
                )));
            }
        }
        Ok(())
    }
}

/// Per-channel transceiver: effective channel `H·P`, feedforward `G`,
/// feedback `B` (zero for linear receivers) and per-stream SNRs.
#[derive(Debug, Clone)]
pub struct Link {
    pub hp: CMatrix<f64>,
    pub g: CMatrix<f64>,
    pub b: CMatrix<f64>,
    pub snr: Vec<f64>,
}

impl Link {
    /// Gaussian mutual information `Σ log₂(1 + snr_k)`.
    pub fn mutual_info_bits(&self) -> f64 {
        self.snr.iter().map(|s| s.ln_1p()).sum::<f64>() / std::f64::consts::LN_2
    }
}

fn dfe_link(channel: &ChannelMatrix<f64>, pre: &Precoder<f64>) -> Result<Option<Link>> {
    match design_receiver(channel, pre) {
        Ok(d) => Ok(Some(Link { hp: channel.h() * &pre.effective(channel.config()), g: d.g, b: d.b, snr: d.analysis.snr })),
        Err(Error::RankDeficient(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn linear_link(channel: &ChannelMatrix<f64>, pre: &Precoder<f64>) -> Result<Option<Link>> {
    match design_linear_receiver(channel, pre) {
        Ok(d) => {
            let k = pre.k();
            Ok(Some(Link { hp: channel.h() * &pre.effective(channel.config()), g: d.g, b: CMatrix::zeros(k, k), snr: d.analysis.snr }))
        }
        Err(Error::RankDeficient(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn infeasible<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::RankDeficient(_) | Error::AllInfeasible) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Designs the transceiver `scheme` uses on `channel`; `None` marks an
/// infeasible draw.
pub fn design_link(scheme: &Scheme, channel: &ChannelMatrix<f64>) -> Result<Option<Link>> {
    let cfg = channel.config();
    let k = cfg.k;
    match scheme {
        Scheme::PerfectCsiZfDfe => match infeasible(optimal_precoder(channel))? {
            Some(p) => dfe_link(channel, &p),
            None => Ok(None),
        },
        Scheme::GrassmannZfDfe { codebook, objective } => {
            match infeasible(select_precoder_with(channel, codebook, *objective, Receiver::ZfDfe, false))? {
                Some(sel) => dfe_link(channel, &codebook.entries()[sel.index]),
                None => Ok(None),
            }
        }
        Scheme::OrderingNormZfDfe => {
            let pre = Precoder::normalized(selection_matrix(cfg.nt, &norm_order(channel, k)))?;
            dfe_link(channel, &pre)
        }
        Scheme::OrderingGreedyZfDfe => {
            let mut tuple = greedy_pick_order(channel, k);
            tuple.reverse();
            let pre = Precoder::normalized(selection_matrix(cfg.nt, &tuple))?;
            dfe_link(channel, &pre)
        }
        Scheme::LinZfGrassmann { codebook, objective } => {
            match infeasible(select_precoder_with(channel, codebook, *objective, Receiver::LinearZf, false))? {
                Some(sel) => linear_link(channel, &codebook.entries()[sel.index]),
                None => Ok(None),
            }
        }
        Scheme::PerfectCsiLinZf { objective } => match infeasible(linear_zf_in_family(channel, *objective))? {
            Some((p, _)) => linear_link(channel, &p),
            None => Ok(None),
        },
    }
}

/// Sends `n_frames` random symbol vectors through `link` and returns
/// `(bits, bit_errors)`. Streams are detected in index order; with `genie`
/// the feedback uses the transmitted symbols instead of the decisions.
fn run_frames<R: Rng>(link: &Link, qam: &Qam, sigma2: f64, n_frames: usize, genie: bool, rng: &mut R) -> (u64, u64) {
    let k = link.snr.len();
    let nr = link.hp.rows();
    let m = qam.order();
    let sd = sigma2.sqrt();
    let mut labels = vec![0u32; k];
    let mut sent = vec![Cx::new(0.0, 0.0); k];
    let mut fed = vec![Cx::new(0.0, 0.0); k];
    let mut y = vec![Cx::new(0.0, 0.0); nr];
    let mut errors = 0u64;
    for _ in 0..n_frames {
        for i in 0..k {
            labels[i] = rng.random_range(0..m);
            let (a, b) = qam.levels_of(labels[i]);
            sent[i] = qam.point(a, b);
        }
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = rng::complex_gaussian::<f64, _>(rng) * sd;
            for (i, s) in sent.iter().enumerate() {
                acc += link.hp[(r, i)] * s;
            }
            *yr = acc;
        }
        for i in 0..k {
            let mut u = Cx::new(0.0, 0.0);
            for (r, yr) in y.iter().enumerate() {
                u += link.g[(i, r)] * yr;
            }
            for j in 0..i {
                u -= link.b[(i, j)] * fed[j];
            }
            let (a, b) = qam.slice_indices(u);
            let decided = qam.label(a, b);
            errors += (decided ^ labels[i]).count_ones() as u64;
            fed[i] = if genie { sent[i] } else { qam.point(a, b) };
        }
    }
    (n_frames as u64 * k as u64 * qam.bits_per_symbol() as u64, errors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignKind {
    Ber,
    Mi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    /// `errors / bits`; absent for mutual-information campaigns.
    pub ber: Option<f64>,
    /// Mean Gaussian mutual information over the used channels.
    pub mi_bits: f64,
    pub mi_std_error: f64,
    pub n_channels: usize,
    pub skipped: usize,
}

impl PointResult {
    /// Binomial standard error of the BER estimate.
    pub fn ber_std_error(&self) -> f64 {
        match self.ber {
            Some(p) if self.bits > 0 => (p * (1.0 - p) / self.bits as f64).sqrt(),
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub kind: CampaignKind,
    pub scheme: String,
    pub config: SystemConfig,
    pub master_seed: u64,
    pub genie: bool,
    pub modulation: u32,
    pub n_frames_per_channel: usize,
    pub points: Vec<PointResult>,
}

#[derive(Default)]
struct Acc {
    bits: u64,
    errors: u64,
    mi: Vec<f64>,
    skipped: usize,
}

/// Full description of a BER campaign.
#[derive(Debug, Clone)]
pub struct BerCampaign {
    pub config: SystemConfig,
    pub scheme: Scheme,
    pub snr_db: Vec<f64>,
    pub n_channels: usize,
    pub n_frames_per_channel: usize,
    pub genie: bool,
    pub master_seed: u64,
    pub modulation: u32,
}

impl BerCampaign {
    pub fn run(&self) -> Result<CampaignResult> {
        run(self, CampaignKind::Ber)
    }
}

fn check_skips(skipped: usize, total: usize) -> Result<()> {
    if skipped as f64 > MAX_SKIP_FRACTION * total as f64 {
        return Err(Error::InfeasibleCampaign { skipped, total });
    }
    Ok(())
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run(spec: &BerCampaign, kind: CampaignKind) -> Result<CampaignResult> {
    spec.scheme.check(&spec.config)?;
    let qam = Qam::new(spec.modulation)?;
    if spec.snr_db.is_empty() {
        return Err(Error::Domain("no SNR points".into()));
    }
    if spec.n_channels == 0 {
        return Err(Error::Domain("n_channels must be at least 1".into()));
    }
    let configs: Vec<SystemConfig> = spec.snr_db.iter().map(|&s| spec.config.with_snr_db(s)).collect::<Result<_>>()?;
    let frames = if kind == CampaignKind::Ber { spec.n_frames_per_channel } else { 0 };

    let per_channel: Vec<Vec<Option<(u64, u64, f64)>>> = (0..spec.n_channels)
        .into_par_iter()
        .map(|c| {
            let base: ChannelMatrix<f64> = ensemble_channel(&spec.config, spec.master_seed, c as u64);
            configs
                .iter()
                .enumerate()
                .map(|(i, cfg)| {
                    let ch = base.with_config(*cfg)?;
                    let Some(link) = design_link(&spec.scheme, &ch)? else {
                        return Ok(None);
                    };
                    let (bits, errors) = if frames > 0 {
                        let mut r = rng::stream(spec.master_seed, &[TAG_FRAMES, c as u64, i as u64]);
                        run_frames(&link, &qam, cfg.sigma2_n, frames, spec.genie, &mut r)
                    } else {
                        (0, 0)
                    };
                    Ok(Some((bits, errors, link.mutual_info_bits())))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut acc: Vec<Acc> = (0..configs.len()).map(|_| Acc::default()).collect();
    for row in &per_channel {
        for (a, cell) in acc.iter_mut().zip(row) {
            match cell {
                Some((b, e, mi)) => {
                    a.bits += b;
                    a.errors += e;
                    a.mi.push(*mi);
                }
                None => a.skipped += 1,
            }
        }
    }
    let skipped: usize = acc.iter().map(|a| a.skipped).sum();
    check_skips(skipped, spec.n_channels * configs.len())?;
    let points = spec
        .snr_db
        .iter()
        .zip(acc)
        .map(|(&snr_db, a)| {
            let (mi_bits, mi_std_error) = mean_se(&a.mi);
            PointResult {
                snr_db,
                bits: a.bits,
                errors: a.errors,
                ber: (kind == CampaignKind::Ber && a.bits > 0).then(|| a.errors as f64 / a.bits as f64),
                mi_bits,
                mi_std_error,
                n_channels: a.mi.len(),
                skipped: a.skipped,
            }
        })
        .collect();
    Ok(CampaignResult {
        kind,
        scheme: spec.scheme.label(),
        config: spec.config,
        master_seed: spec.master_seed,
        genie: spec.genie,
        modulation: spec.modulation,
        n_frames_per_channel: frames,
        points,
    })
}

/// BER campaign with 16-QAM. Channel `c` and its frames are seeded from
/// `(master_seed, c)` so every scheme sees the same channels and noise.
pub fn run_ber_campaign(
    config: &SystemConfig,
    scheme: &Scheme,
    snr_db_points: &[f64],
    n_channels: usize,
    n_frames_per_channel: usize,
    genie: bool,
    master_seed: u64,
) -> Result<CampaignResult> {
    BerCampaign {
        config: *config,
        scheme: scheme.clone(),
        snr_db: snr_db_points.to_vec(),
        n_channels,
        n_frames_per_channel,
        genie,
        master_seed,
        modulation: ObjectiveKind::DEFAULT_BER_ORDER,
    }
    .run()
}

/// Average Gaussian mutual information of the scheme's per-stream SNRs.
pub fn run_mi_campaign(config: &SystemConfig, scheme: &Scheme, snr_db_points: &[f64], n_channels: usize, master_seed: u64) -> Result<CampaignResult> {
    let spec = BerCampaign {
        config: *config,
        scheme: scheme.clone(),
        snr_db: snr_db_points.to_vec(),
        n_channels,
        n_frames_per_channel: 0,
        genie: false,
        master_seed,
        modulation: ObjectiveKind::DEFAULT_BER_ORDER,
    };
    run(&spec, CampaignKind::Mi)
}

/// Mutual information of every channel draw at one SNR (`None` when infeasible).
pub fn mi_per_channel(config: &SystemConfig, scheme: &Scheme, snr_db: f64, n_channels: usize, master_seed: u64) -> Result<Vec<Option<f64>>> {
    scheme.check(config)?;
    let cfg = config.with_snr_db(snr_db)?;
    (0..n_channels)
        .into_par_iter()
        .map(|c| {
            let ch: ChannelMatrix<f64> = ensemble_channel(config, master_seed, c as u64).with_config(cfg)?;
            Ok(design_link(scheme, &ch)?.map(|l| l.mutual_info_bits()))
        })
        .collect()
}

#[derive(Serialize)]
struct CsvRow<'a> {
    snr_db: f64,
    scheme: &'a str,
    ber: Option<f64>,
    bits: u64,
    errors: u64,
    mi_bits: f64,
    n_channels: usize,
}

/// Writes campaign rows with columns `snr_db,scheme,ber,bits,errors,mi_bits,n_channels`.
pub fn write_csv<W: Write>(results: &[CampaignResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        for p in &r.points {
            w.serialize(CsvRow {
                snr_db: p.snr_db,
                scheme: &r.scheme,
                ber: p.ber,
                bits: p.bits,
                errors: p.errors,
                mi_bits: p.mi_bits,
                n_channels: p.n_channels,
            })
            .map_err(|e| Error::Format(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}
