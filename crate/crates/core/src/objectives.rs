//! Design objectives written as functions of the per-stream log-MSE vector
//! `ℓ` (with `ℓ_i = ln MSE_i`, `SNR_i = e^{-ℓ_i}`), plus majorization helpers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Absolute slack applied to majorization partial sums.
pub const MAJORIZATION_SLACK: f64 = 1e-9;

/// The objective registry. All tags are non-decreasing in every `ℓ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// Σ MSE_i
    SumMse,
    /// max MSE_i (equivalently, maximize the minimum SNR)
    MaxMse,
    /// Mean uncoded BER over streams for an `m`-ary constellation.
    AvgBer(u32),
    /// −Σ log₂(1 + SNR_i)
    NegMutualInfo,
    /// Σ ℓ_i = ln Π MSE_i
    ProductMse,
}

impl ObjectiveKind {
    /// Default constellation for `avg-ber` when none is given.
    pub const DEFAULT_BER_ORDER: u32 = 16;

    pub const ALL_16QAM: [ObjectiveKind; 5] = [
        ObjectiveKind::SumMse,
        ObjectiveKind::MaxMse,
        ObjectiveKind::AvgBer(16),
        ObjectiveKind::NegMutualInfo,
        ObjectiveKind::ProductMse,
    ];

    /// Whether `g(e^ℓ)` is Schur-convex in `ℓ` over all of `ℝᴷ`.
    ///
    /// `AvgBer` is only Schur-convex on the region where every stream SNR is
    /// at least [`ber_convexity_snr`]; `NegMutualInfo` is a sum of concave
    /// terms and therefore Schur-concave.
    pub fn is_schur_convex(self) -> bool {
        matches!(self, ObjectiveKind::SumMse | ObjectiveKind::MaxMse | ObjectiveKind::ProductMse)
    }

    pub fn cli_name(self) -> String {
        match self {
            ObjectiveKind::SumMse => "sum-mse".into(),
            ObjectiveKind::MaxMse => "max-mse".into(),
            ObjectiveKind::AvgBer(Self::DEFAULT_BER_ORDER) => "avg-ber".into(),
            ObjectiveKind::AvgBer(m) => format!("avg-ber:{m}"),
            ObjectiveKind::NegMutualInfo => "mutual-info".into(),
            ObjectiveKind::ProductMse => "prod-mse".into(),
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.cli_name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    /// Accepts `sum-mse`, `max-mse`, `avg-ber[:M]`, `mutual-info`, `prod-mse`.
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "sum-mse" => ObjectiveKind::SumMse,
            "max-mse" => ObjectiveKind::MaxMse,
            "avg-ber" => ObjectiveKind::AvgBer(Self::DEFAULT_BER_ORDER),
            "mutual-info" => ObjectiveKind::NegMutualInfo,
            "prod-mse" => ObjectiveKind::ProductMse,
            other => {
                let m = other
                    .strip_prefix("avg-ber:")
                    .and_then(|m| m.parse::<u32>().ok())
                    .ok_or_else(|| Error::Domain(format!("unknown objective '{other}'")))?;
                check_order(m)?;
                ObjectiveKind::AvgBer(m)
            }
        };
        Ok(kind)
    }
}

fn check_order(m: u32) -> Result<()> {
    match m {
        2 | 4 | 16 | 64 => Ok(()),
        _ => Err(Error::Domain(format!("unsupported constellation size {m}"))),
    }
}

/// Gaussian tail probability `Q(x) = ½·erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Nearest-neighbour BER approximation for BPSK (`m = 2`) and Gray-coded
/// square `m`-QAM, clipped into `[0, 0.5]`.
pub fn qam_ber(snr: f64, m: u32) -> Result<f64> {
    check_order(m)?;
    if !(snr >= 0.0) {
        return Err(Error::Domain(format!("snr must be non-negative, got {snr}")));
    }
    let p = if m == 2 {
        q_function((2.0 * snr).sqrt())
    } else {
        let mf = m as f64;
        let bits = mf.log2();
        (4.0 / bits) * (1.0 - 1.0 / mf.sqrt()) * q_function((3.0 * snr / (mf - 1.0)).sqrt())
    };
    Ok(p.clamp(0.0, 0.5))
}

/// Per-stream SNR above which the BER term is convex in `ℓ`
/// (`(m-1)/3` for square QAM, `1/2` for BPSK).
pub fn ber_convexity_snr(m: u32) -> f64 {
    if m == 2 {
        0.5
    } else {
        (m as f64 - 1.0) / 3.0
    }
}

/// Evaluates `g(e^ℓ)` for the chosen objective.
pub fn eval_objective<T: Real>(kind: ObjectiveKind, log_mse: &[T]) -> T {
    let k = T::from_usize(log_mse.len()).unwrap();
    match kind {
        ObjectiveKind::SumMse => log_mse.iter().map(|l| l.exp()).sum(),
        ObjectiveKind::MaxMse => log_mse.iter().map(|l| l.exp()).fold(T::neg_infinity(), T::max),
        ObjectiveKind::AvgBer(m) => {
            let total: f64 = log_mse
                .iter()
                .map(|l| qam_ber((-l.as_f64()).exp(), m).unwrap_or(0.5))
                .sum();
            T::lit(total) / k
        }
        ObjectiveKind::NegMutualInfo => -log_mse.iter().map(|l| (-*l).exp().ln_1p() / T::LN_2()).sum::<T>(),
        ObjectiveKind::ProductMse => log_mse.iter().copied().sum(),
    }
}

/// `true` iff `b` majorizes `a` (`a ≺ b`), with absolute slack
/// [`MAJORIZATION_SLACK`] on every partial sum and on the totals.
pub fn majorizes<T: Real>(a: &[T], b: &[T]) -> Result<bool> {
    majorizes_with_slack(a, b, T::lit(MAJORIZATION_SLACK))
}

pub fn majorizes_with_slack<T: Real>(a: &[T], b: &[T], slack: T) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let sorted_desc = |v: &[T]| {
        let mut s = v.to_vec();
        s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
        s
    };
    let (sa, sb) = (sorted_desc(a), sorted_desc(b));
    let (mut pa, mut pb) = (T::zero(), T::zero());
    for j in 0..sa.len() {
        pa = pa + sa[j];
        pb = pb + sb[j];
        if j + 1 < sa.len() && pa > pb + slack {
            return Ok(false);
        }
    }
    Ok((pa - pb).abs() <= slack)
}
