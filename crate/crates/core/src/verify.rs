//! Property suites run by `zfdfe verify`.
//!
//! Each suite draws its own random instances from a seed, evaluates a set of
//! named checks and reports the worst observed value against its tolerance.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{ensemble_channel, ChannelMatrix, SystemConfig};
use crate::codebook::{build_grassmann_codebook, build_permutation_codebook, Codebook, Metric};
use crate::error::{Error, Result};
use crate::gmd::equal_diag_rotation;
use crate::linalg::CMatrix;
use crate::objectives::{majorizes_with_slack, ObjectiveKind, MAJORIZATION_SLACK};
use crate::rng;
use crate::selection::{select_precoder_with, Receiver};
use crate::zfdfe::{design_receiver, mse_analysis, optimal_normalized_precoder, optimal_precoder, Precoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Majorization,
    Gmd,
    ZeroForcing,
    Isotropy,
    DfeVsLinear,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Majorization, Suite::Gmd, Suite::ZeroForcing, Suite::Isotropy, Suite::DfeVsLinear];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Majorization => "majorization",
            Suite::Gmd => "gmd",
            Suite::ZeroForcing => "zero-forcing",
            Suite::Isotropy => "isotropy",
            Suite::DfeVsLinear => "dfe-vs-linear",
        }
    }

    pub fn default_cases(self) -> usize {
        match self {
            Suite::Isotropy => 20_000,
            Suite::DfeVsLinear => 500,
            _ => 1000,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown suite `{s}` (expected one of majorization, gmd, zero-forcing, isotropy, dfe-vs-linear)")))
    }
}

/// One named property with the worst value seen and its limit.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    /// Largest violation measure observed; the check passes when `worst <= limit`.
    pub worst: f64,
    pub limit: f64,
    pub failures: usize,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, values: impl IntoIterator<Item = f64>, limit: f64) -> Self {
        let mut worst = f64::NEG_INFINITY;
        let mut failures = 0;
        for v in values {
            // NaN counts as a failure
            if !(v <= limit) {
                failures += 1;
            }
            if v > worst || v.is_nan() {
                worst = v;
            }
        }
        Self { name: name.to_string(), worst, limit, failures, passed: failures == 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {} ({} cases, seed {})", self.suite, self.cases, self.seed)?;
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "  [{tag}] {:<40} worst {:.3e} (limit {:.1e}, {} failing)", c.name, c.worst, c.limit, c.failures)?;
        }
        Ok(())
    }
}

pub fn run_suite(suite: Suite, cases: Option<usize>, seed: u64) -> Result<SuiteReport> {
    let n = cases.unwrap_or_else(|| suite.default_cases());
    if n == 0 {
        return Err(Error::Domain("a suite needs at least one case".into()));
    }
    let checks = match suite {
        Suite::Majorization => majorization(n, seed)?,
        Suite::Gmd => gmd(n, seed)?,
        Suite::ZeroForcing => zero_forcing(n, seed)?,
        Suite::Isotropy => isotropy(n, seed)?,
        Suite::DfeVsLinear => dfe_vs_linear(n, seed)?,
    };
    Ok(SuiteReport { suite, cases: n, seed, checks })
}

/// Random `(channel, isotropic precoder)` pair; `k` cycles through 2..=4 on a 4×4 link.
fn random_pair(seed: u64, i: usize) -> (ChannelMatrix<f64>, Precoder<f64>) {
    let k = 2 + i % 3;
    let snr = [0.0, 10.0, 20.0][(i / 3) % 3];
    let cfg = SystemConfig::new(4, 4, k, k as f64, 1.0).and_then(|c| c.with_snr_db(snr)).expect("valid config");
    let ch = ensemble_channel(&cfg, seed, i as u64);
    let mut r = rng::stream(seed, &[0x5EED, i as u64]);
    let p = Precoder::normalized(rng::random_stiefel(&mut r, 4, k)).expect("orthonormal draw");
    (ch, p)
}

fn majorization(n: usize, seed: u64) -> Result<Vec<Check>> {
    let rows: Vec<[f64; 4]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (ch, p) = random_pair(seed, i);
            let a = mse_analysis(&ch, &p)?;
            let k = a.log_mse.len();
            let mean = vec![a.ln_det_n() / k as f64; k];
            let lower = majorizes_with_slack(&mean, &a.log_mse, MAJORIZATION_SLACK)?;
            let upper = majorizes_with_slack(&a.log_mse, &a.log_eigs_n(), MAJORIZATION_SLACK)?;
            let llh = (&a.l_chol * &a.l_chol.adjoint()).max_abs_diff(&a.n) / a.n.max_abs();
            let det = (a.ln_det_n() - a.n.det().re.ln()).abs();
            Ok([if lower { 0.0 } else { 1.0 }, if upper { 0.0 } else { 1.0 }, llh, det])
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Check::new("mean vector majorized by log-MSE", rows.iter().map(|r| r[0]), 0.0),
        Check::new("log-MSE majorized by log-eig(N)", rows.iter().map(|r| r[1]), 0.0),
        Check::new("L·Lᴴ = N (relative)", rows.iter().map(|r| r[2]), 1e-9),
        Check::new("sum log-MSE = ln det N", rows.iter().map(|r| r[3]), 1e-9),
    ])
}

fn zero_forcing(n: usize, seed: u64) -> Result<Vec<Check>> {
    let rows: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (ch, p) = random_pair(seed, i);
            let d = design_receiver(&ch, &p)?;
            let cov = &(&d.c * &d.analysis.n) * &d.c.adjoint();
            let want = CMatrix::from_diag(&d.analysis.snr.iter().map(|s| 1.0 / s).collect::<Vec<_>>());
            let k = d.b.rows();
            let mut shape = 0.0f64;
            for r in 0..k {
                shape = shape.max((d.c[(r, r)] - crate::scalar::Cx::new(1.0, 0.0)).norm());
                for c in r..k {
                    shape = shape.max(d.b[(r, c)].norm());
                }
            }
            Ok([d.zero_forcing_residual(&ch, &p), cov.max_abs_diff(&want) / want.max_abs().max(1.0), shape])
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Check::new("|GHP - B - I|max", rows.iter().map(|r| r[0]), 1e-9),
        Check::new("C·N·Cᴴ = Diag(L_ii²)", rows.iter().map(|r| r[1]), 1e-8),
        Check::new("B strictly lower, diag(C) = 1", rows.iter().map(|r| r[2]), 0.0),
    ])
}

fn gmd(n: usize, seed: u64) -> Result<Vec<Check>> {
    let rows: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, &[0x6D, i as u64]);
            let k = r.random_range(1..=8usize);
            // eigenvalues log-uniform over a condition number up to 1e6
            let lambda: Vec<f64> = (0..k).map(|_| 10f64.powf(r.random_range(0.0..6.0))).collect();
            let delta: Vec<f64> = lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
            let g = equal_diag_rotation(&delta)?;
            let diag = g.r_diag();
            let hi = diag.iter().cloned().fold(f64::MIN, f64::max);
            let lo = diag.iter().cloned().fold(f64::MAX, f64::min);
            let a = CMatrix::from_diag(&delta);
            let scale = delta.iter().cloned().fold(0.0, f64::max);
            let recon = (&a * &g.v).max_abs_diff(&(&g.q * &g.r)) / scale;
            let unit = g.v.orthonormality_error().max(g.q.orthonormality_error());
            Ok([(hi - lo) / hi, recon, unit])
        })
        .collect::<Result<_>>()?;
    let spread: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let k = 2 + i % 3;
            let cfg = SystemConfig::new(4, 4, k, k as f64, 0.1).expect("valid config");
            let ch: ChannelMatrix<f64> = ensemble_channel(&cfg, seed ^ 0xE0, i as u64);
            let a = mse_analysis(&ch, &optimal_precoder(&ch)?)?;
            let hi = a.log_mse.iter().cloned().fold(f64::MIN, f64::max);
            let lo = a.log_mse.iter().cloned().fold(f64::MAX, f64::min);
            Ok(hi - lo)
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Check::new("equal diagonal (relative spread)", rows.iter().map(|r| r[0]), 1e-8),
        Check::new("A·V = Q·R (relative)", rows.iter().map(|r| r[1]), 1e-9),
        Check::new("V, Q unitary", rows.iter().map(|r| r[2]), 1e-9),
        Check::new("optimal precoder log-MSE spread", spread, 1e-8),
    ])
}

fn isotropy(n: usize, seed: u64) -> Result<Vec<Check>> {
    let (nt, k) = (4, 2);
    let cfg = SystemConfig::new(nt, 4, k, k as f64, 1.0).expect("valid config");
    let sum = (0..n)
        .into_par_iter()
        .map(|i| {
            let ch: ChannelMatrix<f64> = ensemble_channel(&cfg, seed, i as u64);
            let p = optimal_normalized_precoder(&ch)?;
            Ok(p.matrix() * &p.matrix().adjoint())
        })
        .collect::<Result<Vec<_>>>()?
        .iter()
        .fold(CMatrix::zeros(nt, nt), |acc, x| &acc + x);
    let mean = sum.scale(1.0 / n as f64);
    let target = CMatrix::identity(nt).scale(k as f64 / nt as f64);
    Ok(vec![Check::new("mean P̄P̄ᴴ = (k/nt)·I", [mean.max_abs_diff(&target)], 0.02)])
}

/// Codebooks shared by the DFE-vs-linear suite.
fn shared_codebooks(seed: u64) -> Result<Vec<Codebook>> {
    Ok(vec![build_grassmann_codebook(5, 4, 64, Metric::Proj2, 5_000, seed)?, build_permutation_codebook(5, 4)?])
}

fn dfe_vs_linear(n: usize, seed: u64) -> Result<Vec<Check>> {
    let cfg = SystemConfig::new(5, 4, 4, 4.0, 1.0).and_then(|c| c.with_snr_db(10.0)).expect("valid config");
    let books = shared_codebooks(seed)?;
    let kinds = [ObjectiveKind::SumMse, ObjectiveKind::MaxMse, ObjectiveKind::ProductMse, ObjectiveKind::AvgBer(16)];
    let gaps: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ch: ChannelMatrix<f64> = ensemble_channel(&cfg, seed, i as u64);
            let mut worst = f64::NEG_INFINITY;
            for cb in &books {
                for kind in kinds {
                    let d = select_precoder_with(&ch, cb, kind, Receiver::ZfDfe, false)?;
                    let l = select_precoder_with(&ch, cb, kind, Receiver::LinearZf, false)?;
                    worst = worst.max(d.objective_value - l.objective_value);
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(vec![Check::new("best DFE objective <= best linear objective", gaps, 1e-12)])
}
