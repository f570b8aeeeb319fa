//! Joint transceiver design for MIMO links with a zero-forcing decision
//! feedback equalizer (ZF-DFE).
//!
//! The crate covers the full-CSI design (an equal-diagonal precoder that is
//! optimal for every Schur-convex objective of the per-stream MSEs), limited
//! feedback through Grassmann and permutation codebooks, and a Monte-Carlo
//! link simulator with true error propagation.
//!
//! All numeric kernels are generic over [`Real`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! simulator and the command-line tool use.
//!
//! ```
//! use zfdfe_core::{generate_channel, mse_analysis, optimal_precoder, SystemConfig};
//!
//! let cfg = SystemConfig::new(4, 4, 3, 3.0, 0.1).unwrap();
//! let h = generate_channel::<f64>(&cfg, 7);
//! let a = mse_analysis(&h, &optimal_precoder(&h).unwrap()).unwrap();
//! // every stream ends up with the same MSE
//! assert!((a.log_mse[0] - a.log_mse[2]).abs() < 1e-8);
//! ```

// `!(x <= limit)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codebook;
pub mod error;
pub mod gmd;
pub mod linalg;
pub mod objectives;
pub mod rng;
pub mod scalar;
pub mod selection;
pub mod simkit;
pub mod verify;
pub mod zfdfe;

pub use channel::{eig_basis, ensemble_channel, generate_channel, SystemConfig};
pub use codebook::{
    build_grassmann_codebook, build_permutation_codebook, dist_fs, dist_proj2, min_pairwise_distance, Codebook, CodebookKind, Metric,
};
pub use error::{Error, Result};
pub use gmd::equal_diag_rotation;
pub use objectives::{eval_objective, majorizes, qam_ber, ObjectiveKind};
pub use scalar::{Cx, Real};
pub use selection::{
    estimate_distortion, evaluate_distortion_bound, select_ordering_greedy, select_ordering_norm, select_precoder, DistortionEstimate,
    DistortionKind, Receiver,
};
pub use simkit::{run_ber_campaign, run_mi_campaign, CampaignResult, Scheme};
pub use zfdfe::{design_receiver, linear_zf_analysis, mse_analysis, optimal_normalized_precoder, optimal_precoder};

/// Double-precision complex matrix.
pub type CMatrix = linalg::CMatrix<f64>;
pub type ChannelMatrix = channel::ChannelMatrix<f64>;
pub type EigBasis = channel::EigBasis<f64>;
pub type GmdResult = gmd::GmdResult<f64>;
pub type Precoder = zfdfe::Precoder<f64>;
pub type MseAnalysis = zfdfe::MseAnalysis<f64>;
pub type DfeDesign = zfdfe::DfeDesign<f64>;
pub type LinearZfAnalysis = zfdfe::LinearZfAnalysis<f64>;
pub type SelectionResult = selection::SelectionResult<f64>;

/// Single-precision variants.
pub mod f32 {
    pub type CMatrix = crate::linalg::CMatrix<f32>;
    pub type ChannelMatrix = crate::channel::ChannelMatrix<f32>;
    pub type Precoder = crate::zfdfe::Precoder<f32>;
    pub type MseAnalysis = crate::zfdfe::MseAnalysis<f32>;
    pub type DfeDesign = crate::zfdfe::DfeDesign<f32>;
}
