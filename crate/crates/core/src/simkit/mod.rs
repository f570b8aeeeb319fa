//! Monte-Carlo link simulation: QAM mapping, per-scheme transceiver design,
//! DFE detection with error propagation, and BER / mutual-information
//! campaigns.

mod campaign;
mod qam;

pub use campaign::{
    design_link, mi_per_channel, run_ber_campaign, run_mi_campaign, write_csv, BerCampaign, CampaignKind, CampaignResult, Link,
    PointResult, Scheme, MAX_SKIP_FRACTION,
};
pub use qam::{qam_modulate, qam_slice, Qam};
