//! TOML configuration schemas for the subcommands. Every section is
//! re-serialized into the run manifest, so the structs double as the
//! resolved-configuration record.

use diqsdc_core::channels::ChannelKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelName {
    Ad,
    Dephasing,
}

impl ChannelName {
    pub fn kind(self) -> ChannelKind {
        match self {
            ChannelName::Ad => ChannelKind::AmplitudeDamping,
            ChannelName::Dephasing => ChannelKind::Dephasing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Chsh,
    Qber,
    Capacity,
    LossError,
}

impl Quantity {
    pub fn curves(self) -> &'static [&'static str] {
        match self {
            Quantity::Chsh => &["S1", "S2"],
            Quantity::Qber => &["Q1", "Q2"],
            Quantity::Capacity => &["Cs"],
            Quantity::LossError => &["r_lr", "r_er"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum XAxis {
    GammaT,
    DistanceKm,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub sweep: SweepSection,
}

/// A sweep: one `quantity` against `x_axis`, one curve set per ratio.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub quantity: Quantity,
    pub channel: ChannelName,
    pub ratios: Vec<f64>,
    pub x_axis: XAxis,
    pub x_min: f64,
    pub x_max: f64,
    /// Number of grid points, endpoints inclusive.
    pub steps: usize,
    #[serde(default)]
    pub fixed: FixedSection,
}

/// Parameters pinned while the x axis varies. A `gamma_t` sweep needs
/// `eta` (directly, or derived from `alpha_db_per_km` and `distance_km`);
/// a `distance_km` sweep needs `gamma_t` and `alpha_db_per_km`.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FixedSection {
    pub eta: Option<f64>,
    pub gamma_t: Option<f64>,
    pub alpha_db_per_km: Option<f64>,
    pub distance_km: Option<f64>,
}

impl SweepSection {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.steps < 2 {
            return Err(CliError::usage("sweep needs steps >= 2"));
        }
        if self.x_min.is_nan() || self.x_max.is_nan() || self.x_min >= self.x_max {
            return Err(CliError::usage("sweep needs x_min < x_max"));
        }
        if self.ratios.is_empty() {
            return Err(CliError::usage("sweep needs at least one ratio"));
        }
        if self.ratios.iter().any(|&r| r <= 0.0) {
            return Err(CliError::usage("ratios must be positive"));
        }
        match self.x_axis {
            XAxis::GammaT => {
                if self.x_min < 0.0 {
                    return Err(CliError::usage("gamma_t must be non-negative"));
                }
                let has_eta = self.fixed.eta.is_some();
                let has_link =
                    self.fixed.alpha_db_per_km.is_some() && self.fixed.distance_km.is_some();
                if !has_eta && !has_link {
                    return Err(CliError::usage(
                        "a gamma_t sweep needs fixed.eta or fixed.alpha_db_per_km + fixed.distance_km",
                    ));
                }
            }
            XAxis::DistanceKm => {
                if self.x_min < 0.0 {
                    return Err(CliError::usage("distance must be non-negative"));
                }
                if self.fixed.gamma_t.is_none() || self.fixed.alpha_db_per_km.is_none() {
                    return Err(CliError::usage(
                        "a distance sweep needs fixed.gamma_t and fixed.alpha_db_per_km",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolFile {
    pub protocol: ProtocolSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub n_pairs: usize,
    #[serde(default = "default_check_fraction")]
    pub check_fraction: f64,
    #[serde(default = "default_round2_check_fraction")]
    pub round2_check_fraction: f64,
    pub gamma_t_per_hop: f64,
    pub seed: u64,
    /// Message as a string of '0'/'1' characters.
    pub message_bits: String,
    pub channel: ChannelSection,
    pub link: LinkSection,
}

fn default_check_fraction() -> f64 {
    0.5
}

fn default_round2_check_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub kind: ChannelName,
    /// Linewidth-to-coupling ratio, big_gamma / gamma.
    pub ratio: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub alpha_db_per_km: f64,
    pub distance_km: f64,
}

pub fn parse_message_bits(message: &str) -> Result<Vec<u8>, CliError> {
    message
        .chars()
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            other => Err(CliError::usage(format!(
                "message bits must be '0' or '1', found {other:?}"
            ))),
        })
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockFile {
    pub block: BlockSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSection {
    #[serde(default = "default_message")]
    pub message_bits: String,
    #[serde(default = "default_block_seed")]
    pub seed: u64,
    #[serde(default = "default_block_duration")]
    pub block_duration_s: f64,
    #[serde(default = "default_photons")]
    pub photons_per_block: usize,
    #[serde(default = "default_detections")]
    pub expected_detections: usize,
    #[serde(default = "default_freq_zero")]
    pub freq_for_zero_hz: f64,
    #[serde(default = "default_freq_one")]
    pub freq_for_one_hz: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step_hz: f64,
    /// Channel noise on the pair states; omitted means ideal pairs.
    #[serde(default)]
    pub noise: Option<NoiseSection>,
}

impl Default for BlockSection {
    fn default() -> Self {
        Self {
            message_bits: default_message(),
            seed: default_block_seed(),
            block_duration_s: default_block_duration(),
            photons_per_block: default_photons(),
            expected_detections: default_detections(),
            freq_for_zero_hz: default_freq_zero(),
            freq_for_one_hz: default_freq_one(),
            grid_step_hz: default_grid_step(),
            noise: None,
        }
    }
}

fn default_message() -> String {
    "0110".to_string()
}

fn default_block_seed() -> u64 {
    7
}

fn default_block_duration() -> f64 {
    1e-3
}

fn default_photons() -> usize {
    10_000
}

fn default_detections() -> usize {
    100
}

fn default_freq_zero() -> f64 {
    25_000.0
}

fn default_freq_one() -> f64 {
    50_000.0
}

fn default_grid_step() -> f64 {
    1_000.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: ChannelName,
    pub ratio: f64,
    pub gamma_t_per_hop: f64,
    #[serde(default)]
    pub alpha_db_per_km: f64,
    #[serde(default)]
    pub distance_km: f64,
}
