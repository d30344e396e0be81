//! Large-scale (path loss + shadowing) and small-scale fading power gains
//! for every V2V, V2I and interference link.
//!
//! All gains are linear power ratios. Large-scale gains do not depend on
//! the subchannel; small-scale fading is drawn per link and subchannel.

mod pathloss;
mod realization;

pub use pathloss::{path_loss_v2i, path_loss_v2v, shadowing};
pub use realization::{
    fast_fading, large_scale_gains, realize, realize_from_gains, ChannelRealization, FadingMode, LargeScaleGains, ShadowState,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radio parameters of the freeway scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub carrier_ghz: f64,
    /// Hz per subchannel.
    pub subchannel_bandwidth: f64,
    pub noise_dbm: f64,
    /// Meters.
    pub bs_antenna_height: f64,
    /// dBi.
    pub bs_gain: f64,
    /// dB.
    pub bs_noise_figure: f64,
    pub vehicle_gain: f64,
    pub vehicle_noise_figure: f64,
    pub vehicle_antenna_height: f64,
    pub v2i_power_dbm: f64,
    /// V2V transmit power levels in dBm, descending. The lowest entry is the
    /// silent action and is treated as exactly zero watts.
    pub power_levels_dbm: Vec<f64>,
    pub shadow_std_v2v: f64,
    pub shadow_std_v2i: f64,
    /// Shadowing decorrelation distances, meters.
    pub decorrelation_v2v: f64,
    pub decorrelation_v2i: f64,
}

/// Power level at or below which a transmitter is considered silent.
pub const SILENT_DBM: f64 = -100.0;

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            carrier_ghz: 2.0,
            subchannel_bandwidth: 1e6,
            noise_dbm: -114.0,
            bs_antenna_height: 25.0,
            bs_gain: 8.0,
            bs_noise_figure: 5.0,
            vehicle_gain: 3.0,
            vehicle_noise_figure: 9.0,
            vehicle_antenna_height: 1.5,
            v2i_power_dbm: 23.0,
            power_levels_dbm: vec![23.0, 15.0, 5.0, SILENT_DBM],
            shadow_std_v2v: 3.0,
            shadow_std_v2i: 8.0,
            decorrelation_v2v: 10.0,
            decorrelation_v2i: 50.0,
        }
    }
}

impl ChannelParams {
    pub fn num_power_levels(&self) -> usize {
        self.power_levels_dbm.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.subchannel_bandwidth > 0.0) {
            return Err(Error::Config("subchannel_bandwidth must be positive".into()));
        }
        if self.power_levels_dbm.is_empty() {
            return Err(Error::Config("power_levels_dbm must not be empty".into()));
        }
        if self.power_levels_dbm.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Config("power_levels_dbm must be strictly descending".into()));
        }
        if !self.power_levels_dbm.iter().any(|&p| p <= SILENT_DBM) {
            return Err(Error::Config(format!("power_levels_dbm must include the {SILENT_DBM} dBm silent level")));
        }
        if self.shadow_std_v2v < 0.0 || self.shadow_std_v2i < 0.0 {
            return Err(Error::Config("shadowing std must be non-negative".into()));
        }
        Ok(())
    }
}
