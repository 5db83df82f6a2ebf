//! LoRa physical-layer arithmetic: data-rate profiles, time-on-air and
//! duty-cycle-limited send spacing (EU868, 125 kHz only).

use crate::channel::ChannelParams;
use crate::error::{Error, Result};

pub const BANDWIDTH_HZ: u32 = 125_000;
pub const CARRIER_HZ: u32 = 868_000_000;
pub const MAX_DR: u8 = 5;
pub const DR_COUNT: usize = 6;

/// One of DR0..DR5. DR5 is SF7 (fastest), DR0 is SF12 (most robust).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataRateProfile {
    dr_index: u8,
    spreading_factor: u8,
}

impl DataRateProfile {
    pub fn dr_index(&self) -> u8 {
        self.dr_index
    }

    pub fn spreading_factor(&self) -> u8 {
        self.spreading_factor
    }

    pub fn bandwidth_hz(&self) -> u32 {
        BANDWIDTH_HZ
    }

    /// Symbol duration in seconds, `2^SF / BW`.
    pub fn symbol_time(&self) -> f64 {
        f64::from(1u32 << self.spreading_factor) / f64::from(BANDWIDTH_HZ)
    }

    /// Low-data-rate optimization is mandatory for SF11/SF12 at 125 kHz.
    pub fn low_data_rate_optimize(&self) -> bool {
        self.spreading_factor >= 11
    }
}

pub fn dr_profile(dr_index: u8) -> Result<DataRateProfile> {
    if dr_index > MAX_DR {
        return Err(Error::invalid(format!(
            "data rate index {dr_index} outside 0..={MAX_DR}"
        )));
    }
    Ok(DataRateProfile {
        dr_index,
        spreading_factor: 12 - dr_index,
    })
}

/// All six profiles, DR0 first.
pub fn all_profiles() -> impl Iterator<Item = DataRateProfile> {
    (0..=MAX_DR).map(|dr| DataRateProfile {
        dr_index: dr,
        spreading_factor: 12 - dr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodingRate {
    Cr4_5,
    Cr4_6,
    Cr4_7,
    Cr4_8,
}

impl CodingRate {
    pub fn denominator(self) -> u32 {
        match self {
            CodingRate::Cr4_5 => 5,
            CodingRate::Cr4_6 => 6,
            CodingRate::Cr4_7 => 7,
            CodingRate::Cr4_8 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    pub coding_rate: CodingRate,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc: bool,
    pub payload_bytes: u16,
    pub tx_power_dbm: f64,
    pub carrier_hz: u32,
    pub duty_cycle_limit: f64,
}

/// Payload size that makes the duty-cycle-bound send counts of a 90000 s
/// round land near 1380 (DR1) and 690 (DR0) per sensor; see
/// [`payload_for_send_counts`].
pub const CALIBRATED_PAYLOAD_BYTES: u16 = 16;

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            coding_rate: CodingRate::Cr4_5,
            preamble_symbols: 8,
            explicit_header: true,
            crc: true,
            payload_bytes: CALIBRATED_PAYLOAD_BYTES,
            tx_power_dbm: 14.0,
            carrier_hz: CARRIER_HZ,
            duty_cycle_limit: 0.01,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.payload_bytes < 1 {
            return Err(Error::invalid("payload_bytes must be at least 1"));
        }
        if !(self.duty_cycle_limit > 0.0 && self.duty_cycle_limit <= 1.0) {
            return Err(Error::invalid(format!(
                "duty cycle limit {} outside (0, 1]",
                self.duty_cycle_limit
            )));
        }
        if !(2.0..=14.0).contains(&self.tx_power_dbm) {
            return Err(Error::invalid(format!(
                "tx power {} dBm outside the EU868 range +2..+14",
                self.tx_power_dbm
            )));
        }
        Ok(())
    }
}

/// Number of payload symbols (including the 8 fixed header symbols).
pub fn payload_symbols(profile: DataRateProfile, cfg: &RadioConfig) -> u32 {
    let sf = i64::from(profile.spreading_factor);
    let de = i64::from(profile.low_data_rate_optimize());
    let ih = i64::from(!cfg.explicit_header);
    let crc = i64::from(cfg.crc);
    let num = 8 * i64::from(cfg.payload_bytes) - 4 * sf + 28 + 16 * crc - 20 * ih;
    let den = 4 * (sf - 2 * de);
    // ceil for positive numerators; negative ones clamp to zero below
    let blocks = if num > 0 { (num + den - 1) / den } else { 0 };
    8 + (blocks * i64::from(cfg.coding_rate.denominator())) as u32
}

/// Packet airtime in seconds.
pub fn time_on_air(profile: DataRateProfile, cfg: &RadioConfig) -> f64 {
    let symbols = f64::from(cfg.preamble_symbols) + 4.25 + f64::from(payload_symbols(profile, cfg));
    symbols * profile.symbol_time()
}

/// Effective inter-send interval: the application period unless the duty
/// cycle forces a longer off-time.
pub fn min_send_interval(toa: f64, duty_cycle_limit: f64, app_period: f64) -> Result<f64> {
    if !(toa > 0.0) || !(app_period > 0.0) {
        return Err(Error::invalid(format!(
            "time on air ({toa}) and application period ({app_period}) must be positive"
        )));
    }
    if !(duty_cycle_limit > 0.0 && duty_cycle_limit <= 1.0) {
        return Err(Error::invalid(format!(
            "duty cycle limit {duty_cycle_limit} outside (0, 1]"
        )));
    }
    Ok(app_period.max(toa / duty_cycle_limit))
}

/// Demodulation floor in dBm for `profile`.
pub fn sensitivity(profile: DataRateProfile, params: &ChannelParams) -> f64 {
    params.sensitivity_table[usize::from(profile.dr_index)]
}

/// Sends that fit in a window of `duration` seconds when transmissions start
/// at 0 and repeat every `interval`, each needing `toa` to complete.
pub fn sends_in_window(duration: f64, interval: f64, toa: f64) -> u64 {
    if duration < toa {
        return 0;
    }
    ((duration - toa) / interval).floor() as u64 + 1
}

/// Smallest payload (1..=255 bytes) whose duty-cycle-bound send counts best
/// match `targets` (pairs of DR index and sends per window), measured as the
/// worst relative error.
pub fn payload_for_send_counts(
    base: &RadioConfig,
    duration: f64,
    app_period: f64,
    targets: &[(u8, f64)],
) -> Result<u16> {
    let mut best: Option<(f64, u16)> = None;
    for payload in 1..=255u16 {
        let cfg = RadioConfig {
            payload_bytes: payload,
            ..base.clone()
        };
        let mut worst = 0.0f64;
        for &(dr, target) in targets {
            let profile = dr_profile(dr)?;
            let toa = time_on_air(profile, &cfg);
            let interval = min_send_interval(toa, cfg.duty_cycle_limit, app_period)?;
            let sends = sends_in_window(duration, interval, toa) as f64;
            worst = worst.max((sends - target).abs() / target);
        }
        if best.is_none_or(|(err, _)| worst < err) {
            best = Some((worst, payload));
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::invalid("no send-count targets given"))
}
