//! Deterministic link budget: log-distance path loss plus a `k·R^α`
//! specific-attenuation rain term, and the breakpoint calibration that fits
//! the free coefficients to observed connectivity.

mod calibrate;
mod params_file;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub use calibrate::{calibrate, CalibrationGrid, MIN_SLACK_DB};
pub use params_file::{read_params, write_params, format_params, parse_params};

use crate::error::{Error, Result};
use crate::phy::{self, RadioConfig, DR_COUNT};

/// Rain sweep used for breakpoints: 0..=150 mm/h in 5 mm/h steps.
pub const SWEEP_STEP_MM_H: f64 = 5.0;
pub const SWEEP_MAX_MM_H: f64 = 150.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Path loss at the reference distance, dB.
    pub pl0_db: f64,
    pub d0_m: f64,
    pub exponent: f64,
    /// Specific attenuation coefficient, dB/km per (mm/h)^alpha.
    pub rain_k: f64,
    pub rain_alpha: f64,
    /// Receiver floor per DR, dBm, indexed by DR (DR0 first).
    pub sensitivity_table: [f64; DR_COUNT],
    /// Lumped transmit plus receive antenna gain, dB.
    pub antenna_gains_db: f64,
}

/// Receiver floor of DR5 (SF7, 125 kHz) in the default table.
pub const DR5_SENSITIVITY_DBM: f64 = -123.0;
pub const DEFAULT_SENSITIVITY_STEP_DB: f64 = 2.5;

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            pl0_db: 120.0,
            d0_m: 1000.0,
            exponent: 2.7,
            rain_k: 0.05,
            rain_alpha: 0.9,
            sensitivity_table: uniform_sensitivity(DEFAULT_SENSITIVITY_STEP_DB),
            antenna_gains_db: 0.0,
        }
    }
}

/// Table anchored at the DR5 floor, each lower DR `step` dB more sensitive.
pub fn uniform_sensitivity(step: f64) -> [f64; DR_COUNT] {
    let mut t = [0.0; DR_COUNT];
    for (dr, s) in t.iter_mut().enumerate() {
        *s = DR5_SENSITIVITY_DBM - step * (5 - dr) as f64;
    }
    t
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent >= 2.0) {
            return Err(Error::invalid(format!("path-loss exponent {} below 2", self.exponent)));
        }
        if !(self.rain_k >= 0.0) {
            return Err(Error::invalid(format!("rain_k {} is negative", self.rain_k)));
        }
        if !(self.rain_alpha > 0.0) {
            return Err(Error::invalid(format!("rain_alpha {} must be positive", self.rain_alpha)));
        }
        if !(self.d0_m > 0.0) {
            return Err(Error::invalid(format!("reference distance {} must be positive", self.d0_m)));
        }
        if self.sensitivity_table.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(
                "sensitivity table must strictly decrease from DR5 down to DR0",
            ));
        }
        Ok(())
    }
}

pub fn path_loss(distance_m: f64, params: &ChannelParams) -> Result<f64> {
    if !(distance_m >= params.d0_m) {
        return Err(Error::invalid(format!(
            "distance {distance_m} m is closer than the reference distance {} m",
            params.d0_m
        )));
    }
    Ok(params.pl0_db + 10.0 * params.exponent * (distance_m / params.d0_m).log10())
}

pub fn rain_attenuation(rain_mm_h: f64, distance_m: f64, params: &ChannelParams) -> Result<f64> {
    if !(rain_mm_h >= 0.0) {
        return Err(Error::invalid(format!("rain rate {rain_mm_h} mm/h is negative")));
    }
    if rain_mm_h == 0.0 {
        return Ok(0.0);
    }
    Ok(params.rain_k * rain_mm_h.powf(params.rain_alpha) * (distance_m / 1000.0))
}

/// Received power minus receiver floor; the packet is receivable iff `>= 0`.
pub fn link_margin(
    dr_index: u8,
    distance_m: f64,
    rain_mm_h: f64,
    cfg: &RadioConfig,
    params: &ChannelParams,
) -> Result<f64> {
    let profile = phy::dr_profile(dr_index)?;
    let received = cfg.tx_power_dbm + params.antenna_gains_db
        - path_loss(distance_m, params)?
        - rain_attenuation(rain_mm_h, distance_m, params)?;
    Ok(received - phy::sensitivity(profile, params))
}

pub fn is_receivable(
    dr_index: u8,
    distance_m: f64,
    rain_mm_h: f64,
    cfg: &RadioConfig,
    params: &ChannelParams,
) -> Result<bool> {
    Ok(link_margin(dr_index, distance_m, rain_mm_h, cfg, params)? >= 0.0)
}

/// Last rain level on the sweep grid at which a link still delivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Breakpoint {
    NeverConnected,
    UpTo(f64),
    BeyondSweep,
}

impl fmt::Display for Breakpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Breakpoint::NeverConnected => f.write_str("never"),
            Breakpoint::UpTo(r) => write!(f, "{r}"),
            Breakpoint::BeyondSweep => f.write_str("beyond"),
        }
    }
}

impl FromStr for Breakpoint {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "never" => Ok(Breakpoint::NeverConnected),
            "beyond" => Ok(Breakpoint::BeyondSweep),
            other => {
                let r: f64 = other
                    .parse()
                    .map_err(|_| format!("bad breakpoint '{other}' (number, never or beyond)"))?;
                if !(0.0..SWEEP_MAX_MM_H).contains(&r) {
                    return Err(format!("breakpoint {r} outside [0, {SWEEP_MAX_MM_H})"));
                }
                Ok(Breakpoint::UpTo(r))
            }
        }
    }
}

pub fn default_sweep() -> Vec<f64> {
    let steps = (SWEEP_MAX_MM_H / SWEEP_STEP_MM_H).round() as usize;
    (0..=steps).map(|i| i as f64 * SWEEP_STEP_MM_H).collect()
}

pub fn breakpoint_rain(
    dr_index: u8,
    distance_m: f64,
    cfg: &RadioConfig,
    params: &ChannelParams,
) -> Result<Breakpoint> {
    breakpoint_on_grid(dr_index, distance_m, cfg, params, &default_sweep())
}

/// Breakpoint over an ascending rain grid.
pub fn breakpoint_on_grid(
    dr_index: u8,
    distance_m: f64,
    cfg: &RadioConfig,
    params: &ChannelParams,
    grid: &[f64],
) -> Result<Breakpoint> {
    let mut last = None;
    for &rain in grid {
        if is_receivable(dr_index, distance_m, rain, cfg, params)? {
            last = Some(rain);
        } else {
            break;
        }
    }
    Ok(match last {
        None => Breakpoint::NeverConnected,
        Some(r) if Some(&r) == grid.last() => Breakpoint::BeyondSweep,
        Some(r) => Breakpoint::UpTo(r),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMilestone {
    pub dr_index: u8,
    pub distance_m: f64,
    pub breakpoint: Breakpoint,
}

impl LinkMilestone {
    pub fn new(dr_index: u8, distance_m: f64, breakpoint: Breakpoint) -> Self {
        LinkMilestone {
            dr_index,
            distance_m,
            breakpoint,
        }
    }
}

impl fmt::Display for LinkMilestone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DR{}/{} m -> {}", self.dr_index, self.distance_m, self.breakpoint)
    }
}

/// Parses a milestone CSV: header `dr,distance_m,breakpoint`, `#` comments.
pub fn parse_milestones(text: &str, origin: &Path) -> Result<Vec<LinkMilestone>> {
    let mut out = Vec::new();
    let mut saw_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            saw_header = true;
            if line.replace(' ', "") != "dr,distance_m,breakpoint" {
                return Err(Error::parse(origin, i + 1, "expected header 'dr,distance_m,breakpoint'"));
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(Error::parse(origin, i + 1, "expected 3 columns"));
        }
        let dr: u8 = cols[0]
            .parse()
            .ok()
            .filter(|d| *d <= phy::MAX_DR)
            .ok_or_else(|| Error::parse(origin, i + 1, format!("bad DR '{}'", cols[0])))?;
        let distance: f64 = cols[1]
            .parse()
            .ok()
            .filter(|d: &f64| *d > 0.0)
            .ok_or_else(|| Error::parse(origin, i + 1, format!("bad distance '{}'", cols[1])))?;
        let bp = cols[2].parse().map_err(|m| Error::parse(origin, i + 1, m))?;
        out.push(LinkMilestone::new(dr, distance, bp));
    }
    Ok(out)
}

pub fn read_milestones(path: &Path) -> Result<Vec<LinkMilestone>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_milestones(&text, path)
}

/// Connectivity observed in the rain sweep, including the two intermediate
/// rates (DR4, DR3) whose breakpoints are pinned by the per-DR delivered
/// totals rather than stated directly.
pub fn reference_milestones() -> Vec<LinkMilestone> {
    use Breakpoint::*;
    vec![
        LinkMilestone::new(5, 2000.0, BeyondSweep),
        LinkMilestone::new(5, 4000.0, UpTo(5.0)),
        LinkMilestone::new(5, 6000.0, NeverConnected),
        LinkMilestone::new(4, 4000.0, UpTo(30.0)),
        LinkMilestone::new(4, 6000.0, NeverConnected),
        LinkMilestone::new(3, 4000.0, UpTo(60.0)),
        LinkMilestone::new(3, 6000.0, NeverConnected),
        LinkMilestone::new(2, 4000.0, UpTo(90.0)),
        LinkMilestone::new(2, 6000.0, UpTo(5.0)),
        LinkMilestone::new(1, 4000.0, UpTo(125.0)),
        LinkMilestone::new(1, 6000.0, UpTo(25.0)),
        LinkMilestone::new(0, 2000.0, BeyondSweep),
        LinkMilestone::new(0, 4000.0, BeyondSweep),
        LinkMilestone::new(0, 6000.0, UpTo(40.0)),
    ]
}
