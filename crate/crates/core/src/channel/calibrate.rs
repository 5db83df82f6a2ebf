//! Breakpoint calibration.
//!
//! The margin of DR `d` at distance `x` and rain `R` is
//!
//! ```text
//! margin = X + step·(5 − d) − 10·n·log10(x / d0) − k·R^α·x_km
//! ```
//!
//! where `X = tx + gains − pl0 − S(DR5)` collects every additive constant.
//! A milestone turns into "connected at R" (`margin >= 0`) and/or
//! "disconnected at R + 5" (`margin < 0`) constraints. For a fixed outer
//! triple `(n, step, α)` each constraint is a line in `k` bounding `X`, so
//! the best `(k, X)` is found exactly: maximize the concave gap between the
//! lowest upper bound and the highest lower bound over `k`, then put `X` at
//! the centre of the gap. The outer triple is scanned on a grid in
//! lexicographic order and the first candidate with zero breakpoint mismatch
//! and at least [`MIN_SLACK_DB`] of headroom on every constraint wins.

use rayon::prelude::*;

use super::params_file::quantize;
use super::{
    breakpoint_rain, uniform_sensitivity, Breakpoint, ChannelParams, LinkMilestone,
    DR5_SENSITIVITY_DBM, SWEEP_MAX_MM_H, SWEEP_STEP_MM_H,
};
use crate::error::{Error, Result};
use crate::phy::RadioConfig;

/// Required distance (dB) between every constraint and the margin boundary.
pub const MIN_SLACK_DB: f64 = 0.05;

/// Upper bound on the rain coefficient searched, dB/km per (mm/h)^α.
const K_MAX: f64 = 1.0;

/// Headroom used when a side of the feasible interval is unbounded.
const OPEN_SIDE_HEADROOM_DB: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        let count = ((stop - start) / step).round() as usize + 1;
        Axis { start, step, count }
    }

    fn value(&self, i: usize) -> f64 {
        // avoid accumulated drift: round to the grid's decimal resolution
        let v = self.start + self.step * i as f64;
        (v * 1e6).round() / 1e6
    }
}

/// Outer search grid over path-loss exponent, sensitivity step and rain α.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationGrid {
    pub exponent: Axis,
    pub sensitivity_step: Axis,
    pub rain_alpha: Axis,
    pub min_slack_db: f64,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        CalibrationGrid {
            exponent: Axis::new(2.0, 4.0, 0.1),
            sensitivity_step: Axis::new(1.0, 3.0, 0.05),
            rain_alpha: Axis::new(0.5, 1.5, 0.01),
            min_slack_db: MIN_SLACK_DB,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Line {
    offset: f64,
    slope: f64,
}

impl Line {
    fn at(&self, k: f64) -> f64 {
        self.offset + self.slope * k
    }
}

#[derive(Debug, Clone, Copy)]
struct Requirement {
    dr: u8,
    distance_m: f64,
    rain: f64,
    connected: bool,
}

fn requirements(milestones: &[LinkMilestone]) -> Vec<Requirement> {
    let mut out = Vec::new();
    for m in milestones {
        let req = |rain, connected| Requirement {
            dr: m.dr_index,
            distance_m: m.distance_m,
            rain,
            connected,
        };
        match m.breakpoint {
            Breakpoint::NeverConnected => out.push(req(0.0, false)),
            Breakpoint::BeyondSweep => out.push(req(SWEEP_MAX_MM_H, true)),
            Breakpoint::UpTo(r) => {
                out.push(req(r, true));
                out.push(req(r + SWEEP_STEP_MM_H, false));
            }
        }
    }
    out
}

struct Candidate {
    params: ChannelParams,
    slack: f64,
    mismatches: Vec<String>,
}

/// Fits [`ChannelParams`] so that [`breakpoint_rain`] reproduces every
/// milestone on the 5 mm/h grid.
pub fn calibrate(milestones: &[LinkMilestone], cfg: &RadioConfig) -> Result<ChannelParams> {
    CalibrationGrid::default().calibrate(milestones, cfg)
}

impl CalibrationGrid {
    fn len(&self) -> usize {
        self.exponent.count * self.sensitivity_step.count * self.rain_alpha.count
    }

    fn triple(&self, idx: usize) -> (f64, f64, f64) {
        let na = self.rain_alpha.count;
        let ns = self.sensitivity_step.count;
        let a = idx % na;
        let s = (idx / na) % ns;
        let e = idx / (na * ns);
        (
            self.exponent.value(e),
            self.sensitivity_step.value(s),
            self.rain_alpha.value(a),
        )
    }

    pub fn calibrate(&self, milestones: &[LinkMilestone], cfg: &RadioConfig) -> Result<ChannelParams> {
        let base = ChannelParams::default();
        if milestones.is_empty() {
            return Ok(base);
        }
        check_consistency(milestones)?;
        for m in milestones {
            if m.distance_m < base.d0_m {
                return Err(Error::invalid(format!(
                    "milestone {m} is closer than the reference distance {} m",
                    base.d0_m
                )));
            }
        }
        let reqs = requirements(milestones);

        let found = (0..self.len())
            .into_par_iter()
            .map(|i| self.evaluate(i, &reqs, milestones, cfg, &base))
            .find_first(|c| c.mismatches.is_empty() && c.slack >= self.min_slack_db);
        if let Some(c) = found {
            return Ok(c.params);
        }

        // Report the closest candidate.
        let best = (0..self.len())
            .into_par_iter()
            .map(|i| (i, self.evaluate(i, &reqs, milestones, cfg, &base)))
            .min_by(|(ia, a), (ib, b)| {
                a.mismatches
                    .len()
                    .cmp(&b.mismatches.len())
                    .then(b.slack.total_cmp(&a.slack))
                    .then(ia.cmp(ib))
            });
        let violations = match best {
            Some((_, c)) if !c.mismatches.is_empty() => c.mismatches,
            Some((_, c)) => vec![format!(
                "milestones only satisfiable with {:.4} dB headroom (need {})",
                c.slack, self.min_slack_db
            )],
            None => vec!["empty search grid".to_string()],
        };
        Err(Error::CalibrationFailed { violations })
    }

    fn evaluate(
        &self,
        idx: usize,
        reqs: &[Requirement],
        milestones: &[LinkMilestone],
        cfg: &RadioConfig,
        base: &ChannelParams,
    ) -> Candidate {
        let (exponent, step, alpha) = self.triple(idx);
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for r in reqs {
            let line = Line {
                offset: 10.0 * exponent * (r.distance_m / base.d0_m).log10()
                    - step * f64::from(5 - r.dr),
                slope: if r.rain > 0.0 {
                    r.rain.powf(alpha) * r.distance_m / 1000.0
                } else {
                    0.0
                },
            };
            if r.connected {
                lower.push(line);
            } else {
                upper.push(line);
            }
        }
        let (k, x, slack) = best_gap(&lower, &upper, base.rain_k);
        let params = quantize(&ChannelParams {
            pl0_db: cfg.tx_power_dbm + base.antenna_gains_db - DR5_SENSITIVITY_DBM - x,
            exponent,
            rain_k: k,
            rain_alpha: alpha,
            sensitivity_table: uniform_sensitivity(step),
            ..base.clone()
        });
        let mismatches = milestones
            .iter()
            .filter_map(|m| match breakpoint_rain(m.dr_index, m.distance_m, cfg, &params) {
                Ok(bp) if bp == m.breakpoint => None,
                Ok(bp) => Some(format!("{m} (model gives {bp})")),
                Err(e) => Some(format!("{m}: {e}")),
            })
            .collect();
        Candidate {
            params,
            slack,
            mismatches,
        }
    }
}

/// Maximizes `min(upper) − max(lower)` over `k ∈ [0, K_MAX]`. Returns
/// `(k, X, slack)` with `X` centred in the gap and `slack` half its width.
fn best_gap(lower: &[Line], upper: &[Line], fallback_k: f64) -> (f64, f64, f64) {
    let hi = |k: f64| upper.iter().map(|l| l.at(k)).fold(f64::INFINITY, f64::min);
    let lo = |k: f64| lower.iter().map(|l| l.at(k)).fold(f64::NEG_INFINITY, f64::max);

    if upper.is_empty() || lower.is_empty() {
        let k = fallback_k;
        let x = if upper.is_empty() {
            lo(k) + OPEN_SIDE_HEADROOM_DB
        } else {
            hi(k) - OPEN_SIDE_HEADROOM_DB
        };
        return (k, x, OPEN_SIDE_HEADROOM_DB);
    }

    // The gap is concave and piecewise linear; its kinks sit where two
    // lines of the same envelope cross.
    let mut ks = vec![0.0, K_MAX];
    for set in [lower, upper] {
        for (i, a) in set.iter().enumerate() {
            for b in &set[i + 1..] {
                if a.slope != b.slope {
                    let k = (b.offset - a.offset) / (a.slope - b.slope);
                    if k > 0.0 && k < K_MAX {
                        ks.push(k);
                    }
                }
            }
        }
    }
    ks.sort_by(f64::total_cmp);
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in ks {
        let gap = hi(k) - lo(k);
        if gap > best.1 {
            best = (k, gap);
        }
    }
    let (k, gap) = best;
    (k, lo(k) + gap / 2.0, gap / 2.0)
}

fn check_consistency(milestones: &[LinkMilestone]) -> Result<()> {
    let mut violations = Vec::new();
    for (i, a) in milestones.iter().enumerate() {
        for b in &milestones[i + 1..] {
            if a.dr_index == b.dr_index && a.distance_m == b.distance_m && a.breakpoint != b.breakpoint {
                violations.push(format!("{a} contradicts {b}"));
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::CalibrationFailed { violations })
    }
}
