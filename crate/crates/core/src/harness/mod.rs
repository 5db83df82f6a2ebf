//! Experiment driver: spec files, grid selection, the policy sweep and its
//! reports.
//!
//! Experiment spec format (`key = value`, `#` comments, every key optional):
//!
//! ```text
//! grid = 5mm                  # 5mm | 1mm | file:<path> | list:<r1,r2,...>
//! round_duration_s = 90000
//! app_period_s = 60
//! sensors_m = 2000,4000,6000
//! policies = all              # all | fixed:<dr>,conservative,aggressive
//! channel = calibrate         # calibrate | calibrate:<milestones.csv> | file:<params.txt>
//! payload_bytes = 16
//! duty_cycle = 0.01
//! tx_power_dbm = 14
//! aggressive_loss_trigger = 200
//! output = out
//! ```
//!
//! Relative paths are resolved against the spec file's directory.

mod report;
mod verify;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use report::{emit_reports, render_bar_svg, render_line_svg};
pub use verify::{compare_cells, compare_to_reference, load_result_cells, parse_reference, CellCheck, Tolerance, VerifyReport};

use crate::channel::{self, ChannelParams};
use crate::control::{PolicyKind, PolicyState};
use crate::error::{Error, Result};
use crate::phy::RadioConfig;
use crate::sensor::SensorState;
use crate::sim::{run_round, write_event_trace, write_message_trace, Engine, RoundConfig, RoundStats};

/// Round length giving 1500 period-bound sends per sensor at a 60 s period.
pub const DEFAULT_ROUND_DURATION_S: f64 = 90_000.0;
pub const DEFAULT_APP_PERIOD_S: f64 = 60.0;
pub const DEFAULT_SENSOR_DISTANCES_M: [f64; 3] = [2000.0, 4000.0, 6000.0];
/// Losses at the current DR before Aggressive steps down in sweeps.
pub const DEFAULT_AGGRESSIVE_LOSS_TRIGGER: u32 = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum GridChoice {
    FiveMm,
    OneMm,
    File(PathBuf),
    List(Vec<f64>),
}

impl GridChoice {
    pub fn parse(s: &str, base: &Path) -> Result<Self> {
        let s = s.trim();
        match s {
            "5mm" => Ok(GridChoice::FiveMm),
            "1mm" => Ok(GridChoice::OneMm),
            _ => {
                if let Some(p) = s.strip_prefix("file:") {
                    Ok(GridChoice::File(base.join(p.trim())))
                } else if let Some(l) = s.strip_prefix("list:") {
                    Ok(GridChoice::List(parse_rain_values(l, Path::new("<grid list>"))?))
                } else {
                    // a bare path is accepted too
                    Ok(GridChoice::File(base.join(s)))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGrid {
    pub rains: Vec<f64>,
    /// One-line description for report headers.
    pub note: String,
}

fn parse_rain_values(text: &str, origin: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(origin, i + 1, format!("bad rain value '{tok}'")))?;
            out.push(v);
        }
    }
    Ok(out)
}

fn check_grid(rains: &[f64]) -> Result<()> {
    if rains.is_empty() {
        return Err(Error::Config("rain grid is empty".into()));
    }
    if rains.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::Config("rain grid values must be finite and >= 0".into()));
    }
    if rains.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("rain grid must be nondecreasing".into()));
    }
    Ok(())
}

fn step_grid(step: f64) -> Vec<f64> {
    let n = (channel::SWEEP_MAX_MM_H / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Resolves the rain grid. 5 mm/h steps (31 rounds) is the table
/// reproduction default; 1 mm/h steps give 151 rounds.
pub fn reconcile_rounds(choice: &GridChoice) -> Result<EffectiveGrid> {
    let grid = match choice {
        GridChoice::FiveMm => EffectiveGrid {
            rains: step_grid(5.0),
            note: "31 rounds, 0..150 mm/h in 5 mm/h steps (table reproduction default)".into(),
        },
        GridChoice::OneMm => EffectiveGrid {
            rains: step_grid(1.0),
            note: "151 rounds, 0..150 mm/h in 1 mm/h steps".into(),
        },
        GridChoice::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let rains = parse_rain_values(&text, path)?;
            EffectiveGrid {
                note: format!("{} rounds from grid file {}", rains.len(), path.display()),
                rains,
            }
        }
        GridChoice::List(rains) => EffectiveGrid {
            note: format!("{} rounds from an explicit list", rains.len()),
            rains: rains.clone(),
        },
    };
    check_grid(&grid.rains)?;
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    /// Fit against the built-in milestones, or a milestone CSV.
    Calibrate(Option<PathBuf>),
    File(PathBuf),
}

impl ChannelSource {
    pub fn resolve(&self, radio: &RadioConfig) -> Result<ChannelParams> {
        match self {
            ChannelSource::Calibrate(None) => channel::calibrate(&channel::reference_milestones(), radio),
            ChannelSource::Calibrate(Some(p)) => channel::calibrate(&channel::read_milestones(p)?, radio),
            ChannelSource::File(p) => channel::read_params(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub grid: GridChoice,
    pub round_duration_s: f64,
    pub app_period_s: f64,
    pub sensor_distances_m: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub channel: ChannelSource,
    pub radio: RadioConfig,
    pub aggressive_loss_trigger: u32,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            grid: GridChoice::FiveMm,
            round_duration_s: DEFAULT_ROUND_DURATION_S,
            app_period_s: DEFAULT_APP_PERIOD_S,
            sensor_distances_m: DEFAULT_SENSOR_DISTANCES_M.to_vec(),
            policies: PolicyKind::all(),
            channel: ChannelSource::Calibrate(None),
            radio: RadioConfig::default(),
            aggressive_loss_trigger: DEFAULT_AGGRESSIVE_LOSS_TRIGGER,
            output_dir: None,
        }
    }
}

pub fn parse_policies(s: &str) -> Result<Vec<PolicyKind>> {
    if s.trim() == "all" {
        return Ok(PolicyKind::all());
    }
    let list = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.parse::<PolicyKind>())
        .collect::<Result<Vec<_>>>()?;
    if list.is_empty() {
        return Err(Error::Config("policy list is empty".into()));
    }
    Ok(list)
}

impl ExperimentSpec {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let base = origin.parent().unwrap_or(Path::new("."));
        let mut spec = ExperimentSpec::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(origin, i + 1, m);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected 'key = value'".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key '{key}'")));
            }
            let num = |v: &str| -> Result<f64> { v.parse().map_err(|_| err(format!("bad number for '{key}'"))) };
            match key {
                "grid" => spec.grid = GridChoice::parse(value, base)?,
                "round_duration_s" => spec.round_duration_s = num(value)?,
                "app_period_s" => spec.app_period_s = num(value)?,
                "sensors_m" => {
                    spec.sensor_distances_m = value
                        .split(',')
                        .map(|v| num(v.trim()))
                        .collect::<Result<Vec<_>>>()?
                }
                "policies" => spec.policies = parse_policies(value)?,
                "channel" => {
                    spec.channel = match value {
                        "calibrate" => ChannelSource::Calibrate(None),
                        v => {
                            if let Some(p) = v.strip_prefix("calibrate:") {
                                ChannelSource::Calibrate(Some(base.join(p.trim())))
                            } else if let Some(p) = v.strip_prefix("file:") {
                                ChannelSource::File(base.join(p.trim()))
                            } else {
                                return Err(err(format!("unknown channel source '{v}'")));
                            }
                        }
                    }
                }
                "payload_bytes" => {
                    spec.radio.payload_bytes = value.parse().map_err(|_| err("bad payload_bytes".into()))?
                }
                "duty_cycle" => spec.radio.duty_cycle_limit = num(value)?,
                "tx_power_dbm" => spec.radio.tx_power_dbm = num(value)?,
                "aggressive_loss_trigger" => {
                    spec.aggressive_loss_trigger = value
                        .parse()
                        .map_err(|_| err("bad aggressive_loss_trigger".into()))?
                }
                "output" => spec.output_dir = Some(base.join(value)),
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::Config("policy list is empty".into()));
        }
        if self.sensor_distances_m.is_empty() {
            return Err(Error::Config("sensor list is empty".into()));
        }
        if !(self.round_duration_s.is_finite() && self.round_duration_s >= 0.0) {
            return Err(Error::Config("round_duration_s must be >= 0".into()));
        }
        if !(self.app_period_s.is_finite() && self.app_period_s > 0.0) {
            return Err(Error::Config("app_period_s must be > 0".into()));
        }
        if self.aggressive_loss_trigger == 0 {
            return Err(Error::Config("aggressive_loss_trigger must be >= 1".into()));
        }
        self.radio.validate()
    }

    pub fn sensors(&self) -> Vec<SensorState> {
        self.sensor_distances_m
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let mut s = SensorState::new(i as u32 + 1, d, 0).with_app_period(self.app_period_s);
                s.payload_bytes = self.radio.payload_bytes;
                s
            })
            .collect()
    }

    /// Period-bound sends per sensor per round (one per measurement tick),
    /// for report headers.
    pub fn nominal_sends_per_round(&self) -> u64 {
        (self.round_duration_s / self.app_period_s).ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResult {
    pub kind: PolicyKind,
    pub rounds: Vec<RoundStats>,
}

impl PolicyResult {
    pub fn sent(&self) -> u64 {
        self.rounds.iter().map(RoundStats::sent).sum()
    }

    pub fn received(&self) -> u64 {
        self.rounds.iter().map(RoundStats::received).sum()
    }

    pub fn lost(&self) -> u64 {
        self.sent() - self.received()
    }

    pub fn pdr(&self) -> Option<f64> {
        let sent = self.sent();
        (sent > 0).then(|| self.received() as f64 / sent as f64)
    }

    /// Sensor-rounds in which at least one packet got through.
    pub fn connected_sensor_rounds(&self) -> usize {
        self.rounds
            .iter()
            .flat_map(|r| &r.sensors)
            .filter(|s| s.received > 0)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: EffectiveGrid,
    pub round_duration_s: f64,
    pub app_period_s: f64,
    pub nominal_sends_per_round: u64,
    pub params: ChannelParams,
    pub policies: Vec<PolicyResult>,
}

impl SweepResult {
    pub fn get(&self, kind: PolicyKind) -> Option<&PolicyResult> {
        self.policies.iter().find(|p| p.kind == kind)
    }

    /// Fixed policy with the most delivered packets.
    pub fn best_fixed(&self) -> Option<&PolicyResult> {
        self.best(|k| !k.is_adaptive())
    }

    pub fn best_adaptive(&self) -> Option<&PolicyResult> {
        self.best(PolicyKind::is_adaptive)
    }

    fn best(&self, pick: impl Fn(&PolicyKind) -> bool) -> Option<&PolicyResult> {
        // first maximum wins, so ties resolve in policy-list order
        self.policies
            .iter()
            .filter(|p| pick(&p.kind))
            .fold(None, |best: Option<&PolicyResult>, p| match best {
                Some(b) if b.received() >= p.received() => Some(b),
                _ => Some(p),
            })
    }

    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!("grid: {}", self.grid.note),
            format!(
                "round: {} s at a {} s period, {} period-bound sends per sensor",
                self.round_duration_s, self.app_period_s, self.nominal_sends_per_round
            ),
        ]
    }
}

fn run_policy(
    kind: PolicyKind,
    spec: &ExperimentSpec,
    grid: &EffectiveGrid,
    params: &ChannelParams,
) -> Result<PolicyResult> {
    let sensors = spec.sensors();
    let initial = PolicyState::new(kind, &sensors, &spec.radio, params)?
        .with_loss_trigger(spec.aggressive_loss_trigger);
    let round = |rain: f64| RoundConfig {
        radio: spec.radio.clone(),
        ..RoundConfig::new(rain, spec.round_duration_s, sensors.clone(), params.clone())
    };
    let rounds = if kind.is_adaptive() {
        let mut state = initial;
        let mut rounds = Vec::with_capacity(grid.rains.len());
        for &rain in &grid.rains {
            let (stats, next) = run_round(round(rain), state)?;
            rounds.push(stats);
            state = next;
        }
        rounds
    } else {
        grid.rains
            .par_iter()
            .map(|&rain| run_round(round(rain), initial.clone()).map(|(stats, _)| stats))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(PolicyResult { kind, rounds })
}

/// Runs every policy of the spec over the grid. Fixed-DR rounds run in
/// parallel; adaptive policies carry their state from round to round.
pub fn run_sweep(spec: &ExperimentSpec, params: &ChannelParams) -> Result<SweepResult> {
    spec.validate()?;
    params.validate()?;
    let grid = reconcile_rounds(&spec.grid)?;
    let policies = spec
        .policies
        .par_iter()
        .map(|&kind| run_policy(kind, spec, &grid, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        grid,
        round_duration_s: spec.round_duration_s,
        app_period_s: spec.app_period_s,
        nominal_sends_per_round: spec.nominal_sends_per_round(),
        params: params.clone(),
        policies,
    })
}

/// Re-runs the sweep with tracing on and writes one event CSV and one
/// message CSV per policy and round under `dir/traces`.
pub fn emit_traces(spec: &ExperimentSpec, params: &ChannelParams, dir: &Path) -> Result<Vec<PathBuf>> {
    let grid = reconcile_rounds(&spec.grid)?;
    let tdir = dir.join("traces");
    std::fs::create_dir_all(&tdir).map_err(|e| Error::io(&tdir, e))?;
    let sensors = spec.sensors();
    let mut written = Vec::new();
    for &kind in &spec.policies {
        let initial = PolicyState::new(kind, &sensors, &spec.radio, params)?
            .with_loss_trigger(spec.aggressive_loss_trigger);
        let mut state = initial.clone();
        for (i, &rain) in grid.rains.iter().enumerate() {
            let cfg = RoundConfig {
                radio: spec.radio.clone(),
                record_trace: true,
                ..RoundConfig::new(rain, spec.round_duration_s, sensors.clone(), params.clone())
            };
            let start = if kind.is_adaptive() { state } else { initial.clone() };
            let out = Engine::new(cfg, start)?.run()?;
            let stem = format!("{}_r{i:03}", kind.to_string().replace(':', "-"));
            let ev = tdir.join(format!("{stem}_events.csv"));
            let msg = tdir.join(format!("{stem}_messages.csv"));
            let file = |p: &Path| std::fs::File::create(p).map(std::io::BufWriter::new).map_err(|e| Error::io(p, e));
            write_event_trace(&out.events, file(&ev)?).map_err(|e| Error::io(&ev, e))?;
            write_message_trace(&out.messages, file(&msg)?).map_err(|e| Error::io(&msg, e))?;
            written.push(ev);
            written.push(msg);
            state = out.policy;
        }
    }
    Ok(written)
}
