//! Server decision logic: Fixed / Conservative / Aggressive data-rate
//! policies, the selective bridge that routes context data, and the
//! multi-zone sync filter.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::channel::{self, ChannelParams};
use crate::error::{Error, Result};
use crate::phy::{self, RadioConfig};
use crate::sensor::{Message, MessageKind, Metric, ReconfigCommand, Readings, SensorState, Thresholds};
use crate::sim::LossEvent;

/// Rain headroom the Conservative policy keeps, mm/h.
pub const CONSERVATIVE_RAIN_OFFSET: f64 = 5.0;

/// Losses at the current DR needed before Aggressive steps down.
pub const DEFAULT_AGGRESSIVE_LOSS_TRIGGER: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Fixed(u8),
    Conservative,
    Aggressive,
}

impl PolicyKind {
    /// Row label used in result tables.
    pub fn label(&self) -> String {
        match self {
            PolicyKind::Fixed(dr) => format!("Fixed DR-{dr}"),
            PolicyKind::Conservative => "ECAS-Conservative".to_string(),
            PolicyKind::Aggressive => "ECAS-Aggressive".to_string(),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        !matches!(self, PolicyKind::Fixed(_))
    }

    /// Fixed DR5..DR0, then Aggressive and Conservative.
    pub fn all() -> Vec<PolicyKind> {
        let mut v: Vec<_> = (0..=phy::MAX_DR).rev().map(PolicyKind::Fixed).collect();
        v.push(PolicyKind::Aggressive);
        v.push(PolicyKind::Conservative);
        v
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Fixed(dr) => write!(f, "fixed:{dr}"),
            PolicyKind::Conservative => f.write_str("conservative"),
            PolicyKind::Aggressive => f.write_str("aggressive"),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "conservative" => Ok(PolicyKind::Conservative),
            "aggressive" => Ok(PolicyKind::Aggressive),
            other => {
                let dr = other
                    .strip_prefix("fixed:")
                    .and_then(|d| d.parse::<u8>().ok())
                    .filter(|d| *d <= phy::MAX_DR)
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "unknown policy '{other}' (fixed:<0-5>, conservative, aggressive)"
                        ))
                    })?;
                Ok(PolicyKind::Fixed(dr))
            }
        }
    }
}

/// What the server believes about one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorView {
    pub distance_m: f64,
    pub current_dr: u8,
    pub last_rain: Option<f64>,
    pub pending_losses: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pub kind: PolicyKind,
    pub sensors: BTreeMap<u32, SensorView>,
    pub aggressive_loss_trigger: u32,
}

impl PolicyState {
    /// Initial state. Fixed pins every sensor; Conservative selects for an
    /// initially dry channel; Aggressive starts at the fastest rate.
    pub fn new(
        kind: PolicyKind,
        sensors: &[SensorState],
        cfg: &RadioConfig,
        params: &ChannelParams,
    ) -> Result<Self> {
        let mut views = BTreeMap::new();
        for s in sensors {
            let dr = match kind {
                PolicyKind::Fixed(dr) => phy::dr_profile(dr)?.dr_index(),
                PolicyKind::Conservative => conservative_select(s.distance_m, 0.0, cfg, params)?,
                PolicyKind::Aggressive => phy::MAX_DR,
            };
            let view = SensorView {
                distance_m: s.distance_m,
                current_dr: dr,
                last_rain: None,
                pending_losses: 0,
            };
            if views.insert(s.sensor_id, view).is_some() {
                return Err(Error::invalid(format!("duplicate sensor id {}", s.sensor_id)));
            }
        }
        Ok(PolicyState {
            kind,
            sensors: views,
            aggressive_loss_trigger: DEFAULT_AGGRESSIVE_LOSS_TRIGGER,
        })
    }

    pub fn with_loss_trigger(mut self, losses: u32) -> Self {
        self.aggressive_loss_trigger = losses.max(1);
        self
    }

    pub fn dr(&self, sensor_id: u32) -> Option<u8> {
        self.sensors.get(&sensor_id).map(|v| v.current_dr)
    }

    /// A packet from `sensor_id` reached the server.
    pub fn on_delivery(
        &mut self,
        sensor_id: u32,
        message: &Message,
        now: f64,
        cfg: &RadioConfig,
        params: &ChannelParams,
    ) -> Result<Option<ReconfigCommand>> {
        let kind = self.kind;
        let view = self
            .sensors
            .get_mut(&sensor_id)
            .ok_or(Error::UnknownSensor(sensor_id))?;
        if let Some(rain) = message.latest(&Metric::Rain) {
            view.last_rain = Some(rain);
        }
        // Aggressive never upgrades while rain only increases; Fixed never moves.
        if kind != PolicyKind::Conservative {
            return Ok(None);
        }
        let observed = view.last_rain.unwrap_or(0.0);
        let dr = conservative_select(view.distance_m, observed, cfg, params)?;
        if dr == view.current_dr {
            return Ok(None);
        }
        view.current_dr = dr;
        Ok(Some(ReconfigCommand {
            sensor_id,
            dr: Some(dr),
            thresholds: None,
            issued_at: now,
        }))
    }

    /// The loss detector reported a missing packet.
    pub fn on_loss(&mut self, loss: &LossEvent) -> Result<Option<ReconfigCommand>> {
        match self.kind {
            PolicyKind::Aggressive => aggressive_update(self, loss),
            _ if self.sensors.contains_key(&loss.sensor_id) => Ok(None),
            _ => Err(Error::UnknownSensor(loss.sensor_id)),
        }
    }
}

/// Highest DR whose margin stays non-negative with 5 mm/h more rain than
/// observed; DR0 when none does.
pub fn conservative_select(
    distance_m: f64,
    observed_rain: f64,
    cfg: &RadioConfig,
    params: &ChannelParams,
) -> Result<u8> {
    let rain = observed_rain.max(0.0) + CONSERVATIVE_RAIN_OFFSET;
    for dr in (0..=phy::MAX_DR).rev() {
        if channel::link_margin(dr, distance_m, rain, cfg, params)? >= 0.0 {
            return Ok(dr);
        }
    }
    Ok(0)
}

/// Counts a loss against the sensor and steps its DR down by one once the
/// trigger count is reached. Losses of packets sent at a DR the server has
/// already moved away from are stale and ignored.
pub fn aggressive_update(state: &mut PolicyState, loss: &LossEvent) -> Result<Option<ReconfigCommand>> {
    let trigger = state.aggressive_loss_trigger.max(1);
    let view = state
        .sensors
        .get_mut(&loss.sensor_id)
        .ok_or(Error::UnknownSensor(loss.sensor_id))?;
    if loss.dr != view.current_dr {
        return Ok(None);
    }
    view.pending_losses += 1;
    if view.pending_losses < trigger {
        return Ok(None);
    }
    view.pending_losses = 0;
    if view.current_dr == 0 {
        return Ok(None);
    }
    view.current_dr -= 1;
    Ok(Some(ReconfigCommand {
        sensor_id: loss.sensor_id,
        dr: Some(view.current_dr),
        thresholds: None,
        issued_at: loss.detected_at,
    }))
}

// ---------------------------------------------------------------------------
// Selective bridge

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Destination {
    Local,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relevance {
    Local,
    External,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextRecord {
    pub sensor_id: u32,
    pub readings: Readings,
    pub kind: MessageKind,
    pub relevance: Option<Relevance>,
}

fn is_environmental(m: &Metric) -> bool {
    matches!(m, Metric::Rain | Metric::Temperature | Metric::Humidity)
}

/// Environmental readings stay with the local server; everything else goes
/// to the external command-and-control stub.
pub fn selective_route(record: &ContextRecord) -> Result<BTreeSet<Destination>> {
    if record.readings.is_empty() {
        return Err(Error::invalid(format!(
            "context record from sensor {} carries no readings",
            record.sensor_id
        )));
    }
    Ok(record
        .readings
        .keys()
        .map(|m| {
            if is_environmental(m) {
                Destination::Local
            } else {
                Destination::External
            }
        })
        .collect())
}

/// Splits incoming context records into the local store and the external
/// forwarding queue. Alarms are plain text records on the external side.
#[derive(Debug, Default)]
pub struct SelectiveBridge {
    pub local: Vec<ContextRecord>,
    pub external: Vec<ContextRecord>,
    pub alarms: Vec<String>,
}

impl SelectiveBridge {
    pub fn ingest(&mut self, mut record: ContextRecord) -> Result<Relevance> {
        let dest = selective_route(&record)?;
        let relevance = match (dest.contains(&Destination::Local), dest.contains(&Destination::External)) {
            (true, true) => Relevance::Both,
            (true, false) => Relevance::Local,
            _ => Relevance::External,
        };
        record.relevance = Some(relevance);
        if record.kind == MessageKind::Trigger {
            self.alarms.push(format!(
                "alarm sensor={} readings={}",
                record.sensor_id,
                format_readings(&record.readings)
            ));
        }
        if dest.contains(&Destination::External) {
            let forwarded: Readings = record
                .readings
                .iter()
                .filter(|(m, _)| !is_environmental(m))
                .map(|(m, v)| (m.clone(), *v))
                .collect();
            self.external.push(ContextRecord {
                readings: forwarded,
                ..record.clone()
            });
        }
        if dest.contains(&Destination::Local) {
            self.local.push(record);
        }
        Ok(relevance)
    }
}

fn format_readings(r: &Readings) -> String {
    if r.is_empty() {
        return "-".to_string();
    }
    r.iter().map(|(m, v)| format!("{m}={v}")).collect::<Vec<_>>().join(";")
}

fn parse_readings(s: &str) -> Result<Readings> {
    if s == "-" {
        return Ok(Readings::new());
    }
    s.split(';')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("bad reading '{kv}'")))?;
            let v: f64 = v.parse().map_err(|_| Error::invalid(format!("bad value in '{kv}'")))?;
            let m: Metric = k.parse().unwrap_or_else(|e| match e {});
            Ok((m, v))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Zone sync

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneEvent {
    pub id: u64,
    pub source_zone: String,
    pub kind: String,
    pub value: f64,
    pub location: (f64, f64),
    pub motion_hint: Option<String>,
    pub timestamp: f64,
}

/// Zones and their adjacency.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZoneRegistry {
    adjacency: BTreeMap<String, BTreeSet<String>>,
}

impl ZoneRegistry {
    pub fn add_zone(&mut self, zone: &str) {
        self.adjacency.entry(zone.to_string()).or_default();
    }

    pub fn connect(&mut self, a: &str, b: &str) {
        self.adjacency.entry(a.to_string()).or_default().insert(b.to_string());
        self.adjacency.entry(b.to_string()).or_default().insert(a.to_string());
    }

    /// `CZ-1 - CZ-2 - ... - CZ-n`.
    pub fn line(n: usize) -> Self {
        let mut r = ZoneRegistry::default();
        for i in 1..=n {
            r.add_zone(&format!("CZ-{i}"));
        }
        for i in 1..n {
            r.connect(&format!("CZ-{i}"), &format!("CZ-{}", i + 1));
        }
        r
    }

    pub fn contains(&self, zone: &str) -> bool {
        self.adjacency.contains_key(zone)
    }

    pub fn neighbours(&self, zone: &str) -> Option<&BTreeSet<String>> {
        self.adjacency.get(zone)
    }
}

/// Zones that should receive `event`: the hinted target when the phenomenon
/// is moving, otherwise the source's neighbours. Never the source itself.
pub fn sync_filter(event: &ZoneEvent, zones: &ZoneRegistry) -> Result<BTreeSet<String>> {
    let neighbours = zones
        .neighbours(&event.source_zone)
        .ok_or_else(|| Error::UnknownZone(event.source_zone.clone()))?;
    if event.value < 0.0 {
        return Err(Error::invalid(format!("zone event {} has negative value", event.id)));
    }
    match &event.motion_hint {
        Some(target) if target != &event.source_zone => {
            if !zones.contains(target) {
                return Err(Error::UnknownZone(target.clone()));
            }
            Ok(BTreeSet::from([target.clone()]))
        }
        _ => Ok(neighbours.iter().filter(|z| **z != event.source_zone).cloned().collect()),
    }
}

/// Reliable, per-sender-ordered delivery of zone events between servers.
#[derive(Debug, Default)]
pub struct ZoneNetwork {
    pub registry: ZoneRegistry,
    inboxes: BTreeMap<String, VecDeque<ZoneEvent>>,
}

impl ZoneNetwork {
    pub fn new(registry: ZoneRegistry) -> Self {
        ZoneNetwork {
            registry,
            inboxes: BTreeMap::new(),
        }
    }

    pub fn publish(&mut self, event: &ZoneEvent) -> Result<BTreeSet<String>> {
        let targets = sync_filter(event, &self.registry)?;
        for z in &targets {
            self.inboxes.entry(z.clone()).or_default().push_back(event.clone());
        }
        Ok(targets)
    }

    pub fn drain(&mut self, zone: &str) -> Vec<ZoneEvent> {
        self.inboxes.remove(zone).map(Vec::from).unwrap_or_default()
    }
}

// ---------------------------------------------------------------------------
// Line records
//
//   reconfig|<issued_at>|<sensor_id>|<dr or ->|<metric=value;... or ->
//   zone_event|<id>|<timestamp>|<source_zone>|<kind>|<value>|<x>,<y>|<hint or ->

pub fn reconfig_to_record(cmd: &ReconfigCommand) -> String {
    format!(
        "reconfig|{}|{}|{}|{}",
        cmd.issued_at,
        cmd.sensor_id,
        cmd.dr.map_or("-".to_string(), |d| d.to_string()),
        cmd.thresholds.as_ref().map_or("-".to_string(), format_readings)
    )
}

pub fn reconfig_from_record(line: &str) -> Result<ReconfigCommand> {
    let f: Vec<&str> = line.trim().split('|').collect();
    if f.len() != 5 || f[0] != "reconfig" {
        return Err(Error::invalid(format!("not a reconfig record: '{line}'")));
    }
    let bad = |what: &str| Error::invalid(format!("bad {what} in '{line}'"));
    Ok(ReconfigCommand {
        issued_at: f[1].parse().map_err(|_| bad("time"))?,
        sensor_id: f[2].parse().map_err(|_| bad("sensor id"))?,
        dr: match f[3] {
            "-" => None,
            d => Some(d.parse().map_err(|_| bad("dr"))?),
        },
        thresholds: match f[4] {
            "-" => None,
            t => Some(parse_readings(t)? as Thresholds),
        },
    })
}

pub fn zone_event_to_record(e: &ZoneEvent) -> String {
    format!(
        "zone_event|{}|{}|{}|{}|{}|{},{}|{}",
        e.id,
        e.timestamp,
        e.source_zone,
        e.kind,
        e.value,
        e.location.0,
        e.location.1,
        e.motion_hint.as_deref().unwrap_or("-")
    )
}

pub fn zone_event_from_record(line: &str) -> Result<ZoneEvent> {
    let f: Vec<&str> = line.trim().split('|').collect();
    if f.len() != 8 || f[0] != "zone_event" {
        return Err(Error::invalid(format!("not a zone event record: '{line}'")));
    }
    let bad = |what: &str| Error::invalid(format!("bad {what} in '{line}'"));
    let (x, y) = f[6].split_once(',').ok_or_else(|| bad("location"))?;
    Ok(ZoneEvent {
        id: f[1].parse().map_err(|_| bad("id"))?,
        timestamp: f[2].parse().map_err(|_| bad("timestamp"))?,
        source_zone: f[3].to_string(),
        kind: f[4].to_string(),
        value: f[5].parse().map_err(|_| bad("value"))?,
        location: (
            x.parse().map_err(|_| bad("location"))?,
            y.parse().map_err(|_| bad("location"))?,
        ),
        motion_hint: match f[7] {
            "-" => None,
            z => Some(z.to_string()),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss(sensor_id: u32, dr: u8) -> LossEvent {
        LossEvent {
            sensor_id,
            frame: 0,
            tx_start: 0.0,
            expected_at: 1.0,
            detected_at: 61.0,
            dr,
        }
    }

    fn aggressive(drs: &[(u32, u8)]) -> PolicyState {
        PolicyState {
            kind: PolicyKind::Aggressive,
            sensors: drs
                .iter()
                .map(|&(id, dr)| {
                    (
                        id,
                        SensorView {
                            distance_m: 4000.0,
                            current_dr: dr,
                            last_rain: None,
                            pending_losses: 0,
                        },
                    )
                })
                .collect(),
            aggressive_loss_trigger: 1,
        }
    }

    #[test]
    fn aggressive_steps_down_one_per_loss() {
        let mut st = aggressive(&[(1, 5)]);
        let cmd = aggressive_update(&mut st, &loss(1, 5)).unwrap().unwrap();
        assert_eq!(cmd.dr, Some(4));
        assert_eq!(st.dr(1), Some(4));

        let mut st = aggressive(&[(1, 3)]);
        aggressive_update(&mut st, &loss(1, 3)).unwrap();
        aggressive_update(&mut st, &loss(1, 2)).unwrap();
        assert_eq!(st.dr(1), Some(1));
    }

    #[test]
    fn aggressive_floor_and_stale_losses() {
        let mut st = aggressive(&[(1, 0)]);
        assert!(aggressive_update(&mut st, &loss(1, 0)).unwrap().is_none());
        assert_eq!(st.dr(1), Some(0));

        let mut st = aggressive(&[(1, 4)]);
        // packet sent at DR5 before the step-down took effect
        assert!(aggressive_update(&mut st, &loss(1, 5)).unwrap().is_none());
        assert_eq!(st.dr(1), Some(4));
        assert!(matches!(aggressive_update(&mut st, &loss(9, 4)), Err(Error::UnknownSensor(9))));
    }

    #[test]
    fn aggressive_trigger_count() {
        let mut st = aggressive(&[(1, 5)]).with_loss_trigger(3);
        assert!(aggressive_update(&mut st, &loss(1, 5)).unwrap().is_none());
        assert!(aggressive_update(&mut st, &loss(1, 5)).unwrap().is_none());
        assert_eq!(aggressive_update(&mut st, &loss(1, 5)).unwrap().unwrap().dr, Some(4));
    }

    #[test]
    fn fixed_policy_ignores_everything() {
        let sensors = [SensorState::new(1, 2000.0, 0)];
        let cfg = RadioConfig::default();
        let params = ChannelParams::default();
        let mut st = PolicyState::new(PolicyKind::Fixed(3), &sensors, &cfg, &params).unwrap();
        assert_eq!(st.dr(1), Some(3));
        assert!(st.on_loss(&loss(1, 3)).unwrap().is_none());
        let msg = Message {
            kind: MessageKind::Periodic,
            sensor_id: 1,
            timestamp: 0.0,
            samples: vec![],
            payload_bytes: 16,
        };
        assert!(st.on_delivery(1, &msg, 0.0, &cfg, &params).unwrap().is_none());
        assert_eq!(st.dr(1), Some(3));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("fixed:2".parse::<PolicyKind>().unwrap(), PolicyKind::Fixed(2));
        assert_eq!("aggressive".parse::<PolicyKind>().unwrap(), PolicyKind::Aggressive);
        assert!("fixed:6".parse::<PolicyKind>().is_err());
        assert!("greedy".parse::<PolicyKind>().is_err());
        assert_eq!(PolicyKind::Conservative.to_string(), "conservative");
        assert_eq!(PolicyKind::Fixed(0).label(), "Fixed DR-0");
    }

    fn record(metrics: &[Metric]) -> ContextRecord {
        ContextRecord {
            sensor_id: 1,
            readings: metrics.iter().map(|m| (m.clone(), 1.0)).collect(),
            kind: MessageKind::Periodic,
            relevance: None,
        }
    }

    #[test]
    fn routing() {
        use Destination::*;
        assert_eq!(selective_route(&record(&[Metric::Rain])).unwrap(), BTreeSet::from([Local]));
        assert_eq!(
            selective_route(&record(&[Metric::VitalSigns])).unwrap(),
            BTreeSet::from([External])
        );
        assert_eq!(
            selective_route(&record(&[Metric::Rain, Metric::VitalSigns])).unwrap(),
            BTreeSet::from([Local, External])
        );
        assert!(selective_route(&record(&[])).is_err());
    }

    #[test]
    fn bridge_splits_mixed_records() {
        let mut b = SelectiveBridge::default();
        let mut r = record(&[Metric::Rain, Metric::Weaponry]);
        r.kind = MessageKind::Trigger;
        assert_eq!(b.ingest(r).unwrap(), Relevance::Both);
        assert_eq!(b.local.len(), 1);
        assert_eq!(b.external.len(), 1);
        assert!(!b.external[0].readings.contains_key(&Metric::Rain));
        assert_eq!(b.alarms.len(), 1);
    }

    fn rain_event(source: &str, hint: Option<&str>) -> ZoneEvent {
        ZoneEvent {
            id: 1,
            source_zone: source.to_string(),
            kind: "rain-observation".to_string(),
            value: 20.0,
            location: (0.0, 0.0),
            motion_hint: hint.map(str::to_string),
            timestamp: 0.0,
        }
    }

    #[test]
    fn sync_targets() {
        let zones = ZoneRegistry::line(4);
        assert_eq!(
            sync_filter(&rain_event("CZ-1", Some("CZ-2")), &zones).unwrap(),
            BTreeSet::from(["CZ-2".to_string()])
        );
        assert_eq!(
            sync_filter(&rain_event("CZ-1", None), &zones).unwrap(),
            BTreeSet::from(["CZ-2".to_string()])
        );
        assert_eq!(
            sync_filter(&rain_event("CZ-2", None), &zones).unwrap(),
            BTreeSet::from(["CZ-1".to_string(), "CZ-3".to_string()])
        );
        assert!(sync_filter(&rain_event("CZ-1", None), &ZoneRegistry::line(1)).unwrap().is_empty());
        assert!(matches!(
            sync_filter(&rain_event("CZ-9", None), &zones),
            Err(Error::UnknownZone(_))
        ));
        // a hint pointing back at the source falls back to adjacency
        assert!(!sync_filter(&rain_event("CZ-3", Some("CZ-3")), &zones)
            .unwrap()
            .contains("CZ-3"));
    }

    #[test]
    fn network_delivers_in_order() {
        let mut net = ZoneNetwork::new(ZoneRegistry::line(4));
        let mut e1 = rain_event("CZ-1", Some("CZ-2"));
        net.publish(&e1).unwrap();
        e1.id = 2;
        net.publish(&e1).unwrap();
        let got: Vec<u64> = net.drain("CZ-2").iter().map(|e| e.id).collect();
        assert_eq!(got, vec![1, 2]);
        assert!(net.drain("CZ-3").is_empty());
    }

    #[test]
    fn records_round_trip() {
        let cmd = ReconfigCommand {
            sensor_id: 3,
            dr: Some(4),
            thresholds: Some(Thresholds::from([(Metric::Rain, 12.5)])),
            issued_at: 61.5,
        };
        let line = reconfig_to_record(&cmd);
        assert_eq!(line, "reconfig|61.5|3|4|rain=12.5");
        assert_eq!(reconfig_from_record(&line).unwrap(), cmd);

        let e = rain_event("CZ-1", Some("CZ-2"));
        let line = zone_event_to_record(&e);
        assert_eq!(line, "zone_event|1|0|CZ-1|rain-observation|20|0,0|CZ-2");
        assert_eq!(zone_event_from_record(&line).unwrap(), e);
        assert!(zone_event_from_record("zone_event|x").is_err());
    }
}
