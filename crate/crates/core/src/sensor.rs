//! Field-node behaviour: Periodic vs Trigger classification, local
//! buffering, duty-cycle-limited send scheduling and reconfiguration.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::phy::{self, RadioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorKind {
    /// Monitoring Sensor, fixed position.
    Monitoring,
    /// Field Object Monitoring Sensor, attached to a person or vehicle.
    FieldObject,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Rain,
    Temperature,
    Humidity,
    VitalSigns,
    Weaponry,
    Location,
    Other(String),
}

impl Metric {
    pub fn name(&self) -> &str {
        match self {
            Metric::Rain => "rain",
            Metric::Temperature => "temperature",
            Metric::Humidity => "humidity",
            Metric::VitalSigns => "vital_signs",
            Metric::Weaponry => "weaponry",
            Metric::Location => "location",
            Metric::Other(s) => s,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "rain" => Metric::Rain,
            "temperature" => Metric::Temperature,
            "humidity" => Metric::Humidity,
            "vital_signs" => Metric::VitalSigns,
            "weaponry" => Metric::Weaponry,
            "location" => Metric::Location,
            other => Metric::Other(other.to_string()),
        })
    }
}

pub type Readings = BTreeMap<Metric, f64>;
pub type Thresholds = BTreeMap<Metric, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    Trigger,
    Periodic,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::Trigger => "trigger",
            MessageKind::Periodic => "periodic",
        })
    }
}

/// Trigger iff some reading strictly exceeds its threshold. Metrics without
/// a threshold never trigger.
pub fn classify(readings: &Readings, thresholds: &Thresholds) -> MessageKind {
    let exceeded = readings
        .iter()
        .any(|(m, v)| thresholds.get(m).is_some_and(|limit| v > limit));
    if exceeded {
        MessageKind::Trigger
    } else {
        MessageKind::Periodic
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub values: Readings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub kind: MessageKind,
    pub sensor_id: u32,
    pub timestamp: f64,
    pub samples: Vec<Sample>,
    pub payload_bytes: u16,
}

impl Message {
    /// Most recent value of `metric` carried by the message.
    pub fn latest(&self, metric: &Metric) -> Option<f64> {
        self.samples.iter().rev().find_map(|s| s.values.get(metric).copied())
    }
}

/// The sensor asks to be woken for a transmission at `at`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SendAction {
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconfigCommand {
    pub sensor_id: u32,
    pub dr: Option<u8>,
    pub thresholds: Option<Thresholds>,
    pub issued_at: f64,
}

/// A transmission that has left the sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub message: Message,
    pub dr: u8,
    pub start: f64,
    pub toa: f64,
}

#[derive(Debug, Clone)]
pub struct SensorState {
    pub sensor_id: u32,
    pub kind: SensorKind,
    pub distance_m: f64,
    pub zone: String,
    pub current_dr: u8,
    pub thresholds: Thresholds,
    pub app_period: f64,
    pub payload_bytes: u16,
    /// Earliest time the duty cycle allows the next transmission.
    next_allowed_tx: f64,
    last_tx: Option<f64>,
    tx_scheduled: bool,
    next_periodic_slot: f64,
    last_event: f64,
    buffer: Vec<Sample>,
    outbox: VecDeque<Message>,
    rejected: Vec<String>,
}

impl SensorState {
    pub fn new(sensor_id: u32, distance_m: f64, current_dr: u8) -> Self {
        SensorState {
            sensor_id,
            kind: SensorKind::Monitoring,
            distance_m,
            zone: "CZ-1".to_string(),
            current_dr: current_dr.min(phy::MAX_DR),
            thresholds: Thresholds::new(),
            app_period: 60.0,
            payload_bytes: phy::CALIBRATED_PAYLOAD_BYTES,
            next_allowed_tx: 0.0,
            last_tx: None,
            tx_scheduled: false,
            next_periodic_slot: 0.0,
            last_event: 0.0,
            buffer: Vec::new(),
            outbox: VecDeque::new(),
            rejected: Vec::new(),
        }
    }

    pub fn with_thresholds(mut self, thresholds: Thresholds) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn with_app_period(mut self, app_period: f64) -> Self {
        self.app_period = app_period;
        self
    }

    pub fn with_kind(mut self, kind: SensorKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn outbox(&self) -> impl Iterator<Item = &Message> {
        self.outbox.iter()
    }

    pub fn buffered(&self) -> &[Sample] {
        &self.buffer
    }

    pub fn last_tx(&self) -> Option<f64> {
        self.last_tx
    }

    /// Reconfiguration commands that were refused, oldest first.
    pub fn rejected_commands(&self) -> &[String] {
        &self.rejected
    }

    pub fn is_tx_scheduled(&self) -> bool {
        self.tx_scheduled
    }

    /// Earliest time `>= now` at which the head of the outbox may go out, or
    /// `None` with an empty outbox.
    pub fn next_tx_time(&self, now: f64) -> Option<f64> {
        if self.outbox.is_empty() {
            None
        } else {
            Some(now.max(self.next_allowed_tx))
        }
    }

    /// Handles one measurement. Trigger readings are queued ahead of any
    /// Periodic traffic; Periodic readings are buffered and flushed as one
    /// bulk message at the next period boundary.
    pub fn on_measurement(&mut self, readings: Readings, now: f64) -> Vec<SendAction> {
        debug_assert!(now >= self.last_event, "sensor clock went backwards");
        self.last_event = now;
        let sample = Sample { time: now, values: readings };

        match classify(&sample.values, &self.thresholds) {
            MessageKind::Trigger => {
                let msg = Message {
                    kind: MessageKind::Trigger,
                    sensor_id: self.sensor_id,
                    timestamp: now,
                    samples: vec![sample],
                    payload_bytes: self.payload_bytes,
                };
                let pos = self
                    .outbox
                    .iter()
                    .position(|m| m.kind == MessageKind::Periodic)
                    .unwrap_or(self.outbox.len());
                self.outbox.insert(pos, msg);
            }
            MessageKind::Periodic => {
                self.buffer.push(sample);
                if now < self.next_periodic_slot {
                    return Vec::new();
                }
                self.next_periodic_slot = ((now / self.app_period).floor() + 1.0) * self.app_period;
                let samples = std::mem::take(&mut self.buffer);
                match self.outbox.back_mut() {
                    Some(m) if m.kind == MessageKind::Periodic => m.samples.extend(samples),
                    _ => self.outbox.push_back(Message {
                        kind: MessageKind::Periodic,
                        sensor_id: self.sensor_id,
                        timestamp: now,
                        samples,
                        payload_bytes: self.payload_bytes,
                    }),
                }
            }
        }
        self.schedule(now).into_iter().collect()
    }

    fn schedule(&mut self, now: f64) -> Option<SendAction> {
        if self.tx_scheduled {
            return None;
        }
        let at = self.next_tx_time(now)?;
        self.tx_scheduled = true;
        Some(SendAction { at })
    }

    /// Sends the head of the outbox at `now` if the transmission completes
    /// by `deadline`. Returns the transmission and, when more messages are
    /// waiting, the follow-up send action.
    pub fn transmit(
        &mut self,
        now: f64,
        deadline: f64,
        cfg: &RadioConfig,
    ) -> Result<(Option<Transmission>, Option<SendAction>)> {
        self.tx_scheduled = false;
        self.last_event = self.last_event.max(now);
        if self.outbox.is_empty() {
            return Ok((None, None));
        }
        if now < self.next_allowed_tx {
            return Ok((None, self.schedule(now)));
        }
        let profile = phy::dr_profile(self.current_dr)?;
        let radio = RadioConfig {
            payload_bytes: self.payload_bytes,
            ..cfg.clone()
        };
        let toa = phy::time_on_air(profile, &radio);
        if now + toa > deadline {
            return Ok((None, None));
        }
        let message = self.outbox.pop_front().expect("outbox checked non-empty");
        self.last_tx = Some(now);
        self.next_allowed_tx = now + phy::min_send_interval(toa, cfg.duty_cycle_limit, self.app_period)?;
        let tx = Transmission {
            message,
            dr: self.current_dr,
            start: now,
            toa,
        };
        Ok((Some(tx), self.schedule(now)))
    }

    /// Applies a DR and/or threshold update. The new DR is used from the
    /// next transmission on; the duty budget is untouched. Invalid commands
    /// leave the state unchanged and are recorded.
    pub fn apply_reconfig(&mut self, cmd: &ReconfigCommand) -> Result<()> {
        if cmd.sensor_id != self.sensor_id {
            let err = Error::UnknownSensor(cmd.sensor_id);
            self.rejected.push(err.to_string());
            return Err(err);
        }
        if let Some(dr) = cmd.dr {
            if dr > phy::MAX_DR {
                let err = Error::invalid(format!("reconfiguration to DR{dr} rejected"));
                self.rejected.push(err.to_string());
                return Err(err);
            }
        }
        if let Some(dr) = cmd.dr {
            self.current_dr = dr;
        }
        if let Some(t) = &cmd.thresholds {
            self.thresholds = t.clone();
        }
        Ok(())
    }

    /// Clears per-round queues but keeps configuration; the duty budget is
    /// relative to the new round's clock.
    pub fn reset_for_round(&mut self) {
        self.next_allowed_tx = 0.0;
        self.last_tx = None;
        self.tx_scheduled = false;
        self.next_periodic_slot = 0.0;
        self.last_event = 0.0;
        self.buffer.clear();
        self.outbox.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rain(v: f64) -> Readings {
        Readings::from([(Metric::Rain, v)])
    }

    fn rain_limit(v: f64) -> Thresholds {
        Thresholds::from([(Metric::Rain, v)])
    }

    #[test]
    fn classification_is_strict() {
        let t = rain_limit(20.0);
        assert_eq!(classify(&rain(5.0), &t), MessageKind::Periodic);
        assert_eq!(classify(&rain(25.0), &t), MessageKind::Trigger);
        assert_eq!(classify(&rain(20.0), &t), MessageKind::Periodic);
        // no threshold: exempt
        let r = Readings::from([(Metric::VitalSigns, 180.0)]);
        assert_eq!(classify(&r, &t), MessageKind::Periodic);
    }

    #[test]
    fn trigger_sends_immediately_subject_to_duty() {
        let cfg = RadioConfig::default();
        let mut s = SensorState::new(1, 2000.0, 0).with_thresholds(rain_limit(20.0));
        // first periodic at t=0 goes out at once
        assert_eq!(s.on_measurement(rain(1.0), 0.0), vec![SendAction { at: 0.0 }]);
        let (tx, next) = s.transmit(0.0, 1e9, &cfg).unwrap();
        let tx = tx.unwrap();
        assert!(next.is_none());
        let budget = 0.0 + tx.toa / cfg.duty_cycle_limit;
        // exceedance mid-period waits for the duty budget
        let acts = s.on_measurement(rain(30.0), 30.0);
        assert_eq!(acts.len(), 1);
        assert!((acts[0].at - budget).abs() < 1e-9);
        assert_eq!(s.outbox().next().unwrap().kind, MessageKind::Trigger);
    }

    #[test]
    fn periodic_readings_are_buffered_until_the_boundary() {
        let mut s = SensorState::new(1, 2000.0, 3);
        assert_eq!(s.on_measurement(rain(1.0), 0.0).len(), 1);
        let cfg = RadioConfig::default();
        s.transmit(0.0, 1e9, &cfg).unwrap();
        assert!(s.on_measurement(rain(1.0), 20.0).is_empty());
        assert!(s.on_measurement(rain(2.0), 40.0).is_empty());
        assert_eq!(s.buffered().len(), 2);
        let acts = s.on_measurement(rain(3.0), 60.0);
        assert_eq!(acts, vec![SendAction { at: 60.0 }]);
        let msg = s.outbox().next().unwrap();
        assert_eq!(msg.kind, MessageKind::Periodic);
        assert_eq!(msg.samples.len(), 3);
        assert_eq!(msg.latest(&Metric::Rain), Some(3.0));
    }

    #[test]
    fn trigger_jumps_ahead_of_periodic() {
        let mut s = SensorState::new(1, 2000.0, 0).with_thresholds(rain_limit(10.0));
        s.on_measurement(rain(1.0), 0.0);
        s.on_measurement(rain(50.0), 0.0);
        let kinds: Vec<_> = s.outbox().map(|m| m.kind).collect();
        assert_eq!(kinds, vec![MessageKind::Trigger, MessageKind::Periodic]);
        let (tx, next) = s.transmit(0.0, 1e9, &RadioConfig::default()).unwrap();
        assert_eq!(tx.unwrap().message.kind, MessageKind::Trigger);
        assert!(next.unwrap().at > 0.0);
    }

    #[test]
    fn reconfiguration_rules() {
        let mut s = SensorState::new(7, 4000.0, 5);
        let cmd = |dr| ReconfigCommand {
            sensor_id: 7,
            dr: Some(dr),
            thresholds: None,
            issued_at: 0.0,
        };
        s.apply_reconfig(&cmd(4)).unwrap();
        assert_eq!(s.current_dr, 4);
        s.apply_reconfig(&cmd(4)).unwrap();
        assert_eq!(s.current_dr, 4);
        assert!(s.apply_reconfig(&cmd(7)).is_err());
        assert_eq!(s.current_dr, 4);
        assert_eq!(s.rejected_commands().len(), 1);

        let t = ReconfigCommand {
            sensor_id: 7,
            dr: None,
            thresholds: Some(rain_limit(15.0)),
            issued_at: 0.0,
        };
        s.apply_reconfig(&t).unwrap();
        assert_eq!(s.thresholds, rain_limit(15.0));
        assert_eq!(s.current_dr, 4);
    }

    #[test]
    fn reconfig_keeps_duty_budget() {
        let cfg = RadioConfig::default();
        let mut s = SensorState::new(1, 2000.0, 0);
        s.on_measurement(rain(0.0), 0.0);
        let (tx, _) = s.transmit(0.0, 1e9, &cfg).unwrap();
        let budget = tx.unwrap().toa / cfg.duty_cycle_limit;
        s.apply_reconfig(&ReconfigCommand {
            sensor_id: 1,
            dr: Some(5),
            thresholds: None,
            issued_at: 1.0,
        })
        .unwrap();
        let acts = s.on_measurement(rain(0.0), 60.0);
        assert!((acts[0].at - budget).abs() < 1e-9);
        // sending before the budget is refused and rescheduled
        let (tx, next) = s.transmit(60.0, 1e9, &cfg).unwrap();
        assert!(tx.is_none());
        assert!((next.unwrap().at - budget).abs() < 1e-9);
    }

    #[test]
    fn transmission_must_fit_the_window() {
        let cfg = RadioConfig::default();
        let mut s = SensorState::new(1, 2000.0, 0);
        s.on_measurement(rain(0.0), 0.0);
        let (tx, _) = s.transmit(0.0, 0.5, &cfg).unwrap();
        assert!(tx.is_none());
        assert_eq!(s.outbox().count(), 1);
    }
}
