//! Property bodies and generators shared by the property suite and the
//! acceptance runner.
#![allow(dead_code)]

use std::sync::OnceLock;

use ecas_core::channel::{self, ChannelParams};
use ecas_core::control::{PolicyKind, PolicyState};
use ecas_core::phy::{self, RadioConfig};
use ecas_core::sensor::SensorState;
use ecas_core::sim::{Engine, EventKind, RoundConfig, RoundOutcome};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const DISTANCES: [f64; 3] = [2000.0, 4000.0, 6000.0];
/// Short rounds keep randomized runs cheap; policies behave the same per round.
pub const ROUND_S: f64 = 3600.0;

type Check = Result<(), TestCaseError>;

pub fn params() -> &'static ChannelParams {
    static P: OnceLock<ChannelParams> = OnceLock::new();
    P.get_or_init(|| channel::calibrate(&channel::reference_milestones(), &RadioConfig::default()).unwrap())
}

pub fn sensors() -> Vec<SensorState> {
    DISTANCES
        .iter()
        .enumerate()
        .map(|(i, &d)| SensorState::new(i as u32 + 1, d, 0))
        .collect()
}

pub fn run(kind: PolicyKind, rains: &[f64], trigger: u32) -> Vec<RoundOutcome> {
    let radio = RadioConfig::default();
    let mut state = PolicyState::new(kind, &sensors(), &radio, params())
        .unwrap()
        .with_loss_trigger(trigger);
    let mut out = Vec::new();
    for &rain in rains {
        let cfg = RoundConfig {
            record_trace: true,
            ..RoundConfig::new(rain, ROUND_S, sensors(), params().clone())
        };
        let o = Engine::new(cfg, state).unwrap().run().unwrap();
        state = o.policy.clone();
        out.push(o);
    }
    out
}

/// Rain that starts at or below 5 mm/h and rises by at most 5 per round.
pub fn monotone_rain(max_rounds: usize) -> impl Strategy<Value = Vec<f64>> {
    (0.0f64..=5.0, prop::collection::vec(0.0f64..=5.0, 1..max_rounds)).prop_map(|(start, steps)| {
        let mut r = start;
        let mut v = vec![r];
        for s in steps {
            r += s;
            v.push(r);
        }
        v
    })
}

pub fn any_policy() -> impl Strategy<Value = PolicyKind> {
    prop::sample::select(PolicyKind::all())
}

pub fn margin_args() -> impl Strategy<Value = (u8, f64, f64, f64, f64)> {
    (0u8..=5, 1000.0f64..10000.0, 0.0f64..5000.0, 0.0f64..200.0, 0.0f64..50.0)
}

pub fn margin_is_monotone((dr, d, dd, rain, more_rain): (u8, f64, f64, f64, f64)) -> Check {
    let cfg = RadioConfig::default();
    let p = params();
    let m = channel::link_margin(dr, d, rain, &cfg, p).unwrap();
    prop_assert!(channel::link_margin(dr, d, rain + more_rain, &cfg, p).unwrap() <= m);
    prop_assert!(channel::link_margin(dr, d + dd, rain, &cfg, p).unwrap() <= m);
    if dr > 0 {
        // a slower rate is never less robust
        prop_assert!(channel::link_margin(dr - 1, d, rain, &cfg, p).unwrap() >= m);
    }
    Ok(())
}

pub fn dry_args() -> impl Strategy<Value = (f64, f64, f64)> {
    (1000.0f64..20000.0, 0.0f64..1.0, 0.3f64..2.0)
}

pub fn dry_air_is_free((d, k, alpha): (f64, f64, f64)) -> Check {
    let p = ChannelParams {
        rain_k: k,
        rain_alpha: alpha,
        ..ChannelParams::default()
    };
    prop_assert_eq!(channel::rain_attenuation(0.0, d, &p).unwrap(), 0.0);
    Ok(())
}

pub fn airtime_args() -> impl Strategy<Value = (u16, u8)> {
    (0u16..=255, 1u8..=5)
}

pub fn airtime_doubles((payload, dr): (u16, u8)) -> Check {
    let cfg = RadioConfig {
        payload_bytes: payload,
        ..RadioConfig::default()
    };
    let fast = phy::dr_profile(dr).unwrap();
    let slow = phy::dr_profile(dr - 1).unwrap();
    prop_assert_eq!(slow.symbol_time(), 2.0 * fast.symbol_time());
    let (tf, ts) = (phy::time_on_air(fast, &cfg), phy::time_on_air(slow, &cfg));
    prop_assert!(ts > tf);
    // doubling symbol time is offset by at most the payload-block savings
    prop_assert!(ts / tf > 1.5 && ts / tf < 2.5, "ratio {}", ts / tf);
    if phy::payload_symbols(slow, &cfg) == phy::payload_symbols(fast, &cfg) {
        prop_assert_eq!(ts, 2.0 * tf);
    }
    Ok(())
}

pub fn interval_args() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.001f64..5.0, 0.001f64..1.0, 1.0f64..600.0)
}

pub fn min_interval_holds((toa, duty, period): (f64, f64, f64)) -> Check {
    let i = phy::min_send_interval(toa, duty, period).unwrap();
    prop_assert!(i >= period);
    prop_assert!(i * duty >= toa * (1.0 - 1e-12));
    Ok(())
}

pub fn engine_respects_duty_cycle((kind, rain): (PolicyKind, f64)) -> Check {
    let out = &run(kind, &[rain], 200)[0];
    let cfg = RadioConfig::default();
    for id in 1..=3u32 {
        let mine: Vec<_> = out.messages.iter().filter(|m| m.sensor_id == id).collect();
        for w in mine.windows(2) {
            let toa = phy::time_on_air(phy::dr_profile(w[0].dr).unwrap(), &cfg);
            let gap = w[1].time - w[0].time;
            prop_assert!(gap + 1e-9 >= toa / cfg.duty_cycle_limit, "gap {gap} after DR{}", w[0].dr);
            prop_assert!(gap + 1e-9 >= 60.0);
        }
    }
    Ok(())
}

pub fn runs_are_deterministic((kind, rains): (PolicyKind, Vec<f64>)) -> Check {
    let a = run(kind, &rains, 3);
    let b = run(kind, &rains, 3);
    for (x, y) in a.iter().zip(&b) {
        prop_assert_eq!(&x.events, &y.events);
        prop_assert_eq!(&x.messages, &y.messages);
        prop_assert_eq!(&x.stats, &y.stats);
    }
    Ok(())
}

pub fn sent_is_received_plus_lost((kind, rain): (PolicyKind, f64)) -> Check {
    let out = &run(kind, &[rain], 1)[0];
    let cfg = RadioConfig::default();
    for s in &out.stats.sensors {
        let mine: Vec<_> = out.messages.iter().filter(|m| m.sensor_id == s.sensor_id).collect();
        let received = mine.iter().filter(|m| m.received).count() as u64;
        let lost = mine.iter().filter(|m| !m.received).count() as u64;
        prop_assert_eq!(mine.len() as u64, s.sent);
        prop_assert_eq!(received, s.received);
        prop_assert_eq!(s.sent, received + lost);
        // every loss whose grace period ends inside the round is detected
        let detectable = mine
            .iter()
            .filter(|m| {
                let toa = phy::time_on_air(phy::dr_profile(m.dr).unwrap(), &cfg);
                !m.received && m.time + toa + 60.0 <= ROUND_S
            })
            .count();
        let detected = out.losses.iter().filter(|l| l.sensor_id == s.sensor_id).count();
        prop_assert_eq!(detected, detectable);
    }
    Ok(())
}

/// With at most 5 mm/h more rain per round, Conservative only loses
/// packets on links that even DR0 cannot close.
pub fn conservative_never_loses_a_closable_link(rains: Vec<f64>) -> Check {
    let cfg = RadioConfig::default();
    for out in run(PolicyKind::Conservative, &rains, 1) {
        for m in out.messages.iter().filter(|m| !m.received) {
            let d = DISTANCES[m.sensor_id as usize - 1];
            let dr0 = channel::link_margin(0, d, out.stats.rain_mm_h, &cfg, params()).unwrap();
            prop_assert!(
                dr0 < 0.0,
                "sensor {} lost a packet at DR{} in {} mm/h",
                m.sensor_id,
                m.dr,
                out.stats.rain_mm_h
            );
            prop_assert_eq!(m.dr, 0);
        }
    }
    Ok(())
}

pub fn aggressive_never_raises_the_rate((rains, trigger): (Vec<f64>, u32)) -> Check {
    let outs = run(PolicyKind::Aggressive, &rains, trigger);
    for id in 1..=3u32 {
        let drs: Vec<u8> = outs
            .iter()
            .flat_map(|o| o.messages.iter().filter(move |m| m.sensor_id == id).map(|m| m.dr))
            .collect();
        prop_assert!(drs.windows(2).all(|w| w[1] <= w[0]), "sensor {id}: {drs:?}");
    }
    for o in &outs {
        for e in o.events.iter().filter(|e| e.kind == EventKind::ReconfigDelivery) {
            prop_assert!(e.time <= ROUND_S);
        }
    }
    Ok(())
}
