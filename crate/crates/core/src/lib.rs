//! Deterministic discrete-event simulation of a three-sensor LoRa deployment
//! under increasing rain, with fixed data-rate baselines and two rain-adaptive
//! data-rate controllers (Conservative and Aggressive).
//!
//! Module map:
//!
//! * [`phy`] data-rate profiles, time-on-air, duty-cycle spacing.
//! * [`channel`] log-distance path loss, rain attenuation, link margin and
//!   breakpoint calibration.
//! * [`sensor`] field-node state machine (Periodic/Trigger messages).
//! * [`sim`] the per-round event engine.
//! * [`control`] server-side policies, selective routing and zone sync.
//! * [`harness`] sweeps, reports and reference verification.

// `!(x >= lo)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod control;
pub mod error;
pub mod harness;
pub mod phy;
pub mod sensor;
pub mod sim;

pub use error::{Error, Result};
