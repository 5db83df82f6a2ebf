//! Plain-text key/value form of [`ChannelParams`].
//!
//! ```text
//! # comment
//! pl0_db = 131.412345
//! d0_m = 1000.000000
//! exponent = 2.000000
//! rain_k = 0.019434134
//! rain_alpha = 0.880000
//! antenna_gains_db = 0.000000
//! sensitivity_dr0_dbm = -129.250000
//! ...
//! sensitivity_dr5_dbm = -123.000000
//! ```
//!
//! Every key is required exactly once. `rain_k` is written with 9 decimals,
//! everything else with 6.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::ChannelParams;
use crate::error::{Error, Result};
use crate::phy::DR_COUNT;

const SCALAR_KEYS: [&str; 6] = [
    "pl0_db",
    "d0_m",
    "exponent",
    "rain_k",
    "rain_alpha",
    "antenna_gains_db",
];

fn sensitivity_key(dr: usize) -> String {
    format!("sensitivity_dr{dr}_dbm")
}

fn fmt_value(key: &str, v: f64) -> String {
    if key == "rain_k" {
        format!("{v:.9}")
    } else {
        format!("{v:.6}")
    }
}

pub fn format_params(p: &ChannelParams) -> String {
    let mut out = String::from("# ecas-sim channel parameters\n");
    let scalars = [
        p.pl0_db,
        p.d0_m,
        p.exponent,
        p.rain_k,
        p.rain_alpha,
        p.antenna_gains_db,
    ];
    for (key, v) in SCALAR_KEYS.iter().zip(scalars) {
        let _ = writeln!(out, "{key} = {}", fmt_value(key, v));
    }
    for (dr, v) in p.sensitivity_table.iter().enumerate() {
        let key = sensitivity_key(dr);
        let _ = writeln!(out, "{key} = {}", fmt_value(&key, *v));
    }
    out
}

pub fn parse_params(text: &str, origin: &Path) -> Result<ChannelParams> {
    let mut values = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(origin, i + 1, "expected 'key = value'"))?;
        let key = key.trim();
        let known = SCALAR_KEYS.contains(&key) || (0..DR_COUNT).any(|dr| sensitivity_key(dr) == key);
        if !known {
            return Err(Error::parse(origin, i + 1, format!("unknown key '{key}'")));
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::parse(origin, i + 1, format!("bad number for '{key}'")))?;
        if values.insert(key.to_string(), v).is_some() {
            return Err(Error::parse(origin, i + 1, format!("duplicate key '{key}'")));
        }
    }
    let get = |key: &str| {
        values
            .get(key)
            .copied()
            .ok_or_else(|| Error::parse(origin, 0, format!("missing key '{key}'")))
    };
    let mut sensitivity_table = [0.0; DR_COUNT];
    for (dr, s) in sensitivity_table.iter_mut().enumerate() {
        *s = get(&sensitivity_key(dr))?;
    }
    let params = ChannelParams {
        pl0_db: get("pl0_db")?,
        d0_m: get("d0_m")?,
        exponent: get("exponent")?,
        rain_k: get("rain_k")?,
        rain_alpha: get("rain_alpha")?,
        sensitivity_table,
        antenna_gains_db: get("antenna_gains_db")?,
    };
    params.validate()?;
    Ok(params)
}

pub fn read_params(path: &Path) -> Result<ChannelParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_params(&text, path)
}

pub fn write_params(path: &Path, params: &ChannelParams) -> Result<()> {
    std::fs::write(path, format_params(params)).map_err(|e| Error::io(path, e))
}

/// Rounds every field to its on-disk precision, so freshly calibrated and
/// reloaded parameters are bit-identical.
pub(crate) fn quantize(p: &ChannelParams) -> ChannelParams {
    let q = |key: &str, v: f64| -> f64 { fmt_value(key, v).parse().unwrap_or(v) };
    let mut table = p.sensitivity_table;
    for (dr, s) in table.iter_mut().enumerate() {
        *s = q(&sensitivity_key(dr), *s);
    }
    ChannelParams {
        pl0_db: q("pl0_db", p.pl0_db),
        d0_m: q("d0_m", p.d0_m),
        exponent: q("exponent", p.exponent),
        rain_k: q("rain_k", p.rain_k),
        rain_alpha: q("rain_alpha", p.rain_alpha),
        sensitivity_table: table,
        antenna_gains_db: q("antenna_gains_db", p.antenna_gains_db),
    }
}
