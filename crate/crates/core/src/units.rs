//! Decibel and frequency conversions.

use std::f64::consts::PI;

pub fn db_from_power_ratio(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn power_ratio_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Power in watts from dBm.
pub fn watts_from_dbm(dbm: f64) -> f64 {
    1e-3 * power_ratio_from_db(dbm)
}

pub fn dbm_from_watts(w: f64) -> f64 {
    db_from_power_ratio(w / 1e-3)
}

pub fn omega_from_hz(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn hz_from_omega(w: f64) -> f64 {
    w / (2.0 * PI)
}
