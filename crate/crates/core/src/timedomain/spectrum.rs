//! Windowed spectral estimates of recorded series.
//!
//! Phasors follow `x(t) = Re{X·e^{jωt}}` with `t` measured from the start
//! of the window.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Largest tolerated distance of a tone from an FFT bin (bins).
pub const LEAKAGE_TOL_BINS: f64 = 1e-3;

const FLAT_TOP: [f64; 5] = [0.215_578_95, 0.416_631_58, 0.277_263_158, 0.083_578_947, 0.006_947_368];

/// Periodic flat-top window of length `n`.
pub fn flat_top(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = 2.0 * PI * i as f64 / n as f64;
            FLAT_TOP[0] - FLAT_TOP[1] * x.cos() + FLAT_TOP[2] * (2.0 * x).cos() - FLAT_TOP[3] * (3.0 * x).cos()
                + FLAT_TOP[4] * (4.0 * x).cos()
        })
        .collect()
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Bin index of `freq_hz` in a window of `n` samples, or a leakage error.
pub fn tone_bin(freq_hz: f64, n: usize, dt: f64) -> Result<usize> {
    let x = freq_hz * n as f64 * dt;
    let off = x - x.round();
    if off.abs() > LEAKAGE_TOL_BINS {
        return Err(Error::Leakage { freq_hz, offset_bins: off });
    }
    Ok(x.round() as usize)
}

/// Complex amplitude of the tone at `freq_hz` over the first `n` samples,
/// flat-top windowed.
pub fn tone_phasor(x: &[f64], n: usize, dt: f64, freq_hz: f64) -> Result<Complex64> {
    let k = tone_bin(freq_hz, n, dt)?;
    let w = flat_top(n);
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, (&xi, &wi)) in x[..n].iter().zip(&w).enumerate() {
        acc += Complex64::from_polar(xi * wi, -2.0 * PI * (k * i % n) as f64 / n as f64);
    }
    Ok(acc * (2.0 / (n as f64 * FLAT_TOP[0])))
}

/// One-sided flat-top amplitude spectrum of the first `n` samples:
/// `(freq_hz, phasor)` per bin up to Nyquist.
pub fn amplitude_spectrum(x: &[f64], n: usize, dt: f64) -> (Vec<f64>, Vec<Complex64>) {
    let w = flat_top(n);
    let mut buf: Vec<Complex64> = x[..n].iter().zip(&w).map(|(a, b)| Complex64::new(a * b, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 2.0 / (n as f64 * FLAT_TOP[0]);
    let m = n / 2 + 1;
    let f: Vec<f64> = (0..m).map(|k| k as f64 / (n as f64 * dt)).collect();
    let mut s: Vec<Complex64> = buf[..m].iter().map(|v| v * scale).collect();
    s[0] *= 0.5;
    (f, s)
}

/// Hann-windowed power of `num` over that of `den` in `band` (Hz), summed
/// over consecutive windows of `n` samples, skipping bins within two of any
/// frequency in `exclude`.
pub fn band_power_ratio(num: &[f64], den: &[f64], n: usize, dt: f64, band: (f64, f64), exclude: &[f64]) -> f64 {
    let w = hann(n);
    let df = 1.0 / (n as f64 * dt);
    let bins: Vec<usize> = ((band.0 / df).ceil() as usize..=(band.1 / df).floor() as usize)
        .filter(|&k| exclude.iter().all(|&f| (f / df - k as f64).abs() > 2.0))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let power = |x: &[f64]| -> f64 {
        x.chunks_exact(n)
            .map(|seg| {
                let mut buf: Vec<Complex64> = seg.iter().zip(&w).map(|(a, b)| Complex64::new(a * b, 0.0)).collect();
                fft.process(&mut buf);
                bins.iter().map(|&k| buf[k].norm_sqr()).sum::<f64>()
            })
            .sum()
    };
    power(num) / power(den)
}
