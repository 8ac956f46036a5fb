//! Noise in photon units, Y-factor fitting and input back-action.
//!
//! Photon numbers follow `N = k_B·T/(ħω)`. The half photon of vacuum noise
//! is not folded into `N`; it enters only through the source term
//! `(ħω/2)·coth(ħω/2k_BT)`.
//!
//! The Y-factor model for the power measured with a thermal load at `T` is
//! `P = G·B·[(ħω/2)·coth(ħω/2k_BT) + k_B·T_HEMT]`, linear in `G` and
//! `G·k_B·T_HEMT`.

use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B};
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::units::{db_from_power_ratio, hz_from_omega, omega_from_hz};

pub fn photons_from_temperature(t: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(domain(format!("frequency must be positive, got {omega}")));
    }
    if !(t >= 0.0) {
        return Err(domain(format!("temperature must be nonnegative, got {t}")));
    }
    Ok(K_B * t / (HBAR * omega))
}

pub fn temperature_from_photons(n: f64, omega: f64) -> f64 {
    n * HBAR * omega / K_B
}

/// Thermal plus vacuum power (ħω/2)·coth(ħω/2k_BT)·B delivered by a matched
/// load at temperature `t` into bandwidth `bandwidth` (W).
pub fn quantum_source_power(t: f64, omega: f64, bandwidth: f64) -> f64 {
    let e = HBAR * omega / 2.0;
    if t <= 0.0 {
        return e * bandwidth;
    }
    let x = e / (K_B * t);
    // coth x = 1 + 2/(e^{2x} − 1), accurate at both ends
    e * (1.0 + 2.0 / (2.0 * x).exp_m1()) * bandwidth
}

/// One Y-factor observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YRecord {
    pub temperature_k: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
    pub power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YFactorDataset {
    pub records: Vec<YRecord>,
    /// Measurement bandwidth (Hz).
    pub bandwidth: f64,
}

/// Fit at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisePoint {
    pub omega: f64,
    pub t_hemt: f64,
    /// Linear system gain.
    pub gain: f64,
    /// RMS of the log-power residuals.
    pub residual_rms: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseFit {
    pub points: Vec<NoisePoint>,
}

impl YFactorDataset {
    /// Synthetic records from the model itself, optionally with independent
    /// multiplicative noise `(1 + rel·ε)`, ε standard normal.
    pub fn synthetic(
        temperatures: &[f64],
        omegas: &[f64],
        t_hemt: f64,
        gain: f64,
        bandwidth: f64,
        noise: Option<(f64, u64)>,
    ) -> Self {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(noise.map_or(0, |n| n.1));
        let mut records = Vec::with_capacity(temperatures.len() * omegas.len());
        for &w in omegas {
            for &t in temperatures {
                let p = model_power(t, w, t_hemt, gain, bandwidth);
                let f = match noise {
                    Some((rel, _)) => {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        1.0 + rel * e
                    }
                    None => 1.0,
                };
                records.push(YRecord { temperature_k: t, omega: w, power_w: p * f });
            }
        }
        Self { records, bandwidth }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) {
            return Err(domain("bandwidth must be positive"));
        }
        for r in &self.records {
            if !(r.power_w > 0.0 && r.power_w.is_finite()) {
                return Err(domain(format!("power must be positive, got {}", r.power_w)));
            }
            if !(r.temperature_k >= 0.0 && r.omega > 0.0) {
                return Err(domain("temperatures must be nonnegative and frequencies positive"));
            }
        }
        Ok(())
    }

    /// Parses `temperature_k,freq_hz,power_w` rows after a header line.
    /// Blank lines and `#` comments are skipped; `line` in a parse error is
    /// 1-based.
    pub fn from_csv(text: &str, bandwidth: f64) -> Result<Self> {
        const HEADER: [&str; 3] = ["temperature_k", "freq_hz", "power_w"];
        let mut records = Vec::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if !header_seen {
                if cells != HEADER {
                    return Err(Error::Parse { line: i + 1, message: format!("expected header {}", HEADER.join(",")) });
                }
                header_seen = true;
                continue;
            }
            if cells.len() != 3 {
                return Err(Error::Parse { line: i + 1, message: format!("expected 3 fields, found {}", cells.len()) });
            }
            let mut v = [0.0; 3];
            for (k, c) in cells.iter().enumerate() {
                v[k] = c.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("{} is not a number: {c:?}", HEADER[k]),
                })?;
            }
            records.push(YRecord { temperature_k: v[0], omega: omega_from_hz(v[1]), power_w: v[2] });
        }
        if !header_seen {
            return Err(Error::Parse { line: 1, message: "empty dataset".into() });
        }
        let d = Self { records, bandwidth };
        d.validate()?;
        Ok(d)
    }

    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> =
            self.records.iter().map(|r| vec![r.temperature_k, hz_from_omega(r.omega), r.power_w]).collect();
        crate::io::csv_string(&["temperature_k", "freq_hz", "power_w"], &rows)
    }

    /// Distinct frequencies in ascending order.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self.records.iter().map(|r| r.omega).collect();
        w.sort_by(f64::total_cmp);
        w.dedup();
        w
    }
}

/// Model power with load temperature `t`.
pub fn model_power(t: f64, omega: f64, t_hemt: f64, gain: f64, bandwidth: f64) -> f64 {
    gain * (quantum_source_power(t, omega, bandwidth) + K_B * t_hemt * bandwidth)
}

/// Classic two-load Y-factor solution: `(t_hemt, gain)`.
pub fn two_point_y_factor(
    (t_cold, p_cold): (f64, f64),
    (t_hot, p_hot): (f64, f64),
    omega: f64,
    bandwidth: f64,
) -> Result<(f64, f64)> {
    let qc = quantum_source_power(t_cold, omega, bandwidth);
    let qh = quantum_source_power(t_hot, omega, bandwidth);
    if qh == qc {
        return Err(Error::Conditioning("hot and cold loads have equal source power".into()));
    }
    let y = p_hot / p_cold;
    if y == 1.0 {
        return Err(Error::Conditioning("Y factor is exactly one".into()));
    }
    let t_hemt = (qh - y * qc) / ((y - 1.0) * K_B * bandwidth);
    let gain = (p_hot - p_cold) / (qh - qc);
    Ok((t_hemt, gain))
}

/// Smallest temperature ratio accepted for a fit.
const MIN_TEMPERATURE_SPAN: f64 = 3.0;

/// Per-frequency fit of `(T_HEMT, G)` minimizing log-power residuals.
impl NoiseFit {
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .points
            .iter()
            .map(|p| {
                let n = photons_from_temperature(p.t_hemt, p.omega).unwrap_or(f64::NAN);
                vec![hz_from_omega(p.omega), p.t_hemt, n, db_from_power_ratio(p.gain), p.residual_rms, p.n_points as f64]
            })
            .collect();
        crate::io::csv_string(&["freq_hz", "t_hemt_k", "n_hemt_photons", "gain_db", "residual_rms", "n_points"], &rows)
    }
}

pub fn fit_y_factor(data: &YFactorDataset, exec: Exec) -> Result<NoiseFit> {
    data.validate()?;
    let freqs = data.frequencies();
    let points = exec.try_map(&freqs, |&w| {
        let recs: Vec<(f64, f64)> =
            data.records.iter().filter(|r| r.omega == w).map(|r| (r.temperature_k, r.power_w)).collect();
        fit_one(&recs, w, data.bandwidth)
    })?;
    Ok(NoiseFit { points })
}

fn fit_one(recs: &[(f64, f64)], omega: f64, bandwidth: f64) -> Result<NoisePoint> {
    if recs.len() < 2 {
        return Err(Error::Conditioning(format!("{} temperature point(s) at {omega:.6e} rad/s", recs.len())));
    }
    let t_min = recs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let t_max = recs.iter().map(|r| r.0).fold(0.0, f64::max);
    if !(t_max >= MIN_TEMPERATURE_SPAN * t_min) {
        return Err(Error::Conditioning(format!(
            "temperatures span {t_min}..{t_max} K, less than a factor of {MIN_TEMPERATURE_SPAN}"
        )));
    }
    if recs.len() == 2 {
        let (lo, hi) = if recs[0].0 < recs[1].0 { (recs[0], recs[1]) } else { (recs[1], recs[0]) };
        let (t_hemt, gain) = two_point_y_factor(lo, hi, omega, bandwidth)?;
        return Ok(NoisePoint { omega, t_hemt, gain, residual_rms: 0.0, n_points: 2 });
    }
    // P = a·q(T) + b with a = G, b = G·k_B·T_HEMT·B. Weighted linear least
    // squares with weights 1/P² starts the log-residual Gauss–Newton.
    let q: Vec<f64> = recs.iter().map(|r| quantum_source_power(r.0, omega, bandwidth)).collect();
    let solve = |w: &dyn Fn(usize) -> f64| -> Result<(f64, f64)> {
        let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, r) in recs.iter().enumerate() {
            let wt = w(i);
            s11 += wt * q[i] * q[i];
            s12 += wt * q[i];
            s22 += wt;
            r1 += wt * q[i] * r.1;
            r2 += wt * r.1;
        }
        let det = s11 * s22 - s12 * s12;
        if !(det.abs() > 1e-12 * s11 * s22) {
            return Err(Error::Conditioning("normal equations are singular".into()));
        }
        Ok(((r1 * s22 - r2 * s12) / det, (s11 * r2 - s12 * r1) / det))
    };
    let (mut a, mut b) = solve(&|i| recs[i].1.powi(-2))?;
    for _ in 0..20 {
        // linearize ln(a·q + b) about the current model
        let m: Vec<f64> = q.iter().map(|&qi| a * qi + b).collect();
        if m.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Conditioning("fit produced nonpositive model power".into()));
        }
        let (na, nb) = {
            let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, r) in recs.iter().enumerate() {
                let (ja, jb) = (q[i] / m[i], 1.0 / m[i]);
                let res = (r.1 / m[i]).ln();
                s11 += ja * ja;
                s12 += ja * jb;
                s22 += jb * jb;
                r1 += ja * res;
                r2 += jb * res;
            }
            let det = s11 * s22 - s12 * s12;
            if !(det.abs() > 1e-12 * s11 * s22) {
                return Err(Error::Conditioning("Gauss–Newton step is singular".into()));
            }
            ((r1 * s22 - r2 * s12) / det, (s11 * r2 - s12 * r1) / det)
        };
        a += na;
        b += nb;
        if na.abs() <= 1e-15 * a.abs() && nb.abs() <= 1e-15 * b.abs().max(1e-300) {
            break;
        }
    }
    if !(a > 0.0) {
        return Err(Error::Conditioning("fitted gain is not positive".into()));
    }
    let res2: f64 = recs.iter().zip(&q).map(|(r, &qi)| (r.1 / (a * qi + b)).ln().powi(2)).sum();
    Ok(NoisePoint {
        omega,
        t_hemt: b / (a * K_B * bandwidth),
        gain: a,
        residual_rms: (res2 / recs.len() as f64).sqrt(),
        n_points: recs.len(),
    })
}

/// System and amplifier noise from the SNR improvement: `(t_sys, t_twpa)`
/// with `t_sys = G_noise·T_HEMT/G_s` and `t_twpa = T_HEMT·(G_noise − 1)/G_s`.
pub fn snr_improvement_noise(g_signal: f64, g_noise: f64, t_hemt: f64) -> Result<(f64, f64)> {
    if !(g_signal > 0.0 && g_noise > 0.0) {
        return Err(domain("gains must be positive"));
    }
    if g_noise < 1.0 {
        return Err(domain(format!("noise gain {g_noise} below one is unphysical")));
    }
    Ok((g_noise * t_hemt / g_signal, t_hemt * (g_noise - 1.0) / g_signal))
}

/// Input noise (photons): the half-photon floor plus amplified stage-one
/// noise `G1·(1 + added)` reflected at an interface of the given return loss.
pub fn input_backaction_estimate(stage1_gain: f64, interface_return_loss_db: f64, added_noise_photons: f64) -> f64 {
    0.5 + 10f64.powf(-interface_return_loss_db / 10.0) * stage1_gain * (1.0 + added_noise_photons)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::omega_from_hz;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn photon_units() {
        let w = omega_from_hz(7e9);
        // oracle: 1.380649e-23·4 / (1.054571817e-34·2π·7e9)
        let n = photons_from_temperature(4.0, w).unwrap();
        assert!((n - 11.906).abs() < 5e-3, "{n}");
        assert_eq!(photons_from_temperature(0.0, w).unwrap(), 0.0);
        assert_relative_eq!(photons_from_temperature(1.0, 2.0 * w).unwrap(), n / 8.0, max_relative = 1e-14);
        assert!(photons_from_temperature(1.0, 0.0).is_err());
    }

    #[test]
    fn source_power_limits() {
        let w = omega_from_hz(7e9);
        assert_relative_eq!(quantum_source_power(0.0, w, 1e6), HBAR * w / 2.0 * 1e6);
        assert_relative_eq!(quantum_source_power(1e-4, w, 1e6), HBAR * w / 2.0 * 1e6, max_relative = 1e-12);
        let hot = quantum_source_power(1e3, w, 1.0);
        assert_relative_eq!(hot, K_B * 1e3, max_relative = 1e-6);
        // 1 K, 7 GHz, 1 MHz: x = ħω/2k_BT = 0.16798..., coth x·ħω/2·B
        let x = HBAR * w / (2.0 * K_B);
        let expected = HBAR * w / 2.0 * (x.cosh() / x.sinh()) * 1e6;
        assert_relative_eq!(quantum_source_power(1.0, w, 1e6), expected, max_relative = 1e-13);
    }

    #[test]
    fn noiseless_round_trip() {
        let temps: Vec<f64> = (0..8).map(|i| 0.15 * (4.0f64 / 0.15).powf(i as f64 / 7.0)).collect();
        let ws: Vec<f64> = [4e9, 6e9, 8e9].iter().map(|&f| omega_from_hz(f)).collect();
        let d = YFactorDataset::synthetic(&temps, &ws, 2.0, 1e6, 1e6, None);
        let fit = fit_y_factor(&d, Exec::Sequential).unwrap();
        for p in &fit.points {
            assert_relative_eq!(p.t_hemt, 2.0, max_relative = 1e-9);
            assert_relative_eq!(p.gain, 1e6, max_relative = 1e-9);
        }
    }

    #[test]
    fn two_points_match_closed_form() {
        let w = omega_from_hz(6e9);
        let d = YFactorDataset::synthetic(&[0.15, 4.0], &[w], 3.0, 1e5, 1e6, Some((0.01, 3)));
        let fit = fit_y_factor(&d, Exec::Sequential).unwrap();
        let r = &d.records;
        let (t, g) = two_point_y_factor((r[0].temperature_k, r[0].power_w), (r[1].temperature_k, r[1].power_w), w, 1e6)
            .unwrap();
        assert_eq!(fit.points[0].t_hemt, t);
        assert_eq!(fit.points[0].gain, g);
    }

    #[test]
    fn narrow_span_is_conditioning_error() {
        let w = omega_from_hz(6e9);
        let d = YFactorDataset::synthetic(&[1.0, 1.5, 2.0], &[w], 3.0, 1e5, 1e6, None);
        let e = fit_y_factor(&d, Exec::Sequential).unwrap_err();
        assert!(matches!(e, Error::Conditioning(_)));
        assert!(e.is_numerical());
    }

    #[test]
    fn snr_relations() {
        let (sys, twpa) = snr_improvement_noise(100.0, 7.8, 25.0).unwrap();
        assert_relative_eq!(twpa, 1.7, max_relative = 1e-12);
        assert_relative_eq!(sys - twpa, 25.0 / 100.0, max_relative = 1e-12);
        assert_eq!(snr_improvement_noise(100.0, 1.0, 25.0).unwrap().1, 0.0);
        assert_eq!(snr_improvement_noise(50.0, 50.0, 3.0).unwrap().0, 3.0);
        assert!(snr_improvement_noise(100.0, 0.9, 25.0).is_err());
    }

    #[test]
    fn backaction_examples() {
        assert!((input_backaction_estimate(10.0, 15.0, 0.0) - 0.816).abs() < 1e-3);
        assert_eq!(input_backaction_estimate(1.0, f64::INFINITY, 0.0), 0.5);
    }

    proptest! {
        #[test]
        fn backaction_monotone(g in 1.0f64..1e3, rl in 0.0f64..40.0, a in 0.0f64..5.0, d in 1e-3f64..1.0) {
            let base = input_backaction_estimate(g, rl, a);
            prop_assert!(input_backaction_estimate(g * (1.0 + d), rl, a) > base);
            prop_assert!(input_backaction_estimate(g, rl - d, a) > base);
            prop_assert!(input_backaction_estimate(g, rl, a + d) > base);
        }

        #[test]
        fn snr_identity(gs in 1.0f64..1e4, gn in 1.0f64..1e4, t in 0.1f64..50.0) {
            let (sys, twpa) = snr_improvement_noise(gs, gn, t).unwrap();
            prop_assert!((sys - twpa - t / gs).abs() <= 1e-12 * sys.max(1.0));
            if gn > 1.0 {
                prop_assert!(twpa < sys);
            }
        }

        #[test]
        fn classical_limit(f in 1e9f64..1e10, scale in 20.0f64..200.0) {
            let w = omega_from_hz(f);
            let t = scale * HBAR * w / K_B;
            let n = photons_from_temperature(t, w).unwrap();
            let p = quantum_source_power(t, w, 1.0) / (HBAR * w);
            prop_assert!((p / n - 1.0).abs() < 0.01);
        }

        #[test]
        fn fit_inverts_generator(t_hemt in 1.0f64..20.0, g_db in 40.0f64..80.0, f in 4e9f64..10e9) {
            let temps = [0.15, 0.3, 0.6, 1.2, 2.4, 4.0];
            let w = omega_from_hz(f);
            let gain = 10f64.powf(g_db / 10.0);
            let d = YFactorDataset::synthetic(&temps, &[w], t_hemt, gain, 1e6, None);
            let p = fit_y_factor(&d, Exec::Sequential).unwrap().points[0];
            prop_assert!((p.t_hemt / t_hemt - 1.0).abs() < 1e-9);
            prop_assert!((p.gain / gain - 1.0).abs() < 1e-9);
        }
    }
}
