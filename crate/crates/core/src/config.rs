//! Declarative run configuration.
//!
//! Every field is typed and unknown keys are rejected, so a configuration
//! either validates completely or the run does not start.

use serde::{Deserialize, Serialize};

use crate::cascade::MtwpaConfig;
use crate::error::{domain, Result};
use crate::exec::Exec;
use crate::rf::FrequencyGrid;
use crate::sweeps::{SweepSpec, DEFAULT_THETA_BOUND};
use crate::timedomain::{NoiseSpec, RunSettings};

/// Uniform frequency grid in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        if self.points == 0 {
            return Err(domain("frequency grid has no points"));
        }
        if !(self.stop_hz >= self.start_hz) {
            return Err(domain("frequency grid stop is below start"));
        }
        FrequencyGrid::linspace_hz(self.start_hz, self.stop_hz, self.points)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { start_hz: 3e9, stop_hz: 12e9, points: 901 }
    }
}

/// Pump calibration before a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSpec {
    pub target_gain_db: f64,
    #[serde(default = "default_theta_bound")]
    pub theta_bound: f64,
}

fn default_theta_bound() -> f64 {
    DEFAULT_THETA_BOUND
}

/// Flux sweep for the dispersion tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSweep {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for FluxSweep {
    fn default() -> Self {
        Self { start: 0.0, stop: 0.5, points: 101 }
    }
}

/// Network simulated in the time domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TdNetwork {
    /// Stage one alone with `cells` cells, ports matched to its impedance
    /// at `match_hz`.
    Stage1 { cells: usize, match_hz: f64 },
    /// Full device with the lumped filter.
    Device,
}

/// Time-domain experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TdExperiment {
    /// Linear small-signal S-parameters at the given tones, checked against
    /// nodal analysis.
    Sparams { freq_hz: Vec<f64> },
    /// Pump self-phase versus available pump power (dBm).
    SpmPhase { powers_dbm: Vec<f64> },
    /// Gain and compression at `signal_hz` versus signal power (dBm).
    Gain { signal_hz: f64, signal_dbm: Vec<f64> },
    /// Input noise with the pump on or off.
    Noise { noise: NoiseSpec, pump_on: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeDomainSpec {
    pub network: TdNetwork,
    pub experiment: TdExperiment,
    #[serde(default)]
    pub settings: RunSettings,
    /// Replace every Kerr inductor by its linear part.
    #[serde(default)]
    pub linear: bool,
}

/// Y-factor fit input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFitSpec {
    /// CSV with columns temperature_k, freq_hz, power_w.
    pub data: String,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: MtwpaConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub calibrate: Option<CalibrateSpec>,
    /// Force the pump off regardless of `device.pump_power_w`.
    #[serde(default)]
    pub pump_off: bool,
    #[serde(default)]
    pub flux_sweep: FluxSweep,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub timedomain: Option<TimeDomainSpec>,
    #[serde(default)]
    pub noisefit: Option<NoiseFitSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub exec: Exec,
    /// Default output directory when none is given on the command line.
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl RunConfig {
    /// The paper device with default grids and nothing else enabled.
    pub fn paper() -> Self {
        Self {
            device: MtwpaConfig::paper(),
            grid: GridSpec::default(),
            calibrate: Some(CalibrateSpec { target_gain_db: 20.0, theta_bound: DEFAULT_THETA_BOUND }),
            pump_off: false,
            flux_sweep: FluxSweep::default(),
            sweep: None,
            timedomain: None,
            noisefit: None,
            seed: 0,
            exec: Exec::Parallel,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.grid.grid()?;
        if self.flux_sweep.points == 0 || !(self.flux_sweep.stop >= self.flux_sweep.start) {
            return Err(domain("flux sweep must be nonempty and ordered"));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        if let Some(c) = &self.calibrate {
            if !(c.target_gain_db.is_finite() && c.theta_bound > 0.0) {
                return Err(domain("calibration needs a finite target and a positive θ bound"));
            }
        }
        if let Some(nf) = &self.noisefit {
            if !(nf.bandwidth_hz > 0.0) {
                return Err(domain("noise-fit bandwidth must be positive"));
            }
        }
        Ok(())
    }
}
