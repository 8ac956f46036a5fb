//! Sequential against parallel execution on the workloads that fan out:
//! a forward-gain spectrum, a filter-impedance sweep and a batch of
//! Y-factor fits.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mtwpa::cascade::{forward_gain_spectrum, MtwpaConfig};
use mtwpa::noise::{fit_y_factor, YFactorDataset};
use mtwpa::rf::FrequencyGrid;
use mtwpa::sweeps::{sweep_filter_impedance, SweepSpec, SweepVariable};
use mtwpa::units::{omega_from_hz, watts_from_dbm};
use mtwpa::Exec;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn pumped() -> MtwpaConfig {
    MtwpaConfig::paper().with_pump_power(watts_from_dbm(-78.0))
}

fn spectrum(c: &mut Criterion) {
    let cfg = pumped();
    let grid = FrequencyGrid::linspace_hz(3e9, 12e9, 2001).unwrap();
    let mut g = c.benchmark_group("forward_gain_spectrum");
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| forward_gain_spectrum(&cfg, &grid, exec).unwrap())
        });
    }
    g.finish();
}

fn impedance_sweep(c: &mut Criterion) {
    let cfg = pumped();
    let spec = SweepSpec::new(SweepVariable::FilterImpedance, 30.0, 60.0, 2.0);
    let mut g = c.benchmark_group("sweep_filter_impedance");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep_filter_impedance(&cfg, &spec, exec).unwrap())
        });
    }
    g.finish();
}

fn yfactor(c: &mut Criterion) {
    let temps: Vec<f64> = (0..64).map(|i| 0.15 + 3.85 * i as f64 / 63.0).collect();
    let omegas: Vec<f64> = (0..200).map(|i| omega_from_hz(4e9 + 1e7 * i as f64)).collect();
    let data = YFactorDataset::synthetic(&temps, &omegas, 2.0, 1e6, 1e6, Some((0.01, 1)));
    let mut g = c.benchmark_group("fit_y_factor");
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| fit_y_factor(&data, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, spectrum, impedance_sweep, yfactor);
criterion_main!(benches);
