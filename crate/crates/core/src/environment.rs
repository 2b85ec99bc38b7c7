//! Disturbance and noise processes applied to the simulated device: the
//! constrained temperature random walk, phase-shifter crosstalk sweeps,
//! once-per-scenario fabrication offsets, photodiode measurement noise and
//! DAC quantization. Everything is reproducible from (spec, seed).

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::resonator::{DeviceModel, DeviceError, RingParams};

/// Instantaneous environment seen by the device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentState {
    pub temperature_c: f64,
    /// Differential phase-shifter voltage (V).
    pub vp: f64,
    pub time_index: usize,
}

impl EnvironmentState {
    pub fn reference(temperature_c: f64) -> Self {
        Self { temperature_c, vp: 0.0, time_index: 0 }
    }
}

/// Which disturbance drives a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    TemperatureWalk,
    CrosstalkSweep,
    StaticOffset,
    None,
}

/// Noise and disturbance parameters. Fields not used by the selected kind
/// are ignored but still validated for sanity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Temperature step magnitude (degC per step) for the random walk.
    pub step_size: f64,
    pub n_steps: usize,
    /// Imposed endpoint: final minus initial temperature (degC).
    pub net_drift: f64,
    /// Walk starting temperature (degC).
    pub base_temperature_c: f64,
    /// Phase-shifter sweep range (V) for the crosstalk disturbance.
    pub sweep_start_v: f64,
    pub sweep_end_v: f64,
    /// Photodiode noise, one standard deviation as a fraction of the
    /// monitor's full scale.
    pub measurement_sigma: f64,
    /// DAC resolution for every heater channel.
    pub dac_bits: u32,
    pub dac_vmax: f64,
    pub quantize: bool,
    /// Once-per-scenario cold-resonance offsets (pm, one sigma).
    pub static_offset_sigma_pm: f64,
    /// Once-per-scenario relative disparity of the thermal and phase-shifter
    /// response coefficients (one sigma). Models the drift between the state
    /// of the device when tuning curves were characterized and its state
    /// during a run; the in-situ lock is insensitive to it, curve-based
    /// correction is not.
    pub response_sigma: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKind::TemperatureWalk,
            step_size: 0.1,
            n_steps: 60,
            net_drift: 1.0,
            base_temperature_c: 30.0,
            sweep_start_v: 0.0,
            sweep_end_v: 6.5,
            measurement_sigma: 0.005,
            dac_bits: 16,
            dac_vmax: 10.0,
            quantize: true,
            static_offset_sigma_pm: 25.0,
            response_sigma: 0.08,
        }
    }
}

impl NoiseSpec {
    /// A spec with every stochastic and quantization effect disabled.
    pub fn noiseless() -> Self {
        Self {
            measurement_sigma: 0.0,
            quantize: false,
            static_offset_sigma_pm: 0.0,
            response_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            issues.push("noise.step_size must be > 0".into());
        }
        if self.kind == NoiseKind::TemperatureWalk {
            if let Err(e) = self.walk_step_counts() {
                issues.push(format!("noise: {e}"));
            }
        }
        if !self.measurement_sigma.is_finite() || self.measurement_sigma < 0.0 {
            issues.push("noise.measurement_sigma must be >= 0".into());
        }
        if !(8..=24).contains(&self.dac_bits) {
            issues.push("noise.dac_bits must lie in [8, 24]".into());
        }
        if !self.dac_vmax.is_finite() || self.dac_vmax <= 0.0 {
            issues.push("noise.dac_vmax must be > 0".into());
        }
        if self.static_offset_sigma_pm < 0.0 || !self.static_offset_sigma_pm.is_finite() {
            issues.push("noise.static_offset_sigma_pm must be >= 0".into());
        }
        if self.response_sigma < 0.0 || !self.response_sigma.is_finite() {
            issues.push("noise.response_sigma must be >= 0".into());
        }
        issues
    }

    fn walk_step_counts(&self) -> Result<(usize, usize), NoiseError> {
        let ratio = self.net_drift / self.step_size;
        let k = ratio.round();
        if (ratio - k).abs() > 1e-9 {
            return Err(NoiseError::Infeasible(
                "net_drift must be an integer multiple of step_size".into(),
            ));
        }
        let k = k as i64;
        let n = self.n_steps as i64;
        if k.abs() > n || (n - k).rem_euclid(2) != 0 {
            return Err(NoiseError::Infeasible(format!(
                "cannot reach net drift of {k} steps in {n} steps of equal size"
            )));
        }
        let up = ((n + k) / 2) as usize;
        Ok((up, self.n_steps - up))
    }
}

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("infeasible noise spec: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// Constrained random walk in temperature: every step is exactly
/// `step_size` up or down, the up/down multiset is fixed by the endpoint
/// constraint and uniformly shuffled. Step arithmetic is kept in integers so
/// the endpoint is exact.
pub fn gen_temperature_walk(spec: &NoiseSpec, seed: u64) -> Result<Vec<f64>, NoiseError> {
    let (up, down) = spec.walk_step_counts()?;
    let mut steps: Vec<i64> = std::iter::repeat(1)
        .take(up)
        .chain(std::iter::repeat(-1).take(down))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    steps.shuffle(&mut rng);
    let mut level: i64 = 0;
    Ok(steps
        .iter()
        .map(|s| {
            level += s;
            spec.base_temperature_c + level as f64 * spec.step_size
        })
        .collect())
}

/// Uniform grid of phase-shifter voltages from `v_start` to `v_end`
/// inclusive. The fringe abscissa downstream is Vp^2; the grid itself is
/// uniform in voltage.
pub fn gen_crosstalk_sweep(v_start: f64, v_end: f64, n_points: usize) -> Vec<f64> {
    assert!(n_points >= 2, "sweep needs at least two points");
    let step = (v_end - v_start) / (n_points - 1) as f64;
    (0..n_points).map(|i| v_start + i as f64 * step).collect()
}

/// One photodiode reading: the true power plus zero-mean Gaussian noise of
/// `measurement_sigma * full_scale`, averaged over `n_samples` repeated
/// samples (modeled by scaling the deviation with 1/sqrt(n)).
pub fn measure_power(
    true_power: f64,
    full_scale: f64,
    spec: &NoiseSpec,
    n_samples: u32,
    rng: &mut impl Rng,
) -> f64 {
    assert!(spec.measurement_sigma >= 0.0);
    if spec.measurement_sigma == 0.0 {
        return true_power;
    }
    let sigma = spec.measurement_sigma * full_scale / (n_samples.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    true_power + normal.sample(rng)
}

/// A voltage snapped to the DAC grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedVoltage {
    pub value: f64,
    /// Set when the request fell outside [0, v_max] and was clamped.
    pub clamped: bool,
}

/// Nearest of the 2^bits uniform levels on [0, v_max]. Idempotent.
pub fn quantize_voltage(v: f64, dac_bits: u32, v_max: f64) -> QuantizedVoltage {
    let clamped = !(0.0..=v_max).contains(&v);
    let v = v.clamp(0.0, v_max);
    let levels = (1u64 << dac_bits) - 1;
    let step = v_max / levels as f64;
    QuantizedVoltage { value: (v / step).round() * step, clamped }
}

/// Fabrication/staleness disparities drawn once per scenario instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticOffsets {
    /// Shift of each cold resonance (pm).
    pub lambda0_shift_pm: Vec<f64>,
    /// Multiplier on each ring's thermal response.
    pub thermal_scale: Vec<f64>,
    /// Multiplier on each ring's phase-shifter crosstalk.
    pub phase_scale: Vec<f64>,
}

impl StaticOffsets {
    pub fn none(n_rings: usize) -> Self {
        Self {
            lambda0_shift_pm: vec![0.0; n_rings],
            thermal_scale: vec![1.0; n_rings],
            phase_scale: vec![1.0; n_rings],
        }
    }
}

/// Draw the per-scenario static offsets.
pub fn gen_static_offsets(spec: &NoiseSpec, n_rings: usize, seed: u64) -> StaticOffsets {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, sigma: f64| -> f64 {
        if sigma == 0.0 {
            0.0
        } else {
            Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
        }
    };
    let lambda0_shift_pm =
        (0..n_rings).map(|_| draw(&mut rng, spec.static_offset_sigma_pm)).collect();
    let thermal_scale =
        (0..n_rings).map(|_| 1.0 + draw(&mut rng, spec.response_sigma)).collect();
    let phase_scale = (0..n_rings).map(|_| 1.0 + draw(&mut rng, spec.response_sigma)).collect();
    StaticOffsets { lambda0_shift_pm, thermal_scale, phase_scale }
}

/// Apply static offsets to a nominal device, yielding the instance a
/// scenario actually runs against.
pub fn apply_static_offsets(
    device: &DeviceModel,
    offsets: &StaticOffsets,
) -> Result<DeviceModel, DeviceError> {
    let rings: Vec<RingParams> = device
        .rings()
        .iter()
        .enumerate()
        .map(|(i, r)| RingParams {
            lambda0_nm: r.lambda0_nm + offsets.lambda0_shift_pm[i] / crate::resonator::PM_PER_NM,
            gamma_width_pm: r.gamma_width_pm,
            gamma_tune: r.gamma_tune,
            dlambda_dt: r.dlambda_dt * offsets.thermal_scale[i],
        })
        .collect();
    let phase_crosstalk: Vec<f64> = device
        .phase_crosstalk()
        .iter()
        .enumerate()
        .map(|(i, &a)| a * offsets.phase_scale[i])
        .collect();
    DeviceModel::new(
        rings,
        device.cross_tune().to_vec(),
        phase_crosstalk,
        device.topology(),
        device.lambda_laser_nm(),
        device.t_ref_c(),
    )
}
