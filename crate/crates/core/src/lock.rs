//! Closed-loop frequency locking: static alignment from random cold starts,
//! dynamic stabilization against a drifting environment, the pre-determined
//! tuning-curve baseline it is compared against, and stability metrics.
//!
//! The controller never sees the simulated ring detunings. It only measures
//! monitor photodiode powers (noisy, DAC-quantized drive) and minimizes
//! them; residual detunings are recorded from the ground-truth model purely
//! as diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{
    apply_static_offsets, gen_crosstalk_sweep, gen_static_offsets, gen_temperature_walk,
    measure_power, quantize_voltage, EnvironmentState, NoiseError, NoiseKind, NoiseSpec,
};
use crate::resonator::{
    drop_power, notch_power, AlignmentError, DeviceError, DeviceModel, Topology, VoltageVector,
    PM_PER_NM,
};
use crate::seeds::substream;
use crate::simplex::{fit_curve, minimize, OptResult, SimplexConfig, SimplexError, TracePoint};

const STREAM_OFFSETS: u64 = 0xA1;
const STREAM_SCHEDULE: u64 = 0xA2;
const STREAM_INIT: u64 = 0xA3;
const STREAM_MEASURE: u64 = 0xA4;

/// How the controller reacts to environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockMode {
    /// Re-minimize the measured powers at every step (closed loop).
    InSitu,
    /// Set heater voltages from pre-characterized tuning curves.
    TuningCurveBaseline,
    /// Hold the heater voltages of the initial alignment.
    Uncorrected,
}

/// Linear heater-voltage-versus-temperature model `V(T) = slope*T + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCurve {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearCurve {
    pub fn eval(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }
}

/// Quadratic heater-voltage-versus-phase-voltage model
/// `V(Vp) = a2*Vp^2 + a1*Vp + a0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCurve {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
}

impl QuadraticCurve {
    pub fn eval(&self, vp: f64) -> f64 {
        (self.a2 * vp + self.a1) * vp + self.a0
    }
}

/// Pre-characterized tuning curves for both disturbance variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningCurveSet {
    pub temperature: Vec<LinearCurve>,
    pub phase: Vec<QuadraticCurve>,
}

impl TuningCurveSet {
    /// The reference characterization of the two-ring device.
    pub fn reference_two_ring() -> Self {
        Self {
            temperature: vec![
                LinearCurve { slope: -0.06090, intercept: 5.568 },
                LinearCurve { slope: -0.06166, intercept: 5.546 },
            ],
            phase: vec![
                QuadraticCurve { a2: -0.0007192, a1: -0.0003439, a0: 3.746 },
                QuadraticCurve { a2: -0.0008414, a1: -0.000576, a0: 3.702 },
            ],
        }
    }
}

impl Default for TuningCurveSet {
    fn default() -> Self {
        Self::reference_two_ring()
    }
}

/// Controller settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockConfig {
    /// Cold-start voltages are drawn from Normal(init_means, init_sigma).
    pub init_means: Vec<f64>,
    pub init_sigma: f64,
    /// A run is a success when every residual detuning lands within this (pm).
    pub success_detuning_tol_pm: f64,
    /// Initial simplex edge for warm restarts inside the dynamic loop (V).
    pub warm_start_scale: f64,
    /// Initial simplex edge for cold starts (V).
    pub cold_start_scale: f64,
    /// Evaluation budget per environment step in the dynamic loop.
    pub per_step_budget: usize,
    /// Evaluation budget for a static alignment run.
    pub static_max_evals: usize,
    /// Iteration bound entering the success criterion.
    pub max_iterations: usize,
    /// Photodiode samples integrated per objective evaluation; averaging
    /// scales the per-evaluation noise by 1/sqrt(n).
    pub samples_per_eval: u32,
    pub lock_mode: LockMode,
    pub f_tol: f64,
    pub x_tol: f64,
    pub record_trace: bool,
    /// Skip re-optimization when the measured power already sits at the
    /// locked level (within half the success tolerance).
    pub deadband: bool,
    pub curves: TuningCurveSet,
}

impl Default for LockConfig {
    fn default() -> Self {
        Self {
            init_means: vec![3.60, 3.56],
            init_sigma: 0.2,
            success_detuning_tol_pm: 1.0,
            warm_start_scale: 0.05,
            cold_start_scale: 0.2,
            per_step_budget: 100,
            static_max_evals: 400,
            max_iterations: 200,
            samples_per_eval: 2000,
            lock_mode: LockMode::InSitu,
            f_tol: 1e-6,
            x_tol: 1e-4,
            record_trace: false,
            deadband: true,
            curves: TuningCurveSet::default(),
        }
    }
}

impl LockConfig {
    /// Tolerances for noise-free reference runs, tight enough to compare
    /// against the closed-form solution at the sub-0.1 pm level.
    pub fn noiseless_reference() -> Self {
        Self { f_tol: 1e-10, x_tol: 1e-6, ..Self::default() }
    }

    pub fn validate(&self, n_rings: usize) -> Vec<String> {
        let mut issues = Vec::new();
        if self.init_means.len() != n_rings {
            issues.push(format!("lock.init_means must have {n_rings} entries"));
        }
        if !(self.init_sigma.is_finite() && self.init_sigma >= 0.0) {
            issues.push("lock.init_sigma must be >= 0".into());
        }
        if !(self.success_detuning_tol_pm > 0.0) {
            issues.push("lock.success_detuning_tol_pm must be > 0".into());
        }
        if self.per_step_budget < n_rings + 1 {
            issues.push(format!("lock.per_step_budget must be at least {}", n_rings + 1));
        }
        if self.samples_per_eval == 0 {
            issues.push("lock.samples_per_eval must be >= 1".into());
        }
        if self.curves.temperature.len() != n_rings || self.curves.phase.len() != n_rings {
            issues.push(format!("lock.curves must cover {n_rings} rings"));
        }
        issues
    }
}

#[derive(Debug, Error)]
pub enum LockError {
    #[error("device cannot be aligned: {0}")]
    Infeasible(#[from] AlignmentError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("bad lock configuration: {}", .0.join("; "))]
    BadConfig(Vec<String>),
    #[error("degenerate calibration sweep (zero width or fewer than two points)")]
    DegenerateSweep,
    #[error("calibration failed: {failed} of {total} alignment points failed")]
    CalibrationFailed { failed: usize, total: usize },
    #[error("stability record is empty")]
    EmptyRecord,
}

/// Outcome of a single alignment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LockResult {
    pub volts: VoltageVector,
    pub n_iterations: usize,
    pub n_evals: usize,
    pub success: bool,
    /// Ground-truth ring detunings at the applied voltages (pm).
    pub residual_detunings_pm: Vec<f64>,
    pub objective_final: f64,
    pub trace: Option<Vec<TracePoint>>,
}

/// One entry of a dynamic-stabilization trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub time_index: usize,
    pub temperature_c: f64,
    pub vp: f64,
    pub volts: Vec<f64>,
    pub detunings_pm: Vec<f64>,
    /// All residuals within the success tolerance after this step.
    pub locked: bool,
    /// The step consumed its whole evaluation budget without converging.
    pub budget_exhausted: bool,
    pub n_evals: usize,
}

/// Trajectory of one dynamic run plus its initial alignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub mode: LockMode,
    pub initial: LockResult,
    pub steps: Vec<StepRecord>,
}

/// Summary statistics of a trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub per_ring_std_pm: Vec<f64>,
    pub per_ring_peak_to_peak_pm: Vec<f64>,
    /// Largest per-ring standard deviation (pm).
    pub worst_std_pm: f64,
    /// Largest per-ring peak-to-peak variation (pm).
    pub total_variation_pm: f64,
    /// Worst per-ring std over that ring's linewidth.
    pub fractional_drift: f64,
    /// Paired uncorrected total variation over this record's worst std.
    pub improvement_factor: Option<f64>,
    pub unlocked_steps: usize,
    pub budget_exhausted_steps: usize,
}

/// Measurement chain between the optimizer and the simulated device: clamps
/// the candidate drive, quantizes it onto the DAC grid, reads the monitor
/// photodiodes with noise and folds them into the scalar error signal.
struct PowerMonitor<'a> {
    device: &'a DeviceModel,
    noise: &'a NoiseSpec,
    state: EnvironmentState,
    samples_per_eval: u32,
    rng: ChaCha8Rng,
}

impl PowerMonitor<'_> {
    fn apply(&self, raw: &[f64]) -> VoltageVector {
        let v = raw
            .iter()
            .map(|&x| {
                let clamped = x.clamp(0.0, self.noise.dac_vmax);
                if self.noise.quantize {
                    quantize_voltage(clamped, self.noise.dac_bits, self.noise.dac_vmax).value
                } else {
                    clamped
                }
            })
            .collect();
        VoltageVector { v, vp: self.state.vp }
    }

    fn measure(&mut self, raw: &[f64]) -> f64 {
        let volts = self.apply(raw);
        let powers = self.device.monitor_powers(&volts, self.state.temperature_c);
        let noisy: Vec<f64> = powers
            .iter()
            .map(|&p| measure_power(p, 1.0, self.noise, self.samples_per_eval, &mut self.rng))
            .collect();
        self.device.objective_from_powers(&noisy)
    }
}

/// Noise-free value of the measured objective when every ring sits exactly
/// `detuning_pm` off the laser; used for the deadband threshold.
fn objective_at_uniform_detuning(device: &DeviceModel, detuning_pm: f64) -> f64 {
    let laser = device.lambda_laser_nm();
    let center = laser + detuning_pm / PM_PER_NM;
    match device.topology() {
        Topology::Parallel => device
            .rings()
            .iter()
            .map(|r| notch_power(center, laser, r.gamma_width_pm))
            .sum(),
        Topology::Series => -device
            .rings()
            .iter()
            .map(|r| drop_power(center, laser, r.gamma_width_pm))
            .product::<f64>(),
    }
}

fn true_detunings(device: &DeviceModel, volts: &VoltageVector, state: &EnvironmentState) -> Vec<f64> {
    device.detunings_pm(volts, state.temperature_c)
}

/// Shared alignment step: minimize the measured objective from `x0`.
fn align_from(
    monitor: &mut PowerMonitor<'_>,
    cfg: &LockConfig,
    x0: &[f64],
    initial_scale: f64,
    max_evals: usize,
) -> Result<(OptResult, VoltageVector), LockError> {
    let n = monitor.device.n_rings();
    let simplex = SimplexConfig {
        initial_scale,
        f_tol: cfg.f_tol,
        x_tol: cfg.x_tol,
        max_evals,
        bounds: Some(vec![(0.0, monitor.noise.dac_vmax); n]),
        record_trace: cfg.record_trace,
        ..SimplexConfig::default()
    };
    let result = minimize(|x| monitor.measure(x), x0, &simplex)?;
    let applied = monitor.apply(&result.x_best);
    Ok((result, applied))
}

fn build_result(
    device: &DeviceModel,
    cfg: &LockConfig,
    state: &EnvironmentState,
    result: OptResult,
    applied: VoltageVector,
) -> LockResult {
    let residual = true_detunings(device, &applied, state);
    let within_tol = residual.iter().all(|d| d.abs() <= cfg.success_detuning_tol_pm);
    LockResult {
        success: within_tol && result.n_iterations <= cfg.max_iterations,
        volts: applied,
        n_iterations: result.n_iterations,
        n_evals: result.n_evals,
        residual_detunings_pm: residual,
        objective_final: result.f_best,
        trace: result.trace,
    }
}

/// Static alignment from a random cold start: sample initial heater
/// voltages, minimize the measured monitor powers, judge success from the
/// ground-truth residuals.
pub fn static_align(
    device: &DeviceModel,
    state: &EnvironmentState,
    noise: &NoiseSpec,
    cfg: &LockConfig,
    seed: u64,
) -> Result<LockResult, LockError> {
    let issues = cfg.validate(device.n_rings());
    if !issues.is_empty() {
        return Err(LockError::BadConfig(issues));
    }
    device.analytic_alignment_at(state)?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(substream(seed, STREAM_INIT));
    let x0: Vec<f64> = cfg
        .init_means
        .iter()
        .map(|&mean| {
            let v = if cfg.init_sigma == 0.0 {
                mean
            } else {
                Normal::new(mean, cfg.init_sigma).expect("finite sigma").sample(&mut init_rng)
            };
            v.clamp(0.0, noise.dac_vmax)
        })
        .collect();

    let mut monitor = PowerMonitor {
        device,
        noise,
        state: *state,
        samples_per_eval: cfg.samples_per_eval,
        rng: ChaCha8Rng::seed_from_u64(substream(seed, STREAM_MEASURE)),
    };

    if cfg.deadband {
        let threshold =
            objective_at_uniform_detuning(device, 0.5 * cfg.success_detuning_tol_pm);
        let f0 = monitor.measure(&x0);
        if f0 <= threshold {
            let applied = monitor.apply(&x0);
            let result = OptResult {
                x_best: x0,
                f_best: f0,
                n_evals: 1,
                n_iterations: 0,
                converged: true,
                trace: None,
            };
            return Ok(build_result(device, cfg, state, result, applied));
        }
    }

    let (result, applied) =
        align_from(&mut monitor, cfg, &x0, cfg.cold_start_scale, cfg.static_max_evals)?;
    Ok(build_result(device, cfg, state, result, applied))
}

/// Build the per-step environment schedule for a noise spec.
pub fn build_schedule(noise: &NoiseSpec, seed: u64) -> Result<Vec<EnvironmentState>, NoiseError> {
    let schedule = match noise.kind {
        NoiseKind::TemperatureWalk => gen_temperature_walk(noise, seed)?
            .into_iter()
            .enumerate()
            .map(|(i, t)| EnvironmentState { temperature_c: t, vp: 0.0, time_index: i + 1 })
            .collect(),
        NoiseKind::CrosstalkSweep => {
            gen_crosstalk_sweep(noise.sweep_start_v, noise.sweep_end_v, noise.n_steps.max(2))
                .into_iter()
                .enumerate()
                .map(|(i, vp)| EnvironmentState {
                    temperature_c: noise.base_temperature_c,
                    vp,
                    time_index: i + 1,
                })
                .collect()
        }
        NoiseKind::StaticOffset | NoiseKind::None => (0..noise.n_steps.max(1))
            .map(|i| EnvironmentState {
                temperature_c: noise.base_temperature_c,
                vp: 0.0,
                time_index: i + 1,
            })
            .collect(),
    };
    Ok(schedule)
}

/// The environment a dynamic run starts from, before any disturbance step.
pub fn initial_state(noise: &NoiseSpec) -> EnvironmentState {
    EnvironmentState {
        temperature_c: noise.base_temperature_c,
        vp: if noise.kind == NoiseKind::CrosstalkSweep { noise.sweep_start_v } else { 0.0 },
        time_index: 0,
    }
}

/// Dynamic stabilization run: draw the per-scenario device instance, align
/// once, then walk the environment schedule under the configured mode.
///
/// Everything that defines the scenario (offsets, schedule, initial guess)
/// derives from `seed` alone, so runs that differ only in `cfg.lock_mode`
/// face the identical disturbance.
pub fn dynamic_lock(
    device: &DeviceModel,
    noise: &NoiseSpec,
    cfg: &LockConfig,
    seed: u64,
) -> Result<StabilityRecord, LockError> {
    let offsets = gen_static_offsets(noise, device.n_rings(), substream(seed, STREAM_OFFSETS));
    let instance = apply_static_offsets(device, &offsets)?;
    let schedule = build_schedule(noise, substream(seed, STREAM_SCHEDULE))?;
    let state0 = initial_state(noise);

    let initial = static_align(&instance, &state0, noise, cfg, substream(seed, STREAM_INIT))?;

    let mut monitor = PowerMonitor {
        device: &instance,
        noise,
        state: state0,
        samples_per_eval: cfg.samples_per_eval,
        rng: ChaCha8Rng::seed_from_u64(substream(seed, STREAM_MEASURE)),
    };

    let deadband_threshold =
        objective_at_uniform_detuning(&instance, 0.5 * cfg.success_detuning_tol_pm);

    let mut current = initial.volts.clone();
    let mut steps = Vec::with_capacity(schedule.len());
    for state in schedule {
        monitor.state = state;
        let mut n_evals = 0;
        let mut budget_exhausted = false;
        match cfg.lock_mode {
            LockMode::Uncorrected => {
                current.vp = state.vp;
            }
            LockMode::TuningCurveBaseline => {
                let target = match noise.kind {
                    NoiseKind::CrosstalkSweep => {
                        voltages_from_phase_curves(state.vp, &cfg.curves.phase)
                    }
                    _ => voltages_from_temperature_curves(
                        state.temperature_c,
                        &cfg.curves.temperature,
                    ),
                };
                current = monitor.apply(&target);
            }
            LockMode::InSitu => {
                current.vp = state.vp;
                let skip = if cfg.deadband {
                    n_evals += 1;
                    monitor.measure(&current.v) <= deadband_threshold
                } else {
                    false
                };
                if !skip {
                    let (result, applied) = align_from(
                        &mut monitor,
                        cfg,
                        &current.v.clone(),
                        cfg.warm_start_scale,
                        cfg.per_step_budget,
                    )?;
                    n_evals += result.n_evals;
                    budget_exhausted = !result.converged;
                    current = applied;
                }
            }
        }
        let detunings = true_detunings(&instance, &current, &state);
        let locked = detunings.iter().all(|d| d.abs() <= cfg.success_detuning_tol_pm);
        steps.push(StepRecord {
            time_index: state.time_index,
            temperature_c: state.temperature_c,
            vp: state.vp,
            volts: current.v.clone(),
            detunings_pm: detunings,
            locked,
            budget_exhausted,
            n_evals,
        });
    }
    Ok(StabilityRecord { mode: cfg.lock_mode, initial, steps })
}

/// Heater voltages from the linear temperature curves, clamped non-negative.
pub fn voltages_from_temperature_curves(t_c: f64, curves: &[LinearCurve]) -> Vec<f64> {
    curves.iter().map(|c| c.eval(t_c).max(0.0)).collect()
}

/// Heater voltages from the quadratic phase-voltage curves, clamped
/// non-negative.
pub fn voltages_from_phase_curves(vp: f64, curves: &[QuadraticCurve]) -> Vec<f64> {
    curves.iter().map(|c| c.eval(vp).max(0.0)).collect()
}

/// Which environment variable a calibration run sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variable")]
pub enum SweepVariable {
    Temperature { start_c: f64, end_c: f64 },
    PhaseVoltage { start_v: f64, end_v: f64 },
}

/// Calibration sweep plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub variable: SweepVariable,
    pub n_points: usize,
    pub n_sweeps: usize,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            variable: SweepVariable::Temperature { start_c: 30.0, end_c: 31.0 },
            n_points: 11,
            n_sweeps: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub sweep: usize,
    pub sweep_value: f64,
    pub volts: Vec<f64>,
    pub success: bool,
}

/// Curves fitted over one swept variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FittedCurves {
    Temperature(Vec<LinearCurve>),
    Phase(Vec<QuadraticCurve>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub curves: FittedCurves,
    pub points: Vec<CalibrationPoint>,
    pub n_failed: usize,
}

/// Characterize tuning curves the way a lab would: sweep the environment
/// variable, re-align at every point with the closed-loop optimizer, repeat
/// the sweep a few times and least-squares fit the voltage-versus-variable
/// models.
pub fn calibrate_tuning_curves(
    device: &DeviceModel,
    sweep: &CalibrationSpec,
    noise: &NoiseSpec,
    cfg: &LockConfig,
    seed: u64,
) -> Result<CalibrationResult, LockError> {
    let (start, end) = match sweep.variable {
        SweepVariable::Temperature { start_c, end_c } => (start_c, end_c),
        SweepVariable::PhaseVoltage { start_v, end_v } => (start_v, end_v),
    };
    if sweep.n_points < 2 || start == end || sweep.n_sweeps == 0 {
        return Err(LockError::DegenerateSweep);
    }

    let step = (end - start) / (sweep.n_points - 1) as f64;
    let mut points = Vec::with_capacity(sweep.n_points * sweep.n_sweeps);
    let mut n_failed = 0;
    for s in 0..sweep.n_sweeps {
        let mut warm: Option<Vec<f64>> = None;
        for i in 0..sweep.n_points {
            let value = start + step * i as f64;
            let state = match sweep.variable {
                SweepVariable::Temperature { .. } => EnvironmentState {
                    temperature_c: value,
                    vp: 0.0,
                    time_index: i,
                },
                SweepVariable::PhaseVoltage { .. } => EnvironmentState {
                    temperature_c: noise.base_temperature_c,
                    vp: value,
                    time_index: i,
                },
            };
            let point_seed = substream(seed, 0xC0 + (s * sweep.n_points + i) as u64);
            let result = match &warm {
                None => static_align(device, &state, noise, cfg, point_seed)?,
                Some(prev) => {
                    let mut monitor = PowerMonitor {
                        device,
                        noise,
                        state,
                        samples_per_eval: cfg.samples_per_eval,
                        rng: ChaCha8Rng::seed_from_u64(substream(point_seed, STREAM_MEASURE)),
                    };
                    let (result, applied) = align_from(
                        &mut monitor,
                        cfg,
                        prev,
                        cfg.warm_start_scale,
                        cfg.static_max_evals,
                    )?;
                    build_result(device, cfg, &state, result, applied)
                }
            };
            if result.success {
                warm = Some(result.volts.v.clone());
            }
            n_failed += usize::from(!result.success);
            points.push(CalibrationPoint {
                sweep: s,
                sweep_value: value,
                volts: result.volts.v,
                success: result.success,
            });
        }
    }
    let total = points.len();
    if n_failed * 2 > total {
        return Err(LockError::CalibrationFailed { failed: n_failed, total });
    }

    let good: Vec<&CalibrationPoint> = points.iter().filter(|p| p.success).collect();
    let xs: Vec<f64> = good.iter().map(|p| p.sweep_value).collect();
    let n_rings = device.n_rings();
    let curves = match sweep.variable {
        SweepVariable::Temperature { .. } => {
            let mut fits = Vec::with_capacity(n_rings);
            for ring in 0..n_rings {
                let ys: Vec<f64> = good.iter().map(|p| p.volts[ring]).collect();
                let slope0 = (ys[ys.len() - 1] - ys[0]) / (xs[xs.len() - 1] - xs[0]);
                let intercept0 = ys[0] - slope0 * xs[0];
                let fit = fit_curve(
                    |p, x| p[0] * x + p[1],
                    &[slope0, intercept0],
                    &xs,
                    &ys,
                )?;
                fits.push(LinearCurve { slope: fit.x_best[0], intercept: fit.x_best[1] });
            }
            FittedCurves::Temperature(fits)
        }
        SweepVariable::PhaseVoltage { .. } => {
            let mut fits = Vec::with_capacity(n_rings);
            for ring in 0..n_rings {
                let ys: Vec<f64> = good.iter().map(|p| p.volts[ring]).collect();
                let fit = fit_curve(
                    |p, x| (p[0] * x + p[1]) * x + p[2],
                    &[0.0, 0.0, ys[0]],
                    &xs,
                    &ys,
                )?;
                fits.push(QuadraticCurve { a2: fit.x_best[0], a1: fit.x_best[1], a0: fit.x_best[2] });
            }
            FittedCurves::Phase(fits)
        }
    };
    Ok(CalibrationResult { curves, points, n_failed })
}

/// Summary statistics over a trajectory, optionally against a paired
/// uncorrected run consuming the identical disturbance.
pub fn stability_summary(
    record: &StabilityRecord,
    paired_uncorrected: Option<&StabilityRecord>,
) -> Result<StabilitySummary, LockError> {
    if record.steps.is_empty() {
        return Err(LockError::EmptyRecord);
    }
    let n_rings = record.steps[0].detunings_pm.len();
    let n_steps = record.steps.len() as f64;
    let mut per_ring_std = Vec::with_capacity(n_rings);
    let mut per_ring_p2p = Vec::with_capacity(n_rings);
    for ring in 0..n_rings {
        let series: Vec<f64> = record.steps.iter().map(|s| s.detunings_pm[ring]).collect();
        let mean = series.iter().sum::<f64>() / n_steps;
        let var = series.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n_steps;
        per_ring_std.push(var.sqrt());
        let max = series.iter().cloned().fold(f64::MIN, f64::max);
        let min = series.iter().cloned().fold(f64::MAX, f64::min);
        per_ring_p2p.push(max - min);
    }
    let worst_std = per_ring_std.iter().cloned().fold(0.0, f64::max);
    let total_variation = per_ring_p2p.iter().cloned().fold(0.0, f64::max);
    let improvement = match paired_uncorrected {
        None => None,
        Some(unc) => {
            let unc_summary = stability_summary(unc, None)?;
            Some(unc_summary.total_variation_pm / worst_std.max(1e-12))
        }
    };
    Ok(StabilitySummary {
        per_ring_std_pm: per_ring_std,
        per_ring_peak_to_peak_pm: per_ring_p2p,
        worst_std_pm: worst_std,
        total_variation_pm: total_variation,
        // Fractional drift is quoted against the linewidth of the default
        // 60 pm rings unless the record provides one; callers with exotic
        // devices can recompute from per_ring_std_pm.
        fractional_drift: worst_std / crate::resonator::DEFAULT_GAMMA_WIDTH_PM,
        improvement_factor: improvement,
        unlocked_steps: record.steps.iter().filter(|s| !s.locked).count(),
        budget_exhausted_steps: record.steps.iter().filter(|s| s.budget_exhausted).count(),
    })
}
