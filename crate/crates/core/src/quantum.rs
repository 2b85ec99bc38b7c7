//! Two-photon output of the device: the generalized |20>/|02> superposition
//! interfering on the final coupler, detuning-driven brightness and
//! distinguishability penalties, pair-rate scaling with pump power, Poisson
//! counting, and the fringe metrics extracted from coincidence sweeps.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simplex::{fit_curve, SimplexError};

/// Default exponent of the resonant-enhancement model: two pump and two
/// generated photons all ride resonances that shift together.
pub const DEFAULT_BRIGHTNESS_EXPONENT: i32 = 4;
/// Default detector quantum efficiency.
pub const DEFAULT_DETECTOR_EFF: f64 = 0.75;
/// Default thermo-optic phase per squared phase-shifter voltage (rad/V^2).
pub const DEFAULT_PHASE_PER_V2: f64 = 0.15;
/// Default pump power where two-photon absorption bends the pair rate (uW).
pub const DEFAULT_P_SAT_UW: f64 = 200.0;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("invalid source amplitudes: {0}")]
    BadAmplitudes(String),
    #[error("contrast undefined: both counts are zero")]
    ZeroCounts,
    #[error("visibility undefined: c_max must be positive and at least c_min")]
    BadVisibility,
    #[error("fringe fit failed: {0}")]
    Fit(#[from] SimplexError),
    #[error("fringe fit did not converge")]
    FitDiverged,
}

/// Pair-generation amplitudes of the two rings with their spectral overlap
/// and the differential phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceAmplitudes {
    pub a1: f64,
    pub a2: f64,
    /// Spectral indistinguishability of the two rings' photons, in [0, 1].
    pub overlap: f64,
    /// Differential phase (rad).
    pub phi: f64,
}

impl SourceAmplitudes {
    pub fn new(a1: f64, a2: f64, overlap: f64, phi: f64) -> Result<Self, QuantumError> {
        if !(a1.is_finite() && a2.is_finite() && overlap.is_finite() && phi.is_finite()) {
            return Err(QuantumError::BadAmplitudes("non-finite input".into()));
        }
        if a1 < 0.0 || a2 < 0.0 {
            return Err(QuantumError::BadAmplitudes("amplitudes must be non-negative".into()));
        }
        let norm = a1 * a1 + a2 * a2;
        if (norm - 1.0).abs() > 1e-12 {
            return Err(QuantumError::BadAmplitudes(format!(
                "a1^2 + a2^2 = {norm} must be 1"
            )));
        }
        if !(0.0..=1.0).contains(&overlap) {
            return Err(QuantumError::BadAmplitudes("overlap must lie in [0, 1]".into()));
        }
        Ok(Self { a1, a2, overlap, phi })
    }

    /// Equal-amplitude, fully indistinguishable source.
    pub fn balanced(phi: f64) -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self { a1: a, a2: a, overlap: 1.0, phi }
    }

    /// Normalize raw per-ring brightnesses into amplitudes.
    pub fn from_brightness(b1: f64, b2: f64, overlap: f64, phi: f64) -> Result<Self, QuantumError> {
        if b1 < 0.0 || b2 < 0.0 || b1 + b2 <= 0.0 {
            return Err(QuantumError::BadAmplitudes(
                "brightnesses must be non-negative and not both zero".into(),
            ));
        }
        let norm = (b1 + b2).sqrt();
        Self::new(b1.sqrt() / norm, b2.sqrt() / norm, overlap, phi)
    }
}

/// Probability of one photon in each output arm:
/// `(a1^2 + a2^2 - 2 a1 a2 O cos 2phi) / 2`. Reduces to sin^2(phi) for the
/// balanced, fully overlapped source.
pub fn coincidence_probability(src: &SourceAmplitudes) -> f64 {
    let (p20, p02, p11) = photon_number_probabilities(src);
    debug_assert!((p20 + p02 + p11 - 1.0).abs() < 1e-12);
    p11
}

/// Output photon-number distribution over {|20>, |02>, |11>}. The coherent
/// (overlapping) part of the cross term interferes; the remainder splits
/// like distinguishable photons, which leaves the three probabilities
/// summing to one for any overlap.
pub fn photon_number_probabilities(src: &SourceAmplitudes) -> (f64, f64, f64) {
    let cross = 2.0 * src.a1 * src.a2 * src.overlap * (2.0 * src.phi).cos();
    let norm = src.a1 * src.a1 + src.a2 * src.a2;
    let p11 = 0.5 * (norm - cross);
    let p20 = 0.25 * (norm + cross);
    (p20, p20, p11)
}

/// Spectral overlap of two Lorentzian wavepackets whose centres differ by
/// `detuning_pm`: `1 / (1 + (d / G)^2)`.
pub fn spectral_overlap(detuning_pm: f64, gamma_width_pm: f64) -> f64 {
    assert!(gamma_width_pm > 0.0);
    let r = detuning_pm / gamma_width_pm;
    1.0 / (1.0 + r * r)
}

/// Resonant enhancement of a ring's pair generation when its resonance comb
/// sits `detuning_pm` off the laser grid, with the default fourth-power
/// model.
pub fn ring_brightness(detuning_pm: f64, gamma_width_pm: f64) -> f64 {
    ring_brightness_with_exponent(detuning_pm, gamma_width_pm, DEFAULT_BRIGHTNESS_EXPONENT)
}

/// Same with a configurable number of participating resonances.
pub fn ring_brightness_with_exponent(
    detuning_pm: f64,
    gamma_width_pm: f64,
    exponent: i32,
) -> f64 {
    assert!(gamma_width_pm > 0.0);
    let r = 2.0 * detuning_pm / gamma_width_pm;
    (1.0 / (1.0 + r * r)).powi(exponent)
}

/// Optional two-photon-absorption rolloff for the pair rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationModel {
    pub p_sat_uw: f64,
}

impl Default for SaturationModel {
    fn default() -> Self {
        Self { p_sat_uw: DEFAULT_P_SAT_UW }
    }
}

/// Photon-pair rate (Hz) at `power_uw` per ring: `k P^2`, bent by
/// `(1 + P/P_sat)^-2` when the saturation hook is enabled.
pub fn pair_rate(power_uw: f64, k_hz_per_uw2: f64, saturation: Option<&SaturationModel>) -> f64 {
    assert!(power_uw >= 0.0);
    let quadratic = k_hz_per_uw2 * power_uw * power_uw;
    match saturation {
        None => quadratic,
        Some(s) => {
            let damp = 1.0 + power_uw / s.p_sat_uw;
            quadratic / (damp * damp)
        }
    }
}

/// Rate coefficient k putting `pair_rate(p_max)` exactly at `target_rate`.
pub fn rate_coefficient_for(
    p_max_uw: f64,
    target_rate_hz: f64,
    saturation: Option<&SaturationModel>,
) -> f64 {
    assert!(p_max_uw > 0.0 && target_rate_hz >= 0.0);
    let unit = pair_rate(p_max_uw, 1.0, saturation);
    target_rate_hz / unit
}

/// Detected events for one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub singles1: u64,
    pub singles2: u64,
    pub coincidences: u64,
    pub integration_time_s: f64,
    pub pump_power_uw: f64,
}

/// Poisson-sample detector counts for a pair source emitting `rate_hz` pairs
/// with coincidence probability `p11` and per-detector efficiency
/// `detector_eff` over `integration_time_s`.
///
/// Coincidences are drawn first and added into each singles stream, so
/// `coincidences <= min(singles1, singles2)` holds for every draw. Mean
/// photon number per arm is one per pair (the |20>/|02> terms balance in
/// this source model).
pub fn sample_counts(
    p11: f64,
    rate_hz: f64,
    integration_time_s: f64,
    detector_eff: f64,
    rng: &mut impl Rng,
) -> CountRecord {
    assert!((0.0..=1.0).contains(&p11), "p11 must be a probability");
    assert!((0.0..=1.0).contains(&detector_eff));
    assert!(rate_hz >= 0.0 && integration_time_s >= 0.0);

    let pairs = rate_hz * integration_time_s;
    let mean_coinc = p11 * pairs * detector_eff * detector_eff;
    let mean_single = pairs * detector_eff;
    let coincidences = poisson_draw(mean_coinc, rng);
    let excess = (mean_single - mean_coinc).max(0.0);
    let singles1 = coincidences + poisson_draw(excess, rng);
    let singles2 = coincidences + poisson_draw(excess, rng);
    CountRecord {
        singles1,
        singles2,
        coincidences,
        integration_time_s,
        pump_power_uw: 0.0,
    }
}

fn poisson_draw(mean: f64, rng: &mut impl Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as u64
}

/// Normalized difference `|C1 - C2| / max(C1, C2)` between the two fringe
/// peaks; zero for a symmetric fringe.
pub fn asymmetric_contrast(c1: f64, c2: f64) -> Result<f64, QuantumError> {
    let max = c1.max(c2);
    if max <= 0.0 {
        return Err(QuantumError::ZeroCounts);
    }
    Ok((c1 - c2).abs() / max)
}

/// Fringe depth `(C_max - C_min) / C_max`.
pub fn quantum_visibility(c_max: f64, c_min: f64) -> Result<f64, QuantumError> {
    if c_max <= 0.0 || c_min > c_max {
        return Err(QuantumError::BadVisibility);
    }
    Ok((c_max - c_min) / c_max)
}

/// Fitted fringe `C(Vp) = A sin^2(beta Vp^2 + phi0) + C0` and the
/// visibility extracted from its extrema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FringeFit {
    pub amplitude: f64,
    pub beta: f64,
    pub phi0: f64,
    pub offset: f64,
    pub visibility: f64,
    /// Jackknife (leave-one-out) standard error of the visibility.
    pub visibility_sigma: f64,
    /// Root-mean-square fit residual, in count units.
    pub rms_residual: f64,
    pub converged: bool,
}

pub fn fringe_model(params: &[f64], vp: f64) -> f64 {
    let (a, beta, phi0, c0) = (params[0], params[1], params[2], params[3]);
    let s = (beta * vp * vp + phi0).sin();
    a * s * s + c0
}

fn visibility_from_params(params: &[f64]) -> f64 {
    let a = params[0].abs();
    let c0 = params[3].max(0.0);
    if a + c0 <= 0.0 {
        return 0.0;
    }
    a / (a + c0)
}

fn fit_fringe_once(
    vp_values: &[f64],
    coincidences: &[f64],
    params0: &[f64],
) -> Result<crate::simplex::OptResult, SimplexError> {
    fit_curve(fringe_model, params0, vp_values, coincidences)
}

/// Least-squares fringe fit. The phase is quadratic in the sweep voltage
/// (thermo-optic power heats as Vp^2), so the fit searches a small ladder of
/// fringe densities to avoid the periodic local minima in beta.
pub fn fit_fringe(vp_values: &[f64], coincidences: &[f64]) -> Result<FringeFit, QuantumError> {
    if vp_values.len() < 4 {
        return Err(QuantumError::Fit(SimplexError::TooFewPoints {
            points: vp_values.len(),
            params: 4,
        }));
    }
    let c_max = coincidences.iter().cloned().fold(f64::MIN, f64::max);
    let c_min = coincidences.iter().cloned().fold(f64::MAX, f64::min);
    let u_max = vp_values.iter().map(|v| v * v).fold(0.0, f64::max).max(1e-9);

    let mut best: Option<crate::simplex::OptResult> = None;
    // Between half a fringe and four fringes across the sweep.
    for half_periods in 1..=8 {
        let beta0 = half_periods as f64 * std::f64::consts::PI / (2.0 * u_max);
        for phi0 in [0.0, std::f64::consts::FRAC_PI_2] {
            let p0 = [(c_max - c_min).max(1e-9), beta0, phi0, c_min.max(0.0)];
            if let Ok(result) = fit_fringe_once(vp_values, coincidences, &p0) {
                if best.as_ref().map_or(true, |b| result.f_best < b.f_best) {
                    best = Some(result);
                }
            }
        }
    }
    let best = best.ok_or(QuantumError::FitDiverged)?;
    if !best.f_best.is_finite() {
        return Err(QuantumError::FitDiverged);
    }

    let n = vp_values.len();
    let dof = (n as f64 - 4.0).max(1.0);
    let rms = (best.f_best / dof).sqrt();
    let visibility = visibility_from_params(&best.x_best);

    // Leave-one-out jackknife on the visibility, warm-started from the full
    // fit.
    let mut jack = Vec::with_capacity(n);
    for skip in 0..n {
        let xs: Vec<f64> = vp_values
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, &v)| v)
            .collect();
        let ys: Vec<f64> = coincidences
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, &c)| c)
            .collect();
        if let Ok(refit) = fit_fringe_once(&xs, &ys, &best.x_best) {
            jack.push(visibility_from_params(&refit.x_best));
        }
    }
    let visibility_sigma = if jack.len() >= 2 {
        let m = jack.iter().sum::<f64>() / jack.len() as f64;
        let var =
            jack.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * (jack.len() as f64 - 1.0)
                / jack.len() as f64;
        var.sqrt()
    } else {
        f64::NAN
    };

    Ok(FringeFit {
        amplitude: best.x_best[0].abs(),
        beta: best.x_best[1],
        phi0: best.x_best[2],
        offset: best.x_best[3],
        visibility,
        visibility_sigma,
        rms_residual: rms,
        converged: best.converged,
    })
}
