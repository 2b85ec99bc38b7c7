//! Analytic model of thermo-optically tuned microring resonators.
//!
//! Each ring is a Lorentzian notch whose central wavelength shifts with the
//! square of the applied heater voltages (its own and, through thermal
//! crosstalk, its neighbours'), with the differential phase-shifter drive,
//! and linearly with chip temperature. The module also provides the
//! closed-form heater solution that tunes every ring onto the laser, used as
//! an independent oracle for the search-based lock, and a multi-start audit
//! of the transmission landscape.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::EnvironmentState;
use crate::simplex::{minimize, SimplexConfig};

/// Picometres per nanometre; absolute wavelengths are carried in nm,
/// widths/shifts/detunings in pm.
pub const PM_PER_NM: f64 = 1000.0;

/// Default resonance full width at half maximum (pm); Q ~ 2.5e4 at 1565 nm.
pub const DEFAULT_GAMMA_WIDTH_PM: f64 = 60.0;
/// Default lock target wavelength (nm).
pub const DEFAULT_LAMBDA_LASER_NM: f64 = 1565.0;
/// Free spectral range of the generation rings (nm). Informational: the
/// model tracks a single resonance, the others sit one FSR away.
pub const DEFAULT_FSR_NM: f64 = 8.8;
/// Default self-tuning strength (pm/V^2).
pub const DEFAULT_GAMMA_TUNE: f64 = 175.0;
/// Default heater-to-neighbour crosstalk (pm/V^2).
pub const DEFAULT_CROSS_TUNE: f64 = 1.0;
/// Default thermal response (pm/degC).
pub const DEFAULT_DLAMBDA_DT: f64 = 80.0;
/// Default phase-shifter crosstalk (pm/V^2): 45 pm over a 0->6.5 V sweep.
pub const DEFAULT_PHASE_CROSSTALK: f64 = 45.0 / (6.5 * 6.5);
/// Reference chip temperature (degC).
pub const DEFAULT_T_REF_C: f64 = 30.0;

const SIM_BAND_NM: (f64, f64) = (1500.0, 1600.0);

/// One resonator: cold resonance, linewidth and tuning responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingParams {
    /// Cold central resonance at zero voltage and reference temperature (nm).
    pub lambda0_nm: f64,
    /// Lorentzian width parameter, full width at half maximum (pm).
    pub gamma_width_pm: f64,
    /// Self-tuning strength (pm/V^2). Positive: red shift with heater power.
    pub gamma_tune: f64,
    /// Resonance shift per unit chip temperature (pm/degC).
    pub dlambda_dt: f64,
}

impl RingParams {
    fn check(&self, idx: usize, issues: &mut Vec<String>) {
        if !self.gamma_width_pm.is_finite() || self.gamma_width_pm <= 0.0 {
            issues.push(format!("rings[{idx}].gamma_width_pm must be > 0"));
        }
        if !self.gamma_tune.is_finite() || self.gamma_tune <= 0.0 {
            issues.push(format!("rings[{idx}].gamma_tune must be > 0"));
        }
        if !self.lambda0_nm.is_finite()
            || self.lambda0_nm < SIM_BAND_NM.0
            || self.lambda0_nm > SIM_BAND_NM.1
        {
            issues.push(format!(
                "rings[{idx}].lambda0_nm must lie in [{}, {}] nm",
                SIM_BAND_NM.0, SIM_BAND_NM.1
            ));
        }
        if !self.dlambda_dt.is_finite() {
            issues.push(format!("rings[{idx}].dlambda_dt must be finite"));
        }
    }
}

/// How the monitored ring transmissions combine into one error signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// One drop-port monitor per ring; the lock minimizes the summed powers.
    Parallel,
    /// Rings cascaded on one bus; a single monitor sees the chained response.
    Series,
}

/// Heater drive: one non-negative voltage per ring plus the differential
/// phase-shifter voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageVector {
    pub v: Vec<f64>,
    pub vp: f64,
}

impl VoltageVector {
    pub fn new(v: Vec<f64>, vp: f64) -> Result<Self, DeviceError> {
        if v.iter().chain(std::iter::once(&vp)).any(|x| !x.is_finite()) {
            return Err(DeviceError::NonFinite("voltage"));
        }
        if v.iter().any(|&x| x < 0.0) || vp < 0.0 {
            return Err(DeviceError::NegativeVoltage);
        }
        Ok(Self { v, vp })
    }

    pub fn zeros(n: usize) -> Self {
        Self { v: vec![0.0; n], vp: 0.0 }
    }
}

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("invalid device: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("voltages must be non-negative")]
    NegativeVoltage,
}

/// Why no non-negative heater solution tunes all rings onto the laser.
#[derive(Debug, Error, PartialEq)]
pub enum AlignmentError {
    #[error("ring {ring} needs V^2 = {v_squared:.3} V^2: laser is blue of reach")]
    Infeasible { ring: usize, v_squared: f64 },
    #[error("tuning matrix is singular: {0}")]
    Singular(String),
}

/// The coupled-ring device: ring set, crosstalk couplings, monitor topology
/// and the lock target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    rings: Vec<RingParams>,
    /// Symmetric, zero-diagonal heater crosstalk matrix (pm/V^2).
    cross_tune: Vec<Vec<f64>>,
    /// Resonance shift per squared phase-shifter voltage, one entry per ring
    /// (pm/V^2).
    phase_crosstalk: Vec<f64>,
    topology: Topology,
    lambda_laser_nm: f64,
    t_ref_c: f64,
}

impl DeviceModel {
    pub fn new(
        rings: Vec<RingParams>,
        cross_tune: Vec<Vec<f64>>,
        phase_crosstalk: Vec<f64>,
        topology: Topology,
        lambda_laser_nm: f64,
        t_ref_c: f64,
    ) -> Result<Self, DeviceError> {
        let device = Self { rings, cross_tune, phase_crosstalk, topology, lambda_laser_nm, t_ref_c };
        let issues = device.validate();
        if issues.is_empty() {
            Ok(device)
        } else {
            Err(DeviceError::Invalid(issues))
        }
    }

    /// The calibrated two-ring device used as the default scenario target.
    /// Cold resonances are chosen so the aligned heater voltages at the
    /// reference temperature sit at 3.7410 V and 3.6962 V, consistent with
    /// the default tuning curves.
    pub fn default_two_ring() -> Self {
        let (v1, v2) = (3.7410_f64, 3.6962_f64);
        let shift1 = DEFAULT_GAMMA_TUNE * v1 * v1 + DEFAULT_CROSS_TUNE * v2 * v2;
        let shift2 = DEFAULT_GAMMA_TUNE * v2 * v2 + DEFAULT_CROSS_TUNE * v1 * v1;
        let ring = |shift_pm: f64| RingParams {
            lambda0_nm: DEFAULT_LAMBDA_LASER_NM - shift_pm / PM_PER_NM,
            gamma_width_pm: DEFAULT_GAMMA_WIDTH_PM,
            gamma_tune: DEFAULT_GAMMA_TUNE,
            dlambda_dt: DEFAULT_DLAMBDA_DT,
        };
        Self::new(
            vec![ring(shift1), ring(shift2)],
            vec![vec![0.0, DEFAULT_CROSS_TUNE], vec![DEFAULT_CROSS_TUNE, 0.0]],
            vec![DEFAULT_PHASE_CROSSTALK; 2],
            Topology::Parallel,
            DEFAULT_LAMBDA_LASER_NM,
            DEFAULT_T_REF_C,
        )
        .expect("default device is valid")
    }

    fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let n = self.rings.len();
        if n == 0 {
            issues.push("device needs at least one ring".into());
            return issues;
        }
        for (i, ring) in self.rings.iter().enumerate() {
            ring.check(i, &mut issues);
        }
        if self.cross_tune.len() != n || self.cross_tune.iter().any(|row| row.len() != n) {
            issues.push(format!("cross_tune must be {n}x{n}"));
            return issues;
        }
        if self.phase_crosstalk.len() != n {
            issues.push(format!("phase_crosstalk must have {n} entries"));
        }
        for i in 0..n {
            if self.cross_tune[i][i] != 0.0 {
                issues.push(format!("cross_tune[{i}][{i}] must be 0"));
            }
            for j in 0..n {
                let a = self.cross_tune[i][j];
                if !a.is_finite() || a < 0.0 {
                    issues.push(format!("cross_tune[{i}][{j}] must be >= 0"));
                } else if a != self.cross_tune[j][i] {
                    issues.push(format!("cross_tune[{i}][{j}] must equal cross_tune[{j}][{i}]"));
                }
            }
        }
        if !self.lambda_laser_nm.is_finite()
            || self.lambda_laser_nm < SIM_BAND_NM.0
            || self.lambda_laser_nm > SIM_BAND_NM.1
        {
            issues.push("lambda_laser_nm must lie in the simulated band".into());
        }
        if !self.t_ref_c.is_finite() {
            issues.push("t_ref_c must be finite".into());
        }
        if issues.is_empty() {
            self.check_dominance(&mut issues);
        }
        issues
    }

    /// Tuning dominance: each ring's self-tuning over its crosstalk to any
    /// other ring must exceed the cold-detuning ratio of the pair in both
    /// directions. This is the regime where the all-aligned point is the one
    /// transmission minimum.
    fn check_dominance(&self, issues: &mut Vec<String>) {
        let n = self.rings.len();
        for i in 0..n {
            for j in 0..n {
                if i == j || self.cross_tune[i][j] == 0.0 {
                    continue;
                }
                let di = (self.lambda_laser_nm - self.rings[i].lambda0_nm).abs();
                let dj = (self.lambda_laser_nm - self.rings[j].lambda0_nm).abs();
                if di == 0.0 && dj == 0.0 {
                    continue;
                }
                if di == 0.0 || dj == 0.0 {
                    issues.push(format!(
                        "dominance violated for rings ({i},{j}): one cold detuning is zero \
                         while crosstalk is nonzero"
                    ));
                    continue;
                }
                let ratio = di / dj;
                let strength = self.rings[i].gamma_tune / self.cross_tune[i][j];
                if strength <= ratio.max(1.0 / ratio) {
                    issues.push(format!(
                        "dominance violated for rings ({i},{j}): gamma/alpha = {strength:.2} \
                         must exceed {:.2}",
                        ratio.max(1.0 / ratio)
                    ));
                }
            }
        }
    }

    pub fn n_rings(&self) -> usize {
        self.rings.len()
    }

    pub fn rings(&self) -> &[RingParams] {
        &self.rings
    }

    pub fn cross_tune(&self) -> &[Vec<f64>] {
        &self.cross_tune
    }

    pub fn phase_crosstalk(&self) -> &[f64] {
        &self.phase_crosstalk
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn lambda_laser_nm(&self) -> f64 {
        self.lambda_laser_nm
    }

    pub fn t_ref_c(&self) -> f64 {
        self.t_ref_c
    }

    /// Instantaneous central wavelength of every ring (nm) under the given
    /// drive and chip temperature.
    pub fn central_wavelengths(&self, volts: &VoltageVector, temperature_c: f64) -> Vec<f64> {
        assert_eq!(
            volts.v.len(),
            self.rings.len(),
            "voltage vector length must match ring count"
        );
        let vp2 = volts.vp * volts.vp;
        let dt = temperature_c - self.t_ref_c;
        self.rings
            .iter()
            .enumerate()
            .map(|(i, ring)| {
                let mut shift_pm = ring.gamma_tune * volts.v[i] * volts.v[i];
                for (j, &vj) in volts.v.iter().enumerate() {
                    if j != i {
                        shift_pm += self.cross_tune[i][j] * vj * vj;
                    }
                }
                shift_pm += self.phase_crosstalk[i] * vp2;
                shift_pm += ring.dlambda_dt * dt;
                ring.lambda0_nm + shift_pm / PM_PER_NM
            })
            .collect()
    }

    /// Signed detuning of every ring from the laser (pm).
    pub fn detunings_pm(&self, volts: &VoltageVector, temperature_c: f64) -> Vec<f64> {
        self.central_wavelengths(volts, temperature_c)
            .iter()
            .map(|&l| (l - self.lambda_laser_nm) * PM_PER_NM)
            .collect()
    }

    /// Combined transmission in the signed Lorentzian convention: product of
    /// the per-ring responses for `Series`, sum for `Parallel`. Units are
    /// (1/pm)^N for series, 1/pm for parallel.
    pub fn combined_transmission(&self, volts: &VoltageVector, temperature_c: f64) -> f64 {
        let lambdas = self.central_wavelengths(volts, temperature_c);
        match self.topology {
            Topology::Series => lambdas
                .iter()
                .zip(&self.rings)
                .map(|(&l, r)| {
                    lorentzian_raw((l - self.lambda_laser_nm) * PM_PER_NM, r.gamma_width_pm)
                })
                .product(),
            Topology::Parallel => lambdas
                .iter()
                .zip(&self.rings)
                .map(|(&l, r)| {
                    lorentzian_raw((l - self.lambda_laser_nm) * PM_PER_NM, r.gamma_width_pm)
                })
                .sum(),
        }
    }

    /// Normalized power on each monitor photodiode, in [0, 1].
    ///
    /// `Parallel`: one through-port notch per ring (dips to 0 on resonance).
    /// `Series`: a single monitor on the cascaded drop response (peaks at 1
    /// when every ring is aligned).
    pub fn monitor_powers(&self, volts: &VoltageVector, temperature_c: f64) -> Vec<f64> {
        let lambdas = self.central_wavelengths(volts, temperature_c);
        match self.topology {
            Topology::Parallel => lambdas
                .iter()
                .zip(&self.rings)
                .map(|(&l, r)| notch_power(l, self.lambda_laser_nm, r.gamma_width_pm))
                .collect(),
            Topology::Series => {
                let p = lambdas
                    .iter()
                    .zip(&self.rings)
                    .map(|(&l, r)| drop_power(l, self.lambda_laser_nm, r.gamma_width_pm))
                    .product();
                vec![p]
            }
        }
    }

    /// Noise-free lock objective: minimized exactly when every ring sits on
    /// the laser. For `Parallel` this is the combined transmission itself;
    /// for `Series` it is the negated drop-port cascade (the signed series
    /// product of an even ring count peaks rather than dips at alignment, so
    /// the raw product is not usable as a minimization target).
    pub fn alignment_objective(&self, volts: &VoltageVector, temperature_c: f64) -> f64 {
        match self.topology {
            Topology::Parallel => self.combined_transmission(volts, temperature_c),
            Topology::Series => -self
                .monitor_powers(volts, temperature_c)
                .iter()
                .product::<f64>(),
        }
    }

    /// Combine raw monitor readings into the scalar the controller minimizes.
    pub fn objective_from_powers(&self, powers: &[f64]) -> f64 {
        match self.topology {
            Topology::Parallel => powers.iter().sum(),
            Topology::Series => -powers.iter().product::<f64>(),
        }
    }

    /// Closed-form heater solution aligning every ring to the laser at the
    /// reference temperature with the phase shifter off.
    pub fn analytic_alignment(&self) -> Result<VoltageVector, AlignmentError> {
        self.analytic_alignment_at(&EnvironmentState::reference(self.t_ref_c))
    }

    /// Closed-form alignment under a given environment: solves the linear
    /// system in the squared voltages and rejects negative-square solutions.
    pub fn analytic_alignment_at(
        &self,
        state: &EnvironmentState,
    ) -> Result<VoltageVector, AlignmentError> {
        let n = self.rings.len();
        let dt = state.temperature_c - self.t_ref_c;
        let vp2 = state.vp * state.vp;
        let mut matrix = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                matrix[i][j] = if i == j {
                    self.rings[i].gamma_tune
                } else {
                    self.cross_tune[i][j]
                };
            }
            rhs[i] = (self.lambda_laser_nm - self.rings[i].lambda0_nm) * PM_PER_NM
                - self.rings[i].dlambda_dt * dt
                - self.phase_crosstalk[i] * vp2;
        }
        let squares = solve_linear(matrix, rhs).map_err(AlignmentError::Singular)?;
        let mut v = Vec::with_capacity(n);
        for (i, &s) in squares.iter().enumerate() {
            // Tolerate solver round-off just below zero.
            if s < -1e-9 {
                return Err(AlignmentError::Infeasible { ring: i, v_squared: s });
            }
            v.push(s.max(0.0).sqrt());
        }
        Ok(VoltageVector { v, vp: state.vp })
    }
}

/// Signed Lorentzian transmission of a single ring (1/pm):
/// `-0.5 G / ((lc - llas)^2 + (0.5 G)^2)`. Strictly negative, most negative
/// exactly on resonance.
pub fn lorentzian_transmission(
    lambda_center_nm: f64,
    lambda_laser_nm: f64,
    gamma_width_pm: f64,
) -> Result<f64, DeviceError> {
    if !lambda_center_nm.is_finite() || !lambda_laser_nm.is_finite() || !gamma_width_pm.is_finite()
    {
        return Err(DeviceError::NonFinite("lorentzian_transmission input"));
    }
    if gamma_width_pm <= 0.0 {
        return Err(DeviceError::Invalid(vec!["gamma_width_pm must be > 0".into()]));
    }
    Ok(lorentzian_raw(
        (lambda_center_nm - lambda_laser_nm) * PM_PER_NM,
        gamma_width_pm,
    ))
}

#[inline]
fn lorentzian_raw(detuning_pm: f64, gamma_pm: f64) -> f64 {
    let hg = 0.5 * gamma_pm;
    -hg / (detuning_pm * detuning_pm + hg * hg)
}

/// Normalized through-port power in [0, 1]: unity far from resonance, full
/// extinction on resonance. Affine in the signed Lorentzian, so both share
/// their minimizer.
pub fn notch_power(lambda_center_nm: f64, lambda_laser_nm: f64, gamma_width_pm: f64) -> f64 {
    1.0 - drop_power(lambda_center_nm, lambda_laser_nm, gamma_width_pm)
}

/// Normalized drop-port power in (0, 1]: peaks at 1 on resonance.
pub fn drop_power(lambda_center_nm: f64, lambda_laser_nm: f64, gamma_width_pm: f64) -> f64 {
    let d = (lambda_center_nm - lambda_laser_nm) * PM_PER_NM;
    let hg2 = 0.25 * gamma_width_pm * gamma_width_pm;
    hg2 / (d * d + hg2)
}

/// Gaussian elimination with partial pivoting; the systems here are tiny
/// (ring count by ring count).
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, String> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-12 {
            return Err(format!("pivot {:.3e} in column {col}", a[pivot_row][col]));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in (row + 1)..n {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Sampling plan for the critical-point audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditSpec {
    /// Number of random starting points.
    pub n_starts: usize,
    /// Heater voltages are sampled uniformly from [0, v_max]^N.
    pub v_max: f64,
    /// Minimizers closer than this (per axis, V) fold into one cluster.
    pub cluster_tol_v: f64,
    /// Evaluation budget per local search.
    pub budget: usize,
    pub seed: u64,
}

impl Default for AuditSpec {
    fn default() -> Self {
        Self { n_starts: 100, v_max: 6.0, cluster_tol_v: 0.01, budget: 600, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cluster {
    pub center_v: Vec<f64>,
    pub objective: f64,
    pub count: usize,
}

/// Outcome of the multi-start minimization audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub clusters: Vec<Cluster>,
    pub n_starts: usize,
    pub n_converged: usize,
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("audit sampling spec is empty")]
    EmptySpec,
    #[error("local search failed: {0}")]
    Search(#[from] crate::simplex::SimplexError),
}

/// Multi-start local minimization of the noise-free lock objective over the
/// non-negative voltage box, clustering the minimizers found. Under the
/// dominance condition exactly one cluster should appear, at the closed-form
/// alignment point.
pub fn classify_critical_points(
    device: &DeviceModel,
    spec: &AuditSpec,
) -> Result<CriticalPointReport, AuditError> {
    use rand::Rng;
    use rand::SeedableRng;

    if spec.n_starts == 0 || spec.v_max <= 0.0 {
        return Err(AuditError::EmptySpec);
    }
    let n = device.n_rings();
    let state = EnvironmentState::reference(device.t_ref_c());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let config = SimplexConfig {
        initial_scale: 0.5,
        f_tol: 1e-10,
        x_tol: 1e-6,
        max_evals: spec.budget,
        bounds: Some(vec![(0.0, spec.v_max); n]),
        ..SimplexConfig::default()
    };

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut n_converged = 0;
    for _ in 0..spec.n_starts {
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..spec.v_max)).collect();
        let result = minimize(
            |x| {
                let volts = VoltageVector { v: x.to_vec(), vp: 0.0 };
                device.alignment_objective(&volts, state.temperature_c)
            },
            &x0,
            &config,
        )?;
        if !result.converged {
            continue;
        }
        n_converged += 1;
        let found = clusters.iter_mut().find(|c| {
            c.center_v
                .iter()
                .zip(&result.x_best)
                .all(|(a, b)| (a - b).abs() <= spec.cluster_tol_v)
        });
        match found {
            Some(cluster) => {
                cluster.count += 1;
                if result.f_best < cluster.objective {
                    cluster.objective = result.f_best;
                    cluster.center_v = result.x_best.clone();
                }
            }
            None => clusters.push(Cluster {
                center_v: result.x_best.clone(),
                objective: result.f_best,
                count: 1,
            }),
        }
    }
    clusters.sort_by(|a, b| b.count.cmp(&a.count));
    Ok(CriticalPointReport { clusters, n_starts: spec.n_starts, n_converged })
}
