//! Digital twin of a silicon-photonic two-ring photon-pair source with
//! in-situ frequency locking.
//!
//! The crate models the coupled-ring transmission physics, injects static
//! and dynamic environmental noise, runs the gradient-free closed-loop
//! alignment protocol against the simulated monitor photodiodes, and
//! evaluates the quantum-state-engineering quality of the locked source
//! (coincidence fringes, visibility, asymmetric contrast).

pub mod environment;
pub mod lock;
pub mod quantum;
pub mod resonator;
pub mod seeds;
pub mod simplex;

pub use environment::{
    apply_static_offsets, gen_crosstalk_sweep, gen_static_offsets, gen_temperature_walk,
    measure_power, quantize_voltage, EnvironmentState, NoiseKind, NoiseSpec, StaticOffsets,
};
pub use lock::{
    calibrate_tuning_curves, dynamic_lock, stability_summary, static_align, CalibrationSpec,
    LockConfig, LockMode, LockResult, StabilityRecord, StabilitySummary, SweepVariable,
    TuningCurveSet,
};
pub use quantum::{
    asymmetric_contrast, coincidence_probability, fit_fringe, pair_rate, quantum_visibility,
    ring_brightness, sample_counts, spectral_overlap, CountRecord, SourceAmplitudes,
};
pub use resonator::{
    classify_critical_points, lorentzian_transmission, AuditSpec, DeviceModel, RingParams,
    Topology, VoltageVector,
};
pub use simplex::{fit_curve, minimize, OptResult, SimplexConfig};
