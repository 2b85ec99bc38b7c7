//! Scratch calibration probe (not part of the deliverable surface): prints
//! the statistics the default parameters are tuned against.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ringlock_core::environment::{EnvironmentState, NoiseKind, NoiseSpec};
use ringlock_core::lock::{
    dynamic_lock, stability_summary, static_align, LockConfig, LockMode,
};
use ringlock_core::resonator::{DeviceModel, RingParams, Topology, DEFAULT_LAMBDA_LASER_NM, PM_PER_NM};

fn random_feasible_device(rng: &mut ChaCha8Rng) -> DeviceModel {
    let gamma1 = rng.random_range(130.0..230.0);
    let gamma2 = rng.random_range(130.0..230.0);
    let alpha = rng.random_range(0.0..2.5);
    let d1 = rng.random_range(300.0..2800.0);
    let d2 = d1 * rng.random_range(0.5..2.0);
    let ring = |d: f64, g: f64| RingParams {
        lambda0_nm: DEFAULT_LAMBDA_LASER_NM - d / PM_PER_NM,
        gamma_width_pm: 60.0,
        gamma_tune: g,
        dlambda_dt: 80.0,
    };
    DeviceModel::new(
        vec![ring(d1, gamma1), ring(d2, gamma2)],
        vec![vec![0.0, alpha], vec![alpha, 0.0]],
        vec![1.0, 1.0],
        Topology::Parallel,
        DEFAULT_LAMBDA_LASER_NM,
        30.0,
    )
    .unwrap()
}

fn main() {
    // --- noiseless equivalence over random devices ---
    let noise = NoiseSpec::noiseless();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_dv: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let t0 = std::time::Instant::now();
    for i in 0..50 {
        let device = random_feasible_device(&mut rng);
        let oracle = device.analytic_alignment().unwrap();
        let cfg = LockConfig {
            init_means: oracle.v.clone(),
            samples_per_eval: 1,
            ..LockConfig::noiseless_reference()
        };
        let state = EnvironmentState::reference(30.0);
        let result = static_align(&device, &state, &noise, &cfg, 1000 + i).unwrap();
        for (a, b) in result.volts.v.iter().zip(&oracle.v) {
            worst_dv = worst_dv.max((a - b).abs());
        }
        for d in &result.residual_detunings_pm {
            worst_res = worst_res.max(d.abs());
        }
    }
    println!(
        "[noiseless x50] worst |dV| = {:.3e} V, worst residual = {:.3e} pm, {:?}",
        worst_dv,
        worst_res,
        t0.elapsed()
    );

    // --- noisy static protocol, default device ---
    for samples in [500u32, 1000, 2000, 4000, 10000] {
        let device = DeviceModel::default_two_ring();
        let noise = NoiseSpec::default();
        let cfg = LockConfig { samples_per_eval: samples, ..LockConfig::default() };
        let state = EnvironmentState::reference(30.0);
        let mut successes = 0;
        let mut iters = Vec::new();
        let mut worst = Vec::new();
        let t0 = std::time::Instant::now();
        for seed in 0..100 {
            let r = static_align(&device, &state, &noise, &cfg, seed).unwrap();
            if r.success {
                successes += 1;
                iters.push(r.n_iterations as f64);
            }
            worst.push(
                r.residual_detunings_pm.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs())),
            );
        }
        let mean_iters = iters.iter().sum::<f64>() / iters.len().max(1) as f64;
        worst.sort_by(f64::total_cmp);
        println!(
            "[static k={samples}] success {successes}/100, mean iters {:.1}, median worst-res {:.3} pm, p90 {:.3} pm, {:?}",
            mean_iters,
            worst[50],
            worst[90],
            t0.elapsed()
        );
    }

    // --- dynamic walk, three modes ---
    for (kind, label) in [
        (NoiseKind::TemperatureWalk, "walk"),
        (NoiseKind::CrosstalkSweep, "sweep"),
    ] {
        for seed in [1u64, 2, 3, 4, 5] {
            let device = DeviceModel::default_two_ring();
            let noise = NoiseSpec {
                kind,
                n_steps: if kind == NoiseKind::CrosstalkSweep { 14 } else { 60 },
                ..NoiseSpec::default()
            };
            let t0 = std::time::Instant::now();
            let run = |mode: LockMode| {
                dynamic_lock(&device, &noise, &LockConfig { lock_mode: mode, ..LockConfig::default() }, seed)
                    .unwrap()
            };
            let unc = run(LockMode::Uncorrected);
            let ins = run(LockMode::InSitu);
            let base = run(LockMode::TuningCurveBaseline);
            let s_unc = stability_summary(&unc, None).unwrap();
            let s_ins = stability_summary(&ins, Some(&unc)).unwrap();
            let s_base = stability_summary(&base, Some(&unc)).unwrap();
            println!(
                "[{label} seed {seed}] unc p2p {:.1} pm | insitu std {:.3} pm (impr {:.0}) | baseline std {:.3} pm (impr {:.0}) | ins/base ratio {:.1} | unlocked {} | {:?}",
                s_unc.total_variation_pm,
                s_ins.worst_std_pm,
                s_ins.improvement_factor.unwrap(),
                s_base.worst_std_pm,
                s_base.improvement_factor.unwrap(),
                s_base.worst_std_pm / s_ins.worst_std_pm,
                s_ins.unlocked_steps,
                t0.elapsed(),
            );
        }
    }
}
