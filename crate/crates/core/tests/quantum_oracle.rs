//! Cross-check of the closed-form two-photon output probabilities against a
//! brute-force Fock-space evolution of the final 50/50 coupler.
//!
//! The oracle knows nothing about the closed-form expressions: it builds the
//! coupler's action on the two-photon basis {|20>, |11>, |02>} from the
//! single-mode unitary via matrix permanents and evolves the input state
//! directly.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ringlock_core::quantum::{coincidence_probability, photon_number_probabilities, SourceAmplitudes};

/// Occupations of the two-photon basis states, in order.
const BASIS: [(u32, u32); 3] = [(2, 0), (1, 1), (0, 2)];

/// Permanent of a square matrix (naive expansion; sizes here are <= 2).
fn permanent(m: &[Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    match n {
        0 => Complex64::new(1.0, 0.0),
        1 => m[0][0],
        2 => m[0][0] * m[1][1] + m[0][1] * m[1][0],
        _ => {
            // Laplace-style expansion along the first row.
            let mut total = Complex64::new(0.0, 0.0);
            for (j, &head) in m[0].iter().enumerate() {
                let minor: Vec<Vec<Complex64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != j)
                            .map(|(_, &v)| v)
                            .collect()
                    })
                    .collect();
                total += head * permanent(&minor);
            }
            total
        }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
}

/// Matrix element <m|U_fock|n> of the induced two-photon unitary: the
/// permanent of U with rows repeated per output occupation and columns per
/// input occupation, normalized by the occupation factorials.
fn fock_element(u: &[[Complex64; 2]; 2], m: (u32, u32), n: (u32, u32)) -> Complex64 {
    let rows: Vec<usize> = std::iter::repeat(0)
        .take(m.0 as usize)
        .chain(std::iter::repeat(1).take(m.1 as usize))
        .collect();
    let cols: Vec<usize> = std::iter::repeat(0)
        .take(n.0 as usize)
        .chain(std::iter::repeat(1).take(n.1 as usize))
        .collect();
    let sub: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| u[r][c]).collect())
        .collect();
    let norm = (factorial(m.0) * factorial(m.1) * factorial(n.0) * factorial(n.1)).sqrt();
    permanent(&sub) / norm
}

/// Evolve `a|20> + b e^{2i phi}|02>` through the real 50/50 coupler and
/// return (P20, P11, P02).
fn brute_force_probabilities(a: f64, b: f64, phi: f64) -> (f64, f64, f64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u = [
        [Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)],
    ];
    let input = [
        Complex64::new(a, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::from_polar(b, 2.0 * phi),
    ];
    let mut output = [Complex64::new(0.0, 0.0); 3];
    for (mi, &m) in BASIS.iter().enumerate() {
        for (ni, &n) in BASIS.iter().enumerate() {
            output[mi] += fock_element(&u, m, n) * input[ni];
        }
    }
    (output[0].norm_sqr(), output[1].norm_sqr(), output[2].norm_sqr())
}

#[test]
fn coupler_unitary_preserves_norm() {
    let (p20, p11, p02) = brute_force_probabilities(0.6, 0.8, 0.37);
    assert!((p20 + p11 + p02 - 1.0).abs() < 1e-12);
}

#[test]
fn equal_amplitude_input_reproduces_the_ideal_fringe() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for phi in [0.0, 0.25, std::f64::consts::FRAC_PI_2, 1.9] {
        let (_, p11, _) = brute_force_probabilities(s, s, phi);
        assert!((p11 - phi.sin().powi(2)).abs() < 1e-12, "phi {phi}: p11 {p11}");
    }
}

#[test]
fn closed_form_matches_fock_evolution_for_full_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..2000 {
        let a1 = rng.random_range(0.0..1.0f64).sqrt();
        let a2 = (1.0 - a1 * a1).sqrt();
        let phi = rng.random_range(-6.3..6.3);
        let src = SourceAmplitudes::new(a1, a2, 1.0, phi).unwrap();
        let (p20, p02, p11) = photon_number_probabilities(&src);
        let (q20, q11, q02) = brute_force_probabilities(a1, a2, phi);
        assert!((p11 - q11).abs() < 1e-12, "p11 {p11} vs oracle {q11}");
        assert!((p20 - q20).abs() < 1e-12, "p20 {p20} vs oracle {q20}");
        assert!((p02 - q02).abs() < 1e-12, "p02 {p02} vs oracle {q02}");
        assert!((coincidence_probability(&src) - q11).abs() < 1e-12);
    }
}

#[test]
fn probabilities_conserve_for_partial_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    for _ in 0..5000 {
        let a1 = rng.random_range(0.0..1.0f64).sqrt();
        let a2 = (1.0 - a1 * a1).sqrt();
        let overlap = rng.random_range(0.0..1.0);
        let phi = rng.random_range(-6.3..6.3);
        let src = SourceAmplitudes::new(a1, a2, overlap, phi).unwrap();
        let (p20, p02, p11) = photon_number_probabilities(&src);
        assert!((p20 + p02 + p11 - 1.0).abs() < 1e-12);
        assert!(p20 >= -1e-15 && p02 >= -1e-15 && p11 >= -1e-15);
    }
}
