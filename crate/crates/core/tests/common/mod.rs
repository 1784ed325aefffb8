//! Shared generators for randomized cross-module suites.
#![allow(dead_code)]

pub mod oracle;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use steerkit::linalg::{kron, ComplexMatrix};
use steerkit::quantum::{qubit_measurements, MeasurementAssemblage};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_bloch(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Random projective two-setting qubit measurements.
pub fn random_qubit_pair(rng: &mut ChaCha8Rng) -> MeasurementAssemblage {
    qubit_measurements(&[random_bloch(rng), random_bloch(rng)]).expect("unit vectors")
}

/// Ginibre-sampled density matrix of dimension d (full rank a.s.).
pub fn random_state(d: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
    });
    let m = g.matmul(&g.adjoint());
    m.scale_re(1.0 / m.real_trace())
}

/// Random separable two-qubit state as an explicit mixture of products.
pub fn random_separable_state(rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let terms = 3 + (rng.gen::<u32>() % 3) as usize;
    let mut weights: Vec<f64> = (0..terms).map(|_| rng.gen::<f64>() + 0.1).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut rho = ComplexMatrix::zeros(4, 4);
    for w in weights {
        let a = random_state(2, rng);
        let b = random_state(2, rng);
        rho = rho.add(&kron(&a, &b).scale_re(w));
    }
    rho
}
