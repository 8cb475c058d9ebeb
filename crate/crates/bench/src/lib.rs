//! Inputs shared by the criterion benchmarks.

use aqce_core::aqce::{encode_state, EncodeParams, FidelityTier};
use aqce_core::dataset::{load_images, ImageFormat};
use aqce_core::smallalg::{nearest_unitary, C64};
use aqce_core::{Circuit, Matrix4, StateVector, TwoQubitGate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// The first `n` training digits as normalized states.
pub fn digits(n: usize) -> Vec<StateVector> {
    let path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/mnist/train-images.idx3-ubyte");
    let images = load_images(&path, ImageFormat::Idx)
        .expect("MNIST fixture")
        .truncated(n);
    images
        .vectors
        .iter()
        .map(|x| StateVector::from_classical(x).expect("non-zero digit"))
        .collect()
}

/// Encoded circuits for the first `n` training digits.
pub fn encoded_digits(n: usize, tier: FidelityTier) -> Vec<Circuit> {
    let params = EncodeParams::for_tier(tier);
    digits(n)
        .iter()
        .map(|t| encode_state(t, &params).expect("encode").circuit)
        .collect()
}

pub fn random_unitary(rng: &mut impl Rng) -> Matrix4 {
    let mut m = Matrix4::zeros();
    for row in m.0.iter_mut() {
        for z in row.iter_mut() {
            *z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    nearest_unitary(&m).expect("full-rank sample")
}

pub fn random_circuit(seed: u64, n_qubits: usize, gates: usize) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gates = (0..gates)
        .map(|_| {
            let qa = rng.gen_range(0..n_qubits);
            let qb = (qa + rng.gen_range(1..n_qubits)) % n_qubits;
            TwoQubitGate::new(random_unitary(&mut rng), qa, qb).expect("valid gate")
        })
        .collect();
    Circuit::from_gates(n_qubits, gates).expect("valid circuit")
}
