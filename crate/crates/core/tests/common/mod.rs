use cqed_mermin::qubits::ThreeQubitState;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[allow(dead_code)]
pub fn random_state(rng: &mut ChaCha8Rng) -> ThreeQubitState {
    let amps = std::array::from_fn(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    ThreeQubitState::normalized(amps).unwrap()
}

#[allow(dead_code)]
pub fn random_angles(rng: &mut ChaCha8Rng) -> [f64; 3] {
    std::array::from_fn(|_| rng.gen_range(-10.0..10.0))
}
