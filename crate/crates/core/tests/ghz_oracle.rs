//! Truncated-Fock integration of the driven Hamiltonian versus the
//! strong-driving closed form.

use std::f64::consts::FRAC_PI_2;

use cqed_mermin::ghz_prep::{
    fock_evolution_oracle, prepare_ghz, step_halving_change, GhzClassOverlap, PrepParams,
};
use cqed_mermin::mhz_to_angular;
use cqed_mermin::qubits::ThreeQubitState;

const T: f64 = 0.1;
const LEVELS: usize = 12;
const DT: f64 = 2e-6;

/// g/2π = 25 MHz, δ/2π = 250 MHz; Ωt ≡ 3π/4 at t = 100 ns for each Ω.
fn params(omega_mhz: f64) -> PrepParams {
    PrepParams::from_rabi(mhz_to_angular(25.0), mhz_to_angular(250.0), mhz_to_angular(omega_mhz))
        .unwrap()
}

fn minus_i_ghz() -> ThreeQubitState {
    ThreeQubitState::ghz_with_phase(-FRAC_PI_2)
}

#[test]
fn fidelity_grows_with_drive_strength() {
    let target = minus_i_ghz();
    let f: Vec<f64> = [503.75, 1253.75, 2503.75]
        .iter()
        .map(|&om| fock_evolution_oracle(&params(om), T, LEVELS, DT).unwrap().fidelity(&target))
        .collect();
    assert!(f[0] < f[1] && f[1] < f[2], "{f:?}");
    assert!(f[2] >= 0.99, "{f:?}");
}

#[test]
fn oracle_tracks_closed_form_state() {
    let p = params(2503.75);
    let closed = prepare_ghz(&p, 1e-9).unwrap().state;
    let out = fock_evolution_oracle(&p, T, LEVELS, DT).unwrap();
    assert!(out.fidelity(&closed) >= 0.99);
    assert!(out.purity > 0.999);
    assert!(out.max_norm_drift < 1e-10);
    assert!(out.max_top_population < 1e-12);
    let class = GhzClassOverlap::of(&out.state);
    assert!((class.relative_phase + FRAC_PI_2).abs() < 0.05);
}

#[test]
fn step_is_converged() {
    let change = step_halving_change(&params(2503.75), T, LEVELS, 4e-6, &minus_i_ghz()).unwrap();
    assert!(change < 1e-6, "{change}");
}
