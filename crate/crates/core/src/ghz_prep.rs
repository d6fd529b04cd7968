//! One-step GHZ preparation in a strongly driven, detuned cavity.
//!
//! In the strong-driving regime (`Ω ≫ δ, g`) the register couples to the
//! cavity only through `S_x`, and at times where `δt` is a multiple of `2π`
//! the cavity disentangles, leaving the register propagator
//! `exp(−i·2Ω·t·S_x − i·(g²/δ)·t·S_x²)`. [`prepare_ghz`] evaluates it at a
//! time found by [`ghz_schedule`]; [`fock_evolution_oracle`] integrates the
//! driven Hamiltonian before the rotating-wave step on a truncated Fock space
//! and serves as the brute-force check.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    from_rows, identity, kron, kron_all, real, unitary_from_hermitian, ComplexMatrix,
    ComplexVector, HermitianEigen, I,
};
use crate::qubits::{collective_spin, pauli, Axis, JointLabel, ThreeQubitState, DIM};

/// Largest `n` (in `t = 2πn/|δ|`) the schedule search visits.
pub const MAX_SCHEDULE_N: u64 = 1_000_000;
/// Tolerance on `δt ≡ 0 (mod 2π)` for the closed-form propagator.
pub const COMMENSURABILITY_TOL: f64 = 1e-9;
/// Target of `g²t/δ (mod 2π)`.
pub const TWIST_PHASE: f64 = FRAC_PI_2;
/// Target of `Ωt (mod 2π)`.
pub const ROTATION_PHASE: f64 = 0.75 * std::f64::consts::PI;
/// Top-level Fock population above which the oracle reports truncation.
pub const FOCK_TOP_LEVEL_TOL: f64 = 1e-6;
/// Smallest accepted Fock cutoff for the oracle.
pub const MIN_FOCK_LEVELS: usize = 8;

/// Drive and coupling parameters of the preparation step (rad/µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrepParams {
    g: f64,
    delta: f64,
    epsilon: Option<f64>,
    omega_rabi: f64,
}

impl PrepParams {
    /// From coupling `g`, drive detuning `δ = ω_d − ω_r` and drive amplitude
    /// `ε`; the Rabi frequency is `Ω = εg/δ`.
    pub fn from_drive(g: f64, delta: f64, epsilon: f64) -> Result<Self> {
        Self::validate(g, delta)?;
        if !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("drive amplitude {epsilon} is not finite")));
        }
        Ok(Self {
            g,
            delta,
            epsilon: Some(epsilon),
            omega_rabi: epsilon * g / delta,
        })
    }

    /// From the Rabi frequency directly. `g = 0` is allowed and describes a
    /// register driven with the cavity decoupled.
    pub fn from_rabi(g: f64, delta: f64, omega_rabi: f64) -> Result<Self> {
        Self::validate(g, delta)?;
        if !omega_rabi.is_finite() {
            return Err(Error::InvalidParameter(format!("Rabi frequency {omega_rabi} is not finite")));
        }
        let epsilon = (g > 0.0).then(|| omega_rabi * delta / g);
        Ok(Self {
            g,
            delta,
            epsilon,
            omega_rabi,
        })
    }

    fn validate(g: f64, delta: f64) -> Result<()> {
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::InvalidParameter(format!("coupling g = {g} must be finite and >= 0")));
        }
        if !delta.is_finite() || delta == 0.0 {
            return Err(Error::InvalidParameter(format!("detuning delta = {delta} must be finite and non-zero")));
        }
        Ok(())
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn omega_rabi(&self) -> f64 {
        self.omega_rabi
    }

    /// `g²/δ`, the strength of the `S_x²` interaction.
    pub fn twist_rate(&self) -> f64 {
        self.g * self.g / self.delta
    }

    /// `Ω / max(|δ|, g)`; the rotating-wave step needs this ≫ 1.
    pub fn strong_driving_ratio(&self) -> f64 {
        self.omega_rabi.abs() / self.delta.abs().max(self.g)
    }
}

/// Homogeneous-coupling coefficients of the factorized propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionCoefficients {
    /// `A_jj'(t)`, the same for every pair.
    pub a_pair: Complex64,
    /// `B_j(t)`, the same for every qubit.
    pub b: Complex64,
    pub c: Complex64,
}

/// Coefficients for per-qubit couplings `g_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingCoefficients {
    /// `A_jj'` for `j ≠ j'`; the diagonal is zero.
    pub a: [[Complex64; 3]; 3],
    pub b: [Complex64; 3],
    pub c: Complex64,
}

/// `(e^{−iδt} − 1)/(iδ) + t`.
fn pair_kernel(t: f64, delta: f64) -> Complex64 {
    (Complex64::from_polar(1.0, -delta * t) - 1.0) / (I * delta) + t
}

pub fn coupling_coefficients(t: f64, delta: f64, couplings: [f64; 3]) -> Result<CouplingCoefficients> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time {t} must be finite and >= 0")));
    }
    if !delta.is_finite() || delta == 0.0 {
        return Err(Error::InvalidParameter(format!("detuning {delta} must be non-zero")));
    }
    let kernel = pair_kernel(t, delta);
    let mut a = [[Complex64::ZERO; 3]; 3];
    for j in 0..3 {
        for jp in 0..3 {
            if j != jp {
                a[j][jp] = kernel * (couplings[j] * couplings[jp] / (4.0 * delta));
            }
        }
    }
    let phase = Complex64::from_polar(1.0, delta * t) - 1.0;
    let b = couplings.map(|g| phase * g / (2.0 * I * delta));
    let c = couplings.iter().map(|g| kernel * (g * g / (4.0 * delta))).sum();
    Ok(CouplingCoefficients { a, b, c })
}

pub fn evolution_coefficients(t: f64, p: &PrepParams) -> Result<EvolutionCoefficients> {
    let cc = coupling_coefficients(t, p.delta, [p.g; 3])?;
    Ok(EvolutionCoefficients {
        a_pair: cc.a[0][1],
        b: cc.b[0],
        c: cc.c,
    })
}

/// Distance of `value` from `target` on the circle, in `[0, π]`.
pub fn phase_residual(value: f64, target: f64) -> f64 {
    let r = (value - target).rem_euclid(TAU);
    r.min(TAU - r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseResiduals {
    /// `δt` from the nearest multiple of `2π`.
    pub commensurability: f64,
    /// `g²t/δ` from `π/2 (mod 2π)`.
    pub twist: f64,
    /// `Ωt` from `3π/4 (mod 2π)`.
    pub rotation: f64,
}

impl PhaseResiduals {
    pub fn max(&self) -> f64 {
        self.commensurability.max(self.twist).max(self.rotation)
    }
}

/// A preparation time `t = 2πn/|δ|` with `g²t/δ = (4k+1)π/2`, `Ωt = (2m+3/4)π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GhzSchedule {
    pub t: f64,
    pub n: u64,
    pub k: i64,
    pub m: i64,
    pub phase_errors: PhaseResiduals,
}

fn residuals_at(t: f64, p: &PrepParams) -> PhaseResiduals {
    PhaseResiduals {
        commensurability: phase_residual(p.delta * t, 0.0),
        twist: phase_residual(p.twist_rate() * t, TWIST_PHASE),
        rotation: phase_residual(p.omega_rabi * t, ROTATION_PHASE),
    }
}

/// Smallest commensurate time meeting both GHZ phase conditions within `tol`.
pub fn ghz_schedule(p: &PrepParams, tol: f64) -> Result<GhzSchedule> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be > 0")));
    }
    let period = TAU / p.delta.abs();
    for n in 1..=MAX_SCHEDULE_N {
        let t = period * n as f64;
        let r = residuals_at(t, p);
        if r.twist <= tol && r.rotation <= tol {
            let k = ((p.twist_rate() * t - TWIST_PHASE) / TAU).round() as i64;
            let m = ((p.omega_rabi * t - ROTATION_PHASE) / TAU).round() as i64;
            return Ok(GhzSchedule {
                t,
                n,
                k,
                m,
                phase_errors: r,
            });
        }
    }
    Err(Error::NoScheduleFound {
        max_n: MAX_SCHEDULE_N,
        tol,
    })
}

/// Register factor of the propagator at a commensurate time `t`:
/// `exp(−i·2Ω·t·S_x − i·(g²/δ)·t·S_x²)`.
///
/// The cavity factor `exp(−iω a†a t)` is omitted; at these times the register
/// and cavity are in a product state and it only contributes a global phase.
pub fn closed_form_propagator(t: f64, p: &PrepParams) -> Result<ComplexMatrix> {
    let residual = phase_residual(p.delta * t, 0.0);
    if !t.is_finite() || residual > COMMENSURABILITY_TOL {
        return Err(Error::NonCommensurateTime { t, residual });
    }
    let sx = collective_spin(Axis::X);
    let h = sx.scale(2.0 * p.omega_rabi) + (&sx * &sx).scale(p.twist_rate());
    unitary_from_hermitian(&h, t)
}

/// Overlap with the closest state `(|000⟩ + e^{iφ}|111⟩)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GhzClassOverlap {
    pub fidelity: f64,
    /// `φ`, in `(−π, π]`.
    pub relative_phase: f64,
}

impl GhzClassOverlap {
    pub fn of(state: &ThreeQubitState) -> Self {
        let a0 = state.amplitude(JointLabel::from_bits(0, 0, 0));
        let a7 = state.amplitude(JointLabel::from_bits(1, 1, 1));
        let fidelity = 0.5 * (a0.norm() + a7.norm()).powi(2);
        let relative_phase = (a7 * a0.conj()).arg();
        Self {
            fidelity,
            relative_phase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedGhz {
    pub schedule: GhzSchedule,
    pub state: ThreeQubitState,
    /// `|⟨ψ_target|ψ⟩|²` against `(|000⟩ + i|111⟩)/√2`.
    pub fidelity: f64,
    pub ghz_class: GhzClassOverlap,
}

/// Runs the closed-form propagator on `|000⟩` at the scheduled time.
pub fn prepare_ghz(p: &PrepParams, tol: f64) -> Result<PreparedGhz> {
    let schedule = ghz_schedule(p, tol)?;
    prepare_at(p, schedule)
}

pub fn prepare_at(p: &PrepParams, schedule: GhzSchedule) -> Result<PreparedGhz> {
    let u = closed_form_propagator(schedule.t, p)?;
    let state = ThreeQubitState::basis(JointLabel::from_bits(0, 0, 0)).evolve(&u)?;
    Ok(PreparedGhz {
        schedule,
        fidelity: ThreeQubitState::ghz().fidelity(&state),
        ghz_class: GhzClassOverlap::of(&state),
        state,
    })
}

/// Result of the truncated-Fock integration.
#[derive(Debug, Clone)]
pub struct FockEvolution {
    /// Dominant eigenvector of the reduced register density matrix, with its
    /// largest component made real and positive.
    pub state: ThreeQubitState,
    /// Reduced register density matrix after tracing out the cavity.
    pub reduced_density: ComplexMatrix,
    /// `Tr ρ²` of the reduced state.
    pub purity: f64,
    pub steps: usize,
    /// Largest `|‖ψ‖² − 1|` seen during the run.
    pub max_norm_drift: f64,
    /// Largest population of the top Fock level seen during the run.
    pub max_top_population: f64,
}

impl FockEvolution {
    /// `⟨ψ|ρ|ψ⟩` of the reduced density matrix.
    pub fn fidelity(&self, target: &ThreeQubitState) -> f64 {
        let v = target.to_vector();
        (v.adjoint() * &self.reduced_density * &v)[(0, 0)].re
    }
}

fn annihilation(levels: usize) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(levels, levels);
    for k in 1..levels {
        a[(k - 1, k)] = real((k as f64).sqrt());
    }
    a
}

/// `H₀ = Ω Σσx_j + g Σ(a†σ−_j + aσ+_j)` on register ⊗ cavity.
fn frame_hamiltonian(p: &PrepParams, levels: usize) -> ComplexMatrix {
    let id2 = identity(2);
    let idc = identity(levels);
    let a = annihilation(levels);
    let a_dag = a.adjoint();
    // σ−|1⟩ = |0⟩
    let lower = from_rows(2, 2, &[Complex64::ZERO, real(1.0), Complex64::ZERO, Complex64::ZERO]);
    let raise = lower.adjoint();
    let x = pauli(Axis::X);

    let on_qubit = |op: &ComplexMatrix, q: usize| -> ComplexMatrix {
        let f: [&ComplexMatrix; 3] = match q {
            1 => [op, &id2, &id2],
            2 => [&id2, op, &id2],
            _ => [&id2, &id2, op],
        };
        kron_all(f)
    };

    let mut h = ComplexMatrix::zeros(DIM * levels, DIM * levels);
    for q in 1..=3 {
        h += kron(&on_qubit(&x, q), &idc).scale(p.omega_rabi);
        h += (kron(&on_qubit(&lower, q), &a_dag) + kron(&on_qubit(&raise, q), &a)).scale(p.g);
    }
    h
}

/// Integrates `H(t) = Ω Σσx_j + g Σ(a†σ−_j e^{−iδt} + aσ+_j e^{iδt})` from
/// `|000⟩ ⊗ |0⟩` for duration `t` with step `dt`.
///
/// Each step applies `exp(−i H(t_mid) dt)`. Because
/// `H(t) = R(t) H₀ R(t)†` with `R(t) = exp(−iδ a†a t)`, the step unitary is
/// `R(t_mid) exp(−iH₀ dt) R(t_mid)†`, so a single eigendecomposition of `H₀`
/// serves every step.
pub fn fock_evolution_oracle(
    p: &PrepParams,
    t: f64,
    levels: usize,
    dt: f64,
) -> Result<FockEvolution> {
    if levels < MIN_FOCK_LEVELS {
        return Err(Error::InvalidParameter(format!(
            "Fock cutoff {levels} below minimum {MIN_FOCK_LEVELS}"
        )));
    }
    if !(t > 0.0 && t.is_finite() && dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("invalid duration {t} or step {dt}")));
    }
    let steps = (t / dt).ceil().max(1.0) as usize;
    let h_step = t / steps as f64;

    let dim = DIM * levels;
    let step_unitary = HermitianEigen::new(&frame_hamiltonian(p, levels))?.propagator(h_step);

    let mut psi = ComplexVector::zeros(dim);
    psi[0] = real(1.0);
    let mut scratch = ComplexVector::zeros(dim);
    let mut max_norm_drift = 0.0f64;
    let mut max_top_population = 0.0f64;

    for s in 0..steps {
        let t_mid = (s as f64 + 0.5) * h_step;
        // R(t_mid)† then W then R(t_mid)
        for (idx, z) in psi.iter_mut().enumerate() {
            let n = (idx % levels) as f64;
            *z *= Complex64::from_polar(1.0, p.delta * n * t_mid);
        }
        step_unitary.mul_to(&psi, &mut scratch);
        for (idx, z) in scratch.iter_mut().enumerate() {
            let n = (idx % levels) as f64;
            *z *= Complex64::from_polar(1.0, -p.delta * n * t_mid);
        }
        std::mem::swap(&mut psi, &mut scratch);

        let top: f64 = (0..DIM)
            .map(|q| psi[q * levels + levels - 1].norm_sqr())
            .sum();
        max_top_population = max_top_population.max(top);
        if top > FOCK_TOP_LEVEL_TOL {
            return Err(Error::Truncation {
                level: levels - 1,
                population: top,
            });
        }
        max_norm_drift = max_norm_drift.max((psi.norm_squared() - 1.0).abs());
    }

    // ρ = M M† with M[q, n] = ψ[q·levels + n]
    let m = ComplexMatrix::from_fn(DIM, levels, |q, n| psi[q * levels + n]);
    let rho = &m * m.adjoint();
    let purity = rho.iter().map(|z| z.norm_sqr()).sum();

    let eig = HermitianEigen::new(&rho)?;
    let mut v = eig.vectors.column(DIM - 1).into_owned();
    let lead = (0..DIM)
        .max_by(|&i, &j| v[i].norm().total_cmp(&v[j].norm()))
        .unwrap_or(0);
    let phase = v[lead].conj() / v[lead].norm();
    v *= phase;
    let state = ThreeQubitState::normalized(std::array::from_fn(|i| v[i]))?;

    Ok(FockEvolution {
        state,
        reduced_density: rho,
        purity,
        steps,
        max_norm_drift,
        max_top_population,
    })
}

/// `|F(dt) − F(dt/2)|` for the oracle's fidelity against `target`.
pub fn step_halving_change(
    p: &PrepParams,
    t: f64,
    levels: usize,
    dt: f64,
    target: &ThreeQubitState,
) -> Result<f64> {
    let coarse = fock_evolution_oracle(p, t, levels, dt)?.fidelity(target);
    let fine = fock_evolution_oracle(p, t, levels, dt / 2.0)?.fidelity(target);
    Ok((coarse - fine).abs())
}

/// `exp(−i·2Ω·t·S_x)|000⟩`, the register evolution with the cavity decoupled.
pub fn decoupled_rotation(t: f64, omega_rabi: f64) -> Result<ThreeQubitState> {
    let u = unitary_from_hermitian(&collective_spin(Axis::X).scale(2.0 * omega_rabi), t)?;
    ThreeQubitState::basis(JointLabel::from_bits(0, 0, 0)).evolve(&u)
}
