//! Three-qubit register algebra.
//!
//! Basis ordering: single-qubit states are ordered `(|0⟩, |1⟩)` and the joint
//! basis index of `|ijk⟩` is `4i + 2j + k`, so qubit 1 is the most significant
//! factor.
//!
//! Two sign conventions coexist and are kept deliberately separate:
//!
//! * Measurement and dynamics use `σz|1⟩ = +|1⟩`, `σz|0⟩ = −|0⟩` ([`pauli`]).
//!   Cavity shifts, parity correlators and the preparation Hamiltonian are all
//!   written in this convention.
//! * Single-qubit gates `R_a(φ) = exp(iφσ_a)` ([`rotation`]) are written with
//!   `|0⟩` as the `+1` eigenstate of the generating `σz`. This is the
//!   convention under which the encoding matrix of [`encode_rotation`] equals
//!   its `R_z R_x R_z` decomposition and the coherence-check rotation produces
//!   the even-parity four-peak state.
//!
//! `σx` is the same in both conventions; `σy` and `σz` differ by a sign.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    c, from_rows, identity, kron_all, real, unitarity_deviation, ComplexMatrix,
    ComplexVector, HermitianEigen, I, UNITARY_TOL,
};

/// Number of joint basis states.
pub const DIM: usize = 8;
/// Tolerance on `Σ|amplitude|² = 1`.
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance on `Σp = 1` for probability tables.
pub const PROBABILITY_TOL: f64 = 1e-9;
/// Smallest accepted projection norm² onto the symmetric sector, as `1 - tol`.
pub const SYMMETRIC_SECTOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// A joint basis state `|ijk⟩`, stored as its index `4i + 2j + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointLabel(u8);

impl JointLabel {
    pub fn new(index: usize) -> Result<Self> {
        if index < DIM {
            Ok(Self(index as u8))
        } else {
            Err(Error::InvalidParameter(format!(
                "joint basis index {index} out of range"
            )))
        }
    }

    pub fn from_bits(i: u8, j: u8, k: u8) -> Self {
        Self(((i & 1) << 2) | ((j & 1) << 1) | (k & 1))
    }

    pub fn all() -> impl Iterator<Item = JointLabel> {
        (0..DIM as u8).map(JointLabel)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Bit of qubit `q` (1-based, qubit 1 most significant).
    pub fn bit(self, q: usize) -> u8 {
        (self.0 >> (3 - q)) & 1
    }

    pub fn bits(self) -> [u8; 3] {
        [self.bit(1), self.bit(2), self.bit(3)]
    }

    /// `σz` eigenvalue of qubit `q` in this basis state: `+1` for bit 1.
    pub fn sigma_z(self, q: usize) -> f64 {
        if self.bit(q) == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Eigenvalue of `σz₁σz₂σz₃`.
    pub fn parity(self) -> f64 {
        self.sigma_z(1) * self.sigma_z(2) * self.sigma_z(3)
    }

    /// Parses `"|ijk>"`, `"|ijk⟩"` or a bare `"ijk"`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let t = t.strip_prefix('|').unwrap_or(t);
        let t = t
            .strip_suffix('>')
            .or_else(|| t.strip_suffix('⟩'))
            .unwrap_or(t);
        let bits: Vec<u8> = t
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidParameter(format!("bad basis label {text:?}"))),
            })
            .collect::<Result<_>>()?;
        if bits.len() != 3 {
            return Err(Error::InvalidParameter(format!("bad basis label {text:?}")));
        }
        Ok(Self::from_bits(bits[0], bits[1], bits[2]))
    }
}

impl fmt::Display for JointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [i, j, k] = self.bits();
        write!(f, "|{i}{j}{k}>")
    }
}

/// Pure state of the three-qubit register.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeQubitState {
    amplitudes: [Complex64; DIM],
}

impl ThreeQubitState {
    /// Wraps amplitudes that are already normalized.
    pub fn new(amplitudes: [Complex64; DIM]) -> Result<Self> {
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm_sqr: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn normalized(amplitudes: [Complex64; DIM]) -> Result<Self> {
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            amplitudes: amplitudes.map(|z| z / norm),
        })
    }

    pub fn basis(label: JointLabel) -> Self {
        let mut amplitudes = [Complex64::ZERO; DIM];
        amplitudes[label.index()] = real(1.0);
        Self { amplitudes }
    }

    /// `(|000⟩ + e^{iφ}|111⟩)/√2`.
    pub fn ghz_with_phase(phi: f64) -> Self {
        let mut amplitudes = [Complex64::ZERO; DIM];
        amplitudes[0] = real(FRAC_1_SQRT_2);
        amplitudes[7] = Complex64::from_polar(FRAC_1_SQRT_2, phi);
        Self { amplitudes }
    }

    /// `(|000⟩ + i|111⟩)/√2`, the one-step preparation target.
    pub fn ghz() -> Self {
        let mut amplitudes = [Complex64::ZERO; DIM];
        amplitudes[0] = real(FRAC_1_SQRT_2);
        amplitudes[7] = c(0.0, FRAC_1_SQRT_2);
        Self { amplitudes }
    }

    /// `(|000⟩ + |111⟩)/√2`.
    pub fn ghz_phase_free() -> Self {
        Self::ghz_with_phase(0.0)
    }

    pub fn from_vector(v: &ComplexVector) -> Result<Self> {
        if v.len() != DIM {
            return Err(Error::DimensionMismatch {
                expected: DIM,
                actual: v.len(),
            });
        }
        let mut amplitudes = [Complex64::ZERO; DIM];
        amplitudes.copy_from_slice(v.as_slice());
        Self::new(amplitudes)
    }

    pub fn to_vector(&self) -> ComplexVector {
        ComplexVector::from_column_slice(&self.amplitudes)
    }

    pub fn amplitudes(&self) -> &[Complex64; DIM] {
        &self.amplitudes
    }

    pub fn amplitude(&self, label: JointLabel) -> Complex64 {
        self.amplitudes[label.index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|⟨self|other⟩|²`, insensitive to global phase.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Applies a full-register 8×8 unitary.
    pub fn evolve(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.shape() != (DIM, DIM) {
            return Err(Error::DimensionMismatch {
                expected: DIM,
                actual: u.nrows(),
            });
        }
        Self::from_vector(&(u * self.to_vector()))
    }

    /// Expectation value of `σz` products over the qubits in `mask`
    /// (bit `3 - q` selects qubit `q`).
    pub fn sigma_z_product(&self, mask: u8) -> f64 {
        JointLabel::all()
            .map(|l| {
                let sign: f64 = (1..=3)
                    .filter(|&q| mask >> (3 - q) & 1 == 1)
                    .map(|q| l.sigma_z(q))
                    .product();
                sign * self.amplitude(l).norm_sqr()
            })
            .sum()
    }
}

/// Pauli matrix in basis `(|0⟩, |1⟩)` with `σz = diag(−1, +1)`.
pub fn pauli(axis: Axis) -> ComplexMatrix {
    let o = Complex64::ZERO;
    match axis {
        Axis::X => from_rows(2, 2, &[o, real(1.0), real(1.0), o]),
        Axis::Y => from_rows(2, 2, &[o, I, -I, o]),
        Axis::Z => from_rows(2, 2, &[real(-1.0), o, o, real(1.0)]),
    }
}

/// Generator of the gate rotations: `σ_a` written with `|0⟩` as the `+1`
/// eigenstate of `σz`. Equals `X·pauli(a)·X`.
pub fn gate_generator(axis: Axis) -> ComplexMatrix {
    let x = pauli(Axis::X);
    &x * pauli(axis) * &x
}

/// Single-qubit gate `R_a(φ) = exp(iφσ_a)` with the generator of
/// [`gate_generator`].
pub fn rotation(axis: Axis, angle: f64) -> ComplexMatrix {
    let (s, co) = angle.sin_cos();
    identity(2).scale(co) + gate_generator(axis) * c(0.0, s)
}

/// Local-angle encoding gate `R_z(θ/2)·R_x(π/4)·R_z(−θ/2)`:
/// `(1/√2)[[1, i·e^{iθ}], [i·e^{−iθ}, 1]]`.
pub fn encode_rotation(theta: f64) -> ComplexMatrix {
    let h = FRAC_1_SQRT_2;
    from_rows(
        2,
        2,
        &[
            real(h),
            I * Complex64::from_polar(h, theta),
            I * Complex64::from_polar(h, -theta),
            real(h),
        ],
    )
}

/// Coherence-check rotation `R_y(π/4) = exp(iπσ_y/4)`.
pub fn coherence_rotation() -> ComplexMatrix {
    rotation(Axis::Y, PI / 4.0)
}

/// `diag(1, −i)`: removes the relative phase `i` of the prepared GHZ state
/// when applied to one qubit.
pub fn phase_correction() -> ComplexMatrix {
    from_rows(2, 2, &[real(1.0), Complex64::ZERO, Complex64::ZERO, -I])
}

/// Applies a 2×2 unitary to qubit `qubit` (1..=3).
pub fn apply_single(
    gate: &ComplexMatrix,
    qubit: usize,
    state: &ThreeQubitState,
) -> Result<ThreeQubitState> {
    if !(1..=3).contains(&qubit) {
        return Err(Error::QubitIndex(qubit));
    }
    if gate.shape() != (2, 2) {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: gate.nrows(),
        });
    }
    let deviation = unitarity_deviation(gate);
    if !(deviation <= UNITARY_TOL) {
        return Err(Error::NotUnitary { deviation });
    }

    let shift = 3 - qubit;
    let mut out = [Complex64::ZERO; DIM];
    for (b, slot) in out.iter_mut().enumerate() {
        let bit = (b >> shift) & 1;
        let b0 = b & !(1 << shift);
        let b1 = b0 | (1 << shift);
        *slot = gate[(bit, 0)] * state.amplitudes[b0] + gate[(bit, 1)] * state.amplitudes[b1];
    }
    Ok(ThreeQubitState { amplitudes: out })
}

/// Applies one gate per qubit, qubit 1 first.
pub fn apply_local(gates: [&ComplexMatrix; 3], state: &ThreeQubitState) -> Result<ThreeQubitState> {
    let mut s = *state;
    for (q, g) in gates.into_iter().enumerate() {
        s = apply_single(g, q + 1, &s)?;
    }
    Ok(s)
}

/// Three local encoding angles, reduced to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LocalAngles([f64; 3]);

impl LocalAngles {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Result<Self> {
        Self::from_array([theta1, theta2, theta3])
    }

    pub fn from_array(thetas: [f64; 3]) -> Result<Self> {
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "local angles {thetas:?} are not finite"
            )));
        }
        Ok(Self(thetas.map(|t| {
            let r = t.rem_euclid(TAU);
            // rem_euclid can round up to exactly TAU
            if r >= TAU {
                0.0
            } else {
                r
            }
        })))
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn get(&self, q: usize) -> f64 {
        self.0[q - 1]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Applies `encode_rotation(θ_j)` to each qubit `j`.
pub fn encode_locals(state: &ThreeQubitState, angles: &LocalAngles) -> Result<ThreeQubitState> {
    let [r1, r2, r3] = angles.as_array().map(encode_rotation);
    apply_local([&r1, &r2, &r3], state)
}

/// Probabilities `P_ijk` of the eight joint basis outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct JointProbabilities([f64; DIM]);

impl JointProbabilities {
    pub fn new(p: [f64; DIM]) -> Result<Self> {
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "probabilities must be finite and non-negative: {p:?}"
            )));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self(p))
    }

    pub fn from_state(state: &ThreeQubitState) -> Self {
        Self(state.amplitudes.map(|z| z.norm_sqr()))
    }

    pub fn get(&self, label: JointLabel) -> f64 {
        self.0[label.index()]
    }

    pub fn as_array(&self) -> &[f64; DIM] {
        &self.0
    }
}

pub fn joint_probabilities(state: &ThreeQubitState) -> JointProbabilities {
    JointProbabilities::from_state(state)
}

/// `E = P111 + P100 + P010 + P001 − P011 − P101 − P110 − P000`.
pub fn parity_correlation(p: &JointProbabilities) -> f64 {
    JointLabel::all().map(|l| l.parity() * p.get(l)).sum()
}

/// `−cos(θ1 + θ2 + θ3)`, the correlator of the encoded GHZ state.
pub fn correlation_closed_form(angles: &LocalAngles) -> f64 {
    -angles.sum().cos()
}

/// Collective spin `S_a = Σ_j σ_{a,j}/2` on the register.
pub fn collective_spin(axis: Axis) -> ComplexMatrix {
    let s = pauli(axis);
    let id = identity(2);
    let terms = [
        kron_all([&s, &id, &id]),
        kron_all([&id, &s, &id]),
        kron_all([&id, &id, &s]),
    ];
    (&terms[0] + &terms[1] + &terms[2]).scale(0.5)
}

/// Coefficients `c_M` of a symmetric-sector state in the `S_x` eigenbasis,
/// ordered `M = −3/2, −1/2, +1/2, +3/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinDecomposition {
    pub coefficients: [Complex64; 4],
}

impl SpinDecomposition {
    pub const M_VALUES: [f64; 4] = [-1.5, -0.5, 0.5, 1.5];

    pub fn weights(&self) -> [f64; 4] {
        self.coefficients.map(|z| z.norm_sqr())
    }
}

/// Dicke states `|3/2, M⟩` (S_z eigenbasis) as the columns of an 8×4 matrix,
/// ordered by ascending `M`.
pub fn dicke_basis() -> ComplexMatrix {
    let mut d = ComplexMatrix::zeros(DIM, 4);
    for l in JointLabel::all() {
        let ones = l.bits().iter().filter(|&&b| b == 1).count();
        let weight = [1.0, 3.0, 3.0, 1.0][ones];
        d[(l.index(), ones)] = real(1.0 / f64::sqrt(weight));
    }
    d
}

/// Expands a symmetric-sector state in the eigenbasis of `S_x`.
///
/// `S_x` is diagonalized inside the symmetric sector; each eigenvector's phase
/// is fixed by making its largest Dicke-basis component real and positive.
pub fn spin_decomposition(state: &ThreeQubitState) -> Result<SpinDecomposition> {
    let d = dicke_basis();
    let dicke_coords = d.adjoint() * state.to_vector();
    let projection = dicke_coords.norm_squared();
    if projection < 1.0 - SYMMETRIC_SECTOR_TOL {
        return Err(Error::NotSymmetricSector { projection });
    }

    let sx_sym = d.adjoint() * collective_spin(Axis::X) * &d;
    let eig = HermitianEigen::new(&sx_sym)?;
    let mut coefficients = [Complex64::ZERO; 4];
    for (k, slot) in coefficients.iter_mut().enumerate() {
        let v = eig.vectors.column(k);
        let mut lead = 0;
        for r in 1..4 {
            if v[r].norm() > v[lead].norm() + 1e-12 {
                lead = r;
            }
        }
        let phase = v[lead].conj() / v[lead].norm();
        let v = v * phase;
        *slot = v.dotc(&dicke_coords);
    }
    Ok(SpinDecomposition { coefficients })
}
