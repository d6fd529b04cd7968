//! Spectral joint measurement through the steady-state transmission of a
//! dispersively coupled, driven cavity.
//!
//! In the dispersive frame rotating at the readout drive,
//!
//! ```text
//! H = (−δ + Σ_j Γ_j σz_j) a†a + ε (a + a†)
//! ```
//!
//! and every `σz` product is conserved. The eight moments `⟨a·σz_S⟩` then
//! obey a closed linear system whose steady state gives `⟨a†a⟩`; each joint
//! eigenstate `|ijk⟩` shows up as a Lorentzian at `δ = Σ_j ±Γ_j` weighted by
//! its probability.

use std::fmt::Write as _;
use std::io;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numerics::{kron, real, solve_linear, ComplexMatrix, ComplexVector, I};
use crate::qubits::{JointLabel, JointProbabilities, ThreeQubitState, DIM};
use crate::{angular_to_mhz, mhz_to_angular};

/// Ratios at or above this count as violating the dispersive condition.
pub const VALIDITY_THRESHOLD: f64 = 0.1;
/// Pull gaps below this many linewidths trigger a resolvability warning.
pub const RESOLVABILITY_LINEWIDTHS: f64 = 5.0;
/// Readout drive used when none is given, in MHz.
pub const DEFAULT_READOUT_DRIVE_MHZ: f64 = 0.1;
/// Normalized height above which a peak counts as present.
pub const PEAK_PRESENCE_THRESHOLD: f64 = 0.05;
/// Header of the spectrum CSV format.
pub const CSV_HEADER: &str = "delta_mhz,photon_number,normalized";

/// Photon numbers this far below zero (relative to the peak height) are a
/// numerical failure rather than rounding.
const NEGATIVE_PHOTON_TOL: f64 = 1e-12;

/// Readout parameters (rad/µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersiveParams {
    gamma: [f64; 3],
    kappa: f64,
    epsilon: f64,
    couplings: Option<[f64; 3]>,
    qubit_detunings: Option<[f64; 3]>,
}

impl DispersiveParams {
    /// Pulls `Γ_j`, cavity decay `κ` and readout drive `ε`.
    pub fn new(gamma: [f64; 3], kappa: f64, epsilon: f64) -> Result<Self> {
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter(format!("pulls {gamma:?} must be finite")));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa} must be > 0")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("readout drive = {epsilon} must be > 0")));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if gamma[i] == gamma[j] {
                    return Err(Error::InvalidParameter(format!(
                        "pulls of qubits {} and {} coincide",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self {
            gamma,
            kappa,
            epsilon,
            couplings: None,
            qubit_detunings: None,
        })
    }

    /// `Γ/2π = (50, 230, 350)` MHz, `κ/2π = 1.69` MHz, `ε/2π = 0.1` MHz.
    pub fn reference() -> Self {
        Self::new(
            [50.0, 230.0, 350.0].map(mhz_to_angular),
            mhz_to_angular(1.69),
            mhz_to_angular(DEFAULT_READOUT_DRIVE_MHZ),
        )
        .expect("reference parameters are valid")
    }

    /// Attaches couplings `g_j` and qubit-cavity detunings `Δ_j = ω_r − ω_j`
    /// for [`dispersive_validity`].
    pub fn with_circuit(mut self, couplings: [f64; 3], qubit_detunings: [f64; 3]) -> Result<Self> {
        if couplings.iter().chain(&qubit_detunings).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("couplings and detunings must be finite".into()));
        }
        self.couplings = Some(couplings);
        self.qubit_detunings = Some(qubit_detunings);
        Ok(self)
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        let mut p = Self::new(self.gamma, self.kappa, epsilon)?;
        p.couplings = self.couplings;
        p.qubit_detunings = self.qubit_detunings;
        Ok(p)
    }

    pub fn gamma(&self) -> [f64; 3] {
        self.gamma
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn couplings(&self) -> Option<[f64; 3]> {
        self.couplings
    }

    pub fn qubit_detunings(&self) -> Option<[f64; 3]> {
        self.qubit_detunings
    }

    /// Photon number of a pure eigenstate driven on its own peak, `4ε²/κ²`.
    pub fn peak_height(&self) -> f64 {
        4.0 * self.epsilon * self.epsilon / (self.kappa * self.kappa)
    }

    /// Non-fatal problems with peak resolvability: pulls closer than five
    /// linewidths, and joint shifts that land within five linewidths of each
    /// other.
    pub fn resolvability_warnings(&self) -> Vec<String> {
        let min_gap = RESOLVABILITY_LINEWIDTHS * self.kappa;
        let mut warnings = Vec::new();
        for i in 0..3 {
            for j in i + 1..3 {
                let gap = (self.gamma[i] - self.gamma[j]).abs();
                if gap < min_gap {
                    warnings.push(format!(
                        "pulls of qubits {} and {} differ by {:.4} MHz (< {} kappa)",
                        i + 1,
                        j + 1,
                        angular_to_mhz(gap),
                        RESOLVABILITY_LINEWIDTHS
                    ));
                }
            }
        }
        let labels: Vec<JointLabel> = JointLabel::all().collect();
        for (n, &a) in labels.iter().enumerate() {
            for &b in &labels[n + 1..] {
                let gap = (chi_shift(a, self) - chi_shift(b, self)).abs();
                if gap < min_gap {
                    warnings.push(format!(
                        "shifts of {a} and {b} differ by {:.4} MHz (< {} kappa)",
                        angular_to_mhz(gap),
                        RESOLVABILITY_LINEWIDTHS
                    ));
                }
            }
        }
        warnings
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioCheck {
    pub label: String,
    pub value: f64,
    pub flagged: bool,
}

/// The dispersive-condition ratios: `g_j/Δ_j`, and for every ordered pair
/// `j ≠ j'`, `g_j g_j'/(Δ_j Δ_jj')` and `g_j g_j'/(Δ_j' Δ_jj')` with
/// `Δ_jj' = ω_j − ω_j'`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub qubit_cavity: Vec<RatioCheck>,
    pub pair_first: Vec<RatioCheck>,
    pub pair_second: Vec<RatioCheck>,
    /// `g_j²/Δ_j`, for comparison with the configured pulls.
    pub implied_gamma: [f64; 3],
    pub threshold: f64,
}

impl ValidityReport {
    pub fn checks(&self) -> impl Iterator<Item = &RatioCheck> {
        self.qubit_cavity
            .iter()
            .chain(&self.pair_first)
            .chain(&self.pair_second)
    }

    pub fn is_valid(&self) -> bool {
        self.checks().all(|c| !c.flagged)
    }
}

/// Evaluates the dispersive condition. `g_j/Δ_j` must lie in
/// `(0, VALIDITY_THRESHOLD)`; the pair ratios change sign with the pair order,
/// so they are flagged on magnitude alone. The threshold is closed: a ratio
/// equal to it is flagged.
pub fn dispersive_validity(p: &DispersiveParams) -> Result<ValidityReport> {
    let (g, d) = match (p.couplings, p.qubit_detunings) {
        (Some(g), Some(d)) => (g, d),
        _ => {
            return Err(Error::MissingParameters(
                "couplings g_j and qubit-cavity detunings Delta_j".into(),
            ))
        }
    };
    let check = |label: String, value: f64, signed: bool| {
        let flagged = if signed {
            !(value > 0.0 && value < VALIDITY_THRESHOLD)
        } else {
            !(value.abs() < VALIDITY_THRESHOLD)
        };
        RatioCheck {
            label,
            value,
            flagged,
        }
    };

    let qubit_cavity = (0..3)
        .map(|j| check(format!("g{0}/D{0}", j + 1), g[j] / d[j], true))
        .collect();
    let mut pair_first = Vec::new();
    let mut pair_second = Vec::new();
    for j in 0..3 {
        for jp in 0..3 {
            if j == jp {
                continue;
            }
            // ω_j − ω_j' = Δ_j' − Δ_j
            let djj = d[jp] - d[j];
            let gg = g[j] * g[jp];
            let (a, b) = (j + 1, jp + 1);
            pair_first.push(check(format!("g{a}g{b}/(D{a}D{a}{b})"), gg / (d[j] * djj), false));
            pair_second.push(check(format!("g{a}g{b}/(D{b}D{a}{b})"), gg / (d[jp] * djj), false));
        }
    }
    Ok(ValidityReport {
        qubit_cavity,
        pair_first,
        pair_second,
        implied_gamma: std::array::from_fn(|j| g[j] * g[j] / d[j]),
        threshold: VALIDITY_THRESHOLD,
    })
}

/// Cavity shift of joint eigenstate `label`: `Σ_j Γ_j s_j`, `s_j = ±1` for bit 1/0.
pub fn chi_shift(label: JointLabel, p: &DispersiveParams) -> f64 {
    (1..=3).map(|q| p.gamma[q - 1] * label.sigma_z(q)).sum()
}

pub fn all_shifts(p: &DispersiveParams) -> [f64; DIM] {
    std::array::from_fn(|i| chi_shift(JointLabel::new(i).expect("index below 8"), p))
}

/// Subsets of the register in moment order `∅, 1, 2, 3, 12, 13, 23, 123`,
/// as masks with bit `3 − q` for qubit `q`.
pub const MOMENT_SUBSETS: [u8; 8] = [0b000, 0b100, 0b010, 0b001, 0b110, 0b101, 0b011, 0b111];

fn subset_position(mask: u8) -> usize {
    MOMENT_SUBSETS
        .iter()
        .position(|&m| m == mask)
        .expect("every 3-bit mask is a subset")
}

/// Expectation values of the seven `σz` products; constants of the readout
/// dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QubitMoments {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub z12: f64,
    pub z13: f64,
    pub z23: f64,
    pub z123: f64,
}

impl QubitMoments {
    pub fn from_probabilities(p: &JointProbabilities) -> Self {
        let z = |mask: u8| -> f64 {
            JointLabel::all()
                .map(|l| {
                    let sign: f64 = (1..=3)
                        .filter(|&q| mask >> (3 - q) & 1 == 1)
                        .map(|q| l.sigma_z(q))
                        .product();
                    sign * p.get(l)
                })
                .sum()
        };
        Self {
            z1: z(0b100),
            z2: z(0b010),
            z3: z(0b001),
            z12: z(0b110),
            z13: z(0b101),
            z23: z(0b011),
            z123: z(0b111),
        }
    }

    /// `⟨σz_S⟩` for a subset mask; the empty subset gives 1.
    pub fn get(&self, mask: u8) -> f64 {
        match mask & 0b111 {
            0b000 => 1.0,
            0b100 => self.z1,
            0b010 => self.z2,
            0b001 => self.z3,
            0b110 => self.z12,
            0b101 => self.z13,
            0b011 => self.z23,
            _ => self.z123,
        }
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.z1, self.z2, self.z3, self.z12, self.z13, self.z23, self.z123]
    }
}

pub fn qubit_moments(s: &ThreeQubitState) -> QubitMoments {
    QubitMoments::from_probabilities(&JointProbabilities::from_state(s))
}

/// Steady-state `⟨a⟩` and `⟨a·σz_S⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityMoments {
    pub a: Complex64,
    pub az1: Complex64,
    pub az2: Complex64,
    pub az3: Complex64,
    pub az12: Complex64,
    pub az13: Complex64,
    pub az23: Complex64,
    pub az123: Complex64,
}

impl CavityMoments {
    fn from_slice(x: &[Complex64]) -> Self {
        Self {
            a: x[0],
            az1: x[1],
            az2: x[2],
            az3: x[3],
            az12: x[4],
            az13: x[5],
            az23: x[6],
            az123: x[7],
        }
    }

    /// Moments in [`MOMENT_SUBSETS`] order.
    pub fn as_array(&self) -> [Complex64; 8] {
        [
            self.a, self.az1, self.az2, self.az3, self.az12, self.az13, self.az23, self.az123,
        ]
    }
}

/// Coefficient matrix of the moment equations at drive detuning `delta`:
/// `d X_S/dt = (iδ − κ/2) X_S − iε z_S − i Σ_j Γ_j X_{S △ {j}}`.
pub fn moment_matrix(delta: f64, p: &DispersiveParams) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(8, 8);
    for (row, &mask) in MOMENT_SUBSETS.iter().enumerate() {
        m[(row, row)] = Complex64::new(-p.kappa / 2.0, delta);
        for q in 1..=3 {
            let col = subset_position(mask ^ (1 << (3 - q)));
            m[(row, col)] = -I * p.gamma[q - 1];
        }
    }
    m
}

/// Sets the moment equations to zero and solves for the cavity moments.
pub fn steady_state_cavity_moments(
    delta: f64,
    qm: &QubitMoments,
    p: &DispersiveParams,
) -> Result<CavityMoments> {
    if !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("detuning {delta} is not finite")));
    }
    let a = moment_matrix(delta, p);
    let b = ComplexVector::from_iterator(8, MOMENT_SUBSETS.iter().map(|&m| I * p.epsilon * qm.get(m)));
    let x = solve_linear(&a, &b)?;
    Ok(CavityMoments::from_slice(x.as_slice()))
}

/// `⟨a†a⟩ = −(2ε/κ) Im⟨a⟩`.
pub fn steady_photon_number(cm: &CavityMoments, p: &DispersiveParams) -> Result<f64> {
    let n = -2.0 * p.epsilon / p.kappa * cm.a.im;
    if n < -NEGATIVE_PHOTON_TOL * p.peak_height().max(1.0) {
        return Err(Error::NegativePhotonNumber(n));
    }
    Ok(n.max(0.0))
}

/// Photon number at one detuning.
pub fn photon_number_at(delta: f64, qm: &QubitMoments, p: &DispersiveParams) -> Result<f64> {
    steady_photon_number(&steady_state_cavity_moments(delta, qm, p)?, p)
}

/// Uniform detuning grid, defined in linear MHz so that grid points survive a
/// CSV round trip unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetuningGrid {
    min_mhz: f64,
    max_mhz: f64,
    step_mhz: f64,
    len: usize,
}

impl DetuningGrid {
    pub fn new(min_mhz: f64, max_mhz: f64, step_mhz: f64) -> Result<Self> {
        if !(min_mhz.is_finite() && max_mhz.is_finite() && step_mhz.is_finite()) {
            return Err(Error::InvalidParameter("grid bounds must be finite".into()));
        }
        if !(step_mhz > 0.0) {
            return Err(Error::InvalidParameter(format!("grid step {step_mhz} must be > 0")));
        }
        if max_mhz < min_mhz {
            return Err(Error::InvalidParameter(format!(
                "grid maximum {max_mhz} below minimum {min_mhz}"
            )));
        }
        let len = ((max_mhz - min_mhz) / step_mhz + 1e-9).floor() as usize + 1;
        Ok(Self {
            min_mhz,
            max_mhz,
            step_mhz,
            len,
        })
    }

    /// A grid over `[−1.1, 1.1] · Σ|Γ_j|`.
    pub fn covering(p: &DispersiveParams, step_mhz: f64) -> Result<Self> {
        let half = 1.1 * angular_to_mhz(p.gamma.iter().map(|g| g.abs()).sum());
        Self::new(-half, half, step_mhz)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn min_mhz(&self) -> f64 {
        self.min_mhz
    }

    pub fn max_mhz(&self) -> f64 {
        self.max_mhz
    }

    pub fn step_mhz(&self) -> f64 {
        self.step_mhz
    }

    pub fn point_mhz(&self, k: usize) -> f64 {
        self.min_mhz + k as f64 * self.step_mhz
    }

    pub fn points_mhz(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.point_mhz(k)).collect()
    }
}

impl Default for DetuningGrid {
    /// `−700..=700` MHz in steps of 0.1 MHz.
    fn default() -> Self {
        Self::new(-700.0, 700.0, 0.1).expect("default grid is valid")
    }
}

/// Steady-state photon number over a detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCurve {
    pub frequencies_mhz: Vec<f64>,
    /// Angular detunings, `2π ×` the linear frequencies.
    pub detunings: Vec<f64>,
    pub photon_numbers: Vec<f64>,
    /// Photon numbers over the unit-probability peak height `4ε²/κ²`.
    pub normalized: Vec<f64>,
}

impl SpectrumCurve {
    fn from_parts(frequencies_mhz: Vec<f64>, photon_numbers: Vec<f64>, p: &DispersiveParams) -> Self {
        let h = p.peak_height();
        Self {
            detunings: frequencies_mhz.iter().map(|&f| mhz_to_angular(f)).collect(),
            normalized: photon_numbers.iter().map(|n| n / h).collect(),
            frequencies_mhz,
            photon_numbers,
        }
    }

    pub fn len(&self) -> usize {
        self.frequencies_mhz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_mhz.is_empty()
    }

    /// Index of the largest normalized value.
    pub fn argmax(&self) -> Option<usize> {
        (0..self.len()).max_by(|&i, &j| self.normalized[i].total_cmp(&self.normalized[j]))
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv_string().as_bytes())
    }

    /// CSV text with 17 significant digits, enough to read every value back
    /// exactly.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                self.frequencies_mhz[i], self.photon_numbers[i], self.normalized[i]
            );
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end_matches('\r') == CSV_HEADER => {}
            other => {
                return Err(Error::InvalidParameter(format!(
                    "spectrum CSV header {other:?}, expected {CSV_HEADER:?}"
                )))
            }
        }
        let mut curve = Self {
            frequencies_mhz: Vec::new(),
            detunings: Vec::new(),
            photon_numbers: Vec::new(),
            normalized: Vec::new(),
        };
        for (n, line) in lines.enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidParameter(format!("CSV row {}: {e}", n + 2)))?;
            let [f, photons, norm] = fields[..] else {
                return Err(Error::InvalidParameter(format!(
                    "CSV row {} has {} fields, expected 3",
                    n + 2,
                    fields.len()
                )));
            };
            curve.frequencies_mhz.push(f);
            curve.detunings.push(mhz_to_angular(f));
            curve.photon_numbers.push(photons);
            curve.normalized.push(norm);
        }
        Ok(curve)
    }
}

/// Spectrum of a register state; grid points are solved independently under
/// `exec` and collected in ascending order.
pub fn transmission_spectrum(
    s: &ThreeQubitState,
    grid: &DetuningGrid,
    p: &DispersiveParams,
    exec: Execution,
) -> Result<SpectrumCurve> {
    moments_spectrum(&qubit_moments(s), grid, p, exec)
}

pub fn moments_spectrum(
    qm: &QubitMoments,
    grid: &DetuningGrid,
    p: &DispersiveParams,
    exec: Execution,
) -> Result<SpectrumCurve> {
    let freqs = grid.points_mhz();
    let photons = exec.try_map(&freqs, |&f| photon_number_at(mhz_to_angular(f), qm, p))?;
    Ok(SpectrumCurve::from_parts(freqs, photons, p))
}

/// Ensemble-averaged spectrum of a classical mixture, computed one member at
/// a time. Weights must be non-negative and sum to 1.
pub fn mixture_spectrum(
    members: &[(f64, ThreeQubitState)],
    grid: &DetuningGrid,
    p: &DispersiveParams,
    exec: Execution,
) -> Result<SpectrumCurve> {
    if members.is_empty() {
        return Err(Error::InvalidParameter("mixture has no members".into()));
    }
    let total: f64 = members.iter().map(|(w, _)| w).sum();
    if members.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "mixture weights must be non-negative and sum to 1 (sum {total})"
        )));
    }
    let freqs = grid.points_mhz();
    let mut photons = vec![0.0; freqs.len()];
    for (w, s) in members {
        let curve = transmission_spectrum(s, grid, p, exec)?;
        for (acc, n) in photons.iter_mut().zip(&curve.photon_numbers) {
            *acc += w * n;
        }
    }
    Ok(SpectrumCurve::from_parts(freqs, photons, p))
}

/// `Σ_s P_s ε²/((δ − S_s)² + κ²/4)`.
pub fn lorentzian_mixture(probs: &JointProbabilities, delta: f64, p: &DispersiveParams) -> f64 {
    let eps2 = p.epsilon * p.epsilon;
    let hw2 = p.kappa * p.kappa / 4.0;
    JointLabel::all()
        .map(|l| {
            let d = delta - chi_shift(l, p);
            probs.get(l) * eps2 / (d * d + hw2)
        })
        .sum()
}

/// Steady-state `⟨a†a⟩` from the dispersive master equation on a Fock space
/// truncated to `n_trunc` levels.
///
/// The Hamiltonian and the jump operator `a` are block diagonal in the joint
/// `σz` basis, so each diagonal block `ρ_ss` relaxes on its own, with trace
/// `P_s` fixed by the initial state, and `⟨a†a⟩ = Σ_s Tr(a†a ρ_ss)`. Each
/// block's stationary state is found by solving `L ρ = 0` with one equation
/// replaced by the trace condition.
pub fn lindblad_steady_oracle(
    s: &ThreeQubitState,
    delta: f64,
    p: &DispersiveParams,
    n_trunc: usize,
) -> Result<f64> {
    if n_trunc < 2 {
        return Err(Error::InvalidParameter(format!("Fock cutoff {n_trunc} must be >= 2")));
    }
    if !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("detuning {delta} is not finite")));
    }
    let n = n_trunc;
    let mut a = ComplexMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = real((k as f64).sqrt());
    }
    let a_dag = a.adjoint();
    let number = &a_dag * &a;
    let id = ComplexMatrix::identity(n, n);
    let dissipator = (kron(&a.conjugate(), &a) - kron(&id, &number).scale(0.5)
        - kron(&number.transpose(), &id).scale(0.5))
    .scale(p.kappa);

    let probs = JointProbabilities::from_state(s);
    let mut photons = 0.0;
    for label in JointLabel::all() {
        let weight = probs.get(label);
        if weight == 0.0 {
            continue;
        }
        let h = number.scale(chi_shift(label, p) - delta) + (&a + &a_dag).scale(p.epsilon);
        // vec(XρY) = (Yᵀ ⊗ X) vec(ρ), column stacking
        let mut l = (kron(&id, &h) - kron(&h.transpose(), &id)) * (-I) + &dissipator;
        l.row_mut(0).fill(Complex64::ZERO);
        for k in 0..n {
            l[(0, k * n + k)] = real(1.0);
        }
        let mut rhs = ComplexVector::zeros(n * n);
        rhs[0] = real(weight);
        let v = solve_linear(&l, &rhs)?;
        let rho = ComplexMatrix::from_column_slice(n, n, v.as_slice());

        let top = rho[(n - 1, n - 1)].re / weight;
        let block_photons: f64 = (0..n).map(|k| k as f64 * rho[(k, k)].re).sum();
        if top > 1e-6 || block_photons / weight > 0.1 * n as f64 {
            return Err(Error::Truncation {
                level: n - 1,
                population: top,
            });
        }
        photons += block_photons;
    }
    Ok(photons)
}

/// Peak heights read at the eight joint-state shifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakEstimate {
    /// Shift of each joint label (rad/µs), by basis index.
    pub shifts: [f64; DIM],
    /// Normalized curve value read at each shift.
    pub heights: [f64; DIM],
    /// Heights renormalized to sum to 1.
    pub p_hat: JointProbabilities,
}

impl PeakEstimate {
    /// Labels whose height reaches `threshold`.
    pub fn present(&self, threshold: f64) -> Vec<JointLabel> {
        JointLabel::all()
            .filter(|l| self.heights[l.index()] >= threshold)
            .collect()
    }
}

/// Reads the normalized curve at the grid point nearest each shift and
/// renormalizes. The nearest point must lie within half a grid step.
pub fn extract_probabilities(curve: &SpectrumCurve, p: &DispersiveParams) -> Result<PeakEstimate> {
    let f = &curve.frequencies_mhz;
    if f.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let mut shifts = [0.0; DIM];
    let mut heights = [0.0; DIM];
    for label in JointLabel::all() {
        let shift = chi_shift(label, p);
        let target = angular_to_mhz(shift);
        let upper = f.partition_point(|&x| x < target);
        let nearest = match (upper.checked_sub(1), (upper < f.len()).then_some(upper)) {
            (Some(lo), Some(hi)) if (target - f[lo]) <= (f[hi] - target) => lo,
            (Some(lo), None) => lo,
            (_, Some(hi)) => hi,
            (None, None) => unreachable!("curve is non-empty"),
        };
        let spacing = if f.len() == 1 {
            0.0
        } else if nearest == 0 {
            f[1] - f[0]
        } else if nearest + 1 == f.len() {
            f[nearest] - f[nearest - 1]
        } else {
            (f[nearest + 1] - f[nearest]).max(f[nearest] - f[nearest - 1])
        };
        let distance = (f[nearest] - target).abs();
        if distance > 0.5 * spacing * (1.0 + 1e-9) {
            return Err(Error::GridTooCoarse {
                shift_mhz: target,
                distance_mhz: distance,
            });
        }
        shifts[label.index()] = shift;
        heights[label.index()] = curve.normalized[nearest].max(0.0);
    }
    let total: f64 = heights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptySpectrum);
    }
    let p_hat = JointProbabilities::new(heights.map(|h| h / total))?;
    Ok(PeakEstimate {
        shifts,
        heights,
        p_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubits::{apply_local, coherence_rotation, phase_correction};

    fn label(s: &str) -> JointLabel {
        JointLabel::parse(s).unwrap()
    }

    #[test]
    fn shifts_follow_sign_rule() {
        let p = DispersiveParams::reference();
        assert!((angular_to_mhz(chi_shift(label("000"), &p)) + 630.0).abs() < 1e-9);
        assert!((angular_to_mhz(chi_shift(label("111"), &p)) - 630.0).abs() < 1e-9);
        assert!((angular_to_mhz(chi_shift(label("110"), &p)) + 70.0).abs() < 1e-9);
        let all = all_shifts(&p);
        assert_eq!(all[6], chi_shift(label("110"), &p));
    }

    #[test]
    fn params_validate() {
        assert!(DispersiveParams::new([1.0, 2.0, 3.0], 0.0, 1.0).is_err());
        assert!(DispersiveParams::new([1.0, 2.0, 3.0], 1.0, 0.0).is_err());
        assert!(DispersiveParams::new([1.0, 1.0, 3.0], 1.0, 1.0).is_err());
        assert!(DispersiveParams::reference().resolvability_warnings().is_empty());
        let close = DispersiveParams::new([1.0, 2.0, 30.0], 1.0, 1.0).unwrap();
        assert!(!close.resolvability_warnings().is_empty());
    }

    #[test]
    fn validity_thresholds() {
        let p = DispersiveParams::reference();
        assert!(matches!(dispersive_validity(&p), Err(Error::MissingParameters(_))));

        // g/Δ = 0.05 everywhere; the pair ratios stay below 0.02
        let d = [100.0, 350.0, 600.0];
        let g = d.map(|x| 0.05 * x);
        let ok = dispersive_validity(&p.with_circuit(g, d).unwrap()).unwrap();
        assert!(ok.qubit_cavity.iter().all(|c| (c.value - 0.05).abs() < 1e-15));
        assert!(ok.is_valid(), "{ok:?}");

        let bad = dispersive_validity(&p.with_circuit([50.0, 17.5, 30.0], d).unwrap()).unwrap();
        assert!(bad.qubit_cavity[0].flagged);
        assert!(!bad.is_valid());

        let edge = dispersive_validity(&p.with_circuit([10.0, 1.0, 1.0], [100.0, 1e6, 2e6]).unwrap())
            .unwrap();
        assert_eq!(edge.qubit_cavity[0].value, 0.1);
        assert!(edge.qubit_cavity[0].flagged);

        let negative = dispersive_validity(&p.with_circuit([1.0; 3], [-100.0, 200.0, 300.0]).unwrap())
            .unwrap();
        assert!(negative.qubit_cavity[0].flagged);
    }

    #[test]
    fn qubit_moments_of_simple_states() {
        let m = qubit_moments(&ThreeQubitState::basis(label("000")));
        assert_eq!(m.as_array(), [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0, -1.0]);
        let m = qubit_moments(&ThreeQubitState::ghz());
        let expected = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        for (x, y) in m.as_array().iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(m.get(0), 1.0);
    }

    #[test]
    fn eigenstate_on_its_own_peak() {
        let p = DispersiveParams::reference();
        let s = ThreeQubitState::basis(label("000"));
        let shift = chi_shift(label("000"), &p);
        let cm = steady_state_cavity_moments(shift, &qubit_moments(&s), &p).unwrap();
        let expected = Complex64::new(0.0, -2.0 * p.epsilon() / p.kappa());
        assert!((cm.a - expected).norm() < 1e-12 * expected.norm());
        let n = steady_photon_number(&cm, &p).unwrap();
        assert!((n / p.peak_height() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eigenstate_off_peak_is_lorentzian() {
        let p = DispersiveParams::reference();
        let s = ThreeQubitState::basis(label("101"));
        let shift = chi_shift(label("101"), &p);
        for off in [0.3, -4.0, 55.0] {
            let n = photon_number_at(shift + off, &qubit_moments(&s), &p).unwrap();
            let e = p.epsilon();
            let expected = e * e / (off * off + p.kappa() * p.kappa() / 4.0);
            assert!((n / expected - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn undriven_and_overdamped_limits() {
        let qm = qubit_moments(&ThreeQubitState::ghz());
        let p = DispersiveParams::reference().with_epsilon(1e-300).unwrap();
        let cm = steady_state_cavity_moments(3.0, &qm, &p).unwrap();
        assert!(cm.as_array().iter().all(|z| z.norm() < 1e-290));

        let eps = 0.5;
        for kappa in [1e4, 1e6] {
            let p = DispersiveParams::new([1.0, 2.0, 3.0], kappa, eps).unwrap();
            let cm = steady_state_cavity_moments(0.7, &qm, &p).unwrap();
            assert!((cm.a.norm() * kappa / (2.0 * eps) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn negative_photon_number_is_rejected() {
        let p = DispersiveParams::reference();
        let mut cm = steady_state_cavity_moments(0.0, &qubit_moments(&ThreeQubitState::ghz()), &p)
            .unwrap();
        cm.a = Complex64::new(0.0, 1.0);
        assert!(matches!(steady_photon_number(&cm, &p), Err(Error::NegativePhotonNumber(_))));
    }

    #[test]
    fn grid_layout() {
        let g = DetuningGrid::default();
        assert_eq!(g.len(), 14001);
        assert_eq!(g.point_mhz(0), -700.0);
        assert!((g.point_mhz(14000) - 700.0).abs() < 1e-9);
        assert!(DetuningGrid::new(0.0, 1.0, 0.0).is_err());
        assert!(DetuningGrid::new(1.0, 0.0, 0.1).is_err());
        let c = DetuningGrid::covering(&DispersiveParams::reference(), 1.0).unwrap();
        assert!((c.max_mhz() - 693.0).abs() < 1e-9);
    }

    fn small_grid() -> DetuningGrid {
        DetuningGrid::new(-700.0, 700.0, 0.5).unwrap()
    }

    #[test]
    fn execution_modes_agree_bitwise() {
        let p = DispersiveParams::reference();
        let s = ThreeQubitState::ghz();
        let a = transmission_spectrum(&s, &small_grid(), &p, Execution::Sequential).unwrap();
        let b = transmission_spectrum(&s, &small_grid(), &p, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = DispersiveParams::reference();
        let curve =
            transmission_spectrum(&ThreeQubitState::ghz(), &small_grid(), &p, Execution::Parallel)
                .unwrap();
        let text = curve.to_csv_string();
        assert!(text.starts_with("delta_mhz,photon_number,normalized\n"));
        assert!(!text.contains('\r'));
        let back = SpectrumCurve::from_csv_str(&text).unwrap();
        assert_eq!(back, curve);
        assert!(SpectrumCurve::from_csv_str("x,y\n").is_err());
        assert!(SpectrumCurve::from_csv_str(&format!("{CSV_HEADER}\n1,2\n")).is_err());
    }

    #[test]
    fn ghz_and_mixture_spectra_coincide() {
        let p = DispersiveParams::reference();
        let g = small_grid();
        let ghz = transmission_spectrum(&ThreeQubitState::ghz(), &g, &p, Execution::Parallel).unwrap();
        let mix = mixture_spectrum(
            &[
                (0.5, ThreeQubitState::basis(label("000"))),
                (0.5, ThreeQubitState::basis(label("111"))),
            ],
            &g,
            &p,
            Execution::Parallel,
        )
        .unwrap();
        for (x, y) in ghz.photon_numbers.iter().zip(&mix.photon_numbers) {
            assert!((x - y).abs() <= 1e-10 * y.abs());
        }
        assert!(mixture_spectrum(&[(0.4, ThreeQubitState::ghz())], &g, &p, Execution::Sequential).is_err());
    }

    #[test]
    fn ghz_extraction() {
        let p = DispersiveParams::reference();
        let curve =
            transmission_spectrum(&ThreeQubitState::ghz(), &DetuningGrid::default(), &p, Execution::Parallel)
                .unwrap();
        let est = extract_probabilities(&curve, &p).unwrap();
        assert!((est.p_hat.get(label("000")) - 0.5).abs() < 0.01);
        assert!((est.p_hat.get(label("111")) - 0.5).abs() < 0.01);
        assert_eq!(est.present(PEAK_PRESENCE_THRESHOLD), vec![label("000"), label("111")]);
        let top = curve.argmax().unwrap();
        assert!((curve.frequencies_mhz[top].abs() - 630.0).abs() < 1e-6);
    }

    #[test]
    fn coherence_rotation_gives_four_even_peaks() {
        let p = DispersiveParams::reference();
        let s = apply_local(
            [&(coherence_rotation() * phase_correction()), &coherence_rotation(), &coherence_rotation()],
            &ThreeQubitState::ghz(),
        )
        .unwrap();
        let curve = transmission_spectrum(&s, &DetuningGrid::default(), &p, Execution::Parallel).unwrap();
        let est = extract_probabilities(&curve, &p).unwrap();
        let present = est.present(PEAK_PRESENCE_THRESHOLD);
        assert_eq!(present, ["000", "011", "101", "110"].map(label).to_vec());
        for l in present {
            assert!((est.heights[l.index()] - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let p = DispersiveParams::reference();
        let g = DetuningGrid::new(-100.0, 100.0, 1.0).unwrap();
        let curve = transmission_spectrum(&ThreeQubitState::ghz(), &g, &p, Execution::Sequential).unwrap();
        assert!(matches!(extract_probabilities(&curve, &p), Err(Error::GridTooCoarse { .. })));
        let g = DetuningGrid::new(-700.0, 700.0, 3.0).unwrap();
        let curve = transmission_spectrum(&ThreeQubitState::ghz(), &g, &p, Execution::Sequential).unwrap();
        // every shift sits on or next to a grid point within 1.5 MHz
        assert!(extract_probabilities(&curve, &p).is_ok());
    }

    #[test]
    fn lindblad_matches_closed_form_for_eigenstate() {
        let p = DispersiveParams::reference();
        let s = ThreeQubitState::basis(label("010"));
        let shift = chi_shift(label("010"), &p);
        let n = lindblad_steady_oracle(&s, shift, &p, 6).unwrap();
        assert!((n / p.peak_height() - 1.0).abs() < 1e-6);
        assert!(lindblad_steady_oracle(&s, shift, &p, 1).is_err());
    }

    #[test]
    fn lindblad_reports_truncation() {
        // strong drive: ⟨n⟩ = 4ε²/κ² ≈ 140 on the peak
        let p = DispersiveParams::reference().with_epsilon(mhz_to_angular(10.0)).unwrap();
        let s = ThreeQubitState::basis(label("000"));
        assert!(matches!(
            lindblad_steady_oracle(&s, chi_shift(label("000"), &p), &p, 6),
            Err(Error::Truncation { .. })
        ));
    }
}
