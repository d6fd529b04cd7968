//! The Mermin test: two-step GHZ confirmation and four-correlator acquisition.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::qubits::{
    apply_local, coherence_rotation, encode_locals, joint_probabilities, parity_correlation,
    phase_correction, JointLabel, JointProbabilities, LocalAngles, ThreeQubitState,
};
use crate::spectroscopy::{
    extract_probabilities, mixture_spectrum, DetuningGrid, DispersiveParams, PeakEstimate,
    SpectrumCurve, PEAK_PRESENCE_THRESHOLD,
};

/// Slack for correlators that should lie in `[−1, 1]`.
const CORRELATOR_SLACK: f64 = 1e-12;
/// Allowed deviation of a peak height from its ideal value in the verdict.
pub const VERDICT_HEIGHT_TOL: f64 = 0.02;

/// The six local angles of a Mermin test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MerminSettings {
    pub theta: LocalAngles,
    pub theta_prime: LocalAngles,
}

impl MerminSettings {
    pub fn new(theta: [f64; 3], theta_prime: [f64; 3]) -> Result<Self> {
        Ok(Self {
            theta: LocalAngles::from_array(theta)?,
            theta_prime: LocalAngles::from_array(theta_prime)?,
        })
    }

    /// `θ = (0, π/4, π/2)`, `θ′ = (π/4, π/4, π)`: `Q = √2 + 1`.
    pub fn sqrt2_plus_one() -> Self {
        Self::new([0.0, FRAC_PI_4, FRAC_PI_2], [FRAC_PI_4, FRAC_PI_4, PI]).expect("finite angles")
    }

    /// `θ = (π/4, 0, 0)`, `θ′ = (3π/4, π/2, π/2)`: `Q = 2√2`.
    pub fn maximal() -> Self {
        Self::new([FRAC_PI_4, 0.0, 0.0], [3.0 * FRAC_PI_4, FRAC_PI_2, FRAC_PI_2])
            .expect("finite angles")
    }

    /// `(θ′1,θ2,θ3), (θ1,θ′2,θ3), (θ1,θ2,θ′3), (θ′1,θ′2,θ′3)`.
    pub fn combinations(&self) -> [LocalAngles; 4] {
        let t = self.theta.as_array();
        let tp = self.theta_prime.as_array();
        [
            [tp[0], t[1], t[2]],
            [t[0], tp[1], t[2]],
            [t[0], t[1], tp[2]],
            tp,
        ]
        .map(|a| LocalAngles::from_array(a).expect("reduced angles are finite"))
    }
}

/// `Q = |E1 + E2 + E3 − E4|`.
pub fn mermin_q(e: [f64; 4]) -> Result<f64> {
    for &x in &e {
        if !(x.abs() <= 1.0 + CORRELATOR_SLACK) {
            return Err(Error::OutOfRange(x));
        }
    }
    Ok((e[0] + e[1] + e[2] - e[3]).abs())
}

/// Which `Q` a run headlines, and which artifacts it writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Spectral,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingProbabilities {
    pub angles: LocalAngles,
    pub exact: JointProbabilities,
    pub spectral: JointProbabilities,
}

/// Both `Q` values are always present; `mode` records what was asked for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MerminReport {
    pub settings: MerminSettings,
    pub correlators_exact: [f64; 4],
    pub correlators_spectral: [f64; 4],
    pub q_exact: f64,
    pub q_spectral: f64,
    /// `q_exact − q_spectral`.
    pub delta_q: f64,
    pub probabilities_per_setting: Vec<SettingProbabilities>,
    pub mode: Mode,
}

impl MerminReport {
    /// The `Q` selected by the mode; `Both` headlines the spectral value.
    pub fn q(&self) -> f64 {
        match self.mode {
            Mode::Exact => self.q_exact,
            Mode::Spectral | Mode::Both => self.q_spectral,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MerminRun {
    pub report: MerminReport,
    /// Spectrum of each encoded state, in [`MerminSettings::combinations`] order.
    pub spectra: Vec<SpectrumCurve>,
}

struct Acquisition {
    exact: JointProbabilities,
    spectral: PeakEstimate,
    curve: SpectrumCurve,
}

fn acquire(
    state: &ThreeQubitState,
    angles: &LocalAngles,
    p: &DispersiveParams,
    grid: &DetuningGrid,
    exec: Execution,
) -> Result<Acquisition> {
    let encoded = encode_locals(state, angles)?;
    let curve = crate::spectroscopy::transmission_spectrum(&encoded, grid, p, exec)?;
    Ok(Acquisition {
        exact: joint_probabilities(&encoded),
        spectral: extract_probabilities(&curve, p)?,
        curve,
    })
}

/// Encodes each angle combination onto `state`, measures it exactly and
/// spectrally, and forms the parity correlators and `Q`.
pub fn run_mermin(
    state: &ThreeQubitState,
    settings: &MerminSettings,
    mode: Mode,
    p: &DispersiveParams,
    grid: &DetuningGrid,
    exec: Execution,
) -> Result<MerminRun> {
    let combos = settings.combinations();
    let acquired = exec.try_map(&combos, |angles| acquire(state, angles, p, grid, exec))?;

    let correlators_exact: [f64; 4] = std::array::from_fn(|i| parity_correlation(&acquired[i].exact));
    let correlators_spectral: [f64; 4] =
        std::array::from_fn(|i| parity_correlation(&acquired[i].spectral.p_hat));
    let q_exact = mermin_q(correlators_exact)?;
    let q_spectral = mermin_q(correlators_spectral)?;

    let probabilities_per_setting = combos
        .iter()
        .zip(&acquired)
        .map(|(angles, a)| SettingProbabilities {
            angles: *angles,
            exact: a.exact,
            spectral: a.spectral.p_hat,
        })
        .collect();
    Ok(MerminRun {
        report: MerminReport {
            settings: *settings,
            correlators_exact,
            correlators_spectral,
            q_exact,
            q_spectral,
            delta_q: q_exact - q_spectral,
            probabilities_per_setting,
            mode,
        },
        spectra: acquired.into_iter().map(|a| a.curve).collect(),
    })
}

/// A classical mixture of pure register states; a single member with weight
/// 1 is a pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<(f64, ThreeQubitState)>,
}

impl Ensemble {
    pub fn pure(state: ThreeQubitState) -> Self {
        Self {
            members: vec![(1.0, state)],
        }
    }

    pub fn mixture(members: Vec<(f64, ThreeQubitState)>) -> Result<Self> {
        let total: f64 = members.iter().map(|(w, _)| w).sum();
        if members.is_empty()
            || members.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0))
            || (total - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidParameter(format!(
                "mixture weights must be non-negative and sum to 1 (sum {total})"
            )));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[(f64, ThreeQubitState)] {
        &self.members
    }

    fn map_states(&self, f: impl Fn(&ThreeQubitState) -> Result<ThreeQubitState>) -> Result<Self> {
        let members = self
            .members
            .iter()
            .map(|(w, s)| Ok((*w, f(s)?)))
            .collect::<Result<_>>()?;
        Ok(Self { members })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Two half-height peaks, then four quarter-height peaks after rotation.
    GhzConsistent,
    /// Two half-height peaks, then eight peaks after rotation.
    Mixture,
    Neither,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::GhzConsistent => "ghz-consistent",
            Verdict::Mixture => "mixture",
            Verdict::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoStepVerification {
    pub raw: SpectrumCurve,
    pub rotated: SpectrumCurve,
    pub raw_peaks: PeakEstimate,
    pub rotated_peaks: PeakEstimate,
    pub verdict: Verdict,
}

/// Applies `diag(1, −i)` to qubit 1, then `exp(iπσy/4)` to every qubit.
///
/// The phase gate maps `(|000⟩ + i|111⟩)/√2` to `(|000⟩ + |111⟩)/√2`, which
/// the rotation turns into the even-parity state
/// `(|000⟩ + |011⟩ + |101⟩ + |110⟩)/2`.
pub fn coherence_check_rotation(state: &ThreeQubitState) -> Result<ThreeQubitState> {
    let r = coherence_rotation();
    let first = &r * phase_correction();
    apply_local([&first, &r, &r], state)
}

fn heights_match(peaks: &PeakEstimate, labels: &[JointLabel], ideal: f64) -> bool {
    peaks.present(PEAK_PRESENCE_THRESHOLD) == labels
        && labels
            .iter()
            .all(|l| (peaks.heights[l.index()] - ideal).abs() <= VERDICT_HEIGHT_TOL)
}

/// Records the spectrum before and after [`coherence_check_rotation`] and
/// classifies the ensemble.
pub fn verify_ghz_two_step(
    ensemble: &Ensemble,
    p: &DispersiveParams,
    grid: &DetuningGrid,
    exec: Execution,
) -> Result<TwoStepVerification> {
    let rotated_ensemble = ensemble.map_states(coherence_check_rotation)?;
    let raw = mixture_spectrum(ensemble.members(), grid, p, exec)?;
    let rotated = mixture_spectrum(rotated_ensemble.members(), grid, p, exec)?;
    let raw_peaks = extract_probabilities(&raw, p)?;
    let rotated_peaks = extract_probabilities(&rotated, p)?;

    let extremes = [JointLabel::from_bits(0, 0, 0), JointLabel::from_bits(1, 1, 1)];
    let first_step = heights_match(&raw_peaks, &extremes, 0.5);
    let rotated_present = rotated_peaks.present(PEAK_PRESENCE_THRESHOLD);
    let four_quarter = rotated_present.len() == 4
        && heights_match(&rotated_peaks, &rotated_present, 0.25);
    let eight = rotated_present.len() == 8;

    let verdict = match (first_step, four_quarter, eight) {
        (true, true, _) => Verdict::GhzConsistent,
        (true, _, true) => Verdict::Mixture,
        _ => Verdict::Neither,
    };
    Ok(TwoStepVerification {
        raw,
        rotated,
        raw_peaks,
        rotated_peaks,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    #[test]
    fn q_combination() {
        let h = FRAC_1_SQRT_2;
        assert!((mermin_q([1.0, h, h, 0.0]).unwrap() - (1.0 + SQRT_2)).abs() < 1e-12);
        assert!((mermin_q([h, h, h, -h]).unwrap() - 2.0 * SQRT_2).abs() < 1e-12);
        assert_eq!(mermin_q([0.0; 4]).unwrap(), 0.0);
        assert_eq!(mermin_q([1.5, 0.0, 0.0, 0.0]), Err(Error::OutOfRange(1.5)));
        assert!(mermin_q([f64::NAN, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn combinations_order() {
        let c = MerminSettings::sqrt2_plus_one().combinations();
        let sums: Vec<f64> = c.iter().map(|a| a.sum()).collect();
        // (π, 3π/4, 5π/4, 3π/2), with the last reduced mod 2π per angle
        let expected = [PI, 0.75 * PI, 1.25 * PI, 1.5 * PI];
        for (s, e) in sums.iter().zip(expected) {
            let r = (s - e).rem_euclid(2.0 * PI);
            assert!(r < 1e-12 || 2.0 * PI - r < 1e-12, "{s} vs {e}");
        }
    }

    #[test]
    fn exact_q_for_both_settings() {
        let p = DispersiveParams::reference();
        let grid = DetuningGrid::default();
        let ghz = ThreeQubitState::ghz();
        let a = run_mermin(&ghz, &MerminSettings::sqrt2_plus_one(), Mode::Both, &p, &grid, Execution::Parallel)
            .unwrap();
        assert!((a.report.q_exact - (SQRT_2 + 1.0)).abs() < 1e-10);
        assert!(a.report.delta_q > 0.0 && a.report.delta_q <= 0.05);
        assert_eq!(a.spectra.len(), 4);
        let b = run_mermin(&ghz, &MerminSettings::maximal(), Mode::Exact, &p, &grid, Execution::Parallel)
            .unwrap();
        assert!((b.report.q_exact - 2.0 * SQRT_2).abs() < 1e-10);
        assert_eq!(b.report.q(), b.report.q_exact);
    }

    #[test]
    fn verdicts() {
        let p = DispersiveParams::reference();
        let grid = DetuningGrid::default();
        let ghz = verify_ghz_two_step(&Ensemble::pure(ThreeQubitState::ghz()), &p, &grid, Execution::Parallel)
            .unwrap();
        assert_eq!(ghz.verdict, Verdict::GhzConsistent);

        let mixture = Ensemble::mixture(vec![
            (0.5, ThreeQubitState::basis(JointLabel::from_bits(0, 0, 0))),
            (0.5, ThreeQubitState::basis(JointLabel::from_bits(1, 1, 1))),
        ])
        .unwrap();
        let mix = verify_ghz_two_step(&mixture, &p, &grid, Execution::Parallel).unwrap();
        assert_eq!(mix.verdict, Verdict::Mixture);

        let ground = Ensemble::pure(ThreeQubitState::basis(JointLabel::from_bits(0, 0, 0)));
        let single = verify_ghz_two_step(&ground, &p, &grid, Execution::Parallel).unwrap();
        assert_eq!(single.verdict, Verdict::Neither);
        assert_eq!(single.raw_peaks.present(PEAK_PRESENCE_THRESHOLD).len(), 1);
    }

    #[test]
    fn ensemble_weights_validated() {
        assert!(Ensemble::mixture(vec![]).is_err());
        assert!(Ensemble::mixture(vec![(0.7, ThreeQubitState::ghz())]).is_err());
        assert!(Ensemble::mixture(vec![(-0.5, ThreeQubitState::ghz()), (1.5, ThreeQubitState::ghz())]).is_err());
    }
}
