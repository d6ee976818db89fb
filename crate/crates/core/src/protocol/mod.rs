//! Experiment orchestration: teleportation runs, the spin-photon correlation run, HOM and
//! single-source measurements, and calibration of the free noise parameters.
//!
//! Everything here is `f64`. Times are in ps and frequencies in rad/ps. Detection times
//! inside one trial are measured from the rise of the excitation pulses.

mod calibrate;
mod entangle;
mod hom;
mod qubit;
mod teleport;

pub use calibrate::{calibrate_readout_error, CalibrationResult, CalibrationTarget, REFERENCE_FIDELITIES};
pub use entangle::{entanglement_correlation_run, EntangleConfig, EntangleResult};
pub use hom::{run_hom, HomArm, HomConfig, HomResult};
pub use qubit::{fit_beat, run_g2, run_qubit, G2Config, G2Result, QubitConfig, QubitResult};
pub use teleport::{run_teleportation, run_teleportation_input, InputResult, TeleportResult};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spin::{Basis, PulseSchedule};

/// 2π · 1 GHz in rad/ps.
pub const GHZ: f64 = 2.0 * std::f64::consts::PI * 1e-3;

/// Standard normal CDF.
pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that a click at true time `t` is recorded inside `[lo, hi]`.
pub(crate) fn jitter_acceptance(t: f64, lo: f64, hi: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if t >= lo && t <= hi { 1.0 } else { 0.0 };
    }
    (normal_cdf((hi - t) / sigma) - normal_cdf((lo - t) / sigma)).max(0.0)
}

/// Photonic input state of a teleportation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputState {
    OmegaR,
    OmegaB,
    Plus,
    Minus,
}

impl InputState {
    pub const ALL: [InputState; 4] = [InputState::OmegaR, InputState::OmegaB, InputState::Plus, InputState::Minus];

    pub fn label(self) -> &'static str {
        match self {
            InputState::OmegaR => "omega_r",
            InputState::OmegaB => "omega_b",
            InputState::Plus => "plus",
            InputState::Minus => "minus",
        }
    }

    /// Drive amplitudes `(α, β)` on `(|ω_b⟩, |ω_r⟩)`.
    pub fn amplitudes(self) -> (f64, f64) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            InputState::OmegaR => (0.0, 1.0),
            InputState::OmegaB => (1.0, 0.0),
            InputState::Plus => (s, s),
            InputState::Minus => (-s, s),
        }
    }

    /// Readout basis, and whether the teleported state is that basis's "up" outcome.
    pub fn readout(self) -> (Basis, bool) {
        match self {
            InputState::OmegaR => (Basis::Z, true),
            InputState::OmegaB => (Basis::Z, false),
            InputState::Plus => (Basis::XPlus, true),
            InputState::Minus => (Basis::XMinus, true),
        }
    }

    pub fn is_color(self) -> bool {
        matches!(self, InputState::OmegaR | InputState::OmegaB)
    }
}

impl std::str::FromStr for InputState {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        InputState::ALL
            .into_iter()
            .find(|i| i.label() == s)
            .ok_or_else(|| invalid("input", format!("unknown input state `{s}`")))
    }
}

/// Analytic expectation values or seeded Monte Carlo sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Analytic,
    MonteCarlo,
}

/// Timing and bookkeeping of a teleportation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub input: InputState,
    /// Color splitting Δ = ω_b − ω_r, matched to the spin Zeeman splitting.
    pub delta: f64,
    pub lifetime: f64,
    /// Pulse repetition period T0.
    pub repetition: f64,
    pub t_echo: f64,
    /// Photon travel time to the detectors; shifts recorded herald timestamps.
    pub propagation: f64,
    /// Herald acceptance window, in emission time.
    pub herald_start: f64,
    pub herald_length: f64,
    /// Spin readout window within the trial.
    pub readout_start: f64,
    pub readout_length: f64,
    /// Three-fold periods 0..periods.
    pub periods: usize,
    pub bin_width: f64,
    pub trials: u64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: InputState::Plus,
            delta: 4.9 * GHZ,
            lifetime: 650.0,
            repetition: 13_100.0,
            t_echo: 13_000.0,
            propagation: 11_000.0,
            herald_start: 0.0,
            herald_length: 800.0,
            readout_start: 13_000.0,
            readout_length: 100.0,
            periods: 7,
            bin_width: 50.0,
            trials: 100_000,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lifetime", self.lifetime),
            ("repetition", self.repetition),
            ("t_echo", self.t_echo),
            ("herald_length", self.herald_length),
            ("readout_length", self.readout_length),
            ("bin_width", self.bin_width),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("propagation", self.propagation), ("herald_start", self.herald_start), ("readout_start", self.readout_start)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be non-negative and finite, got {v}")));
            }
        }
        if !self.delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be positive"));
        }
        if self.periods == 0 {
            return Err(invalid("periods", "must be at least 1"));
        }
        if self.readout_start < self.t_echo {
            return Err(invalid("readout_start", "the spin is read out after the echo"));
        }
        if self.readout_start + self.readout_length > self.repetition {
            return Err(invalid("readout_length", "readout must end within the repetition period"));
        }
        if self.propagation + self.herald_start + self.herald_length > self.readout_start {
            return Err(invalid("propagation", "heralds must be recorded before the spin readout"));
        }
        Ok(())
    }

    pub fn herald_end(&self) -> f64 {
        self.herald_start + self.herald_length
    }

    /// The echo schedule: π about X at `t_echo / 2`, refocus at `t_echo`.
    pub fn echo_schedule(&self) -> Result<PulseSchedule<f64>> {
        PulseSchedule::hahn_echo(0.0, self.t_echo, self.readout_start + self.readout_length - self.t_echo)
    }
}

/// Imperfections of sources, spin, interference and detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Mode overlap M weighting two-photon interference.
    pub overlap: f64,
    /// Detector timing jitter (std, ps).
    pub jitter: f64,
    /// Spin dephasing time; infinite switches dephasing off.
    pub t2star: f64,
    /// Trion excitation probability per entanglement pulse.
    pub p_exc: f64,
    /// Unconditioned |↑⟩ population seen by readouts not preceded by a genuine herald.
    pub p_up_init: f64,
    /// Symmetric readout flip probability ε.
    pub readout_error: f64,
    /// Dark-count rate per detector (1/ps).
    pub dark_rate: f64,
    /// Per-photon detection efficiency, also applied to readout clicks.
    pub efficiency: f64,
    /// Each source emits an extra, distinguishable photon with probability g²/2.
    pub residual_g2: f64,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self {
            overlap: 1.0,
            jitter: 0.0,
            t2star: f64::INFINITY,
            p_exc: 1.0,
            p_up_init: 0.5,
            readout_error: 0.0,
            dark_rate: 0.0,
            efficiency: 1.0,
            residual_g2: 0.0,
        }
    }

    /// Experimental constants with the free readout parameters at their calibrated values.
    pub fn calibrated() -> Self {
        Self {
            overlap: 0.80,
            jitter: 60.0,
            t2star: 1000.0,
            p_exc: 0.8,
            p_up_init: 0.6,
            readout_error: 0.061,
            ..Self::ideal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("overlap", self.overlap),
            ("p_exc", self.p_exc),
            ("p_up_init", self.p_up_init),
            ("readout_error", self.readout_error),
            ("efficiency", self.efficiency),
            ("residual_g2", self.residual_g2),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.jitter >= 0.0) || !self.jitter.is_finite() {
            return Err(invalid("jitter", format!("must be non-negative and finite, got {}", self.jitter)));
        }
        if !(self.t2star > 0.0) {
            return Err(invalid("t2star", format!("must be positive, got {}", self.t2star)));
        }
        if !(self.dark_rate >= 0.0) || !self.dark_rate.is_finite() {
            return Err(invalid("dark_rate", format!("must be non-negative and finite, got {}", self.dark_rate)));
        }
        Ok(())
    }
}

/// Fidelity implied by a ratio of correct to wrong outcome counts.
pub fn classical_ratio_to_fidelity(ratio: f64) -> Result<f64> {
    if !(ratio > 0.0) {
        return Err(invalid("ratio", format!("must be positive, got {ratio}")));
    }
    if ratio.is_infinite() {
        return Ok(1.0);
    }
    Ok(ratio / (1.0 + ratio))
}

/// Distance of `f` above the classical teleportation limit 2/3, in standard errors.
pub fn threshold_significance(f: f64, stderr: f64) -> Result<f64> {
    if !(stderr > 0.0) {
        return Err(invalid("stderr", format!("must be positive, got {stderr}")));
    }
    Ok((f - 2.0 / 3.0) / stderr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_to_fidelity() {
        assert!((classical_ratio_to_fidelity(4.0).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(classical_ratio_to_fidelity(1.0).unwrap(), 0.5);
        assert_eq!(classical_ratio_to_fidelity(f64::INFINITY).unwrap(), 1.0);
        assert!(classical_ratio_to_fidelity(1e12).unwrap() > 1.0 - 1e-11);
        assert!(classical_ratio_to_fidelity(0.0).is_err());
    }

    #[test]
    fn significance() {
        assert!((threshold_significance(0.78, 0.03).unwrap() - 3.7778).abs() < 1e-4);
        assert_eq!(threshold_significance(2.0 / 3.0, 0.1).unwrap(), 0.0);
        assert!(threshold_significance(0.5, 0.1).unwrap() < 0.0);
        assert!(threshold_significance(0.9, 0.0).is_err());
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-2.0) - 0.022_750_131_948_179_2).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let bad = ExperimentConfig { readout_start: 12_000.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { trials: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(NoiseModel::calibrated().validate().is_ok());
        assert!(NoiseModel { overlap: 1.2, ..NoiseModel::ideal() }.validate().is_err());
    }

    #[test]
    fn input_labels_round_trip() {
        for i in InputState::ALL {
            assert_eq!(i.label().parse::<InputState>().unwrap(), i);
        }
    }
}
