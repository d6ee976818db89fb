//! Fit of the readout flip probability to measured per-input fidelities.
//!
//! With no false heralds the observed fidelity is `½ + (F₀ − ½)(1 − 2ε)`, where `F₀` is the
//! fidelity at ε = 0. The fit is therefore a one-parameter weighted least squares for
//! `u = 1 − 2ε` with a closed-form solution.

use serde::{Deserialize, Serialize};

use super::{run_teleportation_input, ExperimentConfig, InputState, Mode, NoiseModel};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub input: InputState,
    pub fidelity: f64,
    pub stderr: f64,
}

/// Measured per-input teleportation fidelities.
pub const REFERENCE_FIDELITIES: [CalibrationTarget; 4] = [
    CalibrationTarget { input: InputState::OmegaR, fidelity: 0.79, stderr: 0.10 },
    CalibrationTarget { input: InputState::OmegaB, fidelity: 0.82, stderr: 0.09 },
    CalibrationTarget { input: InputState::Plus, fidelity: 0.76, stderr: 0.03 },
    CalibrationTarget { input: InputState::Minus, fidelity: 0.75, stderr: 0.03 },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub readout_error: f64,
    /// Fidelities at ε = 0 under the remaining noise.
    pub intrinsic: Vec<(InputState, f64)>,
    /// Model fidelities at the fitted ε.
    pub predicted: Vec<(InputState, f64)>,
    pub chi2: f64,
}

/// Fits ε with every other noise parameter held at `noise`.
pub fn calibrate_readout_error(
    cfg: &ExperimentConfig,
    noise: &NoiseModel,
    targets: &[CalibrationTarget],
) -> Result<CalibrationResult> {
    if targets.is_empty() {
        return Err(invalid("targets", "need at least one target fidelity"));
    }
    if targets.iter().any(|t| !(t.stderr > 0.0)) {
        return Err(invalid("targets", "standard errors must be positive"));
    }
    let base = NoiseModel { readout_error: 0.0, dark_rate: 0.0, ..noise.clone() };
    let intrinsic = targets
        .iter()
        .map(|t| {
            let r = run_teleportation_input(&ExperimentConfig { input: t.input, ..cfg.clone() }, &base, Mode::Analytic, false)?;
            Ok((t.input, r.fidelity))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, (_, f0)) in targets.iter().zip(&intrinsic) {
        let w = 1.0 / (t.stderr * t.stderr);
        let (a, b) = (f0 - 0.5, t.fidelity - 0.5);
        num += w * a * b;
        den += w * a * a;
    }
    if !(den > 0.0) {
        return Err(invalid("targets", "intrinsic fidelities carry no signal"));
    }
    let u = (num / den).clamp(0.0, 1.0);
    let readout_error = 0.5 * (1.0 - u);
    let predicted: Vec<(InputState, f64)> = intrinsic.iter().map(|(i, f0)| (*i, 0.5 + (f0 - 0.5) * u)).collect();
    let chi2 = targets
        .iter()
        .zip(&predicted)
        .map(|(t, (_, f))| ((f - t.fidelity) / t.stderr).powi(2))
        .sum();
    Ok(CalibrationResult { readout_error, intrinsic, predicted, chi2 })
}
