//! Fits the readout error to the reference per-input fidelities and prints the result.

use qdtele::protocol::{calibrate_readout_error, ExperimentConfig, NoiseModel, REFERENCE_FIDELITIES};

fn main() -> qdtele::Result<()> {
    let fit = calibrate_readout_error(&ExperimentConfig::default(), &NoiseModel::calibrated(), &REFERENCE_FIDELITIES)?;
    for ((input, f0), (_, f)) in fit.intrinsic.iter().zip(&fit.predicted) {
        println!("# {:<8} intrinsic {f0:.4}  fitted {f:.4}", input.label());
    }
    println!("# chi2 {:.3}", fit.chi2);
    println!("[spin]\nreadout_error = {:.3}", fit.readout_error);
    Ok(())
}
