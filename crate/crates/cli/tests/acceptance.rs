//! End-to-end acceptance checks. Each test prints one `PASS` or `FAIL` line with the measured
//! value and the tolerance it was held to; run with `--nocapture` to see them.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qdtele::protocol::{
    calibrate_readout_error, entanglement_correlation_run, fit_beat, run_hom, run_qubit, run_teleportation,
    threshold_significance, EntangleConfig, ExperimentConfig, HomConfig, InputState, Mode, NoiseModel, QubitConfig,
    REFERENCE_FIDELITIES,
};
use qdtele::spin::{run_echo, run_echo_analytic, OverhauserModel, PulseSchedule, SpinDensity};

const HOM_PAIRS: u64 = 100_000;
const HOM_BUDGET: Duration = Duration::from_secs(10);
const V_TOL: f64 = 0.01;
const ORTH_RATIO: f64 = 0.5;
const ORTH_TOL: f64 = 0.02;
const PARALLEL_RATIO: f64 = 1.0 / 11.0;
const PARALLEL_REL_TOL: f64 = 0.20;
const QUBIT_PERIOD: f64 = 1e3 / 3.45;
const HERALD_PERIOD: f64 = 1e3 / 4.9;
const PERIOD_TOL: f64 = 50.0;
const IDEAL_TOL: f64 = 0.005;
const TELEPORT_TRIALS: u64 = 100_000;
const F_T_RANGE: (f64, f64) = (0.75, 0.81);
const COLOR_RATIO: f64 = 4.0;
const COLOR_RATIO_TOL: f64 = 0.5;
const SIGNIFICANCE: f64 = 3.7;
const SIGNIFICANCE_TOL: f64 = 0.1;
const JITTERS: [f64; 5] = [0.0, 30.0, 60.0, 90.0, 120.0];
const JITTER_SPREAD: f64 = 0.01;
const CONTRAST_REL_TOL: f64 = 0.05;
const REFOCUS_MIN: f64 = 0.999;
const NO_ECHO_MAX: f64 = 1e-6;
const ECHO_TRIALS: u64 = 200_000;

fn report(name: &str, ok: bool, detail: String) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn hom(overlap: f64, mode: Mode) -> qdtele::protocol::HomResult {
    let cfg = HomConfig { pairs: HOM_PAIRS, seed: 5, ..HomConfig::default() };
    let noise = NoiseModel { overlap, ..NoiseModel::ideal() };
    run_hom(&cfg, &noise, mode).unwrap()
}

#[test]
fn hom_visibility() {
    let start = Instant::now();
    let ideal = hom(1.0, Mode::MonteCarlo);
    let elapsed = start.elapsed();
    let partial = hom(0.802, Mode::MonteCarlo);
    let (v1, v2) = (ideal.visibility.value, partial.visibility.value);
    let ok = (v1 - 1.0).abs() <= V_TOL && (v2 - 0.802).abs() <= V_TOL && elapsed < HOM_BUDGET;
    report(
        "hom_visibility",
        ok,
        format!(
            "V(M=1) = {v1:.4}, V(M=0.802) = {v2:.4} ± {:.4} (tol {V_TOL}), {HOM_PAIRS} pairs in {:.2} s (budget {} s)",
            partial.visibility.stderr,
            elapsed.as_secs_f64(),
            HOM_BUDGET.as_secs()
        ),
    );
}

#[test]
fn hom_peak_ratios() {
    let mc = hom(0.80, Mode::MonteCarlo);
    let an = hom(0.80, Mode::Analytic);
    let orth = mc.orthogonal.ratio;
    let par = an.parallel.ratio;
    let rel = (par - PARALLEL_RATIO).abs() / PARALLEL_RATIO;
    let ok = (orth - ORTH_RATIO).abs() <= ORTH_TOL && rel <= PARALLEL_REL_TOL;
    report(
        "hom_peak_ratios",
        ok,
        format!(
            "orthogonal {orth:.4} (target {ORTH_RATIO} ± {ORTH_TOL}), parallel {par:.4} (MC {:.4}) vs 1/11, {:.1}% off (tol {:.0}%)",
            mc.parallel.ratio,
            100.0 * rel,
            100.0 * PARALLEL_REL_TOL
        ),
    );
}

#[test]
fn beat_periods() {
    let q = run_qubit(&QubitConfig { events: 1_000_000, ..QubitConfig::default() }, &NoiseModel::ideal(), Mode::MonteCarlo)
        .unwrap();
    let cfg = ExperimentConfig { bin_width: 10.0, ..ExperimentConfig::default() };
    let noise = NoiseModel { jitter: 0.0, ..NoiseModel::calibrated() };
    let coherent = run_teleportation(&ExperimentConfig { input: InputState::Plus, ..cfg.clone() }, &NoiseModel { overlap: 1.0, ..noise.clone() }, Mode::Analytic, false).unwrap();
    let incoherent = run_teleportation(&cfg, &NoiseModel { overlap: 0.0, ..noise }, Mode::Analytic, false).unwrap();
    let heralds = |r: &qdtele::protocol::TeleportResult| {
        let x = r.input(InputState::Plus).unwrap();
        let mut h = x.histogram_up.clone();
        h.merge(&x.histogram_down).unwrap();
        h
    };
    let fit = fit_beat(&heralds(&coherent), &heralds(&incoherent), 150.0, 400.0).unwrap();
    let ok = (q.fit.period - QUBIT_PERIOD).abs() <= PERIOD_TOL && (fit.period - HERALD_PERIOD).abs() <= PERIOD_TOL;
    report(
        "beat_periods",
        ok,
        format!(
            "photonic qubit {:.1} ps (target {QUBIT_PERIOD:.1}), herald density {:.1} ps (target {HERALD_PERIOD:.1}), tol {PERIOD_TOL} ps",
            q.fit.period, fit.period
        ),
    );
}

#[test]
fn ideal_fidelity() {
    let cfg = ExperimentConfig { trials: TELEPORT_TRIALS, ..ExperimentConfig::default() };
    let noise = NoiseModel::ideal();
    let an = run_teleportation(&cfg, &noise, Mode::Analytic, false).unwrap();
    let mc = run_teleportation(&cfg, &noise, Mode::MonteCarlo, false).unwrap();
    let mut worst: f64 = 0.0;
    let mut agree = true;
    for (a, m) in an.inputs.iter().zip(&mc.inputs) {
        worst = worst.max((a.fidelity - 1.0).abs()).max((m.fidelity - 1.0).abs());
        let se = m.stderr.max(1.0 / m.heralds.max(1.0));
        agree &= (a.fidelity - m.fidelity).abs() <= 3.0 * se;
    }
    report(
        "ideal_fidelity",
        worst <= IDEAL_TOL && agree,
        format!("largest |F − 1| over inputs and modes {worst:.2e} (tol {IDEAL_TOL}), analytic vs MC within 3 stderr: {agree}"),
    );
}

#[test]
fn calibrated_fidelity() {
    let cfg = ExperimentConfig { trials: TELEPORT_TRIALS, ..ExperimentConfig::default() };
    let fit = calibrate_readout_error(&cfg, &NoiseModel::calibrated(), &REFERENCE_FIDELITIES).unwrap();
    let noise = NoiseModel { readout_error: fit.readout_error, ..NoiseModel::calibrated() };
    let an = run_teleportation(&cfg, &noise, Mode::Analytic, false).unwrap();
    let mc = run_teleportation(&cfg, &noise, Mode::MonteCarlo, false).unwrap();
    let ratio = an.input(InputState::OmegaR).unwrap().classical_ratio();
    let sig = threshold_significance(0.78, 0.03).unwrap();
    let in_range = |f: f64| (F_T_RANGE.0..=F_T_RANGE.1).contains(&f);
    let ok = in_range(an.f_t)
        && in_range(mc.f_t)
        && (ratio - COLOR_RATIO).abs() <= COLOR_RATIO_TOL
        && (sig - SIGNIFICANCE).abs() <= SIGNIFICANCE_TOL;
    report(
        "calibrated_fidelity",
        ok,
        format!(
            "fitted ε = {:.3}; F_T = {:.4} analytic, {:.4} ± {:.4} MC (range {F_T_RANGE:?}); color ratio {ratio:.2} \
             (target {COLOR_RATIO} ± {COLOR_RATIO_TOL}); 0.78 ± 0.03 is {sig:.2}σ above 2/3 (target {SIGNIFICANCE} ± {SIGNIFICANCE_TOL})",
            fit.readout_error, an.f_t, mc.f_t, mc.f_t_stderr
        ),
    );
}

#[test]
fn jitter_robustness() {
    let cfg = ExperimentConfig::default();
    let f: Vec<f64> = JITTERS
        .iter()
        .map(|&j| run_teleportation(&cfg, &NoiseModel { jitter: j, ..NoiseModel::calibrated() }, Mode::Analytic, false).unwrap().f_t)
        .collect();
    let spread = f.iter().copied().fold(f64::MIN, f64::max) - f.iter().copied().fold(f64::MAX, f64::min);

    let ecfg = EntangleConfig::default();
    let contrast = |j: f64| {
        entanglement_correlation_run(&ecfg, &NoiseModel { jitter: j, ..NoiseModel::calibrated() }, Mode::Analytic)
            .unwrap()
            .contrast
    };
    let measured = contrast(60.0) / contrast(0.0);
    let expected = (-(ecfg.delta * 60.0).powi(2) / 2.0).exp();
    let rel = (measured - expected).abs() / expected;
    report(
        "jitter_robustness",
        spread < JITTER_SPREAD && rel <= CONTRAST_REL_TOL,
        format!(
            "F_T over σ = {JITTERS:?} ps: {f:.4?}, spread {spread:.4} (tol {JITTER_SPREAD}); contrast ratio at 60 ps {measured:.4} \
             vs Gaussian {expected:.4}, {:.1}% off (tol {:.0}%)",
            100.0 * rel,
            100.0 * CONTRAST_REL_TOL
        ),
    );
}

#[test]
fn spin_echo() {
    let t2star = NoiseModel::calibrated().t2star;
    let model = OverhauserModel::new(t2star).unwrap();
    let plus = SpinDensity::equator(0.0);
    let echo = PulseSchedule::hahn_echo(0.0, 13_000.0, 100.0).unwrap();
    let refocused = run_echo(&plus, &echo, &model, 3, ECHO_TRIALS).unwrap().coherence();

    let decay = run_echo(&plus, &PulseSchedule::free(0.0, t2star).unwrap(), &model, 4, ECHO_TRIALS).unwrap().coherence();
    let e1 = (-1.0f64).exp();
    // spread of cos(δ T2*) for δ ~ N(0, 2/T2*²)
    let stderr = ((0.5 * (1.0 + (-4.0f64).exp()) - e1 * e1) / ECHO_TRIALS as f64).sqrt();

    let free = run_echo_analytic(&plus, &PulseSchedule::free(0.0, 13_000.0).unwrap(), &model).coherence();
    let ok = refocused >= REFOCUS_MIN && (decay - e1).abs() <= 3.0 * stderr && free < NO_ECHO_MAX;
    report(
        "spin_echo",
        ok,
        format!(
            "echo coherence at 13 ns {refocused:.6} (min {REFOCUS_MIN}); free decay at T2* {decay:.4} vs e⁻¹ {e1:.4} ± {:.4} (3 stderr); \
             without echo at 13 ns {free:.1e} (max {NO_ECHO_MAX:.0e})",
            3.0 * stderr
        ),
    );
}

fn run_cli(args: &[&str], out: &Path) -> Duration {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_qdtele")).args(args).arg("--out").arg(out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    start.elapsed()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn reproducibility() {
    let tmp = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut slowest = Duration::ZERO;
    for e in ["qubit", "hom", "entangle", "teleport", "g2"] {
        let args = ["--experiment", e, "--mode", "mc", "--seed", "42", "--trials", "20000"];
        let (a, b) = (tmp.path().join(format!("{e}_a")), tmp.path().join(format!("{e}_b")));
        slowest = slowest.max(run_cli(&args, &a));
        run_cli(&args, &b);
        identical &= files(&a) == files(&b);
    }
    let same_lib = {
        let cfg = ExperimentConfig { trials: 5_000, seed: 9, ..ExperimentConfig::default() };
        let run = || run_teleportation(&cfg, &NoiseModel::calibrated(), Mode::MonteCarlo, true).unwrap();
        run() == run()
    };
    let ok = identical && same_lib && slowest < Duration::from_secs(60);
    report(
        "reproducibility",
        ok,
        format!(
            "CLI outputs byte-identical for a fixed seed: {identical}; library results identical: {same_lib}; \
             slowest Monte Carlo run {:.2} s",
            slowest.as_secs_f64()
        ),
    );
}
