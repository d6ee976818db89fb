//! Single-source measurements: the beat of a two-color photonic qubit, and the
//! intensity autocorrelation of one source.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{jitter_acceptance, InputState, Mode, NoiseModel, GHZ};
use crate::error::{invalid, Result};
use crate::interference::CoincidenceWindow;
use crate::montecarlo::{self, Domain};
use crate::source::{generate_photonic_qubit, SourceConfig, TemporalMode, SUPPORT_LIFETIMES};
use crate::tagstream::{correlate_twofold, fit_period, Channel, CoincidenceHistogram, Detector, PeriodFit, TagRecord};

const GRID_STEP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitConfig {
    pub delta: f64,
    pub lifetime: f64,
    pub input: InputState,
    /// Histogram range `[0, window]`.
    pub window: f64,
    pub bin_width: f64,
    /// Period search range of the beat fit.
    pub fit_min: f64,
    pub fit_max: f64,
    pub events: u64,
    pub seed: u64,
}

impl Default for QubitConfig {
    fn default() -> Self {
        Self {
            delta: 3.45 * GHZ,
            lifetime: 650.0,
            input: InputState::Plus,
            window: 2000.0,
            bin_width: 50.0,
            fit_min: 150.0,
            fit_max: 400.0,
            events: 1_000_000,
            seed: 1,
        }
    }
}

impl QubitConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lifetime", self.lifetime), ("window", self.window), ("bin_width", self.bin_width)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.fit_min > 0.0 && self.fit_max > self.fit_min) {
            return Err(invalid("fit range", format!("[{}, {}]", self.fit_min, self.fit_max)));
        }
        if self.events == 0 {
            return Err(invalid("events", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitResult {
    pub mode: Mode,
    /// Detection-time histogram of the photonic qubit.
    pub histogram: CoincidenceHistogram,
    /// Expected counts of the color-incoherent reference with the same envelope.
    pub envelope: CoincidenceHistogram,
    /// Fit of `histogram / envelope`.
    pub fit: PeriodFit,
    /// `1 / period`, in GHz.
    pub frequency_ghz: f64,
}

/// Expected counts per bin of a density observed through Gaussian jitter.
fn binned<F: Fn(f64) -> f64>(hist: &mut CoincidenceHistogram, density: F, t_max: f64, sigma: f64, scale: f64) {
    let edges = hist.edges().to_vec();
    let n = (t_max / GRID_STEP).ceil() as usize;
    let mut acc = vec![0.0; edges.len() - 1];
    for i in 0..n {
        let t = (i as f64 + 0.5) * GRID_STEP;
        let p = density(t) * GRID_STEP;
        if p == 0.0 {
            continue;
        }
        for (k, e) in edges.windows(2).enumerate() {
            acc[k] += p * jitter_acceptance(t, e[0], e[1], sigma);
        }
    }
    for (k, e) in edges.windows(2).enumerate() {
        hist.add(0.5 * (e[0] + e[1]), scale * acc[k]);
    }
}

pub fn run_qubit(cfg: &QubitConfig, noise: &NoiseModel, mode: Mode) -> Result<QubitResult> {
    cfg.validate()?;
    noise.validate()?;
    let src = SourceConfig::new(cfg.lifetime, cfg.delta, 1.0)?;
    let (a, b) = cfg.input.amplitudes();
    let qubit = generate_photonic_qubit(&src, (Complex::new(a, 0.0), Complex::new(b, 0.0)))?;
    let packet = qubit.wavepacket();
    let env = src.envelope()?;
    let t_max = SUPPORT_LIFETIMES * cfg.lifetime;
    let scale = cfg.events as f64 * noise.efficiency;
    let mut envelope = CoincidenceHistogram::new(0.0, cfg.window, cfg.bin_width, 0)?;
    binned(&mut envelope, |t| env.intensity(t), t_max, noise.jitter, scale);
    let mut histogram = CoincidenceHistogram::new(0.0, cfg.window, cfg.bin_width, 0)?;
    match mode {
        Mode::Analytic => binned(&mut histogram, |t| packet.intensity(t), t_max, noise.jitter, scale),
        Mode::MonteCarlo => {
            let parts = montecarlo::map_chunks(cfg.events, |lo, hi| {
                (lo..hi)
                    .filter_map(|i| {
                        let mut rng = montecarlo::substream(cfg.seed, Domain::Qubit, i);
                        let t = packet.sample_time(&mut rng);
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (rng.random::<f64>() < noise.efficiency).then_some(t + noise.jitter * z)
                    })
                    .collect::<Vec<_>>()
            });
            for t in parts.into_iter().flatten() {
                histogram.add(t, 1.0);
            }
        }
    }
    let fit = fit_beat(&histogram, &envelope, cfg.fit_min, cfg.fit_max)?;
    Ok(QubitResult { mode, histogram, envelope, frequency_ghz: 1e3 / fit.period, fit })
}

/// Fits the period of `signal / reference` over bins where the reference is appreciable.
pub fn fit_beat(signal: &CoincidenceHistogram, reference: &CoincidenceHistogram, p_min: f64, p_max: f64) -> Result<PeriodFit> {
    let peak = reference.counts().iter().copied().fold(0.0, f64::max);
    let (mut t, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for ((c, s), r) in signal.bin_centers().into_iter().zip(signal.counts()).zip(reference.counts()) {
        if *r > 1e-3 * peak {
            t.push(c);
            y.push(s / r);
            w.push(*r);
        }
    }
    fit_period(&t, &y, &w, p_min, p_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Config {
    pub lifetime: f64,
    pub repetition: f64,
    pub half_window: f64,
    pub side_periods: usize,
    pub bin_width: f64,
    pub trials: u64,
    pub seed: u64,
}

impl Default for G2Config {
    fn default() -> Self {
        Self {
            lifetime: 650.0,
            repetition: 13_100.0,
            half_window: 1200.0,
            side_periods: 3,
            bin_width: 50.0,
            trials: 100_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Result {
    pub mode: Mode,
    pub center: f64,
    pub side: f64,
    /// Center over mean side peak, the pulsed g²(0).
    pub ratio: f64,
    /// Delay histogram of the center period (Monte Carlo only).
    pub histogram: Option<CoincidenceHistogram>,
}

/// Hanbury Brown–Twiss measurement of one source emitting an extra photon with probability
/// `residual_g2 / 2`.
pub fn run_g2(cfg: &G2Config, noise: &NoiseModel, mode: Mode) -> Result<G2Result> {
    noise.validate()?;
    if cfg.trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let window = CoincidenceWindow::new(-cfg.half_window, cfg.half_window, cfg.repetition, cfg.side_periods)?;
    let env = TemporalMode::exponential(0.0, cfg.lifetime, 0.0)?;
    let g = noise.residual_g2;
    let eta2 = noise.efficiency * noise.efficiency;
    match mode {
        Mode::Analytic => {
            // photon number 1 + Bernoulli(g/2); clicks split evenly between the detectors, and
            // both peaks see the delay law of two independent emission times
            let n = cfg.trials as f64 * eta2 * window_fraction(cfg, noise.jitter);
            let center = n * g / 4.0;
            let side = n * (1.0 + g / 2.0).powi(2) / 4.0;
            Ok(G2Result { mode, center, side, ratio: center / side, histogram: None })
        }
        Mode::MonteCarlo => {
            let parts = montecarlo::map_chunks(cfg.trials, |lo, hi| {
                let mut out = Vec::new();
                for i in lo..hi {
                    let mut rng = montecarlo::substream(cfg.seed, Domain::G2, i);
                    let photons = if rng.random::<f64>() < g / 2.0 { 2 } else { 1 };
                    for _ in 0..photons {
                        let t = env.sample_time(&mut rng);
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let d = if rng.random::<bool>() { Detector::D1 } else { Detector::D2 };
                        if rng.random::<f64>() < noise.efficiency {
                            let timestamp = i as f64 * cfg.repetition + t + noise.jitter * z;
                            out.push(TagRecord { detector: d, timestamp, trial: i, channel: Channel::Herald });
                        }
                    }
                }
                out
            });
            let tags: Vec<TagRecord> = parts.into_iter().flatten().collect();
            let two = correlate_twofold(&tags, &window, cfg.bin_width)?;
            let (center, side) = (two.center(), two.side_mean(cfg.side_periods as i64));
            Ok(G2Result {
                mode,
                center,
                side,
                ratio: if side > 0.0 { center / side } else { 0.0 },
                histogram: two.histograms.get(&0).cloned(),
            })
        }
    }
}

/// Probability that the recorded delay of two independent photons falls in the window.
fn window_fraction(cfg: &G2Config, jitter: f64) -> f64 {
    // the emission-time difference is Laplace with rate Γ; each click adds jitter
    let gamma = 1.0 / cfg.lifetime;
    let sd = std::f64::consts::SQRT_2 * jitter;
    let span = SUPPORT_LIFETIMES * cfg.lifetime;
    let n = (span / GRID_STEP).ceil() as usize;
    (0..n)
        .map(|i| {
            let d = (i as f64 + 0.5) * GRID_STEP;
            let p = 0.5 * gamma * (-gamma * d).exp() * GRID_STEP;
            p * (jitter_acceptance(d, -cfg.half_window, cfg.half_window, sd)
                + jitter_acceptance(-d, -cfg.half_window, cfg.half_window, sd))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beat_period_at_three_and_a_half_ghz() {
        let cfg = QubitConfig::default();
        let r = run_qubit(&cfg, &NoiseModel::calibrated(), Mode::Analytic).unwrap();
        let want = 1e3 / 3.45;
        assert!((r.fit.period - want).abs() < 3.0, "{} vs {want}", r.fit.period);
    }

    #[test]
    fn monte_carlo_beat_within_one_bin() {
        let cfg = QubitConfig { events: 200_000, ..Default::default() };
        let r = run_qubit(&cfg, &NoiseModel::calibrated(), Mode::MonteCarlo).unwrap();
        assert!((r.fit.period - 1e3 / 3.45).abs() < cfg.bin_width, "{}", r.fit.period);
    }

    #[test]
    fn color_eigenstate_has_no_beat() {
        let cfg = QubitConfig { input: InputState::OmegaB, ..Default::default() };
        let r = run_qubit(&cfg, &NoiseModel::ideal(), Mode::Analytic).unwrap();
        assert!(r.fit.contrast < 1e-6, "{}", r.fit.contrast);
    }

    #[test]
    fn g2_ratio_matches_photon_statistics() {
        let noise = NoiseModel { residual_g2: 0.1, ..NoiseModel::ideal() };
        let cfg = G2Config { trials: 200_000, ..Default::default() };
        let a = run_g2(&cfg, &noise, Mode::Analytic).unwrap();
        assert!((a.ratio - 0.1 / 1.05f64.powi(2)).abs() < 1e-12);
        let m = run_g2(&cfg, &noise, Mode::MonteCarlo).unwrap();
        assert!((m.side - a.side).abs() < 4.0 * a.side.sqrt(), "{} vs {}", m.side, a.side);
        let se = a.ratio * (1.0 / m.center).sqrt();
        assert!((m.ratio - a.ratio).abs() < 4.0 * se, "{} vs {}", m.ratio, a.ratio);
    }

    #[test]
    fn perfect_source_has_empty_center() {
        let cfg = G2Config { trials: 20_000, ..Default::default() };
        let r = run_g2(&cfg, &NoiseModel::ideal(), Mode::MonteCarlo).unwrap();
        assert_eq!(r.center, 0.0);
        assert!(r.side > 0.0);
    }
}
