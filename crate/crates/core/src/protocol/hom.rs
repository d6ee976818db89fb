//! Two-photon interference of photonic qubits from two independent sources, with the
//! polarization and delay controls that make them distinguishable.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{InputState, Mode, NoiseModel, GHZ};
use crate::error::{invalid, Result};
use crate::interference::{
    coincidence_probability, hom_visibility, sample_two_photon, CoincidenceWindow,
    DistinguishabilityModel, Polarization, TwoPhotonClicks, Visibility,
};
use crate::montecarlo::{self, Domain};
use crate::source::{generate_photonic_qubit, PhotonWavepacket, SourceConfig};
use crate::tagstream::{correlate_twofold, CoincidenceHistogram, Detector, TagRecord, TwofoldResult};

const GRID_STEP: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomConfig {
    pub delta: f64,
    pub lifetime: f64,
    pub repetition: f64,
    /// Coincidence window `[−half_window, half_window]` around each period.
    pub half_window: f64,
    /// Side peaks `±1 ..= ±side_periods` averaged for the reference level.
    pub side_periods: usize,
    pub bin_width: f64,
    /// State of both photonic qubits.
    pub input: InputState,
    /// Extra delay of one photon (ps); half a beat period makes the qubits distinguishable.
    pub delay: f64,
    pub pairs: u64,
    pub seed: u64,
}

impl Default for HomConfig {
    fn default() -> Self {
        Self {
            delta: 3.45 * GHZ,
            lifetime: 650.0,
            repetition: 13_100.0,
            half_window: 1200.0,
            side_periods: 3,
            bin_width: 50.0,
            input: InputState::Plus,
            delay: 0.0,
            pairs: 100_000,
            seed: 1,
        }
    }
}

impl HomConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lifetime", self.lifetime),
            ("repetition", self.repetition),
            ("half_window", self.half_window),
            ("bin_width", self.bin_width),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !self.delay.is_finite() || !self.delta.is_finite() {
            return Err(invalid("delay", "delay and delta must be finite"));
        }
        if self.side_periods == 0 {
            return Err(invalid("side_periods", "must be at least 1"));
        }
        if self.pairs == 0 {
            return Err(invalid("pairs", "must be positive"));
        }
        CoincidenceWindow::new(-self.half_window, self.half_window, self.repetition, self.side_periods)?;
        Ok(())
    }

    /// Delay of half a beat period, `π/Δ`.
    pub fn half_beat_delay(&self) -> f64 {
        std::f64::consts::PI / self.delta.abs()
    }
}

/// Center and side-peak levels for one polarization setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomArm {
    pub polarization: Polarization,
    pub center: f64,
    pub side: f64,
    /// `center / side`.
    pub ratio: f64,
    /// Delay histogram of the center period.
    pub histogram: CoincidenceHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomResult {
    pub mode: Mode,
    pub parallel: HomArm,
    pub orthogonal: HomArm,
    /// `V = 1 − C∥/C⊥` from the center windows.
    pub visibility: Visibility<f64>,
}

fn packet(cfg: &HomConfig) -> Result<PhotonWavepacket<f64>> {
    let src = SourceConfig::new(cfg.lifetime, cfg.delta, 1.0)?;
    let (a, b) = cfg.input.amplitudes();
    Ok(generate_photonic_qubit(&src, (Complex::new(a, 0.0), Complex::new(b, 0.0)))?.wavepacket().clone())
}

/// Runs parallel and orthogonal polarization settings with the overlap `noise.overlap`.
pub fn run_hom(cfg: &HomConfig, noise: &NoiseModel, mode: Mode) -> Result<HomResult> {
    cfg.validate()?;
    noise.validate()?;
    let p = packet(cfg)?;
    let window = CoincidenceWindow::new(-cfg.half_window, cfg.half_window, cfg.repetition, cfg.side_periods)?;
    let arm = |pol: Polarization, salt: u64| -> Result<HomArm> {
        let dist = DistinguishabilityModel::new(noise.overlap, pol, cfg.delay)?;
        match mode {
            Mode::Analytic => analytic_arm(cfg, noise, &p, &dist, &window),
            Mode::MonteCarlo => {
                let tags = simulate_tags(cfg, noise, &p, &dist, cfg.seed ^ salt);
                let two = correlate_twofold(&tags, &window, cfg.bin_width)?;
                Ok(arm_from_twofold(pol, &two, cfg.side_periods))
            }
        }
    };
    let parallel = arm(Polarization::Parallel, 0)?;
    let orthogonal = arm(Polarization::Orthogonal, 0x0DD_BA11)?;
    let visibility = hom_visibility(parallel.center, orthogonal.center)?;
    Ok(HomResult { mode, parallel, orthogonal, visibility })
}

fn arm_from_twofold(pol: Polarization, two: &TwofoldResult, k: usize) -> HomArm {
    let center = two.center();
    let side = two.side_mean(k as i64);
    HomArm {
        polarization: pol,
        center,
        side,
        ratio: if side > 0.0 { center / side } else { 0.0 },
        histogram: two.histograms[&0].clone(),
    }
}

/// One pair per trial; clicks kept with the detection efficiency and blurred by the jitter.
pub(crate) fn simulate_tags(
    cfg: &HomConfig,
    noise: &NoiseModel,
    p: &PhotonWavepacket<f64>,
    dist: &DistinguishabilityModel<f64>,
    seed: u64,
) -> Vec<TagRecord> {
    let parts = montecarlo::map_chunks(cfg.pairs, |a, b| {
        let mut out = Vec::new();
        for n in a..b {
            let mut rng = montecarlo::substream(seed, Domain::Hom, n);
            let clicks = match sample_two_photon(p, p, dist, &mut rng) {
                TwoPhotonClicks::Split { t1, t2 } => [(Detector::D1, t1), (Detector::D2, t2)],
                TwoPhotonClicks::Bunched { detector, times } => {
                    let d = if detector == 1 { Detector::D1 } else { Detector::D2 };
                    [(d, times.0), (d, times.1)]
                }
            };
            let mut jrng = montecarlo::substream(seed, Domain::Jitter, n);
            for (d, t) in clicks {
                let z: f64 = StandardNormal.sample(&mut jrng);
                if rng.random::<f64>() < noise.efficiency {
                    let timestamp = n as f64 * cfg.repetition + t + noise.jitter * z;
                    out.push(TagRecord { detector: d, timestamp, trial: n, channel: crate::tagstream::Channel::Herald });
                }
            }
        }
        out
    });
    parts.into_iter().flatten().collect()
}

fn analytic_arm(
    cfg: &HomConfig,
    noise: &NoiseModel,
    p: &PhotonWavepacket<f64>,
    dist: &DistinguishabilityModel<f64>,
    window: &CoincidenceWindow<f64>,
) -> Result<HomArm> {
    let d = dist.delay();
    let hi = 25.0 * cfg.lifetime + d.abs();
    let lo = d.min(0.0);
    let n = ((hi - lo) / GRID_STEP).ceil() as usize;
    let t: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * GRID_STEP).collect();
    let a: Vec<Complex<f64>> = t.iter().map(|&x| p.amplitude(x - d)).collect();
    let b: Vec<Complex<f64>> = t.iter().map(|&x| p.amplitude(x)).collect();
    // marginal density of either detector, ½(p_A + p_B)
    let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x.norm_sqr() + y.norm_sqr())).collect();
    let w = dist.interference_weight();
    // split-pair density and uncorrelated-click density, both on the delay grid t2 − t1
    let mut split = vec![0.0; 2 * n - 1];
    let mut indep = vec![0.0; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            let coherent = (a[i] * b[j] - a[j] * b[i]).norm_sqr();
            let incoherent = (a[i] * b[j]).norm_sqr() + (a[j] * b[i]).norm_sqr();
            split[j + n - 1 - i] += 0.25 * (w * coherent + (1.0 - w) * incoherent);
            indep[j + n - 1 - i] += m[i] * m[j];
        }
    }
    let tau = |k: usize| (k as f64 - (n as f64 - 1.0)) * GRID_STEP;
    let sd = std::f64::consts::SQRT_2 * noise.jitter;
    let in_window = |x: f64| super::jitter_acceptance(x, -cfg.half_window, cfg.half_window, sd);
    let fraction = |v: &[f64]| {
        let total: f64 = v.iter().sum();
        let inside: f64 = v.iter().enumerate().map(|(k, x)| x * in_window(tau(k))).sum();
        if total > 0.0 {
            inside / total
        } else {
            0.0
        }
    };
    let scale = cfg.pairs as f64 * noise.efficiency * noise.efficiency;
    // clicks from different trials are uncorrelated: one expected click per detector per trial
    let center = scale * coincidence_probability(p, p, dist) * fraction(&split);
    let side = scale * fraction(&indep);

    let mut histogram = CoincidenceHistogram::new(window.lower, window.upper, cfg.bin_width, 0)?;
    let area = GRID_STEP * GRID_STEP;
    let edges = histogram.edges().to_vec();
    for (k, v) in split.iter().enumerate() {
        let x = tau(k);
        for e in edges.windows(2) {
            let frac = if sd > 0.0 {
                super::normal_cdf((e[1] - x) / sd) - super::normal_cdf((e[0] - x) / sd)
            } else if x >= e[0] && x < e[1] {
                1.0
            } else {
                0.0
            };
            if frac > 0.0 {
                histogram.add(0.5 * (e[0] + e[1]), scale * v * area * frac);
            }
        }
    }
    Ok(HomArm { polarization: dist.polarization(), center, side, ratio: center / side, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_visibility_is_one() {
        let r = run_hom(&HomConfig::default(), &NoiseModel::ideal(), Mode::Analytic).unwrap();
        assert!((r.visibility.value - 1.0).abs() < 1e-6, "{}", r.visibility.value);
    }

    #[test]
    fn visibility_equals_overlap() {
        let noise = NoiseModel { overlap: 0.802, ..NoiseModel::ideal() };
        let r = run_hom(&HomConfig::default(), &noise, Mode::Analytic).unwrap();
        assert!((r.visibility.value - 0.802).abs() < 1e-6, "{}", r.visibility.value);
        assert!((r.orthogonal.ratio - 0.5).abs() < 1e-3, "{}", r.orthogonal.ratio);
    }

    #[test]
    fn monte_carlo_matches_analytic_ratios() {
        let cfg = HomConfig { pairs: 50_000, ..Default::default() };
        let noise = NoiseModel { overlap: 0.8, jitter: 60.0, ..NoiseModel::ideal() };
        let a = run_hom(&cfg, &noise, Mode::Analytic).unwrap();
        let m = run_hom(&cfg, &noise, Mode::MonteCarlo).unwrap();
        assert!((a.visibility.value - m.visibility.value).abs() < 3.0 * m.visibility.stderr);
        assert!((a.orthogonal.ratio - m.orthogonal.ratio).abs() < 0.03);
    }

    #[test]
    fn half_beat_delay_restores_distinguishable_level() {
        // equal-weight two-color photons delayed by π/Δ have nearly vanishing overlap
        let mut cfg = HomConfig::default();
        cfg.delay = cfg.half_beat_delay();
        let r = run_hom(&cfg, &NoiseModel::ideal(), Mode::Analytic).unwrap();
        assert!(r.parallel.ratio > 0.35, "{}", r.parallel.ratio);
    }
}
