//! Spin-photon correlation run: the erased photon of a pair is detected, the spin is echoed
//! and read out in the rotated basis, and the outcome oscillates with the photon detection
//! time at the splitting Δ.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Mode, NoiseModel, GHZ};
use crate::error::{invalid, Result};
use crate::montecarlo::{self, Domain};
use crate::source::{erase_polarization, trion_decay_state, EntangledPairState, SourceConfig, SUPPORT_LIFETIMES};
use crate::spin::{measure_in_basis, sample_overhauser, Basis, EchoChannel, Frame, OverhauserModel, PulseSchedule, SpinDensity};
use crate::tagstream::CoincidenceHistogram;

const GRID_STEP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntangleConfig {
    pub delta: f64,
    pub lifetime: f64,
    pub t_echo: f64,
    pub readout_length: f64,
    /// Histogram range `[0, window]` of recorded photon times.
    pub window: f64,
    pub bin_width: f64,
    pub events: u64,
    pub seed: u64,
}

impl Default for EntangleConfig {
    fn default() -> Self {
        Self {
            delta: 4.9 * GHZ,
            lifetime: 650.0,
            t_echo: 13_000.0,
            readout_length: 100.0,
            window: 800.0,
            bin_width: 50.0,
            events: 1_000_000,
            seed: 1,
        }
    }
}

impl EntangleConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lifetime", self.lifetime),
            ("t_echo", self.t_echo),
            ("readout_length", self.readout_length),
            ("window", self.window),
            ("bin_width", self.bin_width),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !self.delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        if self.events == 0 {
            return Err(invalid("events", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntangleResult {
    pub mode: Mode,
    /// Amplitude of the Δ oscillation of the ±1 rotated-basis outcome vs recorded photon time.
    pub contrast: f64,
    pub contrast_stderr: f64,
    /// Smearing factor `e^{−(Δσ)²/2}` of the detector jitter alone.
    pub jitter_factor: f64,
    /// Probability that a Z readout agrees with the photon color.
    pub z_correlation: f64,
    /// Lower bound on the spin-photon entanglement fidelity, `(z_correlation + contrast)/2`.
    pub fidelity_bound: f64,
    /// Rotated-basis outcomes vs recorded photon time.
    pub histogram_plus: CoincidenceHistogram,
    pub histogram_minus: CoincidenceHistogram,
}

struct Setup {
    pair: EntangledPairState<f64>,
    schedule: PulseSchedule<f64>,
    overhauser: OverhauserModel<f64>,
    readout_vec: (Complex<f64>, Complex<f64>),
}

impl Setup {
    fn new(cfg: &EntangleConfig, noise: &NoiseModel) -> Result<Self> {
        let src = SourceConfig::new(cfg.lifetime, cfg.delta, noise.p_exc)?;
        let raw = EntangledPairState::new(trion_decay_state(), src.envelope()?, cfg.delta)?;
        let (pair, _) = erase_polarization(&raw, &src.analyzer)?;
        let schedule = PulseSchedule::hahn_echo(0.0, cfg.t_echo, cfg.readout_length)?;
        let overhauser =
            if noise.t2star.is_infinite() { OverhauserModel::none() } else { OverhauserModel::new(noise.t2star)? };
        let (bu, bd) = Basis::XMinus.up_state::<f64>();
        let u = schedule.ideal_unitary();
        let readout_vec = (u[0] * bu + u[1] * bd, u[2] * bu + u[3] * bd);
        Ok(Self { pair, schedule, overhauser, readout_vec })
    }

    fn schedule_from(&self, t: f64) -> PulseSchedule<f64> {
        self.schedule.starting_at(t.clamp(0.0, 0.5 * self.schedule.echo_time())).expect("start precedes the π pulse")
    }

    fn spin_at(&self, t: f64) -> Option<SpinDensity<f64>> {
        let [u, d] = self.pair.spin_given_detection(t).ok()?;
        SpinDensity::pure(u, d).ok()
    }
}

/// Runs the correlation measurement and derives the entanglement fidelity bound.
pub fn entanglement_correlation_run(cfg: &EntangleConfig, noise: &NoiseModel, mode: Mode) -> Result<EntangleResult> {
    cfg.validate()?;
    noise.validate()?;
    let setup = Setup::new(cfg, noise)?;
    let hist = || CoincidenceHistogram::new(0.0, cfg.window, cfg.bin_width, 0);
    let (mut plus, mut minus) = (hist()?, hist()?);
    let e = noise.readout_error;
    let sigma = noise.jitter;
    let (contrast, contrast_stderr) = match mode {
        Mode::Analytic => {
            let t_max = SUPPORT_LIFETIMES * cfg.lifetime;
            let n = (t_max / GRID_STEP).ceil() as usize;
            let h = t_max / n as f64;
            let env = setup.pair.mode();
            let d = cfg.delta;
            let damp = |k: f64| (-0.5 * (k * sigma).powi(2)).exp();
            // normal equations for s ≈ a + b cos Δr + c sin Δr over the joint (t, r, s) law
            let mut m = [[0.0; 3]; 3];
            let mut r = [0.0; 3];
            for i in 0..n {
                let t = (i as f64 + 0.5) * h;
                let p = env.intensity(t) * h;
                let Some(spin) = setup.spin_at(t) else { continue };
                let (ru, rd) = setup.readout_vec;
                let g = EchoChannel::new(&setup.schedule_from(t), &setup.overhauser, Frame::RotatingAtZeeman)
                    .readout_weights(ru, rd);
                let rho = spin.matrix();
                let p_up = (0..4).map(|k| (rho[k] * g[k]).re).sum::<f64>();
                let s = (1.0 - 2.0 * e) * (2.0 * p_up - 1.0);
                let (c1, s1) = (damp(d) * (d * t).cos(), damp(d) * (d * t).sin());
                let (c2, s2) = (damp(2.0 * d) * (2.0 * d * t).cos(), damp(2.0 * d) * (2.0 * d * t).sin());
                let ff = [
                    [1.0, c1, s1],
                    [c1, 0.5 * (1.0 + c2), 0.5 * s2],
                    [s1, 0.5 * s2, 0.5 * (1.0 - c2)],
                ];
                let fs = [s, s * c1, s * s1];
                for a in 0..3 {
                    r[a] += p * fs[a];
                    for b in 0..3 {
                        m[a][b] += p * ff[a][b];
                    }
                }
                // expected outcome histograms, smeared into bins by the jitter
                let pp = 0.5 * (1.0 + s) * p * cfg.events as f64;
                let pm = 0.5 * (1.0 - s) * p * cfg.events as f64;
                smear(&mut plus, t, sigma, pp);
                smear(&mut minus, t, sigma, pm);
            }
            let x = solve3(m, r).ok_or_else(|| invalid("fit", "singular normal equations"))?;
            (x[1].hypot(x[2]), 0.0)
        }
        Mode::MonteCarlo => {
            let parts = montecarlo::map_chunks(cfg.events, |a, b| {
                (a..b)
                    .map(|i| {
                        let mut rng = montecarlo::substream(cfg.seed, Domain::Entangle, i);
                        let t = setup.pair.mode().sample_time(&mut rng);
                        let p_up = match setup.spin_at(t) {
                            Some(spin) => {
                                let mut orng = montecarlo::substream(cfg.seed, Domain::Overhauser, i);
                                let delta = sample_overhauser(&setup.overhauser, &mut orng);
                                let sched = setup.schedule_from(t);
                                measure_in_basis(&sched.to_logical(&sched.evolve(&spin, delta)), Basis::XMinus).0
                            }
                            None => 0.5,
                        };
                        let p_obs = e + (1.0 - 2.0 * e) * p_up;
                        let s = if rng.random::<f64>() < p_obs { 1.0 } else { -1.0 };
                        let mut jrng = montecarlo::substream(cfg.seed, Domain::Jitter, i);
                        let z: f64 = StandardNormal.sample(&mut jrng);
                        (t + sigma * z, s)
                    })
                    .collect::<Vec<_>>()
            });
            let events: Vec<(f64, f64)> = parts.into_iter().flatten().collect();
            for &(r, s) in &events {
                if s > 0.0 {
                    plus.add(r, 1.0);
                } else {
                    minus.add(r, 1.0);
                }
            }
            fit_oscillation(&events, cfg.delta)?
        }
    };
    let z_correlation = 1.0 - e;
    Ok(EntangleResult {
        mode,
        contrast,
        contrast_stderr,
        jitter_factor: (-0.5 * (cfg.delta * sigma).powi(2)).exp(),
        z_correlation,
        fidelity_bound: 0.5 * (z_correlation + contrast),
        histogram_plus: plus,
        histogram_minus: minus,
    })
}

fn smear(hist: &mut CoincidenceHistogram, x: f64, sigma: f64, weight: f64) {
    if sigma == 0.0 {
        hist.add(x, weight);
        return;
    }
    let edges = hist.edges().to_vec();
    for e in edges.windows(2) {
        let p = super::normal_cdf((e[1] - x) / sigma) - super::normal_cdf((e[0] - x) / sigma);
        if p > 0.0 {
            hist.add(0.5 * (e[0] + e[1]), weight * p);
        }
    }
}

/// Least-squares amplitude of `s ≈ a + b cos Δr + c sin Δr` and its standard error.
fn fit_oscillation(events: &[(f64, f64)], delta: f64) -> Result<(f64, f64)> {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for &(t, s) in events {
        let f = [1.0, (delta * t).cos(), (delta * t).sin()];
        for a in 0..3 {
            r[a] += f[a] * s;
            for b in 0..3 {
                m[a][b] += f[a] * f[b];
            }
        }
    }
    let x = solve3(m, r).ok_or_else(|| invalid("fit", "singular normal equations"))?;
    let n = events.len() as f64;
    let sse: f64 = events
        .iter()
        .map(|&(t, s)| {
            let e = s - x[0] - x[1] * (delta * t).cos() - x[2] * (delta * t).sin();
            e * e
        })
        .sum();
    let var = sse / (n - 3.0).max(1.0);
    let inv = invert3(m).ok_or_else(|| invalid("fit", "singular normal equations"))?;
    let amp = x[1].hypot(x[2]);
    let stderr = if amp > 0.0 {
        let (gb, gc) = (x[1] / amp, x[2] / amp);
        (var * (gb * gb * inv[1][1] + 2.0 * gb * gc * inv[1][2] + gc * gc * inv[2][2])).sqrt()
    } else {
        (var * (inv[1][1] + inv[2][2]) / 2.0).sqrt()
    };
    Ok((amp, stderr))
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let inv = invert3(m)?;
    Some([0, 1, 2].map(|i| (0..3).map(|j| inv[i][j] * r[j]).sum()))
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let cof = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
    if det.abs() < 1e-300 {
        return None;
    }
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cof(j, i) / det;
        }
    }
    Some(out)
}
