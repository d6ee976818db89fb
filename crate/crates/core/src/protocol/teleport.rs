//! The teleportation experiment: photonic qubit and spin-photon pair meet on the beam splitter,
//! a two-fold coincidence inside the herald window heralds the transfer, the spin is echoed
//! and read out in the basis matching the input, and three-fold events are tallied by period.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{jitter_acceptance, normal_cdf, ExperimentConfig, InputState, Mode, NoiseModel};
use crate::error::Result;
use crate::interference::{
    assemble_input_state, herald_matrix_from, herald_terms_from, DistinguishabilityModel, Polarization,
    TwoPhotonClicks, TwoPhotonState,
};
use crate::montecarlo::{self, Domain};
use crate::source::{erase_polarization, generate_photonic_qubit, trion_decay_state, EntangledPairState, SourceConfig};
use crate::spin::{measure_in_basis, sample_overhauser, EchoChannel, Frame, OverhauserModel, PulseSchedule, SpinDensity};
use crate::tagstream::{dark_counts, Channel, CoincidenceHistogram, Detector, TagRecord, ThreefoldCounts};

/// Grid step of the analytic detection-time integrals (ps).
const GRID_STEP: f64 = 2.0;
/// Jitter tails kept around the herald window, in standard deviations.
const JITTER_TAIL: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputResult {
    pub input: InputState,
    /// Fraction of period-0 three-folds in the teleported-state outcome.
    pub fidelity: f64,
    pub stderr: f64,
    /// Heralds, in expected or sampled counts.
    pub heralds: f64,
    pub counts: ThreefoldCounts,
    /// Period-0 three-folds binned by recorded `t2 − t1`, for each readout outcome.
    pub histogram_up: CoincidenceHistogram,
    pub histogram_down: CoincidenceHistogram,
    /// Raw clicks of a Monte Carlo run, when requested.
    #[serde(skip)]
    pub tags: Vec<TagRecord>,
}

impl InputResult {
    /// Ratio of period-0 counts in the correct outcome to the wrong one.
    pub fn classical_ratio(&self) -> f64 {
        let (_, want_up) = self.input.readout();
        let (u, d) = (self.counts.up[0], self.counts.down[0]);
        if want_up {
            u / d
        } else {
            d / u
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleportResult {
    pub mode: Mode,
    pub inputs: Vec<InputResult>,
    /// Mean fidelity over the inputs.
    pub f_t: f64,
    pub f_t_stderr: f64,
    /// `(F_T − 2/3) / stderr`, when the stderr is positive.
    pub significance: Option<f64>,
}

impl TeleportResult {
    pub fn input(&self, input: InputState) -> Option<&InputResult> {
        self.inputs.iter().find(|r| r.input == input)
    }
}

/// Runs all four inputs and averages their fidelities.
pub fn run_teleportation(cfg: &ExperimentConfig, noise: &NoiseModel, mode: Mode, record_tags: bool) -> Result<TeleportResult> {
    let inputs = InputState::ALL
        .iter()
        .map(|&input| run_teleportation_input(&ExperimentConfig { input, ..cfg.clone() }, noise, mode, record_tags))
        .collect::<Result<Vec<_>>>()?;
    let f_t = inputs.iter().map(|r| r.fidelity).sum::<f64>() / inputs.len() as f64;
    let f_t_stderr = inputs.iter().map(|r| r.stderr * r.stderr).sum::<f64>().sqrt() / inputs.len() as f64;
    let significance = if f_t_stderr > 0.0 { Some(super::threshold_significance(f_t, f_t_stderr)?) } else { None };
    Ok(TeleportResult { mode, inputs, f_t, f_t_stderr, significance })
}

/// Runs the input selected in `cfg`.
pub fn run_teleportation_input(
    cfg: &ExperimentConfig,
    noise: &NoiseModel,
    mode: Mode,
    record_tags: bool,
) -> Result<InputResult> {
    cfg.validate()?;
    noise.validate()?;
    let setup = Setup::new(cfg, noise)?;
    match mode {
        Mode::Analytic => Ok(analytic(&setup)),
        Mode::MonteCarlo => Ok(monte_carlo(&setup, record_tags)),
    }
}

struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    noise: &'a NoiseModel,
    state: TwoPhotonState<f64>,
    dist: DistinguishabilityModel<f64>,
    overhauser: OverhauserModel<f64>,
    schedule: PulseSchedule<f64>,
    /// Readout direction in the physical frame: `U_ideal · |basis up⟩`.
    readout_vec: (Complex<f64>, Complex<f64>),
    want_up: bool,
    seed: u64,
}

impl<'a> Setup<'a> {
    fn new(cfg: &'a ExperimentConfig, noise: &'a NoiseModel) -> Result<Self> {
        let mut src = SourceConfig::new(cfg.lifetime, cfg.delta, noise.p_exc)?;
        src.t0 = 0.0;
        let (a, b) = cfg.input.amplitudes();
        let qubit = generate_photonic_qubit(&src, (Complex::new(a, 0.0), Complex::new(b, 0.0)))?;
        let raw = EntangledPairState::new(trion_decay_state(), src.envelope()?, cfg.delta)?;
        let (pair, _) = erase_polarization(&raw, &src.analyzer)?;
        let state = assemble_input_state(&qubit, &pair)?;
        let dist = DistinguishabilityModel::new(noise.overlap, Polarization::Parallel, 0.0)?;
        let overhauser =
            if noise.t2star.is_infinite() { OverhauserModel::none() } else { OverhauserModel::new(noise.t2star)? };
        let schedule = cfg.echo_schedule()?;
        let (basis, want_up) = cfg.input.readout();
        let (bu, bd) = basis.up_state::<f64>();
        let u = schedule.ideal_unitary();
        let readout_vec = (u[0] * bu + u[1] * bd, u[2] * bu + u[3] * bd);
        let seed = cfg.seed ^ ((cfg.input as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        Ok(Self { cfg, noise, state, dist, overhauser, schedule, readout_vec, want_up, seed })
    }

    /// Echo schedule whose free evolution starts at the mean detection time `t̄`.
    fn schedule_from(&self, tbar: f64) -> PulseSchedule<f64> {
        let start = tbar.clamp(0.0, 0.5 * self.cfg.t_echo);
        self.schedule.starting_at(start).expect("start precedes the π pulse")
    }

    fn observed_up(&self, p_up: f64) -> f64 {
        let e = self.noise.readout_error;
        e + (1.0 - 2.0 * e) * p_up
    }

    fn histogram(&self) -> CoincidenceHistogram {
        let l = self.cfg.herald_length;
        CoincidenceHistogram::new(-l, l, self.cfg.bin_width, 0).expect("validated window")
    }

    /// Fidelity from period-0 counts and its binomial stderr.
    fn fidelity(&self, counts: &ThreefoldCounts) -> (f64, f64) {
        let (u, d) = (counts.up[0], counts.down[0]);
        let n = u + d;
        if n <= 0.0 {
            return (0.0, 0.0);
        }
        let f = if self.want_up { u / n } else { d / n };
        (f, (f * (1.0 - f) / n).sqrt())
    }
}

fn analytic(s: &Setup) -> InputResult {
    let cfg = s.cfg;
    let noise = s.noise;
    let sigma = noise.jitter;
    let (lo, hi) = (cfg.herald_start, cfg.herald_end());
    let g_lo = (lo - JITTER_TAIL * sigma).max(0.0);
    let g_hi = hi + JITTER_TAIL * sigma;
    let n = ((g_hi - g_lo) / GRID_STEP).ceil() as usize;
    let h = (g_hi - g_lo) / n as f64;
    let t: Vec<f64> = (0..n).map(|i| g_lo + (i as f64 + 0.5) * h).collect();
    let w: Vec<f64> = t.iter().map(|&x| jitter_acceptance(x, lo, hi, sigma)).collect();
    let fa: Vec<_> = t.iter().map(|&x| s.state.amplitudes_a(x)).collect();
    let fb: Vec<_> = t.iter().map(|&x| s.state.amplitudes_b(x)).collect();
    // t̄ of grid points (i, j) is g_lo + (i + j + 1) h / 2
    let (ru, rd) = s.readout_vec;
    let weights: Vec<[Complex<f64>; 4]> = (0..2 * n - 1)
        .map(|k| {
            let tbar = g_lo + (k as f64 + 1.0) * h / 2.0;
            EchoChannel::new(&s.schedule_from(tbar), &s.overhauser, Frame::RotatingAtZeeman).readout_weights(ru, rd)
        })
        .collect();
    let wint = s.dist.interference_weight();
    // fine histogram over τ = t2 − t1 = (j − i) h, index j − i + n − 1
    let mut fine_total = vec![0.0; 2 * n - 1];
    let mut fine_up = vec![0.0; 2 * n - 1];
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            let acc = w[i] * w[j];
            if acc == 0.0 {
                continue;
            }
            let (p, q) = herald_terms_from(s.state.contract(&fa[i], &fb[j]), s.state.contract(&fa[j], &fb[i]));
            let m = herald_matrix_from(&p, &q, wint);
            let g = &weights[i + j];
            let up = (m[0] * g[0] + m[1] * g[1] + m[2] * g[2] + m[3] * g[3]).re;
            fine_total[j + n - 1 - i] += acc * (m[0].re + m[3].re);
            fine_up[j + n - 1 - i] += acc * up;
        }
    }
    let area = h * h;
    let split_in_window: f64 = fine_total.iter().sum::<f64>() * area;
    let up_in_window: f64 = fine_up.iter().sum::<f64>() * area;

    // per-trial probabilities
    let eta = noise.efficiency;
    let q_pair = noise.p_exc * 0.5;
    let h_gen = q_pair * eta * eta * split_in_window;
    let u_gen = q_pair * eta * eta * up_in_window;
    let lambda_w = 1.0 - (-noise.dark_rate * cfg.herald_length).exp();
    let false_heralds = if lambda_w > 0.0 {
        let integrate = |f: &dyn Fn(f64) -> f64| t.iter().zip(&w).map(|(&x, &wx)| f(x) * wx).sum::<f64>() * h;
        let wa = integrate(&|x| s.state.intensity_a(x));
        let wb = integrate(&|x| s.state.intensity_b(x));
        let real_per_detector = 0.5 * eta * (wa + q_pair * wb);
        2.0 * lambda_w * real_per_detector + lambda_w * lambda_w
    } else {
        0.0
    };
    let heralds = h_gen + false_heralds;
    let lambda_r = noise.dark_rate * cfg.readout_length;
    let e = noise.readout_error;
    let p_unc = s.observed_up(noise.p_up_init);
    let trials = cfg.trials as f64;

    let mut counts = ThreefoldCounts::zeros(cfg.periods);
    counts.heralds = (heralds * trials).round() as u64;
    counts.up[0] = trials
        * (eta * (e * h_gen + (1.0 - 2.0 * e) * u_gen) + false_heralds * eta * p_unc + heralds * lambda_r / 2.0);
    counts.down[0] = trials
        * (eta * ((1.0 - e) * h_gen - (1.0 - 2.0 * e) * u_gen)
            + false_heralds * eta * (1.0 - p_unc)
            + heralds * lambda_r / 2.0);
    // a later trial is independent of the herald; its readout follows the per-trial marginal,
    // where any detected split pair projects the spin, in the window or not
    let (split_all, up_all) = all_split_pairs(s);
    let (h_all, u_all) = (q_pair * eta * eta * split_all, q_pair * eta * eta * up_all);
    let marginal_up = eta * (e * h_all + (1.0 - 2.0 * e) * u_all + (1.0 - h_all) * p_unc) + lambda_r / 2.0;
    let marginal_down =
        eta * ((1.0 - e) * h_all - (1.0 - 2.0 * e) * u_all + (1.0 - h_all) * (1.0 - p_unc)) + lambda_r / 2.0;
    for k in 1..cfg.periods {
        let pairs = heralds * (trials - k as f64).max(0.0);
        counts.up[k] = pairs * marginal_up;
        counts.down[k] = pairs * marginal_down;
    }

    // time-resolved period-0 three-folds from genuine heralds
    let mut histogram_up = s.histogram();
    let mut histogram_down = s.histogram();
    let scale = trials * q_pair * eta * eta * eta * area;
    let tau_sigma = std::f64::consts::SQRT_2 * sigma;
    for (k, (&tot, &up)) in fine_total.iter().zip(&fine_up).enumerate() {
        if tot == 0.0 {
            continue;
        }
        let tau = (k as f64 - (n as f64 - 1.0)) * h;
        let obs_up = scale * (e * tot + (1.0 - 2.0 * e) * up);
        let obs_down = scale * tot - obs_up;
        spread(&mut histogram_up, tau, tau_sigma, obs_up);
        spread(&mut histogram_down, tau, tau_sigma, obs_down);
    }

    let (fidelity, stderr) = s.fidelity(&counts);
    InputResult {
        input: cfg.input,
        fidelity,
        stderr,
        heralds: heralds * trials,
        counts,
        histogram_up,
        histogram_down,
        tags: Vec::new(),
    }
}

/// Probability of a split pair over all detection times, and its weight on the readout "up"
/// outcome before readout errors, per emitted pair reaching the beam splitter.
fn all_split_pairs(s: &Setup) -> (f64, f64) {
    // coarse: only the later-period baselines depend on this
    const STEP: f64 = 8.0;
    const SPAN_LIFETIMES: f64 = 16.0;
    let n = (SPAN_LIFETIMES * s.cfg.lifetime / STEP).ceil() as usize;
    let t: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * STEP).collect();
    let fa: Vec<_> = t.iter().map(|&x| s.state.amplitudes_a(x)).collect();
    let fb: Vec<_> = t.iter().map(|&x| s.state.amplitudes_b(x)).collect();
    let (ru, rd) = s.readout_vec;
    let weights: Vec<[Complex<f64>; 4]> = (0..2 * n - 1)
        .map(|k| {
            let tbar = (k as f64 + 1.0) * STEP / 2.0;
            EchoChannel::new(&s.schedule_from(tbar), &s.overhauser, Frame::RotatingAtZeeman).readout_weights(ru, rd)
        })
        .collect();
    let w = s.dist.interference_weight();
    let (mut total, mut up) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let (p, q) = herald_terms_from(s.state.contract(&fa[i], &fb[j]), s.state.contract(&fa[j], &fb[i]));
            let m = herald_matrix_from(&p, &q, w);
            let g = &weights[i + j];
            total += m[0].re + m[3].re;
            up += (m[0] * g[0] + m[1] * g[1] + m[2] * g[2] + m[3] * g[3]).re;
        }
    }
    (total * STEP * STEP, up * STEP * STEP)
}

/// Adds `weight` at `x`, smeared by a Gaussian of std `sigma` across the bins.
fn spread(hist: &mut CoincidenceHistogram, x: f64, sigma: f64, weight: f64) {
    if sigma == 0.0 {
        // values on a bin edge belong to the upper bin
        hist.add(x + 1e-9, weight);
        return;
    }
    let edges = hist.edges().to_vec();
    for (b, e) in edges.windows(2).enumerate() {
        let p = normal_cdf((e[1] - x) / sigma) - normal_cdf((e[0] - x) / sigma);
        if p > 0.0 {
            hist.add(0.5 * (e[0] + e[1]), weight * p);
        }
        let _ = b;
    }
}

/// What one trial left behind.
#[derive(Debug, Clone, Default)]
struct Trial {
    herald: bool,
    /// Recorded `t2 − t1` of the heralding clicks.
    tau: f64,
    up: u32,
    down: u32,
    tags: Vec<TagRecord>,
}

fn simulate_trial(s: &Setup, index: u64, record: bool) -> Trial {
    let cfg = s.cfg;
    let noise = s.noise;
    let eta = noise.efficiency;
    let mut rng = montecarlo::substream(s.seed, Domain::Teleport, index);
    let emitted = rng.random::<f64>() < noise.p_exc;
    let passes = rng.random::<bool>();
    let b_present = emitted && passes;

    // (detector, true time)
    let mut clicks: Vec<(Detector, f64)> = Vec::with_capacity(4);
    let random_detector = |rng: &mut rand_chacha::ChaCha8Rng| if rng.random::<bool>() { Detector::D1 } else { Detector::D2 };
    let mut genuine = None;
    if b_present {
        match s.state.sample_clicks(&s.dist, &mut rng) {
            TwoPhotonClicks::Split { t1, t2 } => {
                let k1 = rng.random::<f64>() < eta;
                let k2 = rng.random::<f64>() < eta;
                if k1 {
                    clicks.push((Detector::D1, t1));
                }
                if k2 {
                    clicks.push((Detector::D2, t2));
                }
                if k1 && k2 {
                    genuine = Some((t1, t2));
                }
            }
            TwoPhotonClicks::Bunched { detector, times } => {
                let d = if detector == 1 { Detector::D1 } else { Detector::D2 };
                for t in [times.0, times.1] {
                    if rng.random::<f64>() < eta {
                        clicks.push((d, t));
                    }
                }
            }
        }
    } else {
        let t = s.state.packet_a().sample_time(&mut rng);
        let d = random_detector(&mut rng);
        if rng.random::<f64>() < eta {
            clicks.push((d, t));
        }
    }
    // residual multi-photon emission: one extra distinguishable photon per source
    let g = noise.residual_g2 / 2.0;
    for source_active in [true, b_present] {
        let extra = rng.random::<f64>() < g;
        if source_active && extra {
            let t = s.state.envelope_b().sample_time(&mut rng);
            let d = random_detector(&mut rng);
            if rng.random::<f64>() < eta {
                clicks.push((d, t));
            }
        }
    }

    // detector response
    let (lo, hi) = (cfg.herald_start, cfg.herald_end());
    let mut jrng = montecarlo::substream(s.seed, Domain::Jitter, index);
    let mut recorded: Vec<(Detector, f64)> = clicks
        .iter()
        .map(|&(d, t)| {
            let z: f64 = rand_distr::StandardNormal.sample(&mut jrng);
            (d, t + noise.jitter * z)
        })
        .collect();
    if noise.dark_rate > 0.0 {
        let mut drng = montecarlo::substream(s.seed, Domain::Dark, index);
        for d in [Detector::D1, Detector::D2] {
            for tag in dark_counts(noise.dark_rate, lo, hi, d, index, Channel::Herald, &mut drng) {
                recorded.push((d, tag.timestamp));
            }
        }
    }
    let first = |det: Detector| {
        recorded
            .iter()
            .filter(|(d, t)| *d == det && *t >= lo && *t <= hi)
            .map(|(_, t)| *t)
            .min_by(f64::total_cmp)
    };
    let (r1, r2) = (first(Detector::D1), first(Detector::D2));
    let herald = r1.is_some() && r2.is_some();
    let tau = match (r1, r2) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };

    // spin readout
    let p_up = match genuine {
        Some((t1, t2)) => {
            let m = s.state.herald_matrix(&s.dist, t1, t2);
            match SpinDensity::from_unnormalized(m) {
                Some(spin) => {
                    let mut orng = montecarlo::substream(s.seed, Domain::Overhauser, index);
                    let delta = sample_overhauser(&s.overhauser, &mut orng);
                    let sched = s.schedule_from(0.5 * (t1 + t2));
                    let logical = sched.to_logical(&sched.evolve(&spin, delta));
                    measure_in_basis(&logical, s.cfg.input.readout().0).0
                }
                None => noise.p_up_init,
            }
        }
        None => noise.p_up_init,
    };
    let p_obs = s.observed_up(p_up);
    let (mut up, mut down) = (0u32, 0u32);
    let mut readout_times: Vec<(Channel, f64)> = Vec::new();
    if rng.random::<f64>() < eta {
        let ch = if rng.random::<f64>() < p_obs { Channel::ReadoutUp } else { Channel::ReadoutDown };
        readout_times.push((ch, cfg.readout_start + rng.random::<f64>() * cfg.readout_length));
    }
    let lambda_r = noise.dark_rate * cfg.readout_length;
    if lambda_r > 0.0 {
        let mut drng = montecarlo::substream(s.seed ^ 0x5EED, Domain::Dark, index);
        let k = Poisson::new(lambda_r).map(|p| p.sample(&mut drng) as u64).unwrap_or(0);
        for _ in 0..k {
            let ch = if drng.random::<bool>() { Channel::ReadoutUp } else { Channel::ReadoutDown };
            readout_times.push((ch, cfg.readout_start + drng.random::<f64>() * cfg.readout_length));
        }
    }
    for (ch, _) in &readout_times {
        match ch {
            Channel::ReadoutUp => up += 1,
            _ => down += 1,
        }
    }

    let mut tags = Vec::new();
    if record {
        let origin = index as f64 * cfg.repetition;
        for (d, t) in &recorded {
            tags.push(TagRecord { detector: *d, timestamp: origin + cfg.propagation + t, trial: index, channel: Channel::Herald });
        }
        for (ch, t) in &readout_times {
            tags.push(TagRecord { detector: Detector::D1, timestamp: origin + t, trial: index, channel: *ch });
        }
    }
    Trial { herald, tau, up, down, tags }
}

fn monte_carlo(s: &Setup, record: bool) -> InputResult {
    let cfg = s.cfg;
    let chunks = montecarlo::map_chunks(cfg.trials, |a, b| (a..b).map(|i| simulate_trial(s, i, record)).collect::<Vec<_>>());
    let trials: Vec<Trial> = chunks.into_iter().flatten().collect();
    let mut counts = ThreefoldCounts::zeros(cfg.periods);
    let mut histogram_up = s.histogram();
    let mut histogram_down = s.histogram();
    for (n, tr) in trials.iter().enumerate() {
        if !tr.herald {
            continue;
        }
        counts.heralds += 1;
        for k in 0..cfg.periods {
            if let Some(r) = trials.get(n + k) {
                counts.up[k] += r.up as f64;
                counts.down[k] += r.down as f64;
            }
        }
        histogram_up.add(tr.tau, tr.up as f64);
        histogram_down.add(tr.tau, tr.down as f64);
    }
    let (fidelity, stderr) = s.fidelity(&counts);
    let tags = if record {
        let mut all: Vec<TagRecord> = trials.into_iter().flat_map(|t| t.tags).collect();
        all.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.trial.cmp(&b.trial)));
        all
    } else {
        Vec::new()
    };
    InputResult {
        input: cfg.input,
        fidelity,
        stderr,
        heralds: counts.heralds as f64,
        counts,
        histogram_up,
        histogram_down,
        tags,
    }
}
