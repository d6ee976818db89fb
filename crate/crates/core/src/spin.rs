//! Electron spin dynamics: quasi-static Overhauser detuning, instantaneous rotation pulses,
//! echo sequences and basis measurements.
//!
//! The spin basis is `{|↑⟩, |↓⟩}` (index 0, 1). Free evolution under a detuning `δ` multiplies
//! `ρ_↑↓` by `exp(-iδt)`. With a Gaussian detuning of standard deviation `σ = √2 / T₂*` the
//! ensemble coherence decays as `exp(-(t / T₂*)²)`.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::montecarlo::{self, Domain};
use crate::qcore::{CMatrix, DensityOperator};
use crate::Real;

type M2<T> = [Complex<T>; 4];

fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

fn zero<T: Real>() -> Complex<T> {
    c(T::zero(), T::zero())
}

fn mul2<T: Real>(a: &M2<T>, b: &M2<T>) -> M2<T> {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn adj2<T: Real>(a: &M2<T>) -> M2<T> {
    [a[0].conj(), a[2].conj(), a[1].conj(), a[3].conj()]
}

fn conjugate_by<T: Real>(u: &M2<T>, m: &M2<T>) -> M2<T> {
    mul2(&mul2(u, m), &adj2(u))
}

/// Reference frame of a [`SpinDensity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame<T> {
    /// Rotating at the Zeeman frequency: only the detuning drives free evolution.
    RotatingAtZeeman,
    Lab { zeeman: T },
}

/// 2×2 spin density matrix in the `{|↑⟩, |↓⟩}` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinDensity<T> {
    rho: M2<T>,
    frame: Frame<T>,
}

impl<T: Real> SpinDensity<T> {
    pub fn up() -> Self {
        Self { rho: [c(T::one(), T::zero()), zero(), zero(), zero()], frame: Frame::RotatingAtZeeman }
    }

    pub fn down() -> Self {
        Self { rho: [zero(), zero(), zero(), c(T::one(), T::zero())], frame: Frame::RotatingAtZeeman }
    }

    pub fn maximally_mixed() -> Self {
        let h = c(T::lit(0.5), T::zero());
        Self { rho: [h, zero(), zero(), h], frame: Frame::RotatingAtZeeman }
    }

    /// `|ψ⟩⟨ψ|` for `ψ = up·|↑⟩ + down·|↓⟩`, normalized.
    pub fn pure(up: Complex<T>, down: Complex<T>) -> Result<Self> {
        let n = up.norm_sqr() + down.norm_sqr();
        if !(n > T::zero()) {
            return Err(Error::InvalidState("zero spin amplitude".into()));
        }
        let inv = T::one() / n;
        Ok(Self {
            rho: [up * up.conj() * inv, up * down.conj() * inv, down * up.conj() * inv, down * down.conj() * inv],
            frame: Frame::RotatingAtZeeman,
        })
    }

    /// `(|↑⟩ + e^{iφ}|↓⟩)/√2`.
    pub fn equator(phase: T) -> Self {
        Self::pure(c(T::one(), T::zero()), Complex::from_polar(T::one(), phase)).unwrap()
    }

    /// Validates and wraps a raw matrix `[ρ↑↑, ρ↑↓, ρ↓↑, ρ↓↓]`.
    pub fn from_matrix(rho: [Complex<T>; 4]) -> Result<Self> {
        let m = CMatrix::from_rows(2, rho.to_vec());
        DensityOperator::new(m, vec![2])?;
        Ok(Self { rho, frame: Frame::RotatingAtZeeman })
    }

    /// Normalizes a positive semidefinite matrix by its trace, without further checks.
    pub(crate) fn from_unnormalized(rho: M2<T>) -> Option<Self> {
        let tr = rho[0].re + rho[3].re;
        if !(tr > T::zero()) {
            return None;
        }
        let inv = T::one() / tr;
        Some(Self { rho: rho.map(|z| z * inv), frame: Frame::RotatingAtZeeman })
    }

    pub fn with_frame(mut self, frame: Frame<T>) -> Self {
        self.frame = frame;
        self
    }

    pub fn frame(&self) -> Frame<T> {
        self.frame
    }

    pub fn matrix(&self) -> [Complex<T>; 4] {
        self.rho
    }

    pub fn to_density(&self) -> DensityOperator<T> {
        DensityOperator::new(CMatrix::from_rows(2, self.rho.to_vec()), vec![2]).expect("valid spin density")
    }

    pub fn trace(&self) -> T {
        self.rho[0].re + self.rho[3].re
    }

    pub fn population_up(&self) -> T {
        self.rho[0].re
    }

    /// `ρ_↑↓`.
    pub fn coherence_element(&self) -> Complex<T> {
        self.rho[1]
    }

    /// `2|ρ_↑↓|`: 1 on the equator of the Bloch sphere, 0 for any diagonal state.
    pub fn coherence(&self) -> T {
        self.rho[1].norm() * T::lit(2.0)
    }

    pub fn purity(&self) -> T {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨ψ|ρ|ψ⟩` for `ψ = up·|↑⟩ + down·|↓⟩`, normalized.
    pub fn overlap_with(&self, up: Complex<T>, down: Complex<T>) -> T {
        let n = up.norm_sqr() + down.norm_sqr();
        let v = [up, down];
        let mut acc = zero::<T>();
        for i in 0..2 {
            for j in 0..2 {
                acc = acc + v[i].conj() * self.rho[2 * i + j] * v[j];
            }
        }
        acc.re / n
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        (self.rho[1] - self.rho[2].conj()).norm() <= tol && self.rho[0].im.abs() <= tol && self.rho[3].im.abs() <= tol
    }

    fn averaged(states: impl Iterator<Item = M2<T>>, n: usize, frame: Frame<T>) -> Self {
        let sum = states.fold([zero::<T>(); 4], |acc, m| [acc[0] + m[0], acc[1] + m[1], acc[2] + m[2], acc[3] + m[3]]);
        let inv = T::one() / T::from_usize(n).unwrap();
        Self { rho: sum.map(|z| z * inv), frame }
    }
}

/// Rotation axis on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// `exp(-i θ σ_axis / 2)`.
pub fn rotation<T: Real>(axis: Axis, angle: T) -> [Complex<T>; 4] {
    let half = angle * T::lit(0.5);
    let (s, co) = half.sin_cos();
    match axis {
        Axis::X => [c(co, T::zero()), c(T::zero(), -s), c(T::zero(), -s), c(co, T::zero())],
        Axis::Y => [c(co, T::zero()), c(-s, T::zero()), c(s, T::zero()), c(co, T::zero())],
        Axis::Z => [c(co, -s), zero(), zero(), c(co, s)],
    }
}

pub fn apply_pulse<T: Real>(s: &SpinDensity<T>, axis: Axis, angle: T) -> SpinDensity<T> {
    SpinDensity { rho: conjugate_by(&rotation(axis, angle), &s.rho), frame: s.frame }
}

pub fn evolve_free<T: Real>(s: &SpinDensity<T>, detuning: T, duration: T) -> Result<SpinDensity<T>> {
    if !(duration >= T::zero()) {
        return Err(invalid("duration", format!("must be non-negative, got {duration}")));
    }
    let omega = match s.frame {
        Frame::RotatingAtZeeman => detuning,
        Frame::Lab { zeeman } => zeeman + detuning,
    };
    Ok(SpinDensity { rho: free_phase(&s.rho, omega * duration), frame: s.frame })
}

#[inline]
fn free_phase<T: Real>(rho: &M2<T>, phi: T) -> M2<T> {
    let p = Complex::from_polar(T::one(), -phi);
    [rho[0], rho[1] * p, rho[2] * p.conj(), rho[3]]
}

/// Quasi-static Gaussian Overhauser detuning with `σ = √2 / T₂*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverhauserModel<T> {
    t2star: T,
}

impl<T: Real> OverhauserModel<T> {
    /// `t2star = ∞` switches dephasing off.
    pub fn new(t2star: T) -> Result<Self> {
        if !(t2star > T::zero()) {
            return Err(invalid("t2star", format!("must be positive, got {t2star}")));
        }
        Ok(Self { t2star })
    }

    pub fn none() -> Self {
        Self { t2star: T::infinity() }
    }

    pub fn t2star(&self) -> T {
        self.t2star
    }

    pub fn sigma(&self) -> T {
        if self.t2star.is_infinite() {
            T::zero()
        } else {
            T::SQRT_2() / self.t2star
        }
    }

    /// Ensemble average of `exp(iδk)`.
    pub fn phase_average(&self, k: T) -> T {
        let s = self.sigma() * k;
        (-(s * s) * T::lit(0.5)).exp()
    }
}

pub fn sample_overhauser<T: Real, R: Rng + ?Sized>(model: &OverhauserModel<T>, rng: &mut R) -> T {
    let z: f64 = StandardNormal.sample(rng);
    model.sigma() * T::lit(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse<T> {
    pub time: T,
    pub axis: Axis,
    pub angle: T,
}

/// Rotation pulses applied to a spin that evolves freely from `start` to `echo_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule<T> {
    start: T,
    pulses: Vec<Pulse<T>>,
    echo_time: T,
    readout: (T, T),
}

impl<T: Real> PulseSchedule<T> {
    pub fn new(start: T, pulses: Vec<Pulse<T>>, echo_time: T, readout: (T, T)) -> Result<Self> {
        let mut last = start;
        for p in &pulses {
            if !(p.time >= last) {
                return Err(Error::MalformedSchedule(format!(
                    "pulse at {} precedes {} (start or previous pulse)",
                    p.time, last
                )));
            }
            last = p.time;
        }
        if !(echo_time >= last) {
            return Err(Error::MalformedSchedule(format!("echo time {echo_time} precedes the last pulse at {last}")));
        }
        if !(readout.0 >= last && readout.1 >= readout.0) {
            return Err(Error::MalformedSchedule(format!(
                "readout window ({}, {}) must follow the last pulse at {last}",
                readout.0, readout.1
            )));
        }
        Ok(Self { start, pulses, echo_time, readout })
    }

    /// Hahn echo: free evolution from `start`, π about X at `t_echo / 2`, refocus at `t_echo`.
    pub fn hahn_echo(start: T, t_echo: T, readout_len: T) -> Result<Self> {
        let mid = t_echo * T::lit(0.5);
        Self::new(start, vec![Pulse { time: mid, axis: Axis::X, angle: T::PI() }], t_echo, (t_echo, t_echo + readout_len))
    }

    /// Free evolution from `start` to `end` with no pulses.
    pub fn free(start: T, end: T) -> Result<Self> {
        Self::new(start, Vec::new(), end, (end, end))
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn pulses(&self) -> &[Pulse<T>] {
        &self.pulses
    }

    pub fn echo_time(&self) -> T {
        self.echo_time
    }

    pub fn readout(&self) -> (T, T) {
        self.readout
    }

    /// Same pulses with free evolution starting at `start` instead.
    pub fn starting_at(&self, start: T) -> Result<Self> {
        Self::new(start, self.pulses.clone(), self.echo_time, self.readout)
    }

    /// True when the schedule is a standard echo: exactly one π pulse, at `echo_time / 2`.
    pub fn is_standard_echo(&self) -> bool {
        let half = self.echo_time * T::lit(0.5);
        self.pulses.len() == 1
            && (self.pulses[0].angle.abs() - T::PI()).abs() <= T::tol(1e-9)
            && (self.pulses[0].time - half).abs() <= T::tol(1e-9) * (T::one() + half)
    }

    /// Net pulse unitary with the detuning switched off.
    pub fn ideal_unitary(&self) -> [Complex<T>; 4] {
        self.pulses
            .iter()
            .fold([c(T::one(), T::zero()), zero(), zero(), c(T::one(), T::zero())], |u, p| {
                mul2(&rotation(p.axis, p.angle), &u)
            })
    }

    /// Maps a state at `echo_time` back through the ideal pulse unitary, so that its
    /// populations refer to the spin basis before the pulses.
    pub fn to_logical(&self, s: &SpinDensity<T>) -> SpinDensity<T> {
        let u = self.ideal_unitary();
        SpinDensity { rho: conjugate_by(&adj2(&u), &s.rho), frame: s.frame }
    }

    /// Deterministic trajectory for a fixed detuning.
    pub fn evolve(&self, s: &SpinDensity<T>, detuning: T) -> SpinDensity<T> {
        let mut t = self.start;
        let mut state = *s;
        for p in &self.pulses {
            state = evolve_free(&state, detuning, p.time - t).expect("schedule times are ordered");
            state = apply_pulse(&state, p.axis, p.angle);
            t = p.time;
        }
        evolve_free(&state, detuning, self.echo_time - t).expect("schedule times are ordered")
    }
}

/// Monte Carlo ensemble average of echo trajectories over Overhauser samples.
///
/// Trial `i` draws its detuning from the `(seed, Echo, i)` substream, so the result does not
/// depend on how trials are spread across threads.
pub fn run_echo<T: Real>(
    s: &SpinDensity<T>,
    sched: &PulseSchedule<T>,
    model: &OverhauserModel<T>,
    seed: u64,
    trials: u64,
) -> Result<SpinDensity<T>> {
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let parts = montecarlo::map_chunks(trials, |start, end| {
        (start..end).fold([zero::<T>(); 4], |acc, i| {
            let mut rng = montecarlo::substream(seed, Domain::Echo, i);
            let delta = sample_overhauser(model, &mut rng);
            let m = sched.evolve(s, delta).rho;
            [acc[0] + m[0], acc[1] + m[1], acc[2] + m[2], acc[3] + m[3]]
        })
    });
    Ok(SpinDensity::averaged(parts.into_iter(), trials as usize, s.frame))
}

/// Exact Gaussian ensemble average of an echo sequence.
pub fn run_echo_analytic<T: Real>(
    s: &SpinDensity<T>,
    sched: &PulseSchedule<T>,
    model: &OverhauserModel<T>,
) -> SpinDensity<T> {
    SpinDensity { rho: EchoChannel::new(sched, model, s.frame).apply_raw(&s.rho), frame: s.frame }
}

/// The ensemble-averaged echo map as a linear superoperator on 2×2 matrices.
///
/// Built by tracking each matrix as a sum of terms `M_k e^{iδk}` through free evolution and
/// pulses, then averaging `e^{iδk}` over the Gaussian detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoChannel<T> {
    images: [M2<T>; 4],
}

impl<T: Real> EchoChannel<T> {
    pub fn new(sched: &PulseSchedule<T>, model: &OverhauserModel<T>, frame: Frame<T>) -> Self {
        let mut images = [[zero::<T>(); 4]; 4];
        for (k, img) in images.iter_mut().enumerate() {
            let mut basis = [zero::<T>(); 4];
            basis[k] = c(T::one(), T::zero());
            *img = expand_and_average(&basis, sched, model, frame);
        }
        Self { images }
    }

    fn apply_raw(&self, rho: &M2<T>) -> M2<T> {
        let mut out = [zero::<T>(); 4];
        for (k, img) in self.images.iter().enumerate() {
            for i in 0..4 {
                out[i] = out[i] + rho[k] * img[i];
            }
        }
        out
    }

    pub fn apply(&self, s: &SpinDensity<T>) -> SpinDensity<T> {
        SpinDensity { rho: self.apply_raw(&s.rho), frame: s.frame }
    }

    /// `Tr(P · E(|i⟩⟨j|))` for every matrix unit, for a projector `P = |ψ⟩⟨ψ|`.
    pub fn readout_weights(&self, up: Complex<T>, down: Complex<T>) -> [Complex<T>; 4] {
        let n = up.norm_sqr() + down.norm_sqr();
        let v = [up, down];
        self.images.map(|img| {
            let mut acc = zero::<T>();
            for i in 0..2 {
                for j in 0..2 {
                    acc = acc + v[i].conj() * img[2 * i + j] * v[j];
                }
            }
            acc / n
        })
    }
}

fn expand_and_average<T: Real>(
    m: &M2<T>,
    sched: &PulseSchedule<T>,
    model: &OverhauserModel<T>,
    frame: Frame<T>,
) -> M2<T> {
    let zeeman = match frame {
        Frame::RotatingAtZeeman => T::zero(),
        Frame::Lab { zeeman } => zeeman,
    };
    let mut terms: Vec<(T, M2<T>)> = vec![(T::zero(), *m)];
    let free = |terms: Vec<(T, M2<T>)>, dt: T| -> Vec<(T, M2<T>)> {
        let mut out: Vec<(T, M2<T>)> = Vec::with_capacity(terms.len() * 3);
        for (k, t) in terms {
            let diag = [t[0], zero(), zero(), t[3]];
            let p = Complex::from_polar(T::one(), -zeeman * dt);
            let upper = [zero(), t[1] * p, zero(), zero()];
            let lower = [zero(), zero(), t[2] * p.conj(), zero()];
            for (kk, mm) in [(k, diag), (k - dt, upper), (k + dt, lower)] {
                if mm.iter().all(|z| z.norm_sqr() == T::zero()) {
                    continue;
                }
                match out.iter_mut().find(|(k2, _)| (*k2 - kk).abs() <= T::tol(1e-9) * (T::one() + kk.abs())) {
                    Some((_, acc)) => {
                        for i in 0..4 {
                            acc[i] = acc[i] + mm[i];
                        }
                    }
                    None => out.push((kk, mm)),
                }
            }
        }
        out
    };
    let mut t = sched.start();
    for p in sched.pulses() {
        terms = free(terms, p.time - t);
        let u = rotation(p.axis, p.angle);
        terms = terms.into_iter().map(|(k, mm)| (k, conjugate_by(&u, &mm))).collect();
        t = p.time;
    }
    terms = free(terms, sched.echo_time() - t);
    terms.into_iter().fold([zero::<T>(); 4], |acc, (k, mm)| {
        let w = model.phase_average(k);
        [acc[0] + mm[0] * w, acc[1] + mm[1] * w, acc[2] + mm[2] * w, acc[3] + mm[3] * w]
    })
}

/// Measurement basis. Rotated bases are realized as a pulse followed by a Z readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Outcome "up" is `|↑⟩`.
    Z,
    /// Outcome "up" is `(|↑⟩ + |↓⟩)/√2`.
    XPlus,
    /// Outcome "up" is `(|↑⟩ - |↓⟩)/√2`.
    XMinus,
}

impl Basis {
    /// Pulse that rotates the basis "up" state onto `|↑⟩`.
    pub fn pre_rotation<T: Real>(self) -> Option<(Axis, T)> {
        match self {
            Basis::Z => None,
            Basis::XPlus => Some((Axis::Y, -T::FRAC_PI_2())),
            Basis::XMinus => Some((Axis::Y, T::FRAC_PI_2())),
        }
    }

    /// Amplitudes `(↑, ↓)` of the "up" outcome state.
    pub fn up_state<T: Real>(self) -> (Complex<T>, Complex<T>) {
        let s = T::FRAC_1_SQRT_2();
        match self {
            Basis::Z => (c(T::one(), T::zero()), zero()),
            Basis::XPlus => (c(s, T::zero()), c(s, T::zero())),
            Basis::XMinus => (c(s, T::zero()), c(-s, T::zero())),
        }
    }
}

/// `(p_up, p_down)` for a projective measurement in `basis`.
pub fn measure_in_basis<T: Real>(s: &SpinDensity<T>, basis: Basis) -> (T, T) {
    let rotated = match basis.pre_rotation::<T>() {
        Some((axis, angle)) => apply_pulse(s, axis, angle),
        None => *s,
    };
    let tr = rotated.trace();
    let up = (rotated.population_up() / tr).max(T::zero()).min(T::one());
    (up, T::one() - up)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: &SpinDensity<f64>, b: &SpinDensity<f64>, tol: f64) -> bool {
        a.matrix().iter().zip(b.matrix()).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn eigenstate_is_unchanged_by_free_evolution() {
        let up = SpinDensity::<f64>::up();
        assert_eq!(evolve_free(&up, 0.3, 1234.0).unwrap(), up);
    }

    #[test]
    fn phase_accumulation_flips_equator() {
        let plus = SpinDensity::<f64>::equator(0.0);
        let out = evolve_free(&plus, PI / 100.0, 100.0).unwrap();
        assert!(close(&out, &SpinDensity::equator(PI), 1e-12));
        assert!(evolve_free(&plus, 0.1, -1.0).is_err());
    }

    #[test]
    fn lab_frame_adds_zeeman_precession() {
        let plus = SpinDensity::<f64>::equator(0.0).with_frame(Frame::Lab { zeeman: 0.02 });
        let out = evolve_free(&plus, 0.01, 100.0).unwrap();
        assert!((out.coherence_element().arg() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn pulses() {
        let up = SpinDensity::<f64>::up();
        assert!(close(&apply_pulse(&up, Axis::X, PI), &SpinDensity::down(), 1e-12));
        let two_halves = apply_pulse(&apply_pulse(&up, Axis::Y, FRAC_PI_2), Axis::Y, FRAC_PI_2);
        assert!(close(&two_halves, &apply_pulse(&up, Axis::Y, PI), 1e-12));
        assert!(close(&apply_pulse(&up, Axis::Y, FRAC_PI_2), &SpinDensity::equator(0.0), 1e-12));
    }

    #[test]
    fn measurements() {
        let (u, d) = measure_in_basis(&SpinDensity::<f64>::up(), Basis::Z);
        assert_eq!((u, d), (1.0, 0.0));
        let (u, d) = measure_in_basis(&SpinDensity::<f64>::equator(0.0), Basis::XPlus);
        assert!((u - 1.0).abs() < 1e-12 && d.abs() < 1e-12);
        let (u, _) = measure_in_basis(&SpinDensity::<f64>::equator(PI), Basis::XMinus);
        assert!((u - 1.0).abs() < 1e-12);
        for b in [Basis::Z, Basis::XPlus, Basis::XMinus] {
            let (u, d) = measure_in_basis(&SpinDensity::<f64>::maximally_mixed(), b);
            assert!((u - 0.5).abs() < 1e-12 && (d - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn overhauser_sampling() {
        let model = OverhauserModel::new(1000.0).unwrap();
        assert!((model.sigma() - 2f64.sqrt() * 1e-3).abs() < 1e-18);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| sample_overhauser(&model, &mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * model.sigma() / (n as f64).sqrt());
        let mut again = ChaCha8Rng::seed_from_u64(11);
        assert!(samples.iter().take(100).all(|s| *s == sample_overhauser(&model, &mut again)));
        assert!(OverhauserModel::new(0.0).is_err());
    }

    #[test]
    fn static_detuning_refocuses() {
        let sched = PulseSchedule::hahn_echo(0.0, 13_000.0, 1000.0).unwrap();
        assert!(sched.is_standard_echo());
        let plus = SpinDensity::<f64>::equator(0.4);
        let reference = sched.evolve(&plus, 0.0);
        for delta in [-3e-3, 1e-4, 2.5e-3] {
            let out = sched.evolve(&plus, delta);
            assert!(close(&out, &reference, 1e-9));
        }
        let model = OverhauserModel::new(1000.0).unwrap();
        let avg = run_echo(&plus, &sched, &model, 5, 2000).unwrap();
        assert!(avg.coherence() >= 0.999);
    }

    #[test]
    fn malformed_schedules_rejected() {
        let pi = Pulse { time: 5.0, axis: Axis::X, angle: PI };
        let early = Pulse { time: 1.0, ..pi };
        assert!(PulseSchedule::new(0.0, vec![pi, early], 10.0, (10.0, 11.0)).is_err());
        assert!(PulseSchedule::new(6.0, vec![pi], 10.0, (10.0, 11.0)).is_err());
        assert!(PulseSchedule::new(0.0, vec![pi], 4.0, (10.0, 11.0)).is_err());
        assert!(PulseSchedule::new(0.0, vec![pi], 10.0, (3.0, 11.0)).is_err());
    }

    #[test]
    fn analytic_channel_matches_gaussian_free_decay() {
        let model = OverhauserModel::new(1000.0).unwrap();
        let plus = SpinDensity::<f64>::equator(0.0);
        for t in [500.0, 1000.0, 2000.0] {
            let out = run_echo_analytic(&plus, &PulseSchedule::free(0.0, t).unwrap(), &model);
            assert!((out.coherence() - (-(t / 1000.0f64).powi(2)).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_channel_accounts_for_late_start() {
        // free evolution from t_s, π at T/2, refocus at T leaves an unrefocused time t_s
        let model = OverhauserModel::new(1000.0).unwrap();
        let sched = PulseSchedule::hahn_echo(400.0, 13_000.0, 0.0).unwrap();
        let out = sched.to_logical(&run_echo_analytic(&SpinDensity::equator(0.0), &sched, &model));
        assert!((out.coherence() - (-(0.4f64).powi(2)).exp()).abs() < 1e-12);
        assert!((out.overlap_with(Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)) - 0.5 * (1.0 + (-0.16f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn logical_frame_undoes_ideal_pulses() {
        let sched = PulseSchedule::hahn_echo(0.0, 13_000.0, 0.0).unwrap();
        let up = SpinDensity::<f64>::up();
        let physical = sched.evolve(&up, 0.0);
        assert!(close(&physical, &SpinDensity::down(), 1e-12));
        assert!(close(&sched.to_logical(&physical), &up, 1e-12));
    }

    #[test]
    fn single_precision_echo() {
        let sched = PulseSchedule::<f32>::hahn_echo(0.0, 13_000.0, 0.0).unwrap();
        let out = sched.evolve(&SpinDensity::equator(0.0), 1e-3);
        assert!((out.coherence() - 1.0).abs() < 1e-3);
    }
}
