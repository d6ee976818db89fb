//! Two-photon interference on a lossless 50:50 beam splitter and the heralding projection.
//!
//! Input A is the photonic qubit and input B the photon from the spin-photon pair. The beam
//! splitter maps `a_A → (d1 + d2)/√2` and `a_B → (d1 - d2)/√2`, so the amplitude for one click
//! at detector 1 at `t1` and one at detector 2 at `t2` is
//! `½[ψ_A(t2)ψ_B(t1) − ψ_A(t1)ψ_B(t2)]`.
//!
//! Imperfect mode overlap is a single scalar `M` weighting the interference term; the rest of
//! the pair is treated as fully distinguishable. Photon A can additionally be delayed.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qcore::StateVector;
use crate::source::{mode_overlap, Color, EntangledPairState, PhotonWavepacket, PhotonicQubit, TemporalMode};
use crate::spin::SpinDensity;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Parallel,
    Orthogonal,
}

/// How distinguishable the two photons are apart from their color and timing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistinguishabilityModel<T> {
    overlap: T,
    polarization: Polarization,
    delay: T,
}

impl<T: Real> DistinguishabilityModel<T> {
    pub fn new(overlap: T, polarization: Polarization, delay: T) -> Result<Self> {
        if !(overlap >= T::zero() && overlap <= T::one()) {
            return Err(invalid("overlap", format!("must lie in [0, 1], got {overlap}")));
        }
        if !delay.is_finite() {
            return Err(invalid("delay", "must be finite"));
        }
        Ok(Self { overlap, polarization, delay })
    }

    pub fn ideal() -> Self {
        Self { overlap: T::one(), polarization: Polarization::Parallel, delay: T::zero() }
    }

    pub fn overlap(&self) -> T {
        self.overlap
    }

    pub fn polarization(&self) -> Polarization {
        self.polarization
    }

    /// Delay applied to photon A.
    pub fn delay(&self) -> T {
        self.delay
    }

    /// Weight of the interference term: `M`, or 0 for orthogonal polarizations.
    pub fn interference_weight(&self) -> T {
        match self.polarization {
            Polarization::Parallel => self.overlap,
            Polarization::Orthogonal => T::zero(),
        }
    }
}

/// Coincidence acceptance window around zero delay, replicated every repetition period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceWindow<T> {
    pub lower: T,
    pub upper: T,
    pub period: T,
    pub periods: usize,
}

impl<T: Real> CoincidenceWindow<T> {
    pub fn new(lower: T, upper: T, period: T, periods: usize) -> Result<Self> {
        let w = Self { lower, upper, period, periods };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower < self.upper) {
            return Err(invalid("window", format!("lower {} must be below upper {}", self.lower, self.upper)));
        }
        if !(self.period > T::zero()) {
            return Err(invalid("period", format!("must be positive, got {}", self.period)));
        }
        if self.upper - self.lower > self.period {
            return Err(invalid("window", "wider than the repetition period"));
        }
        Ok(())
    }

    /// Window shifted to the `k`-th side peak.
    pub fn shifted(&self, k: i64) -> (T, T) {
        let s = self.period * T::from_i64(k).unwrap();
        (self.lower + s, self.upper + s)
    }

    pub fn contains(&self, k: i64, dt: T) -> bool {
        let (lo, hi) = self.shifted(k);
        dt >= lo && dt <= hi
    }
}

/// `⟨a|b⟩` for two normalized wavepackets.
pub fn packet_overlap<T: Real>(a: &PhotonWavepacket<T>, b: &PhotonWavepacket<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for (ca, ma) in a.components() {
        for (cb, mb) in b.components() {
            acc = acc + ca.conj() * *cb * mode_overlap(ma, mb);
        }
    }
    acc / (a.raw_norm() * b.raw_norm()).sqrt()
}

/// Joint detection density (1/ps²) for one click on each detector, per input pair.
pub fn coincidence_density<T: Real>(
    a: &PhotonWavepacket<T>,
    b: &PhotonWavepacket<T>,
    dist: &DistinguishabilityModel<T>,
    t1: T,
    t2: T,
) -> T {
    let d = dist.delay;
    let (a1, a2) = (a.amplitude(t1 - d), a.amplitude(t2 - d));
    let (b1, b2) = (b.amplitude(t1), b.amplitude(t2));
    let w = dist.interference_weight();
    let quarter = T::lit(0.25);
    let coherent = (a1 * b2 - a2 * b1).norm_sqr();
    let incoherent = (a1 * b2).norm_sqr() + (a2 * b1).norm_sqr();
    quarter * (w * coherent + (T::one() - w) * incoherent)
}

/// Total probability that the photons leave through different ports: `½(1 − w|⟨a|b⟩|²)`.
pub fn coincidence_probability<T: Real>(
    a: &PhotonWavepacket<T>,
    b: &PhotonWavepacket<T>,
    dist: &DistinguishabilityModel<T>,
) -> T {
    let o = packet_overlap(&a.delayed(dist.delay), b).norm_sqr().min(T::one());
    T::lit(0.5) * (T::one() - dist.interference_weight() * o)
}

/// A visibility estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility<T> {
    pub value: T,
    pub stderr: T,
}

/// `V = (C⊥ − C∥)/C⊥` with Poisson errors on both counts.
pub fn hom_visibility<T: Real>(c_parallel: T, c_orthogonal: T) -> Result<Visibility<T>> {
    if !(c_orthogonal > T::zero()) {
        return Err(Error::Domain(format!("orthogonal count must be positive, got {c_orthogonal}")));
    }
    if !(c_parallel >= T::zero()) {
        return Err(Error::Domain(format!("parallel count must be non-negative, got {c_parallel}")));
    }
    let r = c_parallel / c_orthogonal;
    // a zero count still carries the uncertainty of one
    let rel = T::one() / c_parallel.max(T::one()) + T::one() / c_orthogonal;
    Ok(Visibility { value: T::one() - r, stderr: r.max(T::one() / c_orthogonal) * rel.sqrt() })
}

/// Where the two photons went.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TwoPhotonClicks<T> {
    /// One photon at each detector.
    Split { t1: T, t2: T },
    /// Both photons at `detector` (1 or 2), in arbitrary order.
    Bunched { detector: u8, times: (T, T) },
}

/// Samples the output of two independent single photons.
///
/// Detection times are proposed from the product of the marginals with a random port
/// assignment, and the split outcome is accepted with probability `density / proposal ≤ 1`.
pub fn sample_two_photon<T: Real, R: Rng + ?Sized>(
    a: &PhotonWavepacket<T>,
    b: &PhotonWavepacket<T>,
    dist: &DistinguishabilityModel<T>,
    rng: &mut R,
) -> TwoPhotonClicks<T> {
    let ta = a.sample_time(rng) + dist.delay;
    let tb = b.sample_time(rng);
    let pa = |t: T| a.intensity(t - dist.delay);
    let pb = |t: T| b.intensity(t);
    let (t1, t2) = if rng.random::<bool>() { (ta, tb) } else { (tb, ta) };
    let proposal = T::lit(0.5) * (pa(t1) * pb(t2) + pa(t2) * pb(t1));
    split_or_bunch(coincidence_density(a, b, dist, t1, t2), proposal, t1, t2, rng)
}

fn split_or_bunch<T: Real, R: Rng + ?Sized>(density: T, proposal: T, t1: T, t2: T, rng: &mut R) -> TwoPhotonClicks<T> {
    let accept = if proposal > T::zero() { density / proposal } else { T::zero() };
    if T::lit(rng.random::<f64>()) < accept {
        TwoPhotonClicks::Split { t1, t2 }
    } else {
        let detector = if rng.random::<bool>() { 1 } else { 2 };
        TwoPhotonClicks::Bunched { detector, times: (t1, t2) }
    }
}

/// The three-party state (spin, photon A color, photon B color) entering the beam splitter,
/// together with the temporal modes of each color.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState<T> {
    joint: StateVector<T>,
    packet_a: PhotonWavepacket<T>,
    modes_a: [TemporalMode<T>; 2],
    scale_a: T,
    modes_b: [TemporalMode<T>; 2],
    envelope_b: TemporalMode<T>,
}

/// Assembles `|ψ_p⟩_A ⊗ |Ψ⟩_{spin,B}` in (spin, A, B) order.
pub fn assemble_input_state<T: Real>(
    qubit: &PhotonicQubit<T>,
    pair: &EntangledPairState<T>,
) -> Result<TwoPhotonState<T>> {
    if pair.has_polarization() {
        return Err(Error::InvalidState("erase the pair polarization before interfering".into()));
    }
    let joint = pair.joint().tensor(&qubit.state()).permute(&[0, 2, 1])?;
    Ok(TwoPhotonState {
        joint,
        packet_a: qubit.wavepacket().clone(),
        modes_a: Color::ALL.map(|c| qubit.color_mode(c)),
        scale_a: T::one() / qubit.wavepacket().raw_norm().sqrt(),
        modes_b: Color::ALL.map(|c| pair.color_mode(c)),
        envelope_b: *pair.mode(),
    })
}

impl<T: Real> TwoPhotonState<T> {
    pub fn joint(&self) -> &StateVector<T> {
        &self.joint
    }

    pub fn packet_a(&self) -> &PhotonWavepacket<T> {
        &self.packet_a
    }

    pub fn envelope_b(&self) -> &TemporalMode<T> {
        &self.envelope_b
    }

    /// Detection density of photon A alone.
    pub fn intensity_a(&self, t: T) -> T {
        self.packet_a.intensity(t)
    }

    /// Detection density of photon B alone (the same for both colors).
    pub fn intensity_b(&self, t: T) -> T {
        self.envelope_b.intensity(t)
    }

    pub fn support(&self) -> (T, T) {
        let (a0, a1) = self.packet_a.support();
        let (b0, b1) = self.envelope_b.support();
        (a0.min(b0), a1.max(b1))
    }

    /// Color-resolved amplitudes `[ω_b, ω_r]` of photon A at `t`, normalized as a wavepacket.
    #[inline]
    pub fn amplitudes_a(&self, t: T) -> [Complex<T>; 2] {
        [self.modes_a[0].amplitude(t) * self.scale_a, self.modes_a[1].amplitude(t) * self.scale_a]
    }

    /// Color-resolved amplitudes `[ω_b, ω_r]` of photon B at `t`.
    #[inline]
    pub fn amplitudes_b(&self, t: T) -> [Complex<T>; 2] {
        [self.modes_b[0].amplitude(t), self.modes_b[1].amplitude(t)]
    }

    /// Contracts the joint state with color amplitudes of A and B into spin amplitudes `[↑, ↓]`.
    #[inline]
    pub fn contract(&self, fa: &[Complex<T>; 2], fb: &[Complex<T>; 2]) -> [Complex<T>; 2] {
        let amps = self.joint.amplitudes();
        let mut out = [Complex::new(T::zero(), T::zero()); 2];
        for (s, o) in out.iter_mut().enumerate() {
            for (ca, a) in fa.iter().enumerate() {
                for (cb, b) in fb.iter().enumerate() {
                    *o = *o + amps[4 * s + 2 * ca + cb] * *a * *b;
                }
            }
        }
        out
    }

    /// Unnormalized spin amplitudes `[↑, ↓]` for photon A at `ta` and photon B at `tb`.
    #[inline]
    pub fn spin_amplitudes(&self, ta: T, tb: T) -> [Complex<T>; 2] {
        self.contract(&self.amplitudes_a(ta), &self.amplitudes_b(tb))
    }

    /// The two which-path spin terms for a (detector 1 at `t1`, detector 2 at `t2`) click pair:
    /// photon A at detector 1, and photon A at detector 2.
    #[inline]
    pub fn herald_terms(&self, dist: &DistinguishabilityModel<T>, t1: T, t2: T) -> ([Complex<T>; 2], [Complex<T>; 2]) {
        let d = dist.delay;
        herald_terms_from(self.spin_amplitudes(t1 - d, t2), self.spin_amplitudes(t2 - d, t1))
    }

    /// Unnormalized heralded spin matrix `[ρ↑↑, ρ↑↓, ρ↓↑, ρ↓↓]`; its trace is the herald density.
    #[inline]
    pub fn herald_matrix(&self, dist: &DistinguishabilityModel<T>, t1: T, t2: T) -> [Complex<T>; 4] {
        let (p, q) = self.herald_terms(dist, t1, t2);
        herald_matrix_from(&p, &q, dist.interference_weight())
    }

    /// Samples the beam-splitter output; see [`sample_two_photon`].
    pub fn sample_clicks<R: Rng + ?Sized>(&self, dist: &DistinguishabilityModel<T>, rng: &mut R) -> TwoPhotonClicks<T> {
        let ta = self.packet_a.sample_time(rng) + dist.delay;
        let tb = self.envelope_b.sample_time(rng);
        let (t1, t2) = if rng.random::<bool>() { (ta, tb) } else { (tb, ta) };
        let pa = |t: T| self.intensity_a(t - dist.delay);
        let proposal = T::lit(0.5) * (pa(t1) * self.intensity_b(t2) + pa(t2) * self.intensity_b(t1));
        let m = self.herald_matrix(dist, t1, t2);
        split_or_bunch(m[0].re + m[3].re, proposal, t1, t2, rng)
    }
}

/// Beam-splitter signs applied to the two which-path amplitudes: `A@1, B@2` and `A@2, B@1`.
#[inline]
pub fn herald_terms_from<T: Real>(a_at_1: [Complex<T>; 2], a_at_2: [Complex<T>; 2]) -> ([Complex<T>; 2], [Complex<T>; 2]) {
    let half = T::lit(0.5);
    ([a_at_1[0] * (-half), a_at_1[1] * (-half)], [a_at_2[0] * half, a_at_2[1] * half])
}

/// `w|p+q⟩⟨p+q| + (1−w)(|p⟩⟨p| + |q⟩⟨q|)`.
#[inline]
pub fn herald_matrix_from<T: Real>(p: &[Complex<T>; 2], q: &[Complex<T>; 2], w: T) -> [Complex<T>; 4] {
    let sum = [p[0] + q[0], p[1] + q[1]];
    let outer = |v: &[Complex<T>; 2], i: usize, j: usize| v[i] * v[j].conj();
    let mut m = [Complex::new(T::zero(), T::zero()); 4];
    for i in 0..2 {
        for j in 0..2 {
            m[2 * i + j] = outer(&sum, i, j) * w + (outer(p, i, j) + outer(q, i, j)) * (T::one() - w);
        }
    }
    m
}

/// A heralding coincidence and the spin state it leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldOutcome<T> {
    pub t1: T,
    pub t2: T,
    /// `None` where the herald density vanishes.
    pub spin: Option<SpinDensity<T>>,
    /// Coincidence density (1/ps²).
    pub density: T,
}

pub fn herald_spin_state<T: Real>(
    state: &TwoPhotonState<T>,
    dist: &DistinguishabilityModel<T>,
    t1: T,
    t2: T,
) -> HeraldOutcome<T> {
    let m = state.herald_matrix(dist, t1, t2);
    let density = m[0].re + m[3].re;
    let spin = if density > T::min_positive_value() { SpinDensity::from_unnormalized(m) } else { None };
    HeraldOutcome { t1, t2, spin, density }
}

/// Spin state `α|↓⟩ + β|↑⟩` that a perfect run teleports, as `(↑, ↓)` amplitudes.
pub fn teleport_target<T: Real>(qubit: &PhotonicQubit<T>) -> (Complex<T>, Complex<T>) {
    (qubit.beta(), qubit.alpha())
}
