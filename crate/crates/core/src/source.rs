//! Photon sources: the neutral-exciton dot emitting a two-color photonic qubit, and the
//! charged dot whose trion decay leaves its electron spin entangled with the photon color.
//!
//! Times are in ps and frequencies are angular, in rad/ps. A temporal mode is
//! `ξ(t) = √Γ · exp(-Γ(t - t0)/2) · exp(-i·carrier·t)` for `t ≥ t0` and zero before. The blue
//! component of a two-color photon sits at `carrier + Δ/2`, the red one at `carrier - Δ/2`.
//!
//! Polarization analyzers are described by the Jones vector `(h, v)` of the transmitted
//! polarization. Transmission projects with the conjugate vector, so the `H - iV` analyzer is
//! `(1, -i)/√2` and maps the trion state `(|↓⟩|ω_r,H⟩ + i|↑⟩|ω_b,V⟩)/√2` onto
//! `(|↓⟩|ω_r⟩ - |↑⟩|ω_b⟩)/√2` with probability 1/2.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qcore::StateVector;
use crate::{quad, Real};

/// Number of lifetimes after which a mode is treated as fully decayed (e⁻⁴⁰).
pub const SUPPORT_LIFETIMES: f64 = 40.0;

/// Photon color. Index order matches the color subsystem basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Blue = 0,
    Red = 1,
}

impl Color {
    pub const ALL: [Color; 2] = [Color::Blue, Color::Red];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Carrier offset of this color relative to the center of a pair split by `delta`.
    pub fn carrier_offset<T: Real>(self, delta: T) -> T {
        let half = delta * T::lit(0.5);
        match self {
            Color::Blue => half,
            Color::Red => -half,
        }
    }
}

/// Truncated-exponential single-photon temporal envelope with a carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalMode<T> {
    t0: T,
    gamma: T,
    carrier: T,
}

impl<T: Real> TemporalMode<T> {
    pub fn exponential(t0: T, lifetime: T, carrier: T) -> Result<Self> {
        if !(lifetime > T::zero()) || !lifetime.is_finite() {
            return Err(invalid("lifetime", format!("must be positive and finite, got {lifetime}")));
        }
        if !t0.is_finite() || !carrier.is_finite() {
            return Err(invalid("t0/carrier", "must be finite"));
        }
        Ok(Self { t0, gamma: T::one() / lifetime, carrier })
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn lifetime(&self) -> T {
        T::one() / self.gamma
    }

    pub fn carrier(&self) -> T {
        self.carrier
    }

    pub fn with_carrier(&self, carrier: T) -> Self {
        Self { carrier, ..*self }
    }

    /// Envelope shifted by `delay`; the carrier phase stays referenced to `t = 0`.
    pub fn delayed(&self, delay: T) -> Self {
        Self { t0: self.t0 + delay, ..*self }
    }

    /// Real envelope `|ξ(t)|`.
    #[inline]
    pub fn envelope(&self, t: T) -> T {
        if t < self.t0 {
            return T::zero();
        }
        self.gamma.sqrt() * (-(self.gamma * (t - self.t0)) * T::lit(0.5)).exp()
    }

    #[inline]
    pub fn amplitude(&self, t: T) -> Complex<T> {
        let env = self.envelope(t);
        if env == T::zero() {
            return Complex::new(T::zero(), T::zero());
        }
        Complex::from_polar(env, -self.carrier * t)
    }

    #[inline]
    pub fn intensity(&self, t: T) -> T {
        let e = self.envelope(t);
        e * e
    }

    /// Interval outside of which the mode carries less than e⁻⁴⁰ of its weight.
    pub fn support(&self) -> (T, T) {
        (self.t0, self.t0 + T::lit(SUPPORT_LIFETIMES) * self.lifetime())
    }

    /// ∫|ξ|² by quadrature over the support.
    pub fn norm_sqr(&self) -> T {
        let (a, b) = self.support();
        quad::integrate(|t| Complex::new(self.intensity(t), T::zero()), a, b, T::tol(1e-13), 64).re
    }

    /// Draws an emission (detection) time from `|ξ(t)|²`.
    pub fn sample_time<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u: f64 = rng.random();
        self.t0 - self.lifetime() * T::lit((1.0 - u).ln())
    }
}

pub fn make_exponential_mode<T: Real>(t0: T, lifetime: T, carrier: T) -> Result<TemporalMode<T>> {
    TemporalMode::exponential(t0, lifetime, carrier)
}

/// ⟨a|b⟩ = ∫ ξ_a*(t) ξ_b(t) dt by adaptive quadrature.
pub fn mode_overlap<T: Real>(a: &TemporalMode<T>, b: &TemporalMode<T>) -> Complex<T> {
    let start = a.t0.max(b.t0);
    let end = a.support().1.max(b.support().1);
    if end <= start {
        return Complex::new(T::zero(), T::zero());
    }
    let beat = (a.carrier - b.carrier).abs();
    let cycles = (beat * (end - start) / T::TAU()).to_f64_lossy();
    let pieces = ((cycles * 2.0) as usize).clamp(32, 8192);
    quad::integrate(|t| a.amplitude(t).conj() * b.amplitude(t), start, end, T::tol(1e-13), pieces)
}

/// Normalized single-photon wavefunction built as a superposition of temporal modes.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonWavepacket<T> {
    components: Vec<(Complex<T>, TemporalMode<T>)>,
    norm: T,
}

impl<T: Real> PhotonWavepacket<T> {
    /// Normalizes `Σ c_k ξ_k` using the (non-orthogonal) Gram matrix of the modes.
    pub fn new(components: Vec<(Complex<T>, TemporalMode<T>)>) -> Result<Self> {
        let mut norm = T::zero();
        for (ci, mi) in &components {
            for (cj, mj) in &components {
                let g = if mi == mj { Complex::new(T::one(), T::zero()) } else { mode_overlap(mi, mj) };
                norm = norm + (ci.conj() * *cj * g).re;
            }
        }
        if !(norm > T::tol(1e-14)) {
            return Err(Error::InvalidState("wavepacket has zero norm".into()));
        }
        Ok(Self { components, norm })
    }

    pub fn single(mode: TemporalMode<T>) -> Self {
        Self { components: vec![(Complex::new(T::one(), T::zero()), mode)], norm: T::one() }
    }

    pub fn components(&self) -> &[(Complex<T>, TemporalMode<T>)] {
        &self.components
    }

    /// ∫|Σ c_k ξ_k|² before normalization.
    pub fn raw_norm(&self) -> T {
        self.norm
    }

    /// The packet `ψ(t − delay)`, carrier phases included.
    pub fn delayed(&self, delay: T) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|(c, m)| (*c * Complex::from_polar(T::one(), m.carrier() * delay), m.delayed(delay)))
                .collect(),
            norm: self.norm,
        }
    }

    #[inline]
    pub fn amplitude(&self, t: T) -> Complex<T> {
        let s = self
            .components
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, (c, m)| acc + *c * m.amplitude(t));
        s / self.norm.sqrt()
    }

    #[inline]
    pub fn intensity(&self, t: T) -> T {
        self.amplitude(t).norm_sqr()
    }

    pub fn support(&self) -> (T, T) {
        self.components.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), (_, m)| {
            let (a, b) = m.support();
            (lo.min(a), hi.max(b))
        })
    }

    /// Draws a detection time from `|ψ(t)|²` by rejection from the component mixture.
    pub fn sample_time<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        if self.components.len() == 1 {
            return self.components[0].1.sample_time(rng);
        }
        let weights: Vec<T> = self.components.iter().map(|(c, _)| c.norm()).collect();
        let total: T = weights.iter().copied().sum();
        loop {
            let mut pick = T::lit(rng.random::<f64>()) * total;
            let mut chosen = self.components.len() - 1;
            for (k, w) in weights.iter().enumerate() {
                if pick < *w {
                    chosen = k;
                    break;
                }
                pick = pick - *w;
            }
            let t = self.components[chosen].1.sample_time(rng);
            let q: T = self.components.iter().zip(&weights).map(|((_, m), w)| *w * m.intensity(t)).sum();
            if q <= T::zero() {
                continue;
            }
            let accept = self.intensity(t) * self.norm / (total * q);
            if T::lit(rng.random::<f64>()) < accept {
                return t;
            }
        }
    }
}

/// Photon in the superposition `α|ω_b⟩ + β|ω_r⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonicQubit<T> {
    alpha: Complex<T>,
    beta: Complex<T>,
    delta: T,
    mode: TemporalMode<T>,
    packet: PhotonWavepacket<T>,
}

impl<T: Real> PhotonicQubit<T> {
    /// Normalizes `(alpha, beta)`; `mode` is the common envelope at the center carrier.
    pub fn new(alpha: Complex<T>, beta: Complex<T>, delta: T, mode: TemporalMode<T>) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(invalid("amplitudes", "drive amplitudes must not both be zero"));
        }
        let (alpha, beta) = (alpha / n, beta / n);
        let blue = mode.with_carrier(mode.carrier() + Color::Blue.carrier_offset(delta));
        let red = mode.with_carrier(mode.carrier() + Color::Red.carrier_offset(delta));
        let mut components = Vec::with_capacity(2);
        if alpha.norm_sqr() > T::zero() {
            components.push((alpha, blue));
        }
        if beta.norm_sqr() > T::zero() {
            components.push((beta, red));
        }
        let packet = PhotonWavepacket::new(components)?;
        Ok(Self { alpha, beta, delta, mode, packet })
    }

    pub fn alpha(&self) -> Complex<T> {
        self.alpha
    }

    pub fn beta(&self) -> Complex<T> {
        self.beta
    }

    /// Amplitude on a color basis state.
    pub fn amplitude_of(&self, color: Color) -> Complex<T> {
        match color {
            Color::Blue => self.alpha,
            Color::Red => self.beta,
        }
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn mode(&self) -> &TemporalMode<T> {
        &self.mode
    }

    pub fn color_mode(&self, color: Color) -> TemporalMode<T> {
        self.mode.with_carrier(self.mode.carrier() + color.carrier_offset(self.delta))
    }

    pub fn wavepacket(&self) -> &PhotonWavepacket<T> {
        &self.packet
    }

    /// Color-space state vector `(α, β)`.
    pub fn state(&self) -> StateVector<T> {
        StateVector::new(vec![self.alpha, self.beta], vec![2]).expect("two amplitudes")
    }
}

/// Photodetection density `|α ξ_b(t) + β ξ_r(t)|²` of the normalized two-color photon.
///
/// The truncated envelopes make `ξ_b` and `ξ_r` slightly non-orthogonal, so the density is
/// divided by the wavepacket norm and integrates to one for every `(α, β)`.
pub fn beat_intensity<T: Real>(q: &PhotonicQubit<T>, t: T) -> T {
    q.packet.intensity(t)
}

/// Polarization analyzer, given by the Jones vector of the transmitted polarization in (H, V).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Analyzer<T> {
    jones: [Complex<T>; 2],
}

impl<T: Real> Analyzer<T> {
    pub fn from_jones(h: Complex<T>, v: Complex<T>) -> Result<Self> {
        let n = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if !(n > T::zero()) {
            return Err(invalid("analyzer", "zero Jones vector"));
        }
        Ok(Self { jones: [h / n, v / n] })
    }

    pub fn horizontal() -> Self {
        Self::from_jones(Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero())).unwrap()
    }

    pub fn vertical() -> Self {
        Self::from_jones(Complex::new(T::zero(), T::zero()), Complex::new(T::one(), T::zero())).unwrap()
    }

    /// Transmits `H - iV`.
    pub fn h_minus_iv() -> Self {
        Self::from_jones(Complex::new(T::one(), T::zero()), Complex::new(T::zero(), -T::one())).unwrap()
    }

    /// Transmits `H + iV`.
    pub fn h_plus_iv() -> Self {
        Self::from_jones(Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::one())).unwrap()
    }

    pub fn jones(&self) -> [Complex<T>; 2] {
        self.jones
    }

    /// The analyzer transmitting the orthogonal polarization.
    pub fn orthogonal(&self) -> Self {
        let [h, v] = self.jones;
        Self { jones: [-v.conj(), h.conj()] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig<T> {
    pub lifetime: T,
    /// Color splitting Δ = ω_b − ω_r.
    pub delta: T,
    /// Probability that the entanglement pulse excites the trion.
    pub p_exc: T,
    pub analyzer: Analyzer<T>,
    /// Emission start (pulse rise) time.
    pub t0: T,
}

impl<T: Real> SourceConfig<T> {
    pub fn new(lifetime: T, delta: T, p_exc: T) -> Result<Self> {
        let cfg = Self { lifetime, delta, p_exc, analyzer: Analyzer::h_minus_iv(), t0: T::zero() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lifetime > T::zero()) {
            return Err(invalid("lifetime", format!("must be positive, got {}", self.lifetime)));
        }
        if !(self.p_exc >= T::zero() && self.p_exc <= T::one()) {
            return Err(invalid("p_exc", format!("must lie in [0, 1], got {}", self.p_exc)));
        }
        if !self.delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        Ok(())
    }

    pub fn envelope(&self) -> Result<TemporalMode<T>> {
        TemporalMode::exponential(self.t0, self.lifetime, T::zero())
    }
}

pub fn generate_photonic_qubit<T: Real>(
    cfg: &SourceConfig<T>,
    amplitudes: (Complex<T>, Complex<T>),
) -> Result<PhotonicQubit<T>> {
    cfg.validate()?;
    PhotonicQubit::new(amplitudes.0, amplitudes.1, cfg.delta, cfg.envelope()?)
}

/// Spin ⊗ photon-B state left by trion decay.
///
/// `joint` has subsystems (spin, color, polarization) before erasure and (spin, color) after.
#[derive(Debug, Clone, PartialEq)]
pub struct EntangledPairState<T> {
    joint: StateVector<T>,
    mode: TemporalMode<T>,
    zeeman: T,
}

impl<T: Real> EntangledPairState<T> {
    pub fn new(joint: StateVector<T>, mode: TemporalMode<T>, zeeman: T) -> Result<Self> {
        match joint.dims() {
            [2, 2] | [2, 2, 2] => {}
            d => return Err(Error::DimensionMismatch(format!("pair state dims {d:?}"))),
        }
        if !joint.is_normalized() {
            return Err(Error::InvalidState("pair state not normalized".into()));
        }
        Ok(Self { joint, mode, zeeman })
    }

    pub fn joint(&self) -> &StateVector<T> {
        &self.joint
    }

    pub fn mode(&self) -> &TemporalMode<T> {
        &self.mode
    }

    pub fn zeeman(&self) -> T {
        self.zeeman
    }

    pub fn has_polarization(&self) -> bool {
        self.joint.dims().len() == 3
    }

    pub fn color_mode(&self, color: Color) -> TemporalMode<T> {
        self.mode.with_carrier(self.mode.carrier() + color.carrier_offset(self.zeeman))
    }

    /// Schmidt coefficients across the spin | photon cut.
    pub fn schmidt_coefficients(&self) -> Vec<T> {
        self.joint.schmidt_coefficients(1).expect("pair state has a spin factor")
    }

    /// Entanglement entropy of the spin, in bits.
    pub fn entanglement_entropy_bits(&self) -> T {
        self.joint.to_density().partial_trace(&[0]).expect("spin subsystem").entropy_bits()
    }

    /// Unnormalized spin amplitudes `[↑, ↓]` given the (erased) photon is detected at `t`.
    pub fn spin_given_detection(&self, t: T) -> Result<[Complex<T>; 2]> {
        if self.has_polarization() {
            return Err(Error::InvalidState("erase the polarization before conditioning on a click".into()));
        }
        let a = self.joint.amplitudes();
        let phi = [self.color_mode(Color::Blue).amplitude(t), self.color_mode(Color::Red).amplitude(t)];
        Ok([a[0] * phi[0] + a[1] * phi[1], a[2] * phi[0] + a[3] * phi[1]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairEmission<T> {
    Emitted(EntangledPairState<T>),
    /// The trion was not excited; the spin stays in its initialized state.
    NoEmission,
}

/// The polarization-resolved trion decay state `(|↓⟩|ω_r,H⟩ + i|↑⟩|ω_b,V⟩)/√2`.
pub fn trion_decay_state<T: Real>() -> StateVector<T> {
    let s = T::FRAC_1_SQRT_2();
    let mut amps = vec![Complex::new(T::zero(), T::zero()); 8];
    // index = spin*4 + color*2 + pol; ↑ = 0, ↓ = 1, ω_b = 0, ω_r = 1, H = 0, V = 1
    amps[4 + 2] = Complex::new(s, T::zero());
    amps[1] = Complex::new(T::zero(), s);
    StateVector::new(amps, vec![2, 2, 2]).expect("8 amplitudes")
}

pub fn generate_spin_photon_pair<T: Real, R: Rng + ?Sized>(
    cfg: &SourceConfig<T>,
    rng: &mut R,
) -> Result<PairEmission<T>> {
    cfg.validate()?;
    let emitted = if cfg.p_exc >= T::one() {
        true
    } else if cfg.p_exc <= T::zero() {
        false
    } else {
        T::lit(rng.random::<f64>()) < cfg.p_exc
    };
    if !emitted {
        return Ok(PairEmission::NoEmission);
    }
    Ok(PairEmission::Emitted(EntangledPairState::new(trion_decay_state(), cfg.envelope()?, cfg.delta)?))
}

/// Projects the photon polarization on the analyzer and drops the polarization subsystem.
pub fn erase_polarization<T: Real>(
    pair: &EntangledPairState<T>,
    axis: &Analyzer<T>,
) -> Result<(EntangledPairState<T>, T)> {
    if !pair.has_polarization() {
        return Err(Error::InvalidState("polarization already erased".into()));
    }
    let a = pair.joint.amplitudes();
    let [h, v] = axis.jones;
    let projected: Vec<Complex<T>> = (0..4).map(|sc| h.conj() * a[2 * sc] + v.conj() * a[2 * sc + 1]).collect();
    let pass: T = projected.iter().map(|z| z.norm_sqr()).sum();
    if !(pass > T::tol(1e-15)) {
        return Err(Error::InvalidState("analyzer blocks the photon entirely".into()));
    }
    let joint = StateVector::from_unnormalized(projected, vec![2, 2])?;
    Ok((EntangledPairState { joint, mode: pair.mode, zeeman: pair.zeeman }, pass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cplx(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn exponential_mode_decay_and_normalization() {
        let m = make_exponential_mode(0.0, 650.0, 0.0).unwrap();
        assert!(((m.intensity(650.0) / m.intensity(0.0)) - (-1.0f64).exp()).abs() < 1e-14);
        assert!((m.norm_sqr() - 1.0).abs() < 1e-9);
        let ten = quad::integrate(|t| cplx(m.intensity(t), 0.0), 0.0, 6500.0, 1e-13, 64).re;
        assert!((ten - 1.0).abs() < 1e-4);
        assert_eq!(m.amplitude(-1.0), cplx(0.0, 0.0));
    }

    #[test]
    fn nonpositive_lifetime_rejected() {
        assert!(make_exponential_mode(0.0, 0.0, 0.0).is_err());
        assert!(make_exponential_mode(0.0, -5.0, 0.0).is_err());
    }

    #[test]
    fn identical_modes_are_identical_pointwise() {
        let a = make_exponential_mode(10.0, 650.0, 0.1).unwrap();
        let b = make_exponential_mode(10.0, 650.0, 0.1).unwrap();
        for t in [0.0, 10.0, 100.0, 1234.5] {
            assert_eq!(a.amplitude(t), b.amplitude(t));
        }
        assert!((mode_overlap(&a, &b) - cplx(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn drive_normalization() {
        let cfg = SourceConfig::new(650.0, 0.03, 1.0).unwrap();
        let q = generate_photonic_qubit(&cfg, (cplx(1.0, 0.0), cplx(0.0, 0.0))).unwrap();
        assert_eq!(q.alpha(), cplx(1.0, 0.0));
        let q = generate_photonic_qubit(&cfg, (cplx(1.0, 0.0), cplx(1.0, 0.0))).unwrap();
        assert!((q.alpha().re - 0.5f64.sqrt()).abs() < 1e-15 && (q.beta().re - 0.5f64.sqrt()).abs() < 1e-15);
        let q = generate_photonic_qubit(&cfg, (cplx(1.0, 0.0), cplx(-1.0, 0.0))).unwrap();
        assert!((q.alpha() + q.beta()).norm() < 1e-15);
        assert!(generate_photonic_qubit(&cfg, (cplx(0.0, 0.0), cplx(0.0, 0.0))).is_err());
    }

    #[test]
    fn single_color_has_no_beats() {
        let cfg = SourceConfig::new(650.0, 0.0217, 1.0).unwrap();
        let q = generate_photonic_qubit(&cfg, (cplx(1.0, 0.0), cplx(0.0, 0.0))).unwrap();
        for t in [0.0, 77.0, 145.0, 290.0, 1000.0] {
            assert!((beat_intensity(&q, t) - q.mode().intensity(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn full_contrast_beats_vanish_at_cos_minus_one() {
        let delta = std::f64::consts::TAU * 3.45e-3;
        let cfg = SourceConfig::new(650.0, delta, 1.0).unwrap();
        let q = generate_photonic_qubit(&cfg, (cplx(1.0, 0.0), cplx(1.0, 0.0))).unwrap();
        // |α e^{-iΔt/2} + β e^{iΔt/2}|² ∝ 1 + cos Δt, zero at Δt = π
        let t_zero = std::f64::consts::PI / delta;
        assert!(beat_intensity(&q, t_zero) < 1e-20);
        assert!(beat_intensity(&q, 2.0 * t_zero) > 1e-4);
    }

    #[test]
    fn pair_generation_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cfg = SourceConfig::new(650.0, 0.03, 1.0).unwrap();
        let PairEmission::Emitted(pair) = generate_spin_photon_pair(&cfg, &mut rng).unwrap() else {
            panic!("p_exc = 1 must emit")
        };
        let s = 0.5f64.sqrt();
        let a = pair.joint().amplitudes();
        assert_eq!(a[6], cplx(s, 0.0));
        assert_eq!(a[1], cplx(0.0, s));
        assert_eq!(a.iter().filter(|z| z.norm() > 0.0).count(), 2);
        cfg.p_exc = 0.0;
        for _ in 0..100 {
            assert_eq!(generate_spin_photon_pair(&cfg, &mut rng).unwrap(), PairEmission::NoEmission);
        }
    }

    #[test]
    fn erasure_axes() {
        let cfg = SourceConfig::<f64>::new(650.0, 0.03, 1.0).unwrap();
        let pair = EntangledPairState::new(trion_decay_state(), cfg.envelope().unwrap(), cfg.delta).unwrap();
        let s = 0.5f64.sqrt();

        let (minus, p) = erase_polarization(&pair, &Analyzer::h_minus_iv()).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        // (spin, color): ↓ω_r = index 3, ↑ω_b = index 0
        let want = [cplx(-s, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(s, 0.0)];
        for (g, w) in minus.joint().amplitudes().iter().zip(want) {
            assert!((g - w).norm() < 1e-15, "{g} vs {w}");
        }

        let (plus, _) = erase_polarization(&pair, &Analyzer::h_plus_iv()).unwrap();
        let want = [cplx(s, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(s, 0.0)];
        for (g, w) in plus.joint().amplitudes().iter().zip(want) {
            assert!((g - w).norm() < 1e-15);
        }

        let (h, ph) = erase_polarization(&pair, &Analyzer::horizontal()).unwrap();
        assert!((ph - 0.5).abs() < 1e-15);
        assert!((h.joint().amplitudes()[3] - cplx(1.0, 0.0)).norm() < 1e-15);

        assert!(erase_polarization(&minus, &Analyzer::h_minus_iv()).is_err());
    }

    #[test]
    fn maximal_entanglement_before_and_after_erasure() {
        let cfg = SourceConfig::new(650.0, 0.03, 1.0).unwrap();
        let pair = EntangledPairState::new(trion_decay_state(), cfg.envelope().unwrap(), cfg.delta).unwrap();
        for k in pair.schmidt_coefficients() {
            assert!((k - 0.5f64.sqrt()).abs() < 1e-9);
        }
        let (erased, _) = erase_polarization(&pair, &Analyzer::h_minus_iv()).unwrap();
        assert!((erased.entanglement_entropy_bits() - 1.0).abs() < 1e-12);
    }
}
