//! Detection events and coincidence statistics.
//!
//! A tag is one detector click. Timestamps are absolute, in ps, with trial `n` starting at
//! `n · T0`. Histograms hold `f64` counts so that expected (analytic) and sampled counts share
//! one representation; sampled counts are always whole numbers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interference::CoincidenceWindow;

/// Version tag written into every histogram sidecar.
pub const HISTOGRAM_SCHEMA_ID: &str = "qdtele.histogram.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    D1,
    D2,
}

/// What a click belongs to. Readout clicks carry the measurement outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Herald,
    ReadoutUp,
    ReadoutDown,
}

impl Detector {
    pub fn as_str(self) -> &'static str {
        match self {
            Detector::D1 => "d1",
            Detector::D2 => "d2",
        }
    }
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Herald => "herald",
            Channel::ReadoutUp => "readout_up",
            Channel::ReadoutDown => "readout_down",
        }
    }
}

impl FromStr for Detector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d1" => Ok(Detector::D1),
            "d2" => Ok(Detector::D2),
            _ => Err(Error::Parse(format!("unknown detector `{s}`"))),
        }
    }
}

impl FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "herald" => Ok(Channel::Herald),
            "readout_up" => Ok(Channel::ReadoutUp),
            "readout_down" => Ok(Channel::ReadoutDown),
            _ => Err(Error::Parse(format!("unknown channel `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagRecord {
    pub detector: Detector,
    pub timestamp: f64,
    pub trial: u64,
    pub channel: Channel,
}

impl TagRecord {
    pub fn new(detector: Detector, timestamp: f64, trial: u64, channel: Channel) -> Result<Self> {
        if !timestamp.is_finite() {
            return Err(invalid("timestamp", "must be finite"));
        }
        Ok(Self { detector, timestamp, trial, channel })
    }
}

fn sort_tags(tags: &mut [TagRecord]) {
    tags.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then(a.trial.cmp(&b.trial))
            .then(a.detector.cmp(&b.detector))
            .then(a.channel.cmp(&b.channel))
    });
}

/// Shifts every timestamp by an independent Gaussian of std `sigma`, then re-sorts.
///
/// Shifts are drawn in input order from `rng`.
pub fn apply_jitter<R: Rng + ?Sized>(tags: &[TagRecord], sigma: f64, rng: &mut R) -> Result<Vec<TagRecord>> {
    if !(sigma >= 0.0) {
        return Err(invalid("sigma", format!("must be non-negative, got {sigma}")));
    }
    let mut out = tags.to_vec();
    if sigma > 0.0 {
        for t in &mut out {
            let z: f64 = StandardNormal.sample(rng);
            t.timestamp += sigma * z;
        }
    }
    sort_tags(&mut out);
    Ok(out)
}

/// Poissonian dark clicks at `rate` (1/ps) on one detector over `[start, end)` of a trial.
pub fn dark_counts<R: Rng + ?Sized>(
    rate: f64,
    start: f64,
    end: f64,
    detector: Detector,
    trial: u64,
    channel: Channel,
    rng: &mut R,
) -> Vec<TagRecord> {
    let mut out = Vec::new();
    if !(rate > 0.0) || !(end > start) {
        return out;
    }
    let gap = Exp::new(rate).expect("positive rate");
    let mut t = start + gap.sample(rng);
    while t < end {
        out.push(TagRecord { detector, timestamp: t, trial, channel });
        t += gap.sample(rng);
    }
    out
}

/// Counts in uniform bins over `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    edges: Vec<f64>,
    counts: Vec<f64>,
    window: (f64, f64),
    period: i64,
}

impl CoincidenceHistogram {
    /// Bins of width `bin` covering `[start, end)`; the last bin is truncated at `end`.
    pub fn new(start: f64, end: f64, bin: f64, period: i64) -> Result<Self> {
        if !(bin > 0.0) || !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(invalid("histogram", format!("need start < end and bin > 0, got [{start}, {end}) / {bin}")));
        }
        let n = ((end - start) / bin - 1e-9).ceil().max(1.0) as usize;
        let mut edges: Vec<f64> = (0..=n).map(|i| start + bin * i as f64).collect();
        edges[n] = end;
        Ok(Self { counts: vec![0.0; n], edges, window: (start, end), period })
    }

    pub fn from_parts(edges: Vec<f64>, counts: Vec<f64>, period: i64) -> Result<Self> {
        if edges.len() != counts.len() + 1 || counts.is_empty() {
            return Err(Error::DimensionMismatch(format!("{} edges for {} bins", edges.len(), counts.len())));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("edges", "must be strictly increasing"));
        }
        if counts.iter().any(|c| !(*c >= 0.0)) {
            return Err(invalid("counts", "must be non-negative"));
        }
        let window = (edges[0], *edges.last().unwrap());
        Ok(Self { edges, counts, window, period })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn period(&self) -> i64 {
        self.period
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin_index(&self, x: f64) -> Option<usize> {
        if !(x >= self.window.0 && x < self.window.1) {
            return None;
        }
        let i = self.edges.partition_point(|e| *e <= x);
        Some(i.saturating_sub(1).min(self.counts.len() - 1))
    }

    /// Adds `weight` to the bin containing `x`; returns false when `x` is out of range.
    pub fn add(&mut self, x: f64, weight: f64) -> bool {
        match self.bin_index(x) {
            Some(i) => {
                self.counts[i] += weight;
                true
            }
            None => false,
        }
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Sum of counts in bins whose centers fall in `[lo, hi]`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.bin_centers().iter().zip(&self.counts).filter(|(c, _)| **c >= lo && **c <= hi).map(|(_, n)| n).sum()
    }

    /// Elementwise sum with a histogram of the same binning.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::DimensionMismatch("histogram binning differs".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// CSV with a `bin_start_ps,bin_end_ps,count` header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_start_ps,bin_end_ps,count\n");
        for (w, c) in self.edges.windows(2).zip(&self.counts) {
            writeln!(s, "{},{},{}", w[0], w[1], c).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str, period: i64) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some("bin_start_ps,bin_end_ps,count") => {}
            other => return Err(Error::Parse(format!("unexpected histogram header {other:?}"))),
        }
        let mut edges = Vec::new();
        let mut counts = Vec::new();
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 fields", n + 2)));
            }
            let num = |x: &str| x.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", n + 2)));
            let (a, b, c) = (num(f[0])?, num(f[1])?, num(f[2])?);
            match edges.last() {
                None => edges.push(a),
                Some(prev) if *prev == a => {}
                Some(_) => return Err(Error::Parse(format!("line {}: bins are not contiguous", n + 2))),
            }
            edges.push(b);
            counts.push(c);
        }
        Self::from_parts(edges, counts, period)
    }
}

/// Metadata written next to an exported histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSidecar {
    pub schema_id: String,
    pub name: String,
    pub window: (f64, f64),
    pub bin_width: f64,
    pub period: i64,
    pub seed: u64,
    pub config_hash: String,
}

impl HistogramSidecar {
    pub fn new(name: &str, h: &CoincidenceHistogram, seed: u64, config_hash: &str) -> Self {
        let bin_width = h.edges.get(1).map_or(0.0, |e| e - h.edges[0]);
        Self {
            schema_id: HISTOGRAM_SCHEMA_ID.to_string(),
            name: name.to_string(),
            window: h.window,
            bin_width,
            period: h.period,
            seed,
            config_hash: config_hash.to_string(),
        }
    }
}

/// One record per line: `detector,timestamp_ps,trial,channel` with integer timestamps.
pub fn write_tags(tags: &[TagRecord]) -> String {
    let mut s = String::with_capacity(tags.len() * 32);
    for t in tags {
        writeln!(s, "{},{},{},{}", t.detector.as_str(), t.timestamp.round() as i64, t.trial, t.channel.as_str()).unwrap();
    }
    s
}

pub fn parse_tags(text: &str) -> Result<Vec<TagRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 fields, got {}", n + 1, f.len())));
            }
            let ts: i64 = f[1].parse().map_err(|e| Error::Parse(format!("line {}: timestamp: {e}", n + 1)))?;
            let trial: u64 = f[2].parse().map_err(|e| Error::Parse(format!("line {}: trial: {e}", n + 1)))?;
            Ok(TagRecord { detector: f[0].parse()?, timestamp: ts as f64, trial, channel: f[3].parse()? })
        })
        .collect()
}

/// Two-fold coincidences between detectors 1 and 2, folded by the repetition period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwofoldResult {
    /// Histogram of `t2 − t1` around `k · T0`, keyed by `k`.
    pub histograms: BTreeMap<i64, CoincidenceHistogram>,
    /// Pairs within the window of each `k`.
    pub window_counts: BTreeMap<i64, f64>,
    /// Pairs that landed in some window; equals the sum of all histogram counts.
    pub pairs: u64,
}

impl TwofoldResult {
    pub fn center(&self) -> f64 {
        self.window_counts.get(&0).copied().unwrap_or(0.0)
    }

    /// Mean window count over the side peaks `±1 ..= ±k`.
    pub fn side_mean(&self, k: i64) -> f64 {
        let sides: Vec<f64> =
            self.window_counts.iter().filter(|(p, _)| **p != 0 && p.abs() <= k).map(|(_, c)| *c).collect();
        if sides.is_empty() {
            0.0
        } else {
            sides.iter().sum::<f64>() / sides.len() as f64
        }
    }
}

/// Correlates every d1 click with every d2 click whose delay `t2 − t1` falls in the window
/// around `k · T0` for `|k| ≤ window.periods`. Delays are binned in `bin`-wide bins.
pub fn correlate_twofold(tags: &[TagRecord], window: &CoincidenceWindow<f64>, bin: f64) -> Result<TwofoldResult> {
    window.validate()?;
    let kmax = window.periods as i64;
    let mut histograms = BTreeMap::new();
    let mut window_counts = BTreeMap::new();
    for k in -kmax..=kmax {
        let (lo, hi) = window.shifted(k);
        histograms.insert(k, CoincidenceHistogram::new(lo, hi, bin, k)?);
        window_counts.insert(k, 0.0);
    }
    let mut d1: Vec<f64> = tags.iter().filter(|t| t.detector == Detector::D1).map(|t| t.timestamp).collect();
    let mut d2: Vec<f64> = tags.iter().filter(|t| t.detector == Detector::D2).map(|t| t.timestamp).collect();
    d1.sort_by(f64::total_cmp);
    d2.sort_by(f64::total_cmp);
    let (span_lo, span_hi) = (window.shifted(-kmax).0, window.shifted(kmax).1);
    let mut pairs = 0u64;
    let mut first = 0usize;
    for &t1 in &d1 {
        while first < d2.len() && d2[first] - t1 < span_lo {
            first += 1;
        }
        for &t2 in &d2[first..] {
            let dt = t2 - t1;
            if dt > span_hi {
                break;
            }
            let k = (dt / window.period).round() as i64;
            if k.abs() > kmax || !window.contains(k, dt) {
                continue;
            }
            *window_counts.get_mut(&k).unwrap() += 1.0;
            let (_, hi) = window.shifted(k);
            let h = histograms.get_mut(&k).unwrap();
            // the closed upper window edge goes into the last bin
            let x = if dt == hi { hi - 1e-9 * bin } else { dt };
            h.add(x, 1.0);
            pairs += 1;
        }
    }
    Ok(TwofoldResult { histograms, window_counts, pairs })
}

/// Herald acceptance: both herald clicks of a trial must fall in `[start, start + length]`
/// relative to the trial origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldWindow {
    pub start: f64,
    pub length: f64,
    pub period: f64,
}

impl HeraldWindow {
    pub fn new(start: f64, length: f64, period: f64) -> Result<Self> {
        if !(length > 0.0) || !(period > 0.0) || !start.is_finite() {
            return Err(invalid("herald window", format!("need length > 0 and period > 0, got {length}, {period}")));
        }
        Ok(Self { start, length, period })
    }

    pub fn accepts(&self, local: f64) -> bool {
        local >= self.start && local <= self.start + self.length
    }
}

/// Three-fold counts indexed by readout period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreefoldCounts {
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    /// Number of heralded trials.
    pub heralds: u64,
}

impl ThreefoldCounts {
    pub fn zeros(periods: usize) -> Self {
        Self { up: vec![0.0; periods], down: vec![0.0; periods], heralds: 0 }
    }

    pub fn total(&self) -> f64 {
        self.up.iter().chain(&self.down).sum()
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.up.iter_mut().zip(&other.up) {
            *a += b;
        }
        for (a, b) in self.down.iter_mut().zip(&other.down) {
            *a += b;
        }
        self.heralds += other.heralds;
    }
}

/// Trials with an accepted herald: at least one d1 and one d2 herald click in the window.
pub fn heralded_trials(herald: &[TagRecord], window: &HeraldWindow) -> Vec<u64> {
    let mut seen: BTreeMap<u64, (bool, bool)> = BTreeMap::new();
    for t in herald.iter().filter(|t| t.channel == Channel::Herald) {
        let local = t.timestamp - t.trial as f64 * window.period;
        if !window.accepts(local) {
            continue;
        }
        let e = seen.entry(t.trial).or_default();
        match t.detector {
            Detector::D1 => e.0 = true,
            Detector::D2 => e.1 = true,
        }
    }
    seen.into_iter().filter(|(_, (a, b))| *a && *b).map(|(n, _)| n).collect()
}

/// A three-fold event is a herald in trial `n` and a readout click in trial `n + k`,
/// `0 ≤ k < periods`, tallied by the readout outcome.
pub fn correlate_threefold(
    herald: &[TagRecord],
    readout: &[TagRecord],
    window: &HeraldWindow,
    periods: usize,
) -> ThreefoldCounts {
    let heralds = heralded_trials(herald, window);
    let mut by_trial: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for t in readout {
        let e = by_trial.entry(t.trial).or_default();
        match t.channel {
            Channel::ReadoutUp => e.0 += 1.0,
            Channel::ReadoutDown => e.1 += 1.0,
            Channel::Herald => {}
        }
    }
    let mut out = ThreefoldCounts::zeros(periods);
    out.heralds = heralds.len() as u64;
    for n in heralds {
        for k in 0..periods {
            if let Some((u, d)) = by_trial.get(&(n + k as u64)) {
                out.up[k] += u;
                out.down[k] += d;
            }
        }
    }
    out
}

/// Result of fitting `y ≈ a[1 + C cos(2πt/P + φ)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodFit {
    pub period: f64,
    pub contrast: f64,
    pub phase: f64,
    pub offset: f64,
    pub residual: f64,
}

fn fit_at(t: &[f64], y: &[f64], w: &[f64], period: f64) -> PeriodFit {
    // weighted normal equations for y = a + b cos + c sin
    let om = 2.0 * std::f64::consts::PI / period;
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for ((ti, yi), wi) in t.iter().zip(y).zip(w) {
        let f = [1.0, (om * ti).cos(), (om * ti).sin()];
        for i in 0..3 {
            r[i] += wi * f[i] * yi;
            for j in 0..3 {
                m[i][j] += wi * f[i] * f[j];
            }
        }
    }
    let x = solve3(m, r).unwrap_or([0.0; 3]);
    let residual = t
        .iter()
        .zip(y)
        .zip(w)
        .map(|((ti, yi), wi)| {
            let e = yi - x[0] - x[1] * (om * ti).cos() - x[2] * (om * ti).sin();
            wi * e * e
        })
        .sum();
    let amp = x[1].hypot(x[2]);
    PeriodFit {
        period,
        contrast: if x[0] != 0.0 { amp / x[0] } else { 0.0 },
        phase: (-x[2]).atan2(x[1]),
        offset: x[0],
        residual,
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|a, b| m[*a][col].abs().total_cmp(&m[*b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in 0..3 {
                    m[row][k] -= f * m[col][k];
                }
                r[row] -= f * r[col];
            }
        }
    }
    Some([r[0] / m[0][0], r[1] / m[1][1], r[2] / m[2][2]])
}

/// Least-squares period of a sinusoidal modulation, scanned over `[p_min, p_max]`.
///
/// `y` should already be divided by any slow envelope. Points are weighted by `weights`
/// (use ones for an unweighted fit).
pub fn fit_period(t: &[f64], y: &[f64], weights: &[f64], p_min: f64, p_max: f64) -> Result<PeriodFit> {
    if t.len() != y.len() || t.len() != weights.len() || t.len() < 4 {
        return Err(Error::DimensionMismatch(format!("need ≥ 4 matched points, got {} / {} / {}", t.len(), y.len(), weights.len())));
    }
    if !(p_min > 0.0 && p_max > p_min) {
        return Err(invalid("period range", format!("[{p_min}, {p_max}]")));
    }
    let steps = 2000;
    let mut best = fit_at(t, y, weights, p_min);
    for i in 1..=steps {
        let p = p_min + (p_max - p_min) * i as f64 / steps as f64;
        let f = fit_at(t, y, weights, p);
        if f.residual < best.residual {
            best = f;
        }
    }
    // golden-section refinement inside the bracketing grid cell
    let h = (p_max - p_min) / steps as f64;
    let (mut a, mut b) = ((best.period - h).max(p_min), (best.period + h).min(p_max));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if fit_at(t, y, weights, c).residual < fit_at(t, y, weights, d).residual {
            b = d;
        } else {
            a = c;
        }
    }
    let refined = fit_at(t, y, weights, 0.5 * (a + b));
    Ok(if refined.residual <= best.residual { refined } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tag(d: Detector, ts: f64, trial: u64, ch: Channel) -> TagRecord {
        TagRecord::new(d, ts, trial, ch).unwrap()
    }

    #[test]
    fn zero_jitter_is_identity_up_to_order() {
        let tags = vec![tag(Detector::D1, 5.0, 0, Channel::Herald), tag(Detector::D2, 2.0, 0, Channel::Herald)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = apply_jitter(&tags, 0.0, &mut rng).unwrap();
        assert_eq!(out, vec![tags[1], tags[0]]);
        assert!(apply_jitter(&tags, -1.0, &mut rng).is_err());
    }

    #[test]
    fn jitter_spread_and_determinism() {
        let tags: Vec<TagRecord> = (0..50_000).map(|i| tag(Detector::D1, i as f64 * 1e6, i, Channel::Herald)).collect();
        let run = |seed| apply_jitter(&tags, 60.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let a = run(4);
        assert_eq!(a, run(4));
        let shifts: Vec<f64> = a.iter().map(|t| t.timestamp - t.trial as f64 * 1e6).collect();
        let n = shifts.len() as f64;
        let mean = shifts.iter().sum::<f64>() / n;
        let sd = (shifts.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        // std of the sample std is σ/√(2n)
        assert!((sd - 60.0).abs() < 4.0 * 60.0 / (2.0 * n).sqrt(), "{sd}");
    }

    #[test]
    fn dark_count_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = dark_counts(1e-3, 0.0, 1e7, Detector::D2, 0, Channel::Herald, &mut rng).len() as f64;
        assert!((n - 1e4).abs() < 4.0 * 100.0);
    }

    #[test]
    fn histogram_binning() {
        let mut h = CoincidenceHistogram::new(-100.0, 100.0, 50.0, 0).unwrap();
        assert_eq!(h.counts().len(), 4);
        assert!(h.add(-100.0, 1.0) && h.add(-0.1, 1.0) && h.add(0.0, 1.0) && h.add(99.9, 1.0));
        assert!(!h.add(100.0, 1.0));
        assert_eq!(h.counts(), &[1.0, 1.0, 1.0, 1.0]);
        assert!(CoincidenceHistogram::new(1.0, 1.0, 5.0, 0).is_err());
        assert!(CoincidenceHistogram::from_parts(vec![0.0, 0.0], vec![1.0], 0).is_err());
    }

    #[test]
    fn histogram_csv_round_trip() {
        let mut h = CoincidenceHistogram::new(0.0, 120.0, 50.0, 3).unwrap();
        h.add(10.0, 2.0);
        h.add(110.0, 1.0);
        let csv = h.to_csv();
        assert!(csv.starts_with("bin_start_ps,bin_end_ps,count\n0,50,2\n"));
        assert_eq!(CoincidenceHistogram::from_csv(&csv, 3).unwrap(), h);
    }

    #[test]
    fn tag_file_round_trip() {
        let tags = vec![
            tag(Detector::D1, 13_100.0, 1, Channel::Herald),
            tag(Detector::D2, 26_250.0, 2, Channel::ReadoutDown),
        ];
        let text = write_tags(&tags);
        assert_eq!(text, "d1,13100,1,herald\nd2,26250,2,readout_down\n");
        assert_eq!(parse_tags(&text).unwrap(), tags);
        assert!(parse_tags("d3,1,0,herald").is_err());
        assert!(parse_tags("d1,1.5,0,herald").is_err());
    }

    fn window() -> CoincidenceWindow<f64> {
        CoincidenceWindow::new(-1200.0, 1200.0, 13_100.0, 3).unwrap()
    }

    #[test]
    fn twofold_folding_and_conservation() {
        let mut tags = Vec::new();
        for n in 0..100u64 {
            let base = n as f64 * 13_100.0;
            tags.push(tag(Detector::D1, base + 300.0, n, Channel::Herald));
            tags.push(tag(Detector::D2, base + 500.0, n, Channel::Herald));
        }
        let r = correlate_twofold(&tags, &window(), 50.0).unwrap();
        assert_eq!(r.center(), 100.0);
        assert_eq!(r.window_counts[&1], 99.0);
        assert_eq!(r.window_counts[&-3], 97.0);
        let hist_total: f64 = r.histograms.values().map(|h| h.total()).sum();
        assert_eq!(hist_total, r.pairs as f64);
        assert_eq!(r.window_counts.values().sum::<f64>(), r.pairs as f64);
        assert_eq!(r.histograms[&0].integral(150.0, 250.0), 100.0);
    }

    #[test]
    fn twofold_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut tags: Vec<TagRecord> = (0..400u64)
            .map(|i| {
                let d = if rng.random::<bool>() { Detector::D1 } else { Detector::D2 };
                tag(d, (i / 2) as f64 * 13_100.0 + rng.random::<f64>() * 1000.0, i / 2, Channel::Herald)
            })
            .collect();
        let a = correlate_twofold(&tags, &window(), 50.0).unwrap();
        tags.reverse();
        tags.swap(3, 77);
        assert_eq!(a, correlate_twofold(&tags, &window(), 50.0).unwrap());
    }

    #[test]
    fn threefold_counts() {
        let hw = HeraldWindow::new(0.0, 800.0, 13_100.0).unwrap();
        let herald = vec![
            tag(Detector::D1, 100.0, 0, Channel::Herald),
            tag(Detector::D2, 300.0, 0, Channel::Herald),
            // trial 1 second click outside the window
            tag(Detector::D1, 13_200.0, 1, Channel::Herald),
            tag(Detector::D2, 13_100.0 + 900.0, 1, Channel::Herald),
        ];
        let readout = vec![
            tag(Detector::D1, 5000.0, 0, Channel::ReadoutUp),
            tag(Detector::D1, 13_100.0 + 5000.0, 1, Channel::ReadoutDown),
            tag(Detector::D1, 2.0 * 13_100.0 + 5000.0, 2, Channel::ReadoutUp),
        ];
        let c = correlate_threefold(&herald, &readout, &hw, 3);
        assert_eq!(c.heralds, 1);
        assert_eq!(c.up, vec![1.0, 0.0, 1.0]);
        assert_eq!(c.down, vec![0.0, 1.0, 0.0]);
        assert_eq!(correlate_threefold(&herald, &[], &hw, 3).total(), 0.0);
        let mut rev = readout.clone();
        rev.reverse();
        assert_eq!(correlate_threefold(&herald, &rev, &hw, 3), c);
    }

    #[test]
    fn period_fit_recovers_modulation() {
        let p = 204.08;
        let t: Vec<f64> = (0..40).map(|i| 25.0 + 50.0 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| 1.0 + 0.7 * (2.0 * std::f64::consts::PI * x / p + 0.3).cos()).collect();
        let fit = fit_period(&t, &y, &vec![1.0; t.len()], 150.0, 400.0).unwrap();
        assert!((fit.period - p).abs() < 0.01, "{fit:?}");
        assert!((fit.contrast - 0.7).abs() < 1e-6);
        assert!((fit.phase - 0.3).abs() < 1e-6);
    }
}
