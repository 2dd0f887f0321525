//! Frequency-domain channel sounding on synthetic captures.
//!
//! The transmitter repeats `x = IFFT(X)`, where `X` is a pseudo-random QPSK
//! sequence of `n_points` unit-magnitude bins; each group of `n_points`
//! samples is one symbol. For every window of `avg_symbols` symbols the
//! receiver tries `cfo_hypotheses` derotation frequencies spread evenly over
//! `[-cfo_span_hz, cfo_span_hz]`. Per hypothesis it takes the FFT of each
//! derotated symbol, divides by `X`, averages over the window and returns to
//! the delay domain. The hypothesis with the largest PDP peak is kept. By
//! linearity the per-symbol FFTs are folded into one FFT of the symbol sum.
//!
//! Peak power of the kept PDPs, decimated, becomes the blockage trace.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::blockage::BlockageTrace;
use crate::par::{self, Execution};
use crate::rng::{mix_seed, stream, stream_rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SounderConfig {
    pub n_points: usize,
    pub sample_rate_hz: f64,
    pub avg_symbols: usize,
    pub cfo_hypotheses: usize,
    pub cfo_span_hz: f64,
    pub decimation: usize,
    /// Spacing of successive averaged responses. The 32-symbol window lasts
    /// 31.5 µs at 130 MHz; responses are reported on a 32 µs grid.
    pub frame_period_s: f64,
}

impl Default for SounderConfig {
    fn default() -> Self {
        SounderConfig {
            n_points: 128,
            sample_rate_hz: 130e6,
            avg_symbols: 32,
            cfo_hypotheses: 9,
            cfo_span_hz: 50e3,
            decimation: 4,
            frame_period_s: 32e-6,
        }
    }
}

impl SounderConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.n_points.is_power_of_two() || self.n_points < 2 {
            return Err(Error::invalid("n_points", "must be a power of two ≥ 2"));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::invalid("sample_rate_hz", "must be positive"));
        }
        if self.avg_symbols == 0 {
            return Err(Error::invalid("avg_symbols", "must be at least 1"));
        }
        if self.cfo_hypotheses == 0 || self.cfo_hypotheses.is_multiple_of(2) {
            return Err(Error::invalid("cfo_hypotheses", "must be odd and positive"));
        }
        if !(self.cfo_span_hz >= 0.0 && self.cfo_span_hz.is_finite()) {
            return Err(Error::invalid("cfo_span_hz", "must be nonnegative"));
        }
        if self.decimation == 0 {
            return Err(Error::invalid("decimation", "must be at least 1"));
        }
        if !(self.frame_period_s >= self.window_duration_s() * (1.0 - 1e-12)) {
            return Err(Error::invalid(
                "frame_period_s",
                format!("shorter than the averaging window {} s", self.window_duration_s()),
            ));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        self.n_points * self.avg_symbols
    }

    pub fn window_duration_s(&self) -> f64 {
        self.window_len() as f64 / self.sample_rate_hz
    }

    /// The CFO grid, ascending.
    pub fn hypotheses(&self) -> Vec<f64> {
        let n = self.cfo_hypotheses;
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|i| -self.cfo_span_hz + 2.0 * self.cfo_span_hz * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Sample period of the extracted blockage trace.
    pub fn trace_period_s(&self) -> f64 {
        self.frame_period_s * self.decimation as f64
    }
}

/// Samples plus the frequency-domain reference sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub samples: Vec<Complex32>,
    pub known_sequence: Vec<Complex32>,
    pub sample_rate_hz: f64,
}

impl Capture {
    pub fn n_points(&self) -> usize {
        self.known_sequence.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.samples.len() / self.n_points()
    }

    /// Rotates every sample by `exp(jφ)`.
    pub fn rotated(&self, phi: f64) -> Capture {
        let r = Complex32::from_polar(1.0, phi as f32);
        Capture {
            samples: self.samples.iter().map(|s| s * r).collect(),
            ..self.clone()
        }
    }
}

const CAPTURE_MAGIC: &[u8; 8] = b"MWSNDCAP";
const CAPTURE_VERSION: u32 = 1;

/// Binary capture layout, all little-endian:
///
/// | field | type |
/// |---|---|
/// | magic `MWSNDCAP` | 8 bytes |
/// | version (1) | u32 |
/// | n_points | u32 |
/// | sample_rate_hz | f64 |
/// | n_symbols | u32 |
/// | known sequence | n_points × (f32 I, f32 Q) |
/// | samples | n_points · n_symbols × (f32 I, f32 Q) |
pub fn write_capture<W: Write>(cap: &Capture, mut out: W) -> std::io::Result<()> {
    out.write_all(CAPTURE_MAGIC)?;
    out.write_all(&CAPTURE_VERSION.to_le_bytes())?;
    out.write_all(&(cap.n_points() as u32).to_le_bytes())?;
    out.write_all(&cap.sample_rate_hz.to_le_bytes())?;
    out.write_all(&(cap.n_symbols() as u32).to_le_bytes())?;
    for s in cap.known_sequence.iter().chain(&cap.samples) {
        out.write_all(&s.re.to_le_bytes())?;
        out.write_all(&s.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_capture<R: Read>(mut input: R) -> Result<Capture> {
    let bad = |reason: &str| Error::Format {
        path: "<capture>".into(),
        reason: reason.into(),
    };
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CAPTURE_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u32_buf = [0u8; 4];
    let mut read_u32 = |input: &mut R| -> std::io::Result<u32> {
        input.read_exact(&mut u32_buf)?;
        Ok(u32::from_le_bytes(u32_buf))
    };
    if read_u32(&mut input)? != CAPTURE_VERSION {
        return Err(bad("unsupported version"));
    }
    let n_points = read_u32(&mut input)? as usize;
    let mut f64_buf = [0u8; 8];
    input.read_exact(&mut f64_buf)?;
    let sample_rate_hz = f64::from_le_bytes(f64_buf);
    let n_symbols = read_u32(&mut input)? as usize;
    if n_points == 0 {
        return Err(bad("n_points is zero"));
    }

    let mut read_iq = |count: usize| -> std::io::Result<Vec<Complex32>> {
        let mut raw = vec![0u8; count * 8];
        input.read_exact(&mut raw)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                    f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                )
            })
            .collect())
    };
    let known_sequence = read_iq(n_points)?;
    let samples = read_iq(n_points * n_symbols)?;
    Ok(Capture {
        samples,
        known_sequence,
        sample_rate_hz,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdpFrame {
    pub bins: Vec<f64>,
    pub t: f64,
    pub chosen_cfo_hz: f64,
}

impl PdpFrame {
    /// `(bin, power)` of the strongest delay bin; first bin on ties.
    pub fn peak(&self) -> (usize, f64) {
        self.bins
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p > best.1 { (i, p) } else { best })
    }
}

/// `t_s,bin_0,…,bin_{n-1},chosen_cfo_hz`.
pub fn write_pdp_csv<'a, W: Write>(
    frames: impl IntoIterator<Item = &'a PdpFrame>,
    n_points: usize,
    mut out: W,
) -> std::io::Result<()> {
    write!(out, "t_s")?;
    for i in 0..n_points {
        write!(out, ",bin_{i}")?;
    }
    writeln!(out, ",chosen_cfo_hz")?;
    for f in frames {
        write!(out, "{}", f.t)?;
        for b in &f.bins {
            write!(out, ",{b}")?;
        }
        writeln!(out, ",{}", f.chosen_cfo_hz)?;
    }
    Ok(())
}

/// One propagation tap: delay in samples and complex amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SounderTap {
    pub delay: usize,
    pub gain: Complex64,
}

/// Planned transforms and reference sequence for one configuration.
pub struct Sounder {
    cfg: SounderConfig,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    known: Vec<Complex64>,
    // transmitted symbol x = IFFT(X)/√N
    tx_symbol: Vec<Complex64>,
    // hypotheses in tie-break order (smaller |cfo| first) with derotation tables
    derotations: Vec<(f64, Vec<Complex64>)>,
}

impl std::fmt::Debug for Sounder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sounder").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl Sounder {
    pub fn new(cfg: &SounderConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_points;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);

        let known = qpsk_sequence(n);
        let mut tx_symbol = known.clone();
        ifft.process(&mut tx_symbol);
        let scale = 1.0 / (n as f64).sqrt();
        tx_symbol.iter_mut().for_each(|x| *x *= scale);

        let mut order = cfg.hypotheses();
        order.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
        let window = cfg.window_len();
        let derotations = order
            .into_iter()
            .map(|f| {
                let table = (0..window)
                    .map(|m| {
                        let cycles = (f * m as f64 / cfg.sample_rate_hz).rem_euclid(1.0);
                        Complex64::from_polar(1.0, -2.0 * PI * cycles)
                    })
                    .collect();
                (f, table)
            })
            .collect();

        Ok(Sounder {
            cfg: cfg.clone(),
            fft,
            ifft,
            known,
            tx_symbol,
            derotations,
        })
    }

    pub fn config(&self) -> &SounderConfig {
        &self.cfg
    }

    /// Synthesizes `n_symbols` symbols through `taps` with a constant CFO and
    /// complex Gaussian noise at `snr_db` (mean received power over noise
    /// variance; `+∞` for noiseless).
    pub fn capture(
        &self,
        taps: &[SounderTap],
        cfo_hz: f64,
        snr_db: f64,
        n_symbols: usize,
        seed: u64,
    ) -> Result<Capture> {
        let n = self.cfg.n_points;
        if n_symbols == 0 {
            return Err(Error::invalid("n_symbols", "must be at least 1"));
        }
        if let Some(tap) = taps.iter().find(|t| t.delay >= n) {
            return Err(Error::invalid(
                "taps",
                format!("delay {} outside 0..{n}", tap.delay),
            ));
        }
        if snr_db.is_nan() {
            return Err(Error::invalid("snr_db", "is NaN"));
        }

        let mut rx_symbol = vec![Complex64::new(0.0, 0.0); n];
        for tap in taps {
            for (i, y) in rx_symbol.iter_mut().enumerate() {
                *y += tap.gain * self.tx_symbol[(i + n - tap.delay) % n];
            }
        }

        let signal_power: f64 = taps.iter().map(|t| t.gain.norm_sqr()).sum();
        let sigma = if snr_db == f64::INFINITY {
            0.0
        } else {
            (signal_power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt()
        };
        let mut rng = stream_rng(seed, stream::SOUNDER_NOISE);
        let phasor_at = |m: usize| {
            let cycles = (cfo_hz * m as f64 / self.cfg.sample_rate_hz).rem_euclid(1.0);
            Complex64::from_polar(1.0, 2.0 * PI * cycles)
        };
        let step = phasor_at(1);
        let mut samples = Vec::with_capacity(n * n_symbols);
        for sym in 0..n_symbols {
            // exact phase at each symbol start, recurrence within
            let mut rot = phasor_at(sym * n);
            for &x in &rx_symbol {
                let mut s = x * rot;
                rot *= step;
                if sigma > 0.0 {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    s += Complex64::new(re, im) * sigma;
                }
                samples.push(Complex32::new(s.re as f32, s.im as f32));
            }
        }
        Ok(Capture {
            samples,
            known_sequence: self.known.iter().map(|x| Complex32::new(x.re as f32, x.im as f32)).collect(),
            sample_rate_hz: self.cfg.sample_rate_hz,
        })
    }

    fn check_capture(&self, cap: &Capture) -> Result<()> {
        if cap.n_points() != self.cfg.n_points {
            return Err(Error::invalid(
                "capture",
                format!("{} points, configured for {}", cap.n_points(), self.cfg.n_points),
            ));
        }
        if cap.sample_rate_hz != self.cfg.sample_rate_hz {
            return Err(Error::invalid("capture", "sample rate differs from configuration"));
        }
        if cap.samples.len() < self.cfg.window_len() {
            return Err(Error::CaptureTooShort {
                samples: cap.samples.len(),
                needed: self.cfg.window_len(),
            });
        }
        if cap.known_sequence.iter().any(|x| x.norm_sqr() == 0.0) {
            return Err(Error::invalid("known_sequence", "has an empty bin"));
        }
        Ok(())
    }

    /// PDP of one averaging window (`window.len() == window_len()`), best
    /// CFO hypothesis.
    fn window_pdp(&self, window: &[Complex32], known: &[Complex64], t: f64) -> PdpFrame {
        let n = self.cfg.n_points;
        let norm = 1.0 / (self.cfg.avg_symbols as f64 * (n as f64).sqrt() * n as f64);
        let mut best: Option<PdpFrame> = None;
        let window: Vec<Complex64> = window
            .iter()
            .map(|s| Complex64::new(s.re as f64, s.im as f64))
            .collect();
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for (cfo, table) in &self.derotations {
            acc.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
            for (sym, rot) in window.chunks_exact(n).zip(table.chunks_exact(n)) {
                for ((a, s), r) in acc.iter_mut().zip(sym).zip(rot) {
                    *a += s * r;
                }
            }
            self.fft.process(&mut acc);
            for (a, x) in acc.iter_mut().zip(known) {
                *a /= x;
            }
            self.ifft.process(&mut acc);
            let bins: Vec<f64> = acc.iter().map(|a| (a * norm).norm_sqr()).collect();
            let frame = PdpFrame {
                bins,
                t,
                chosen_cfo_hz: *cfo,
            };
            if best.as_ref().is_none_or(|b| frame.peak().1 > b.peak().1) {
                best = Some(frame);
            }
        }
        best.expect("at least one hypothesis")
    }

    /// One frame per complete window; trailing samples are ignored. Frame `b`
    /// is stamped `b · frame_period_s`.
    pub fn estimate(&self, cap: &Capture, exec: Execution) -> Result<Vec<PdpFrame>> {
        self.check_capture(cap)?;
        let known: Vec<Complex64> = cap
            .known_sequence
            .iter()
            .map(|x| Complex64::new(x.re as f64, x.im as f64))
            .collect();
        let window = self.cfg.window_len();
        let blocks = cap.samples.len() / window;
        Ok(par::map_indices(blocks, exec, |b| {
            self.window_pdp(
                &cap.samples[b * window..(b + 1) * window],
                &known,
                b as f64 * self.cfg.frame_period_s,
            )
        }))
    }
}

/// Deterministic pseudo-random QPSK sequence with unit-magnitude bins.
pub fn qpsk_sequence(n: usize) -> Vec<Complex64> {
    let mut rng = stream_rng(0x5150_0000, stream::SOUNDER_SEQUENCE);
    let a = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let bits: u8 = rng.random_range(0..4);
            Complex64::new(
                if bits & 1 == 0 { a } else { -a },
                if bits & 2 == 0 { a } else { -a },
            )
        })
        .collect()
}

pub fn make_capture(
    taps: &[SounderTap],
    cfo_hz: f64,
    snr_db: f64,
    n_symbols: usize,
    cfg: &SounderConfig,
    seed: u64,
) -> Result<Capture> {
    Sounder::new(cfg)?.capture(taps, cfo_hz, snr_db, n_symbols, seed)
}

pub fn estimate_pdp(cap: &Capture, cfg: &SounderConfig) -> Result<Vec<PdpFrame>> {
    Sounder::new(cfg)?.estimate(cap, Execution::default())
}

/// Peak power per frame, every `decimation`-th frame, normalized to unit
/// median.
pub fn extract_blockage(frames: &[PdpFrame], cfg: &SounderConfig) -> Result<BlockageTrace> {
    cfg.validate()?;
    let peaks: Vec<f64> = frames
        .iter()
        .step_by(cfg.decimation)
        .map(|f| f.peak().1)
        .collect();
    blockage_from_peaks(peaks, cfg.trace_period_s())
}

/// Median-normalized trace from already decimated peak powers.
pub fn blockage_from_peaks(mut peaks: Vec<f64>, sample_period_s: f64) -> Result<BlockageTrace> {
    if peaks.is_empty() {
        return Err(Error::invalid("frames", "need at least one frame"));
    }
    peaks.iter_mut().for_each(|p| *p = p.max(0.0));
    let mut sorted = peaks.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    if median > 0.0 {
        peaks.iter_mut().for_each(|s| *s /= median);
    }
    if peaks.len() == 1 {
        // a trace needs two samples to define h(t) on an interval
        peaks.push(peaks[0]);
    }
    BlockageTrace::new(peaks, sample_period_s, "sounder")
}

/// Simulates averaging window `index` of a sounder run in which the taps
/// carry power `power_scale`. Every window draws its own noise from
/// `(seed, index)`, so any subset of windows can be simulated on its own.
pub fn simulate_frame(
    sounder: &Sounder,
    taps: &[SounderTap],
    cfo_hz: f64,
    snr_db: f64,
    index: usize,
    power_scale: f64,
    seed: u64,
) -> Result<PdpFrame> {
    let cfg = sounder.config();
    let amp = power_scale.max(0.0).sqrt();
    let scaled: Vec<SounderTap> = taps
        .iter()
        .map(|t| SounderTap {
            delay: t.delay,
            gain: t.gain * amp,
        })
        .collect();
    let cap = sounder.capture(&scaled, cfo_hz, snr_db, cfg.avg_symbols, mix_seed(seed, index as u64))?;
    let mut frame = sounder.estimate(&cap, Execution::Sequential)?.remove(0);
    frame.t = index as f64 * cfg.frame_period_s;
    Ok(frame)
}

/// [`simulate_frame`] for windows `0..power_scale.len()`.
pub fn simulate_frames(
    sounder: &Sounder,
    taps: &[SounderTap],
    cfo_hz: f64,
    snr_db: f64,
    power_scale: &[f64],
    seed: u64,
    exec: Execution,
) -> Result<Vec<PdpFrame>> {
    par::map_indices(power_scale.len(), exec, |b| {
        simulate_frame(sounder, taps, cfo_hz, snr_db, b, power_scale[b], seed)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tap(delay: usize, re: f64, im: f64) -> SounderTap {
        SounderTap {
            delay,
            gain: Complex64::new(re, im),
        }
    }

    #[test]
    fn config_checks() {
        let ok = SounderConfig::default();
        assert!(ok.validate().is_ok());
        assert!(SounderConfig { n_points: 100, ..ok.clone() }.validate().is_err());
        assert!(SounderConfig { cfo_hypotheses: 8, ..ok.clone() }.validate().is_err());
        assert!(SounderConfig { frame_period_s: 10e-6, ..ok.clone() }.validate().is_err());
        let h = ok.hypotheses();
        assert_eq!(h.len(), 9);
        assert_eq!(h[0], -50e3);
        assert_eq!(h[4], 0.0);
        assert_eq!(h[8], 50e3);
        assert!((h[5] - 12.5e3).abs() < 1e-9);
    }

    #[test]
    fn qpsk_unit_bins() {
        assert!(qpsk_sequence(128).iter().all(|x| (x.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn identity_channel_repeats_transmit_symbol() {
        let cfg = SounderConfig::default();
        let s = Sounder::new(&cfg).unwrap();
        let cap = s.capture(&[tap(0, 1.0, 0.0)], 0.0, f64::INFINITY, 3, 1).unwrap();
        assert_eq!(cap.n_symbols(), 3);
        for (m, x) in cap.samples.iter().enumerate() {
            let t = s.tx_symbol[m % 128];
            assert_eq!(*x, Complex32::new(t.re as f32, t.im as f32));
        }
    }

    #[test]
    fn capture_determinism_and_linearity() {
        let cfg = SounderConfig::default();
        let taps = [tap(0, 1.0, 0.0), tap(7, 0.2, 0.1)];
        let a = make_capture(&taps, 0.0, 10.0, 4, &cfg, 3).unwrap();
        let b = make_capture(&taps, 0.0, 10.0, 4, &cfg, 3).unwrap();
        assert_eq!(a, b);

        let power = |c: &Capture| c.samples.iter().map(|s| s.norm_sqr() as f64).sum::<f64>();
        let base = make_capture(&taps, 0.0, f64::INFINITY, 4, &cfg, 3).unwrap();
        let g = 3.0;
        let scaled: Vec<_> = taps.iter().map(|t| SounderTap { delay: t.delay, gain: t.gain * g }).collect();
        let big = make_capture(&scaled, 0.0, f64::INFINITY, 4, &cfg, 3).unwrap();
        assert!((power(&big) / power(&base) - g * g).abs() < 1e-5);

        assert!(make_capture(&[tap(128, 1.0, 0.0)], 0.0, 10.0, 1, &cfg, 0).is_err());
    }

    #[test]
    fn delta_channel_pdp() {
        let cfg = SounderConfig::default();
        for d in [0, 5, 77, 127] {
            let cap = make_capture(&[tap(d, 0.6, -0.3)], 0.0, f64::INFINITY, 32, &cfg, 0).unwrap();
            let frames = estimate_pdp(&cap, &cfg).unwrap();
            assert_eq!(frames.len(), 1);
            let f = &frames[0];
            let (peak_bin, peak) = f.peak();
            assert_eq!(peak_bin, d);
            assert!((peak - 0.45).abs() < 1e-6);
            assert_eq!(f.chosen_cfo_hz, 0.0);
            for (i, b) in f.bins.iter().enumerate() {
                if i != d {
                    assert!(*b <= 1e-10 * peak, "bin {i}: {b}");
                }
            }
        }
    }

    #[test]
    fn too_short_capture() {
        let cfg = SounderConfig::default();
        let cap = make_capture(&[tap(0, 1.0, 0.0)], 0.0, 20.0, 31, &cfg, 0).unwrap();
        assert!(matches!(estimate_pdp(&cap, &cfg), Err(Error::CaptureTooShort { .. })));
    }

    #[test]
    fn cfo_selects_nearest_hypothesis() {
        let cfg = SounderConfig::default();
        let s = Sounder::new(&cfg).unwrap();
        let mut hits = 0;
        for seed in 0..100 {
            let cap = s.capture(&[tap(3, 1.0, 0.0)], 30e3, 20.0, 32, seed).unwrap();
            let f = &s.estimate(&cap, Execution::Sequential).unwrap()[0];
            hits += (f.chosen_cfo_hz == 25e3) as usize;
        }
        assert_eq!(hits, 100);
    }

    #[test]
    fn residual_cfo_loss_follows_dirichlet_kernel() {
        // coherent sum of K samples rotating by ω: |sin(Kω/2) / (K sin(ω/2))|²
        let cfg = SounderConfig::default();
        let s = Sounder::new(&cfg).unwrap();
        let k = cfg.window_len() as f64;
        for residual in [0.0, 2e3, 4e3, 6.25e3] {
            let cap = s.capture(&[tap(0, 1.0, 0.0)], 25e3 + residual, f64::INFINITY, 32, 0).unwrap();
            let f = &s.estimate(&cap, Execution::Sequential).unwrap()[0];
            let w = 2.0 * PI * residual / cfg.sample_rate_hz;
            let expect = if residual == 0.0 {
                1.0
            } else {
                ((k * w / 2.0).sin() / (k * (w / 2.0).sin())).powi(2)
            };
            let got_db = 10.0 * f.peak().1.log10();
            let expect_db = 10.0 * expect.log10();
            assert!((got_db - expect_db).abs() < 0.01, "{residual}: {got_db} vs {expect_db}");
        }
        // halfway between hypotheses the loss exceeds half a dB
        let w = 2.0 * PI * 6.25e3 / cfg.sample_rate_hz;
        let worst = ((k * w / 2.0).sin() / (k * (w / 2.0).sin())).powi(2);
        assert!(10.0 * worst.log10() < -0.5);
    }

    #[test]
    fn two_tap_power_ratio() {
        let cfg = SounderConfig::default();
        let (p1, p2): (f64, f64) = (1.0, 0.25);
        let cap = make_capture(
            &[tap(4, p1.sqrt(), 0.0), tap(19, 0.0, p2.sqrt())],
            -12e3,
            30.0,
            32 * 4,
            &cfg,
            9,
        )
        .unwrap();
        for f in estimate_pdp(&cap, &cfg).unwrap() {
            let mut order: Vec<usize> = (0..128).collect();
            order.sort_by(|a, b| f.bins[*b].total_cmp(&f.bins[*a]));
            assert_eq!(&order[..2], &[4, 19]);
            let ratio_db = 10.0 * (f.bins[4] / f.bins[19]).log10();
            assert!((ratio_db - 10.0 * (p1 / p2).log10()).abs() < 0.5, "{ratio_db}");
        }
    }

    #[test]
    fn blockage_extraction() {
        let cfg = SounderConfig::default();
        let frame = |p: f64| PdpFrame {
            bins: vec![p, p * 0.1],
            t: 0.0,
            chosen_cfo_hz: 0.0,
        };
        let flat: Vec<PdpFrame> = (0..40).map(|_| frame(3.0)).collect();
        let tr = extract_blockage(&flat, &cfg).unwrap();
        assert_eq!(tr.len(), 10);
        assert!(tr.samples().iter().all(|&s| (s - 1.0).abs() < 1e-15));
        assert!((tr.sample_period_s() - 128e-6).abs() < 1e-18);

        let faded: Vec<PdpFrame> = (0..40)
            .map(|i| frame(if (16..24).contains(&i) { 0.02 } else { 2.0 }))
            .collect();
        let tr = extract_blockage(&faded, &cfg).unwrap();
        let min = tr.samples().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - 0.01).abs() < 1e-12);
        assert!(extract_blockage(&[], &cfg).is_err());
    }

    #[test]
    fn blockage_invariant_to_rotation() {
        let cfg = SounderConfig::default();
        let cap = make_capture(&[tap(2, 1.0, 0.0), tap(9, 0.3, 0.3)], 7e3, 25.0, 32 * 8, &cfg, 5)
            .unwrap();
        let a = extract_blockage(&estimate_pdp(&cap, &cfg).unwrap(), &cfg).unwrap();
        let b = extract_blockage(&estimate_pdp(&cap.rotated(1.234), &cfg).unwrap(), &cfg).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).abs() < 1e-5, "{x} vs {y}");
        }
    }

    #[test]
    fn capture_binary_round_trip() {
        let cfg = SounderConfig::default();
        let cap = make_capture(&[tap(1, 0.5, 0.5)], 1e3, 15.0, 2, &cfg, 1).unwrap();
        let mut buf = Vec::new();
        write_capture(&cap, &mut buf).unwrap();
        assert_eq!(&buf[..8], b"MWSNDCAP");
        assert_eq!(buf.len(), 8 + 4 + 4 + 8 + 4 + 8 * (128 + 256));
        assert_eq!(read_capture(&buf[..]).unwrap(), cap);
        buf[0] = b'X';
        assert!(read_capture(&buf[..]).is_err());
    }

    #[test]
    fn frame_simulation_matches_direct_path() {
        let cfg = SounderConfig::default();
        let s = Sounder::new(&cfg).unwrap();
        let taps = [tap(0, 1.0, 0.0)];
        let scale = [1.0, 0.5, 0.01, 1.0];
        let seq = simulate_frames(&s, &taps, 0.0, f64::INFINITY, &scale, 1, Execution::Sequential).unwrap();
        let par = simulate_frames(&s, &taps, 0.0, f64::INFINITY, &scale, 1, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        for (f, &p) in seq.iter().zip(&scale) {
            assert!((f.peak().1 - p).abs() < 1e-6 * p.max(1e-3));
        }
        assert!((seq[3].t - 3.0 * 32e-6).abs() < 1e-18);
    }

    #[test]
    fn pdp_csv_layout() {
        let f = PdpFrame {
            bins: vec![1.0, 0.5],
            t: 0.5,
            chosen_cfo_hz: -12500.0,
        };
        let mut buf = Vec::new();
        write_pdp_csv([&f], 2, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t_s,bin_0,bin_1,chosen_cfo_hz\n0.5,1,0.5,-12500\n"
        );
    }
}
