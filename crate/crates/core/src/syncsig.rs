//! Synchronization-signal measurements and the raw wideband SNR estimate.
//!
//! Every `T_per` the base station sends a burst of `N_sig` narrowband
//! sub-signals of total duration `T_sig`. The UE beam-scans `N_dir`
//! directions round-robin, one per burst. For each sub-signal the matched
//! filter yields
//!
//! ```text
//! z_k = √E_s · w_rxᴴ H(t_i, f_k) w_tx + v_k,   v_k ~ CN(0, N₀),   E_s = P_tx T_sig / N_sig
//! ```
//!
//! and with `f_k` uniform over the band
//!
//! ```text
//! γ̂_i = Σ_k (|z_k|² − N₀) / (N₀ T_sig W)
//! ```
//!
//! is unbiased for the true wideband SNR `γ(t_i)`. It can be negative.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::arrays::{steering_vector, ArrayGeometry, BeamCodebook, SteeringVector};
use crate::channel::{Band, BandIntegration, ChannelState, LinkProjection, PathSet};
use crate::par::{self, Execution};
use crate::rng::{stream, stream_rng, substream_rng, SimRng};
use crate::{Error, Result};

/// Where the sub-signals sit in frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Independent uniform draw over the band per sub-signal and burst.
    #[default]
    Random,
    /// Fixed comb at the centers of `N_sig` equal sub-bands. Biased on
    /// frequency-selective channels.
    Comb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncConfig {
    pub t_per_s: f64,
    pub t_sig_s: f64,
    pub n_sig: usize,
    pub w_sig_hz: f64,
    pub n_dir: usize,
    pub placement: Placement,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            t_per_s: 1e-3,
            t_sig_s: 10e-6,
            n_sig: 4,
            w_sig_hz: 1e6,
            n_dir: 16,
            placement: Placement::Random,
        }
    }
}

impl SyncConfig {
    pub fn validate(&self, band: &Band) -> Result<()> {
        if !(self.t_per_s > 0.0 && self.t_per_s.is_finite()) {
            return Err(Error::invalid("t_per_s", "must be positive"));
        }
        if !(self.t_sig_s > 0.0 && self.t_sig_s < self.t_per_s) {
            return Err(Error::invalid("t_sig_s", "must be positive and below t_per_s"));
        }
        if self.n_sig == 0 {
            return Err(Error::invalid("n_sig", "must be at least 1"));
        }
        if self.n_dir == 0 {
            return Err(Error::invalid("n_dir", "must be at least 1"));
        }
        if !(self.w_sig_hz > 0.0) || self.n_sig as f64 * self.w_sig_hz > band.width_hz {
            return Err(Error::invalid(
                "w_sig_hz",
                "must be positive with n_sig · w_sig_hz within the system bandwidth",
            ));
        }
        Ok(())
    }

    /// Revisit period of one direction, `N_dir · T_per`.
    pub fn revisit_period_s(&self) -> f64 {
        self.n_dir as f64 * self.t_per_s
    }
}

/// Base-station weights used for the synchronization bursts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncTxMode {
    /// A single BS element, so no transmit array gain.
    #[default]
    Omni,
    /// BS beam steered to the departure angle of the strongest path.
    FixedBeam,
}

impl SyncTxMode {
    pub fn weights(self, bs_geom: &ArrayGeometry, pathset: &PathSet) -> Result<SteeringVector> {
        match self {
            SyncTxMode::Omni => SteeringVector::single_element(bs_geom.num_elements(), 0),
            SyncTxMode::FixedBeam => {
                let strongest = pathset
                    .paths()
                    .iter()
                    .max_by(|a, b| a.power.total_cmp(&b.power))
                    .ok_or_else(|| Error::invalid("pathset", "is empty"))?;
                Ok(steering_vector(bs_geom, strongest.aod_azimuth, 0.0))
            }
        }
    }
}

/// `E_s = P_tx T_sig / N_sig`.
pub fn sub_signal_energy(ptx_w: f64, cfg: &SyncConfig) -> f64 {
    ptx_w * cfg.t_sig_s / cfg.n_sig as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawMeasurement {
    pub t_i: f64,
    pub direction_index: usize,
    pub z: Vec<Complex64>,
    pub gamma_hat: f64,
}

/// Link budget shared by all measurements of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub ptx_w: f64,
    pub n0_w_per_hz: f64,
}

/// One burst measured through a pre-projected beam pair.
pub fn measure_on_link(
    link: &LinkProjection,
    t_i: f64,
    direction_index: usize,
    cfg: &SyncConfig,
    budget: LinkBudget,
    rng: &mut SimRng,
) -> Result<RawMeasurement> {
    let band = link.band();
    let es_sqrt = sub_signal_energy(budget.ptx_w, cfg).sqrt();
    let n0 = budget.n0_w_per_hz;
    let sigma = (n0 / 2.0).sqrt();
    let mut z = Vec::with_capacity(cfg.n_sig);
    for k in 0..cfg.n_sig {
        let f = match cfg.placement {
            Placement::Random => band.low() + rng.random::<f64>() * band.width_hz,
            Placement::Comb => {
                band.low() + (k as f64 + 0.5) * band.width_hz / cfg.n_sig as f64
            }
        };
        let h = link.response(t_i, f)?;
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        z.push(h * es_sqrt + Complex64::new(re, im) * sigma);
    }
    let excess: f64 = z.iter().map(|zk| zk.norm_sqr() - n0).sum();
    let gamma_hat = excess / (n0 * cfg.t_sig_s * band.width_hz);
    Ok(RawMeasurement {
        t_i,
        direction_index,
        z,
        gamma_hat,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn measure_once(
    state: &ChannelState,
    t_i: f64,
    w_tx: &SteeringVector,
    w_rx: &SteeringVector,
    cfg: &SyncConfig,
    ptx_w: f64,
    n0_w_per_hz: f64,
    rng: &mut SimRng,
) -> Result<RawMeasurement> {
    let link = state.project(w_tx, w_rx)?;
    measure_on_link(
        &link,
        t_i,
        0,
        cfg,
        LinkBudget {
            ptx_w,
            n0_w_per_hz,
        },
        rng,
    )
}

/// Sample mean and unbiased sample variance of repeated raw estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

impl RawStats {
    pub fn std_err(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

const MC_CHUNK: usize = 4096;

/// Repeats the burst measurement at a fixed instant `n_trials` times.
/// Trials are split into fixed-size chunks, each with its own random
/// sub-stream, so the result is identical in either execution mode.
pub fn monte_carlo_raw(
    link: &LinkProjection,
    t: f64,
    cfg: &SyncConfig,
    budget: LinkBudget,
    n_trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<RawStats> {
    if n_trials < 2 {
        return Err(Error::invalid("n_trials", "need at least two trials"));
    }
    let chunks = n_trials.div_ceil(MC_CHUNK);
    let partial = par::map_indices(chunks, exec, |c| -> Result<(usize, f64, f64)> {
        let mut rng = substream_rng(seed, stream::MEASUREMENT, c as u64);
        let count = MC_CHUNK.min(n_trials - c * MC_CHUNK);
        // Welford within a chunk
        let (mut mean, mut m2) = (0.0, 0.0);
        for i in 0..count {
            let g = measure_on_link(link, t, 0, cfg, budget, &mut rng)?.gamma_hat;
            let delta = g - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (g - mean);
        }
        Ok((count, mean, m2))
    });
    // Chan et al. pairwise merge, in chunk order
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for part in partial {
        let (nb, mb, m2b) = part?;
        let total = n + nb;
        let delta = mb - mean;
        mean += delta * nb as f64 / total as f64;
        m2 += m2b + delta * delta * (n as f64) * (nb as f64) / total as f64;
        n = total;
    }
    Ok(RawStats {
        n,
        mean,
        variance: m2 / (n - 1) as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSlot {
    pub t: f64,
    pub direction: usize,
}

fn slot_count(cfg: &SyncConfig, horizon_s: f64) -> usize {
    // slots with t_i = i T_per < horizon
    (horizon_s / cfg.t_per_s - 1e-9).ceil().max(0.0) as usize
}

/// One slot per `T_per` over `[0, horizon)`, directions round-robin.
pub fn scan_schedule(cfg: &SyncConfig, horizon_s: f64) -> Result<Vec<ScanSlot>> {
    if !(horizon_s > 0.0 && horizon_s.is_finite()) {
        return Err(Error::invalid("horizon_s", "must be positive"));
    }
    Ok((0..slot_count(cfg, horizon_s))
        .map(|i| ScanSlot {
            t: i as f64 * cfg.t_per_s,
            direction: i % cfg.n_dir,
        })
        .collect())
}

/// Instants at which `direction` is measured, every `N_dir · T_per`.
pub fn aligned_times(cfg: &SyncConfig, horizon_s: f64, direction: usize) -> Result<Vec<f64>> {
    if direction >= cfg.n_dir {
        return Err(Error::invalid(
            "direction_index",
            format!("{direction} >= n_dir {}", cfg.n_dir),
        ));
    }
    Ok(scan_schedule(cfg, horizon_s)?
        .into_iter()
        .filter(|s| s.direction == direction)
        .map(|s| s.t)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrKind {
    TrueSnr,
    Raw,
    Filtered,
}

impl fmt::Display for SnrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SnrKind::TrueSnr => "true_snr",
            SnrKind::Raw => "raw",
            SnrKind::Filtered => "filtered",
        })
    }
}

impl FromStr for SnrKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "true_snr" => Ok(SnrKind::TrueSnr),
            "raw" => Ok(SnrKind::Raw),
            "filtered" => Ok(SnrKind::Filtered),
            other => Err(format!("unknown trace kind `{other}`")),
        }
    }
}

/// Uniformly sampled linear SNR sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrTrace {
    t: Vec<f64>,
    values: Vec<f64>,
    kind: SnrKind,
}

impl SnrTrace {
    pub fn new(t: Vec<f64>, values: Vec<f64>, kind: SnrKind) -> Result<Self> {
        if t.len() != values.len() {
            return Err(Error::invalid(
                "values",
                format!("{} values for {} instants", values.len(), t.len()),
            ));
        }
        if t.len() >= 2 {
            let step = t[1] - t[0];
            if !(step > 0.0) {
                return Err(Error::invalid("t", "must be strictly increasing"));
            }
            if t.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-12) {
                return Err(Error::invalid("t", "spacing must be uniform"));
            }
        }
        Ok(SnrTrace { t, values, kind })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> SnrKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Same grid, new values and kind.
    pub fn with_values(&self, values: Vec<f64>, kind: SnrKind) -> Result<Self> {
        SnrTrace::new(self.t.clone(), values, kind)
    }

    pub fn scaled(&self, factor: f64) -> SnrTrace {
        SnrTrace {
            t: self.t.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            kind: self.kind,
        }
    }

    /// `t_s,value_linear,kind`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_s,value_linear,kind")?;
        for (t, v) in self.t.iter().zip(&self.values) {
            writeln!(out, "{t},{v},{}", self.kind)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let origin = std::path::PathBuf::from("<snr trace>");
        let err = |line: usize, reason: String| Error::Parse {
            path: origin.clone(),
            line,
            reason,
        };
        let mut lines = input.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "t_s,value_linear,kind" => {}
            _ => return Err(err(1, "expected header `t_s,value_linear,kind`".into())),
        }
        let (mut t, mut values, mut kind) = (Vec::new(), Vec::new(), None);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let mut next = || cols.next().ok_or_else(|| err(i + 2, "missing column".into()));
            let ti: f64 = next()?.parse().map_err(|e| err(i + 2, format!("{e}")))?;
            let vi: f64 = next()?.parse().map_err(|e| err(i + 2, format!("{e}")))?;
            let ki: SnrKind = next()?.parse().map_err(|e| err(i + 2, e))?;
            if kind.is_some_and(|k| k != ki) {
                return Err(err(i + 2, "mixed trace kinds".into()));
            }
            kind = Some(ki);
            t.push(ti);
            values.push(vi);
        }
        SnrTrace::new(t, values, kind.unwrap_or(SnrKind::Raw))
    }
}

/// Simulates the raw estimate on the aligned slots of one direction and the
/// true wideband SNR at the same instants. Returns `(raw, true_snr)`.
#[allow(clippy::too_many_arguments)]
pub fn track_direction(
    state: &ChannelState,
    cfg: &SyncConfig,
    direction_index: usize,
    codebook: &BeamCodebook,
    w_tx: &SteeringVector,
    budget: LinkBudget,
    horizon_s: f64,
    seed: u64,
    integration: BandIntegration,
) -> Result<(SnrTrace, SnrTrace)> {
    cfg.validate(&state.band)?;
    let w_rx = codebook.beam(direction_index).ok_or_else(|| {
        Error::invalid(
            "direction_index",
            format!("{direction_index} outside codebook of {}", codebook.len()),
        )
    })?;
    let times = aligned_times(cfg, horizon_s, direction_index)?;
    let link = state.project(w_tx, w_rx)?;
    track_link(&link, cfg, direction_index, &times, budget, seed, integration)
}

/// [`track_direction`] on an already projected link and explicit instants.
pub fn track_link(
    link: &LinkProjection,
    cfg: &SyncConfig,
    direction_index: usize,
    times: &[f64],
    budget: LinkBudget,
    seed: u64,
    integration: BandIntegration,
) -> Result<(SnrTrace, SnrTrace)> {
    let mut rng = stream_rng(seed, stream::MEASUREMENT);
    let mut raw = Vec::with_capacity(times.len());
    let mut truth = Vec::with_capacity(times.len());
    for &t in times {
        raw.push(measure_on_link(link, t, direction_index, cfg, budget, &mut rng)?.gamma_hat);
        truth.push(link.wideband_snr(t, budget.ptx_w, budget.n0_w_per_hz, integration)?);
    }
    Ok((
        SnrTrace::new(times.to_vec(), raw, SnrKind::Raw)?,
        SnrTrace::new(times.to_vec(), truth, SnrKind::TrueSnr)?,
    ))
}
