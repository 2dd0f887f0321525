//! Local blockage factor `h(t)`: trace I/O, synthetic event traces, and the
//! `β` calibration that places the average wideband SNR at a target level.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::arrays::SteeringVector;
use crate::channel::{BandIntegration, ChannelState};
use crate::rng::{stream, stream_rng};
use crate::{Error, Result};

/// Sample period of recorded and synthesized traces (one PDP per 128 µs).
pub const TRACE_SAMPLE_PERIOD_S: f64 = 128e-6;

/// Uniformly sampled, linear-scale blockage factor.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockageTrace {
    samples: Vec<f64>,
    sample_period_s: f64,
    label: String,
}

impl BlockageTrace {
    pub fn new(samples: Vec<f64>, sample_period_s: f64, label: impl Into<String>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("samples", "need at least two samples"));
        }
        if let Some((i, v)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::invalid(
                "samples",
                format!("sample {i} is {v}, must be finite and nonnegative"),
            ));
        }
        if !(sample_period_s > 0.0 && sample_period_s.is_finite()) {
            return Err(Error::invalid("sample_period_s", "must be positive"));
        }
        Ok(BlockageTrace {
            samples,
            sample_period_s,
            label: label.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_period_s(&self) -> f64 {
        self.sample_period_s
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Recording duration, `len · sample_period`.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 * self.sample_period_s
    }

    /// Time of the last sample; `at` is defined on `[0, end_time]`.
    pub fn end_time(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.sample_period_s
    }

    /// Linearly interpolated `h(t)`.
    pub fn at(&self, t: f64) -> Result<f64> {
        let end = self.end_time();
        let tol = 1e-9 * self.sample_period_s;
        if !(t >= -tol && t <= end + tol) {
            return Err(Error::TimeOutOfRange { t, start: 0.0, end });
        }
        let pos = (t / self.sample_period_s).clamp(0.0, (self.samples.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.samples.len() - 2);
        let frac = pos - i as f64;
        Ok(self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac)
    }

    /// Writes the trace CSV: `sample_period_s,<value>` then one sample per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "sample_period_s,{}", self.sample_period_s)?;
        for s in &self.samples {
            writeln!(out, "{s}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, reason: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            reason,
        };
        let mut lines = input.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))?;
        let header = header?;
        let period = header
            .trim()
            .strip_prefix("sample_period_s,")
            .ok_or_else(|| parse_err(1, format!("expected `sample_period_s,<value>`, got `{header}`")))?
            .trim()
            .parse::<f64>()
            .map_err(|e| parse_err(1, e.to_string()))?;
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Format {
                path: origin.to_path_buf(),
                reason: format!("sample_period_s must be positive, got {period}"),
            });
        }

        let mut samples = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let v: f64 = text
                .parse()
                .map_err(|e: std::num::ParseFloatError| parse_err(idx + 1, e.to_string()))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(parse_err(idx + 1, format!("sample {v} must be finite and nonnegative")));
            }
            samples.push(v);
        }
        let label = origin
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "loaded".into());
        BlockageTrace::new(samples, period, label).map_err(|e| Error::Format {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<BlockageTrace> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    BlockageTrace::read_csv(BufReader::new(file), path)
}

pub fn write_trace(trace: &BlockageTrace, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    trace.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Walker,
    Plate,
    Hand,
}

impl EventKind {
    pub const ALL: [EventKind; 3] = [EventKind::Walker, EventKind::Plate, EventKind::Hand];
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Walker => "walker",
            EventKind::Plate => "plate",
            EventKind::Hand => "hand",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    Linear,
    #[default]
    RaisedCosine,
}

impl RampShape {
    fn apply(self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            RampShape::Linear => x,
            RampShape::RaisedCosine => 0.5 * (1.0 - (PI * x).cos()),
        }
    }
}

/// Parameters of a synthetic blockage trace. Events arrive as a Poisson
/// process; each ramps down to `-depth_db`, holds, and ramps back up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockageEventSpec {
    pub event_kind: EventKind,
    pub depth_db: f64,
    pub event_rate_hz: f64,
    pub transition_s: f64,
    pub hold_s: f64,
    pub duration_s: f64,
    pub ramp: RampShape,
    pub seed: u64,
}

impl BlockageEventSpec {
    /// Defaults for each event class over a 10 s recording.
    pub fn for_kind(kind: EventKind, seed: u64) -> Self {
        let (depth_db, transition_s, hold_s, event_rate_hz) = match kind {
            EventKind::Walker => (20.0, 0.1, 0.4, 0.5),
            EventKind::Plate => (35.0, 0.03, 1.0, 0.3),
            EventKind::Hand => (15.0, 0.2, 1.5, 0.2),
        };
        BlockageEventSpec {
            event_kind: kind,
            depth_db,
            event_rate_hz,
            transition_s,
            hold_s,
            duration_s: 10.0,
            ramp: RampShape::RaisedCosine,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive("depth_db", self.depth_db)?;
        positive("transition_s", self.transition_s)?;
        positive("duration_s", self.duration_s)?;
        if !(self.event_rate_hz >= 0.0 && self.event_rate_hz.is_finite()) {
            return Err(Error::invalid("event_rate_hz", "must be nonnegative"));
        }
        if !(self.hold_s >= 0.0 && self.hold_s.is_finite()) {
            return Err(Error::invalid("hold_s", "must be nonnegative"));
        }
        if ((self.duration_s / TRACE_SAMPLE_PERIOD_S).round() as usize) < 2 {
            return Err(Error::invalid("duration_s", "shorter than two samples"));
        }
        Ok(())
    }

    /// Attenuation in dB at `dt` seconds after an event start.
    fn attenuation_db(&self, dt: f64) -> f64 {
        let tr = self.transition_s;
        let up_start = tr + self.hold_s;
        if dt < 0.0 || dt >= up_start + tr {
            0.0
        } else if dt < tr {
            self.depth_db * self.ramp.apply(dt / tr)
        } else if dt <= up_start {
            self.depth_db
        } else {
            self.depth_db * self.ramp.apply(1.0 - (dt - up_start) / tr)
        }
    }
}

/// Generates a unit-baseline trace at 128 µs with Poisson blockage events.
/// Overlapping events combine by taking the deeper attenuation.
pub fn synthesize_trace(spec: &BlockageEventSpec) -> Result<BlockageTrace> {
    spec.validate()?;
    let n = (spec.duration_s / TRACE_SAMPLE_PERIOD_S).round() as usize;
    let mut rng = stream_rng(spec.seed, stream::BLOCKAGE);

    let mut starts = Vec::new();
    if spec.event_rate_hz > 0.0 {
        let gap = Exp::new(spec.event_rate_hz)
            .map_err(|e| Error::invalid("event_rate_hz", e.to_string()))?;
        let mut t = gap.sample(&mut rng);
        while t < spec.duration_s {
            starts.push(t);
            t += gap.sample(&mut rng);
        }
    }

    let event_len = 2.0 * spec.transition_s + spec.hold_s;
    let mut atten = vec![0.0f64; n];
    for &start in &starts {
        let first = (start / TRACE_SAMPLE_PERIOD_S).ceil() as usize;
        let last = (((start + event_len) / TRACE_SAMPLE_PERIOD_S).ceil() as usize).min(n);
        for (i, a) in atten.iter_mut().enumerate().take(last).skip(first) {
            let dt = i as f64 * TRACE_SAMPLE_PERIOD_S - start;
            *a = a.max(spec.attenuation_db(dt));
        }
    }

    let samples = atten.iter().map(|a| 10f64.powf(-a / 10.0)).collect();
    BlockageTrace::new(
        samples,
        TRACE_SAMPLE_PERIOD_S,
        format!("synthetic-{}", spec.event_kind),
    )
}

/// Returns `β` such that the mean of `γ(t)` over `times` equals
/// `target_linear`. `γ` is linear in `β`, so `β = target / mean γ|β=1`; the
/// `beta` already stored in `state` is ignored.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_beta(
    state: &ChannelState,
    target_linear: f64,
    w_tx: &SteeringVector,
    w_rx: &SteeringVector,
    ptx_w: f64,
    n0_w_per_hz: f64,
    times: &[f64],
    integration: BandIntegration,
) -> Result<f64> {
    if !(target_linear > 0.0 && target_linear.is_finite()) {
        return Err(Error::invalid("target_linear", "must be positive"));
    }
    if times.is_empty() {
        return Err(Error::invalid("times", "need at least one calibration instant"));
    }
    let link = state.with_beta(1.0)?.project(w_tx, w_rx)?;
    let mut total = 0.0;
    for &t in times {
        total += link.wideband_snr(t, ptx_w, n0_w_per_hz, integration)?;
    }
    let mean = total / times.len() as f64;
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::CalibrationImpossible(mean));
    }
    Ok(target_linear / mean)
}
