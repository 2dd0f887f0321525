//! Semi-statistical multipath channel.
//!
//! A static path set (count, powers, delays, angles) is drawn from a simple
//! parameterized generator, Doppler shifts follow from the UE motion, and all
//! path powers are modulated by a common local-blockage factor:
//!
//! ```text
//! H(t, f) = 1/√L · Σ_ℓ √(β P_ℓ h(t)) · exp(2πj (f_d,ℓ t − τ_ℓ f)) · u_rx,ℓ u_tx,ℓᴴ
//! γ(t)    = G(t) P_tx / (N₀ W),   G(t) = mean over the band of |w_rxᴴ H w_tx|²
//! ```

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::arrays::{steering_vector, ArrayGeometry, SteeringVector};
use crate::blockage::BlockageTrace;
use crate::rng::{stream, stream_rng};
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub ue_speed_mps: f64,
    /// Direction of UE motion. `None` draws it uniformly from the seed.
    pub motion_azimuth: Option<f64>,
    pub path_count_mean: f64,
    pub delay_spread_s: f64,
    pub power_decay_db_per_ns: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            carrier_hz: 28e9,
            bandwidth_hz: 500e6,
            ue_speed_mps: 1.5,
            motion_azimuth: None,
            path_count_mean: 10.0,
            delay_spread_s: 100e-9,
            power_decay_db_per_ns: 0.1,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive("carrier_hz", self.carrier_hz)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("path_count_mean", self.path_count_mean)?;
        positive("delay_spread_s", self.delay_spread_s)?;
        if !(self.ue_speed_mps >= 0.0 && self.ue_speed_mps.is_finite()) {
            return Err(Error::invalid("ue_speed_mps", "must be nonnegative"));
        }
        if !self.power_decay_db_per_ns.is_finite() {
            return Err(Error::invalid("power_decay_db_per_ns", "must be finite"));
        }
        if self.bandwidth_hz >= 2.0 * self.carrier_hz {
            return Err(Error::invalid("bandwidth_hz", "band extends below 0 Hz"));
        }
        Ok(())
    }

    pub fn band(&self) -> Band {
        Band {
            center_hz: self.carrier_hz,
            width_hz: self.bandwidth_hz,
        }
    }

    pub fn max_doppler_hz(&self) -> f64 {
        self.ue_speed_mps * self.carrier_hz / SPEED_OF_LIGHT
    }

    /// Motion azimuth, drawing it from the seed when not configured.
    pub fn resolved_motion_azimuth(&self) -> f64 {
        self.motion_azimuth.unwrap_or_else(|| {
            stream_rng(self.seed, stream::MOTION).random_range(-PI..PI)
        })
    }
}

/// The system band `[center − width/2, center + width/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub center_hz: f64,
    pub width_hz: f64,
}

impl Band {
    pub fn low(&self) -> f64 {
        self.center_hz - self.width_hz / 2.0
    }

    pub fn high(&self) -> f64 {
        self.center_hz + self.width_hz / 2.0
    }

    fn check(&self, f: f64) -> Result<()> {
        // a few ulps of slack at the edges
        let slack = 1e-9 * self.width_hz;
        if f >= self.low() - slack && f <= self.high() + slack {
            Ok(())
        } else {
            Err(Error::FrequencyOutOfBand {
                f,
                low: self.low(),
                high: self.high(),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct Path {
    /// Linear power, `Σ power = 1` over a generated set.
    pub power: f64,
    pub delay: f64,
    pub doppler: f64,
    pub aoa_azimuth: f64,
    pub aod_azimuth: f64,
    pub sig_rx: SteeringVector,
    pub sig_tx: SteeringVector,
}

#[derive(Debug, Clone)]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("paths", "need at least one path"));
        }
        if let Some(p) = paths
            .iter()
            .find(|p| !(p.power >= 0.0 && p.delay >= 0.0 && p.doppler.is_finite()))
        {
            return Err(Error::invalid(
                "paths",
                format!("bad path: power {} delay {}", p.power, p.delay),
            ));
        }
        let (rx, tx) = (paths[0].sig_rx.len(), paths[0].sig_tx.len());
        for p in &paths {
            if p.sig_rx.len() != rx {
                return Err(Error::DimensionMismatch {
                    expected: rx,
                    actual: p.sig_rx.len(),
                });
            }
            if p.sig_tx.len() != tx {
                return Err(Error::DimensionMismatch {
                    expected: tx,
                    actual: p.sig_tx.len(),
                });
            }
        }
        Ok(PathSet { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// One row per path: `power,delay_ns,doppler_hz,aoa_deg,aod_deg`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "power,delay_ns,doppler_hz,aoa_deg,aod_deg")?;
        for p in &self.paths {
            writeln!(
                out,
                "{},{},{},{},{}",
                p.power,
                p.delay * 1e9,
                p.doppler,
                p.aoa_azimuth.to_degrees(),
                p.aod_azimuth.to_degrees()
            )?;
        }
        Ok(())
    }
}

/// Draws a static path set: `L = max(1, Poisson(mean))`, exponential delays,
/// powers decaying exponentially in delay and normalized to sum to one, and
/// uniform angles of arrival and departure. Dopplers are left at zero; see
/// [`assign_doppler`].
pub fn generate_pathset(
    cfg: &ScenarioConfig,
    bs_geom: &ArrayGeometry,
    ue_geom: &ArrayGeometry,
) -> Result<PathSet> {
    cfg.validate()?;
    bs_geom.validate()?;
    ue_geom.validate()?;
    let mut rng = stream_rng(cfg.seed, stream::PATHS);

    let count = match Poisson::new(cfg.path_count_mean) {
        Ok(poisson) => poisson.sample(&mut rng) as usize,
        // means too small for the sampler are effectively zero
        Err(_) => 0,
    }
    .max(1);
    let delay_dist = Exp::new(1.0 / cfg.delay_spread_s)
        .map_err(|e| Error::invalid("delay_spread_s", e.to_string()))?;

    let mut paths: Vec<Path> = (0..count)
        .map(|_| {
            let delay = delay_dist.sample(&mut rng);
            let aoa = rng.random_range(-PI..PI);
            let aod = rng.random_range(-PI..PI);
            Path {
                power: 10f64.powf(-cfg.power_decay_db_per_ns * delay * 1e9 / 10.0),
                delay,
                doppler: 0.0,
                aoa_azimuth: aoa,
                aod_azimuth: aod,
                sig_rx: steering_vector(ue_geom, aoa, 0.0),
                sig_tx: steering_vector(bs_geom, aod, 0.0),
            }
        })
        .collect();

    let total: f64 = paths.iter().map(|p| p.power).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::invalid(
            "power_decay_db_per_ns",
            "path powers underflow or overflow",
        ));
    }
    paths.iter_mut().for_each(|p| p.power /= total);
    PathSet::new(paths)
}

/// Sets `f_d,ℓ = f_d,max · cos(aoa_ℓ − motion)`.
pub fn assign_doppler(mut paths: PathSet, cfg: &ScenarioConfig) -> PathSet {
    let fd_max = cfg.max_doppler_hz();
    let motion = cfg.resolved_motion_azimuth();
    for p in &mut paths.paths {
        p.doppler = fd_max * (p.aoa_azimuth - motion).cos();
    }
    paths
}

/// Path set plus blockage trace and SNR scale `β`.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub pathset: PathSet,
    pub blockage: Arc<BlockageTrace>,
    pub beta: f64,
    pub band: Band,
}

impl ChannelState {
    pub fn new(pathset: PathSet, blockage: Arc<BlockageTrace>, beta: f64, band: Band) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
        }
        Ok(ChannelState {
            pathset,
            blockage,
            beta,
            band,
        })
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        ChannelState::new(self.pathset.clone(), self.blockage.clone(), beta, self.band)
    }

    /// Collapses the array dimensions for a fixed beam pair.
    pub fn project(&self, w_tx: &SteeringVector, w_rx: &SteeringVector) -> Result<LinkProjection> {
        let norm = 1.0 / (self.pathset.len() as f64).sqrt();
        let taps = self
            .pathset
            .paths()
            .iter()
            .map(|p| {
                let array = w_rx.inner(&p.sig_rx)? * p.sig_tx.inner(w_tx)?;
                Ok(Tap {
                    coeff: array * (p.power.sqrt() * norm),
                    delay: p.delay,
                    doppler: p.doppler,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LinkProjection::new(
            taps,
            self.blockage.clone(),
            self.beta,
            self.band,
        ))
    }
}

#[derive(Debug, Clone, Copy)]
struct Tap {
    coeff: Complex64,
    delay: f64,
    doppler: f64,
}

/// Scalar channel seen through one TX/RX beam pair.
#[derive(Debug, Clone)]
pub struct LinkProjection {
    taps: Vec<Tap>,
    blockage: Arc<BlockageTrace>,
    beta: f64,
    band: Band,
    // c_ℓ c_mᴴ · band average of exp(−2πj (τ_ℓ − τ_m) f), row-major
    cross: Vec<Complex64>,
}

impl LinkProjection {
    fn new(taps: Vec<Tap>, blockage: Arc<BlockageTrace>, beta: f64, band: Band) -> Self {
        let n = taps.len();
        let mut cross = Vec::with_capacity(n * n);
        for a in &taps {
            for b in &taps {
                let dtau = a.delay - b.delay;
                let avg = Complex64::from_polar(1.0, -2.0 * PI * dtau * band.center_hz)
                    * sinc(dtau * band.width_hz);
                cross.push(a.coeff * b.coeff.conj() * avg);
            }
        }
        LinkProjection {
            taps,
            blockage,
            beta,
            band,
            cross,
        }
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Power scale `β h(t)` common to all taps.
    pub fn power_scale(&self, t: f64) -> Result<f64> {
        Ok(self.beta * self.blockage.at(t)?)
    }

    /// Multipath sum without the blockage/β scale.
    fn unscaled_response(&self, t: f64, f: f64) -> Complex64 {
        self.taps
            .iter()
            .map(|tap| {
                let cycles = tap.doppler * t - tap.delay * f;
                tap.coeff * Complex64::from_polar(1.0, 2.0 * PI * cycles.rem_euclid(1.0))
            })
            .sum()
    }

    /// `w_rxᴴ H(t, f) w_tx`.
    pub fn response(&self, t: f64, f: f64) -> Result<Complex64> {
        self.band.check(f)?;
        Ok(self.unscaled_response(t, f) * self.power_scale(t)?.sqrt())
    }

    /// `G(t)` by the midpoint rule on `n` uniformly spaced frequencies.
    pub fn wideband_gain_grid(&self, t: f64, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::invalid("n_freq_samples", "must be at least 1"));
        }
        let scale = self.power_scale(t)?;
        let step = self.band.width_hz / n as f64;
        let sum: f64 = (0..n)
            .map(|k| {
                let f = self.band.low() + (k as f64 + 0.5) * step;
                self.unscaled_response(t, f).norm_sqr()
            })
            .sum();
        Ok(scale * sum / n as f64)
    }

    /// `G(t)` from the closed-form band average of the cross terms.
    pub fn wideband_gain(&self, t: f64) -> Result<f64> {
        let scale = self.power_scale(t)?;
        let n = self.taps.len();
        let mut acc = 0.0;
        for (i, a) in self.taps.iter().enumerate() {
            acc += self.cross[i * n + i].re;
            for (j, b) in self.taps.iter().enumerate().skip(i + 1) {
                let phase = 2.0 * PI * ((a.doppler - b.doppler) * t).rem_euclid(1.0);
                acc += 2.0 * (self.cross[i * n + j] * Complex64::from_polar(1.0, phase)).re;
            }
        }
        Ok(scale * acc.max(0.0))
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// `w_rxᴴ H(t, f) w_tx`.
pub fn channel_response(
    state: &ChannelState,
    t: f64,
    f: f64,
    w_tx: &SteeringVector,
    w_rx: &SteeringVector,
) -> Result<Complex64> {
    state.project(w_tx, w_rx)?.response(t, f)
}

/// How the band integral in `G(t)` is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandIntegration {
    /// Closed form, exact for any delay spread.
    #[default]
    Exact,
    /// Midpoint rule on this many frequencies.
    Grid(usize),
}

/// `γ(t) = G(t) P_tx / (N₀ W)` with `G` on an `n_freq_samples` grid.
#[allow(clippy::too_many_arguments)]
pub fn true_wideband_snr(
    state: &ChannelState,
    t: f64,
    w_tx: &SteeringVector,
    w_rx: &SteeringVector,
    ptx_w: f64,
    n0_w_per_hz: f64,
    n_freq_samples: usize,
) -> Result<f64> {
    let gain = state.project(w_tx, w_rx)?.wideband_gain_grid(t, n_freq_samples)?;
    Ok(gain * ptx_w / (n0_w_per_hz * state.band.width_hz))
}

/// Converts a wideband gain into SNR for the given budget.
pub fn gain_to_snr(gain: f64, ptx_w: f64, n0_w_per_hz: f64, band: Band) -> f64 {
    gain * ptx_w / (n0_w_per_hz * band.width_hz)
}

impl LinkProjection {
    pub fn wideband_snr(
        &self,
        t: f64,
        ptx_w: f64,
        n0_w_per_hz: f64,
        integration: BandIntegration,
    ) -> Result<f64> {
        let gain = match integration {
            BandIntegration::Exact => self.wideband_gain(t)?,
            BandIntegration::Grid(n) => self.wideband_gain_grid(t, n)?,
        };
        Ok(gain_to_snr(gain, ptx_w, n0_w_per_hz, self.band))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrays::ArrayGeometry;

    fn unit_trace() -> Arc<BlockageTrace> {
        Arc::new(BlockageTrace::new(vec![1.0; 100], 1e-3, "unit").unwrap())
    }

    fn iso_path(power: f64, delay: f64, doppler: f64) -> Path {
        let one = SteeringVector::single_element(1, 0).unwrap();
        Path {
            power,
            delay,
            doppler,
            aoa_azimuth: 0.0,
            aod_azimuth: 0.0,
            sig_rx: one.clone(),
            sig_tx: one,
        }
    }

    fn band() -> Band {
        Band {
            center_hz: 28e9,
            width_hz: 500e6,
        }
    }

    fn one() -> SteeringVector {
        SteeringVector::single_element(1, 0).unwrap()
    }

    #[test]
    fn pathset_clamps_to_one_path() {
        let cfg = ScenarioConfig {
            path_count_mean: 1e-9,
            ..Default::default()
        };
        for seed in 0..20 {
            let ps = generate_pathset(
                &ScenarioConfig { seed, ..cfg.clone() },
                &ArrayGeometry::default_bs(),
                &ArrayGeometry::default_ue(),
            )
            .unwrap();
            assert_eq!(ps.len(), 1);
        }
    }

    #[test]
    fn pathset_normalized_and_deterministic() {
        for seed in 0..30 {
            let cfg = ScenarioConfig {
                seed,
                ..Default::default()
            };
            let bs = ArrayGeometry::default_bs();
            let ue = ArrayGeometry::default_ue();
            let a = generate_pathset(&cfg, &bs, &ue).unwrap();
            let b = generate_pathset(&cfg, &bs, &ue).unwrap();
            let total: f64 = a.paths().iter().map(|p| p.power).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert_eq!(a.len(), b.len());
            for (p, q) in a.paths().iter().zip(b.paths()) {
                assert_eq!(p.power.to_bits(), q.power.to_bits());
                assert_eq!(p.delay.to_bits(), q.delay.to_bits());
                assert_eq!(p.aoa_azimuth.to_bits(), q.aoa_azimuth.to_bits());
                assert_eq!(p.sig_tx, q.sig_tx);
            }
        }
    }

    #[test]
    fn doppler_assignment() {
        let ps = PathSet::new(vec![
            iso_path(0.5, 0.0, 0.0),
            Path {
                aoa_azimuth: PI / 3.0,
                ..iso_path(0.5, 0.0, 0.0)
            },
        ])
        .unwrap();

        let still = ScenarioConfig {
            ue_speed_mps: 0.0,
            ..Default::default()
        };
        let out = assign_doppler(ps.clone(), &still);
        assert!(out.paths().iter().all(|p| p.doppler == 0.0));

        let moving = ScenarioConfig {
            ue_speed_mps: 1.0,
            carrier_hz: 60e9,
            motion_azimuth: Some(0.0),
            ..Default::default()
        };
        let out = assign_doppler(ps, &moving);
        let fd_max = 60e9 / 2.997_924_58e8;
        assert!((out.paths()[0].doppler - fd_max).abs() < 1e-9);
        // hand-evaluated: 200.138... · cos 60° ≈ 100.07 Hz
        assert!((out.paths()[1].doppler - 100.069_2).abs() < 1e-3);
        assert!(out.paths()[1].doppler.abs() <= fd_max);
    }

    #[test]
    fn single_unblocked_path_is_unity() {
        let state = ChannelState::new(
            PathSet::new(vec![iso_path(1.0, 0.0, 0.0)]).unwrap(),
            unit_trace(),
            1.0,
            band(),
        )
        .unwrap();
        let h = channel_response(&state, 0.01, 28.1e9, &one(), &one()).unwrap();
        assert!((h - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn full_blockage_zeroes_response() {
        let mut samples = vec![1.0; 10];
        samples[5] = 0.0;
        let trace = Arc::new(BlockageTrace::new(samples, 1e-3, "x").unwrap());
        let state = ChannelState::new(
            PathSet::new(vec![iso_path(1.0, 10e-9, 5.0)]).unwrap(),
            trace,
            1.0,
            band(),
        )
        .unwrap();
        let h = channel_response(&state, 5e-3, 28e9, &one(), &one()).unwrap();
        assert_eq!(h.norm(), 0.0);
    }

    #[test]
    fn two_paths_cancel() {
        // second path delayed by τ with τ f = k + 1/2 at the evaluation point
        let f = 28e9;
        let tau = 20.5 / f;
        let state = ChannelState::new(
            PathSet::new(vec![iso_path(0.5, 0.0, 0.0), iso_path(0.5, tau, 0.0)]).unwrap(),
            unit_trace(),
            1.0,
            band(),
        )
        .unwrap();
        let h = channel_response(&state, 0.0, f, &one(), &one()).unwrap();
        assert!(h.norm() < 1e-9, "{h}");
    }

    #[test]
    fn out_of_range_errors() {
        let state = ChannelState::new(
            PathSet::new(vec![iso_path(1.0, 0.0, 0.0)]).unwrap(),
            unit_trace(),
            1.0,
            band(),
        )
        .unwrap();
        assert!(matches!(
            channel_response(&state, 1.0, 28e9, &one(), &one()),
            Err(Error::TimeOutOfRange { .. })
        ));
        assert!(matches!(
            channel_response(&state, 0.0, 29e9, &one(), &one()),
            Err(Error::FrequencyOutOfBand { .. })
        ));
        assert!(ChannelState::new(state.pathset.clone(), unit_trace(), 0.0, band()).is_err());
    }

    #[test]
    fn flat_channel_snr_independent_of_grid() {
        let g = 0.37;
        let state = ChannelState::new(
            PathSet::new(vec![iso_path(1.0, 35e-9, 12.0)]).unwrap(),
            unit_trace(),
            g,
            band(),
        )
        .unwrap();
        let expect = g * 2.0 / (1e-12 * 500e6);
        for n in [1, 3, 64, 101] {
            let snr = true_wideband_snr(&state, 0.02, &one(), &one(), 2.0, 1e-12, n).unwrap();
            assert!((snr / expect - 1.0).abs() < 1e-12);
        }
        let double = true_wideband_snr(&state, 0.02, &one(), &one(), 4.0, 1e-12, 64).unwrap();
        assert!((double / expect - 2.0).abs() < 1e-12);
        assert!(true_wideband_snr(&state, 0.02, &one(), &one(), 2.0, 1e-12, 0).is_err());
    }

    #[test]
    fn static_response_tracks_blockage_only() {
        let trace = Arc::new(
            BlockageTrace::new((0..50).map(|i| 1.0 + 0.1 * i as f64).collect(), 1e-3, "ramp")
                .unwrap(),
        );
        let state = ChannelState::new(
            PathSet::new(vec![iso_path(0.7, 0.0, 0.0), iso_path(0.3, 40e-9, 0.0)]).unwrap(),
            trace.clone(),
            1.0,
            band(),
        )
        .unwrap();
        let link = state.project(&one(), &one()).unwrap();
        let f = 28.05e9;
        let base = link.response(0.0, f).unwrap();
        for t in [0.003, 0.0171, 0.04] {
            let h = link.response(t, f).unwrap();
            let expect = base * trace.at(t).unwrap().sqrt();
            assert!((h - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_gain_invariant_to_h_beta_tradeoff() {
        let ps = generate_pathset(
            &ScenarioConfig {
                seed: 3,
                ..Default::default()
            },
            &ArrayGeometry::default_bs(),
            &ArrayGeometry::default_ue(),
        )
        .unwrap();
        let ps = assign_doppler(ps, &ScenarioConfig::default());
        let samples: Vec<f64> = (0..40).map(|i| 0.5 + (i as f64 * 0.3).sin().abs()).collect();
        let scaled: Vec<f64> = samples.iter().map(|h| h * 7.5).collect();
        let bs = ArrayGeometry::default_bs();
        let ue = ArrayGeometry::default_ue();
        let w_tx = steering_vector(&bs, 0.2, 0.0);
        let w_rx = steering_vector(&ue, -0.4, 0.0);
        let a = ChannelState::new(
            ps.clone(),
            Arc::new(BlockageTrace::new(samples, 1e-3, "a").unwrap()),
            2.0,
            band(),
        )
        .unwrap();
        let b = ChannelState::new(
            ps,
            Arc::new(BlockageTrace::new(scaled, 1e-3, "b").unwrap()),
            2.0 / 7.5,
            band(),
        )
        .unwrap();
        for t in [0.0, 0.0123, 0.03] {
            let ga = a.project(&w_tx, &w_rx).unwrap().wideband_gain(t).unwrap();
            let gb = b.project(&w_tx, &w_rx).unwrap().wideband_gain(t).unwrap();
            assert!((ga / gb - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_zero_delay_path_flat_in_frequency() {
        let state = ChannelState::new(
            PathSet::new(vec![iso_path(1.0, 0.0, 30.0)]).unwrap(),
            unit_trace(),
            1.0,
            band(),
        )
        .unwrap();
        let link = state.project(&one(), &one()).unwrap();
        let m0 = link.response(0.01, band().low()).unwrap().norm();
        for f in [27.8e9, 28e9, 28.2e9, band().high()] {
            assert!((link.response(0.01, f).unwrap().norm() - m0).abs() < 1e-12);
        }
    }

    #[test]
    fn pathset_csv_header() {
        let ps = PathSet::new(vec![iso_path(1.0, 5e-9, 1.0)]).unwrap();
        let mut buf = Vec::new();
        ps.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("power,delay_ns,doppler_hz,aoa_deg,aod_deg"));
        assert_eq!(lines.next(), Some("1,5,1,0,0"));
    }
}
