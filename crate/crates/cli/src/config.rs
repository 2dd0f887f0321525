//! Experiment configuration file.
//!
//! One TOML document drives every subcommand. Unknown keys are rejected.
//! Relative `blockage.trace_path` values resolve against the directory of
//! the config file; `output_dir` resolves against the working directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use mmw_snr::arrays::ArrayGeometry;
use mmw_snr::blockage::{load_trace, BlockageEventSpec, EventKind, RampShape};
use mmw_snr::calib::{Percentile, RateProfile};
use mmw_snr::channel::{BandIntegration, ScenarioConfig};
use mmw_snr::eval::{self, BlockageSource, Scenario};
use mmw_snr::filters::FilterSpec;
use mmw_snr::sounder::{SounderConfig, SounderTap};
use mmw_snr::syncsig::{LinkBudget, SyncConfig, SyncTxMode};
use mmw_snr::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "MMW_SNR_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Realization seeds. `trace` and `sounder` use the first one.
    pub seeds: Vec<u64>,
    pub percentiles: Vec<Percentile>,
    pub horizon_s: f64,
    pub output_dir: PathBuf,
    /// Replaced per run by the realization seed.
    pub scenario: ScenarioConfig,
    pub sync: SyncConfig,
    pub arrays: ArraysSection,
    pub link: LinkSection,
    pub blockage: BlockageSection,
    pub rates: RatesSection,
    pub filters: Vec<FilterSpec>,
    pub sweep: SweepSection,
    pub sounder: SounderSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: (0..20).collect(),
            percentiles: vec![Percentile::P5],
            horizon_s: 10.0,
            output_dir: PathBuf::from("out"),
            scenario: ScenarioConfig::default(),
            sync: SyncConfig::default(),
            arrays: ArraysSection::default(),
            link: LinkSection::default(),
            blockage: BlockageSection::default(),
            rates: RatesSection::default(),
            filters: vec![FilterSpec::first_order(0.3), FilterSpec::moving_average(4)],
            sweep: SweepSection::default(),
            sounder: SounderSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraysSection {
    pub bs: ArrayGeometry,
    pub ue: ArrayGeometry,
}

impl Default for ArraysSection {
    fn default() -> Self {
        ArraysSection {
            bs: ArrayGeometry::default_bs(),
            ue: ArrayGeometry::default_ue(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub ptx_w: f64,
    /// Only the ratio to `β` matters once `β` is calibrated.
    pub n0_w_per_hz: f64,
    pub sync_tx: SyncTxMode,
    pub integration: BandIntegration,
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection {
            ptx_w: 1.0,
            n0_w_per_hz: 4e-21,
            sync_tx: SyncTxMode::Omni,
            integration: BandIntegration::Exact,
        }
    }
}

/// Either a synthetic event class (with optional overrides of its
/// defaults) or a recorded trace. With neither set, walker events are
/// synthesized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlockageSection {
    pub kind: Option<EventKind>,
    pub trace_path: Option<PathBuf>,
    pub depth_db: Option<f64>,
    pub event_rate_hz: Option<f64>,
    pub transition_s: Option<f64>,
    pub hold_s: Option<f64>,
    pub ramp: Option<RampShape>,
}

impl BlockageSection {
    /// Synthetic spec over `duration_s`, or `None` for a trace file.
    pub fn event_spec(&self, duration_s: f64, seed: u64) -> Option<BlockageEventSpec> {
        if self.trace_path.is_some() {
            return None;
        }
        let kind = self.kind.unwrap_or(EventKind::Walker);
        let mut spec = BlockageEventSpec::for_kind(kind, seed);
        spec.duration_s = duration_s;
        if let Some(v) = self.depth_db {
            spec.depth_db = v;
        }
        if let Some(v) = self.event_rate_hz {
            spec.event_rate_hz = v;
        }
        if let Some(v) = self.transition_s {
            spec.transition_s = v;
        }
        if let Some(v) = self.hold_s {
            spec.hold_s = v;
        }
        if let Some(v) = self.ramp {
            spec.ramp = v;
        }
        Some(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSection {
    pub p50_spectral_eff: f64,
    pub p5_spectral_eff: f64,
    pub lte_bw_hz: f64,
    pub mmw_bw_hz: f64,
    pub mmw_multiplier: f64,
    pub overhead_delta: f64,
}

impl Default for RatesSection {
    fn default() -> Self {
        let p50 = RateProfile::for_percentile(Percentile::P50);
        let p5 = RateProfile::for_percentile(Percentile::P5);
        RatesSection {
            p50_spectral_eff: p50.lte_spectral_eff,
            p5_spectral_eff: p5.lte_spectral_eff,
            lte_bw_hz: p50.lte_bw_hz,
            mmw_bw_hz: p50.mmw_bw_hz,
            mmw_multiplier: p50.mmw_multiplier,
            overhead_delta: p50.overhead_delta,
        }
    }
}

impl RatesSection {
    /// `n_tx` is the BS element count.
    pub fn profile(&self, percentile: Percentile, n_tx: usize) -> RateProfile {
        RateProfile {
            percentile,
            lte_spectral_eff: match percentile {
                Percentile::P50 => self.p50_spectral_eff,
                Percentile::P5 => self.p5_spectral_eff,
            },
            lte_bw_hz: self.lte_bw_hz,
            mmw_bw_hz: self.mmw_bw_hz,
            mmw_multiplier: self.mmw_multiplier,
            overhead_delta: self.overhead_delta,
            n_tx,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Data-link target SNRs `γ_t` in dB.
    pub targets_db: Vec<f64>,
    pub include_none: bool,
    pub alphas: Vec<f64>,
    pub windows: Vec<usize>,
    pub drop_first: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            targets_db: eval::default_target_grid_db(),
            include_none: true,
            alphas: eval::DEFAULT_ALPHAS.to_vec(),
            windows: eval::DEFAULT_WINDOWS.to_vec(),
            drop_first: eval::DEFAULT_DROP_FIRST,
        }
    }
}

impl SweepSection {
    pub fn filters(&self) -> Vec<FilterSpec> {
        let none = self.include_none.then_some(FilterSpec::None);
        none.into_iter()
            .chain(self.alphas.iter().map(|&a| FilterSpec::first_order(a)))
            .chain(self.windows.iter().map(|&m| FilterSpec::moving_average(m)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SounderSection {
    pub receiver: SounderConfig,
    pub taps: Vec<SounderTap>,
    pub cfo_hz: f64,
    /// Per-sample SNR of the unblocked capture; `inf` for noiseless.
    pub snr_db: f64,
    pub duration_s: f64,
    /// Every `pdp_stride`-th kept PDP is written to the PDP CSV.
    pub pdp_stride: usize,
    /// Also write the first averaging window as a binary capture.
    pub write_capture: bool,
}

impl Default for SounderSection {
    fn default() -> Self {
        SounderSection {
            receiver: SounderConfig::default(),
            taps: vec![
                SounderTap {
                    delay: 0,
                    gain: Complex64::new(1.0, 0.0),
                },
                SounderTap {
                    delay: 6,
                    gain: Complex64::new(0.3, -0.2),
                },
                SounderTap {
                    delay: 15,
                    gain: Complex64::new(-0.1, 0.15),
                },
            ],
            cfo_hz: 18e3,
            snr_db: 20.0,
            duration_s: 10.0,
            pdp_stride: 100,
            write_capture: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Self = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg.with_base_dir(&base), base))
    }

    /// Resolves a relative `blockage.trace_path` against `base`.
    pub fn with_base_dir(mut self, base: &Path) -> Self {
        if let Some(p) = &self.blockage.trace_path {
            if p.is_relative() {
                self.blockage.trace_path = Some(base.join(p));
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let field = |section: &'static str| {
            move |e: mmw_snr::Error| CliError::Config(format!("{section}: {e}"))
        };
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds: must not be empty".into()));
        }
        if !(self.horizon_s > 0.0 && self.horizon_s.is_finite()) {
            return Err(CliError::Config("horizon_s: must be positive".into()));
        }
        self.scenario.validate().map_err(field("scenario"))?;
        self.sync.validate(&self.scenario.band()).map_err(field("sync"))?;
        self.arrays.bs.validate().map_err(field("arrays.bs"))?;
        self.arrays.ue.validate().map_err(field("arrays.ue"))?;
        for (name, v) in [("ptx_w", self.link.ptx_w), ("n0_w_per_hz", self.link.n0_w_per_hz)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("link.{name}: must be positive")));
            }
        }
        if let BandIntegration::Grid(0) = self.link.integration {
            return Err(CliError::Config("link.integration: grid needs at least one point".into()));
        }
        match (&self.blockage.kind, &self.blockage.trace_path) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "blockage: set either kind or trace_path, not both".into(),
                ))
            }
            (_, None) => {
                let spec = self.blockage.event_spec(self.horizon_s, 0).expect("no trace path");
                spec.validate().map_err(field("blockage"))?;
            }
            (None, Some(_)) => {}
        }
        for p in [Percentile::P50, Percentile::P5] {
            self.rates
                .profile(p, self.arrays.bs.num_elements())
                .validate()
                .map_err(field("rates"))?;
        }
        for (i, f) in self.filters.iter().enumerate() {
            f.validate()
                .map_err(|e| CliError::Config(format!("filters[{i}]: {e}")))?;
        }
        if self.sweep.targets_db.iter().any(|t| !t.is_finite()) {
            return Err(CliError::Config("sweep.targets_db: values must be finite".into()));
        }
        for (i, f) in self.sweep.filters().iter().enumerate() {
            f.validate()
                .map_err(|e| CliError::Config(format!("sweep filter {i}: {e}")))?;
        }
        let s = &self.sounder;
        s.receiver.validate().map_err(field("sounder.receiver"))?;
        if let Some(t) = s.taps.iter().find(|t| t.delay >= s.receiver.n_points) {
            return Err(CliError::Config(format!(
                "sounder.taps: delay {} outside 0..{}",
                t.delay, s.receiver.n_points
            )));
        }
        if !(s.duration_s >= s.receiver.frame_period_s && s.duration_s.is_finite()) {
            return Err(CliError::Config("sounder.duration_s: shorter than one frame".into()));
        }
        if s.pdp_stride == 0 {
            return Err(CliError::Config("sounder.pdp_stride: must be at least 1".into()));
        }
        if s.snr_db.is_nan() || !s.cfo_hz.is_finite() {
            return Err(CliError::Config("sounder: snr_db and cfo_hz must be numbers".into()));
        }
        Ok(())
    }

    pub fn budget(&self) -> LinkBudget {
        LinkBudget {
            ptx_w: self.link.ptx_w,
            n0_w_per_hz: self.link.n0_w_per_hz,
        }
    }

    pub fn blockage_source(&self) -> Result<BlockageSource, CliError> {
        match (&self.blockage.trace_path, self.blockage.event_spec(self.horizon_s, 0)) {
            (Some(path), _) => Ok(BlockageSource::Trace(Arc::new(
                load_trace(path).map_err(CliError::from_core)?,
            ))),
            (None, Some(spec)) => Ok(BlockageSource::Synthetic(spec)),
            (None, None) => unreachable!("event_spec is Some without a trace path"),
        }
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        Ok(Scenario {
            channel: self.scenario.clone(),
            sync: self.sync.clone(),
            bs: self.arrays.bs,
            ue: self.arrays.ue,
            blockage: self.blockage_source()?,
            sync_tx: self.link.sync_tx,
            budget: self.budget(),
            horizon_s: self.horizon_s,
            integration: self.link.integration,
        })
    }
}
