//! Estimation-error metrics and target-SNR sweeps.
//!
//! Errors are `|γ̄ − γ|`, by default in dB. A sweep runs one channel
//! realization per seed, calibrates `β` for every target, measures the raw
//! estimate on the best UE direction and filters it with each spec. The
//! per-seed time-averaged error is then averaged over seeds.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arrays::{uniform_codebook, ArrayGeometry, SteeringVector};
use crate::blockage::{calibrate_beta, synthesize_trace, BlockageEventSpec, BlockageTrace};
use crate::channel::{
    assign_doppler, generate_pathset, BandIntegration, ChannelState, LinkProjection, ScenarioConfig,
};
use crate::filters::{filter_trace, FilterSpec};
use crate::par::{self, Execution};
use crate::syncsig::{aligned_times, track_link, LinkBudget, SnrKind, SnrTrace, SyncConfig, SyncTxMode};
use crate::units::{db_to_linear, LINEAR_FLOOR};
use crate::{Error, Result};

/// First-order coefficients swept when none are configured.
pub const DEFAULT_ALPHAS: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.5];
/// Moving-average lengths swept when none are configured.
pub const DEFAULT_WINDOWS: [usize; 4] = [2, 4, 8, 16];
/// Leading filtered samples excluded from error means.
pub const DEFAULT_DROP_FIRST: usize = 10;

/// No filter plus every default first-order and moving-average spec.
pub fn default_filter_bank() -> Vec<FilterSpec> {
    std::iter::once(FilterSpec::None)
        .chain(DEFAULT_ALPHAS.iter().map(|&a| FilterSpec::first_order(a)))
        .chain(DEFAULT_WINDOWS.iter().map(|&m| FilterSpec::moving_average(m)))
        .collect()
}

/// `-30, -25, …, 25` dB.
pub fn default_target_grid_db() -> Vec<f64> {
    (0..12).map(|i| -30.0 + 5.0 * i as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDomain {
    Linear,
    #[default]
    Db,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub t: Vec<f64>,
    pub err: Vec<f64>,
    pub domain: ErrorDomain,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.err.len()
    }

    pub fn is_empty(&self) -> bool {
        self.err.is_empty()
    }

    /// Mean over samples `skip..`. `None` if nothing is left.
    pub fn mean_after(&self, skip: usize) -> Option<f64> {
        let tail = self.err.get(skip..)?;
        if tail.is_empty() {
            None
        } else {
            Some(tail.iter().sum::<f64>() / tail.len() as f64)
        }
    }
}

fn to_db(x: f64) -> f64 {
    10.0 * x.max(LINEAR_FLOOR).log10()
}

pub fn error_series(truth: &SnrTrace, est: &SnrTrace, domain: ErrorDomain) -> Result<ErrorSeries> {
    if truth.kind() != SnrKind::TrueSnr {
        return Err(Error::invalid("truth", format!("expected true_snr, got {}", truth.kind())));
    }
    if est.kind() == SnrKind::TrueSnr {
        return Err(Error::invalid("est", "expected a raw or filtered trace"));
    }
    if truth.t() != est.t() {
        return Err(Error::GridMismatch(format!(
            "{} true samples vs {} estimated, or differing instants",
            truth.len(),
            est.len()
        )));
    }
    let err = truth
        .values()
        .iter()
        .zip(est.values())
        .map(|(&g, &e)| match domain {
            ErrorDomain::Linear => (e - g).abs(),
            ErrorDomain::Db => (to_db(e) - to_db(g)).abs(),
        })
        .collect();
    Ok(ErrorSeries {
        t: truth.t().to_vec(),
        err,
        domain,
    })
}

/// Empirical CDF at `n_points` quantile knots: knot `j` (1-based) is the
/// order statistic at index `⌈j·n/n_points⌉ − 1`, paired with the fraction
/// of samples not exceeding it.
pub fn error_cdf(series: &ErrorSeries, n_points: usize) -> Result<Vec<(f64, f64)>> {
    if series.is_empty() {
        return Err(Error::invalid("series", "is empty"));
    }
    if n_points == 0 {
        return Err(Error::invalid("n_points", "must be at least 1"));
    }
    let mut sorted = series.err.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok((1..=n_points)
        .map(|j| {
            let idx = (j * n).div_ceil(n_points) - 1;
            let v = sorted[idx];
            let count = sorted.partition_point(|&x| x <= v);
            (v, count as f64 / n as f64)
        })
        .collect())
}

/// `err_db,prob` (or `err_linear,prob`).
pub fn write_cdf_csv<W: Write>(cdf: &[(f64, f64)], domain: ErrorDomain, mut out: W) -> std::io::Result<()> {
    let col = match domain {
        ErrorDomain::Db => "err_db",
        ErrorDomain::Linear => "err_linear",
    };
    writeln!(out, "{col},prob")?;
    for (v, p) in cdf {
        writeln!(out, "{v},{p}")?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum BlockageSource {
    /// Synthesized per seed; the spec's own seed is replaced.
    Synthetic(BlockageEventSpec),
    /// Shared by every seed.
    Trace(Arc<BlockageTrace>),
}

/// Everything needed to turn a seed into a channel realization.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub channel: ScenarioConfig,
    pub sync: SyncConfig,
    pub bs: ArrayGeometry,
    pub ue: ArrayGeometry,
    pub blockage: BlockageSource,
    pub sync_tx: SyncTxMode,
    pub budget: LinkBudget,
    pub horizon_s: f64,
    pub integration: BandIntegration,
}

impl Scenario {
    /// BS element count; the sync level is `γ_t / n_tx`.
    pub fn n_tx(&self) -> usize {
        self.bs.num_elements()
    }
}

/// One seed's channel at `β = 1`, projected on the chosen beam pair.
#[derive(Debug, Clone)]
pub struct Realization {
    pub seed: u64,
    pub state: ChannelState,
    pub w_tx: SteeringVector,
    pub w_rx: SteeringVector,
    pub direction: usize,
    pub times: Vec<f64>,
}

impl Realization {
    pub fn new(scn: &Scenario, seed: u64) -> Result<Self> {
        let channel = ScenarioConfig {
            seed,
            ..scn.channel.clone()
        };
        let pathset = assign_doppler(generate_pathset(&channel, &scn.bs, &scn.ue)?, &channel);
        let trace = match &scn.blockage {
            BlockageSource::Synthetic(spec) => Arc::new(synthesize_trace(&BlockageEventSpec {
                seed,
                ..spec.clone()
            })?),
            BlockageSource::Trace(t) => t.clone(),
        };
        let w_tx = scn.sync_tx.weights(&scn.bs, &pathset)?;
        let state = ChannelState::new(pathset, trace, 1.0, channel.band())?;
        scn.sync.validate(&state.band)?;

        // strongest UE codebook beam at t = 0; blockage scales all beams alike
        let codebook = uniform_codebook(&scn.ue, scn.sync.n_dir)?;
        let mut best = (0, f64::NEG_INFINITY);
        for (i, beam) in codebook.beams().iter().enumerate() {
            let g = state.project(&w_tx, beam)?.wideband_gain(0.0)?;
            if g > best.1 {
                best = (i, g);
            }
        }
        let direction = best.0;
        let times = aligned_times(&scn.sync, scn.horizon_s, direction)?;
        Ok(Realization {
            seed,
            state,
            w_tx,
            w_rx: codebook.beams()[direction].clone(),
            direction,
            times,
        })
    }

    /// `β` giving a time-averaged `γ` of `level` (linear) on the aligned
    /// instants.
    pub fn calibrate(&self, scn: &Scenario, level: f64) -> Result<f64> {
        calibrate_beta(
            &self.state,
            level,
            &self.w_tx,
            &self.w_rx,
            scn.budget.ptx_w,
            scn.budget.n0_w_per_hz,
            &self.times,
            scn.integration,
        )
    }

    pub fn link(&self, beta: f64) -> Result<LinkProjection> {
        self.state.with_beta(beta)?.project(&self.w_tx, &self.w_rx)
    }

    /// Raw and true traces at scale `beta`. The measurement noise depends on
    /// the seed only, so different `beta` share the same noise draws.
    pub fn track(&self, scn: &Scenario, beta: f64) -> Result<(SnrTrace, SnrTrace)> {
        track_link(
            &self.link(beta)?,
            &scn.sync,
            self.direction,
            &self.times,
            scn.budget,
            self.seed,
            scn.integration,
        )
    }
}

/// Traces of one run at a fixed sync level.
#[derive(Debug, Clone)]
pub struct TraceRun {
    pub beta: f64,
    pub direction: usize,
    pub truth: SnrTrace,
    pub raw: SnrTrace,
    pub filtered: Vec<SnrTrace>,
}

pub fn run_traces(
    scn: &Scenario,
    seed: u64,
    sync_level: f64,
    filters: &[FilterSpec],
) -> Result<TraceRun> {
    let real = Realization::new(scn, seed)?;
    let beta = real.calibrate(scn, sync_level)?;
    let (raw, truth) = real.track(scn, beta)?;
    let filtered = filters
        .iter()
        .map(|&f| filter_trace(&raw, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceRun {
        beta,
        direction: real.direction,
        truth,
        raw,
        filtered,
    })
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub targets_db: Vec<f64>,
    pub filters: Vec<FilterSpec>,
    pub seeds: Vec<u64>,
    pub drop_first: usize,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub target_snr_db: Vec<f64>,
    pub filters: Vec<FilterSpec>,
    /// `[target][filter]`, mean dB error over the seeds that calibrated.
    pub mean_err_db: Vec<Vec<Option<f64>>>,
    /// `[target]`, seeds that contributed.
    pub seeds_used: Vec<usize>,
    pub n_seeds: usize,
}

impl SweepResult {
    pub fn get(&self, target: usize, filter: usize) -> Option<f64> {
        self.mean_err_db[target][filter]
    }

    /// `target_snr_db,filter_id,mean_err_db,n_seeds`; missing cells read
    /// `missing`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "target_snr_db,filter_id,mean_err_db,n_seeds")?;
        for (ti, target) in self.target_snr_db.iter().enumerate() {
            for (fi, spec) in self.filters.iter().enumerate() {
                match self.mean_err_db[ti][fi] {
                    Some(e) => writeln!(out, "{target},{spec},{e},{}", self.seeds_used[ti])?,
                    None => writeln!(out, "{target},{spec},missing,{}", self.seeds_used[ti])?,
                }
            }
        }
        Ok(())
    }
}

/// Per-target, per-filter time-mean error for one seed; `None` where `β`
/// cannot be calibrated.
fn sweep_seed(
    scn: &Scenario,
    settings: &SweepSettings,
    seed: u64,
) -> Result<Vec<Option<Vec<f64>>>> {
    let real = match Realization::new(scn, seed) {
        Ok(r) => r,
        Err(Error::CalibrationImpossible(_)) => return Ok(vec![None; settings.targets_db.len()]),
        Err(e) => return Err(e),
    };
    settings
        .targets_db
        .iter()
        .map(|&target_db| {
            let level = db_to_linear(target_db) / scn.n_tx() as f64;
            let beta = match real.calibrate(scn, level) {
                Ok(b) => b,
                Err(Error::CalibrationImpossible(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let (raw, truth) = real.track(scn, beta)?;
            settings
                .filters
                .iter()
                .map(|&spec| {
                    let est = filter_trace(&raw, spec)?;
                    let series = error_series(&truth, &est, ErrorDomain::Db)?;
                    series.mean_after(settings.drop_first).ok_or_else(|| {
                        Error::invalid("drop_first", "leaves no samples to average")
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some)
        })
        .collect()
}

/// Mean dB error versus target SNR `γ_t` (dB); each target is calibrated to
/// the sync level `γ_t / n_tx`.
pub fn sweep_target_snr(scn: &Scenario, settings: &SweepSettings) -> Result<SweepResult> {
    if settings.targets_db.is_empty() || settings.filters.is_empty() || settings.seeds.is_empty() {
        return Err(Error::invalid("sweep", "targets, filters and seeds must be nonempty"));
    }
    for f in &settings.filters {
        f.validate()?;
    }
    let per_seed = par::map_slice(&settings.seeds, settings.execution, |&seed| {
        sweep_seed(scn, settings, seed)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let n_t = settings.targets_db.len();
    let n_f = settings.filters.len();
    let mut mean_err_db = vec![vec![None; n_f]; n_t];
    let mut seeds_used = vec![0; n_t];
    for ti in 0..n_t {
        let rows: Vec<&Vec<f64>> = per_seed.iter().filter_map(|s| s[ti].as_ref()).collect();
        seeds_used[ti] = rows.len();
        if rows.is_empty() {
            continue;
        }
        for fi in 0..n_f {
            let sum: f64 = rows.iter().map(|r| r[fi]).sum();
            mean_err_db[ti][fi] = Some(sum / rows.len() as f64);
        }
    }
    Ok(SweepResult {
        target_snr_db: settings.targets_db.clone(),
        filters: settings.filters.clone(),
        mean_err_db,
        seeds_used,
        n_seeds: settings.seeds.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockage::EventKind;
    use proptest::prelude::*;

    fn trace(values: Vec<f64>, kind: SnrKind) -> SnrTrace {
        let t = (0..values.len()).map(|i| i as f64 * 0.016).collect();
        SnrTrace::new(t, values, kind).unwrap()
    }

    fn series(err: Vec<f64>) -> ErrorSeries {
        ErrorSeries {
            t: (0..err.len()).map(|i| i as f64).collect(),
            err,
            domain: ErrorDomain::Db,
        }
    }

    #[test]
    fn perfect_estimate() {
        let v = vec![0.5, 2.0, 7.0];
        let s = error_series(
            &trace(v.clone(), SnrKind::TrueSnr),
            &trace(v, SnrKind::Filtered),
            ErrorDomain::Db,
        )
        .unwrap();
        assert!(s.err.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn constant_db_offset() {
        let truth = vec![0.1, 1.0, 30.0];
        let est = truth.iter().map(|x| x * 10f64.powf(0.3)).collect();
        let s = error_series(
            &trace(truth, SnrKind::TrueSnr),
            &trace(est, SnrKind::Raw),
            ErrorDomain::Db,
        )
        .unwrap();
        assert!(s.err.iter().all(|&e| (e - 3.0).abs() < 1e-12));
    }

    #[test]
    fn negative_raw_values() {
        let truth = trace(vec![0.01, 0.02, 0.03], SnrKind::TrueSnr);
        let raw = trace(vec![-0.5, 0.02, -1e-3], SnrKind::Raw);
        for d in [ErrorDomain::Linear, ErrorDomain::Db] {
            let s = error_series(&truth, &raw, d).unwrap();
            assert!(s.err.iter().all(|e| e.is_finite() && *e >= 0.0));
        }
        let s = error_series(&truth, &raw, ErrorDomain::Db).unwrap();
        assert!((s.err[0] - (-20.0 - (-120.0))).abs() < 1e-9);
    }

    #[test]
    fn grid_and_kind_checks() {
        let a = trace(vec![1.0, 1.0], SnrKind::TrueSnr);
        let b = trace(vec![1.0, 1.0, 1.0], SnrKind::Raw);
        assert!(matches!(error_series(&a, &b, ErrorDomain::Db), Err(Error::GridMismatch(_))));
        assert!(error_series(&a, &a, ErrorDomain::Db).is_err());
    }

    #[test]
    fn cdf_hand_counts() {
        let cdf = error_cdf(&series(vec![3.0, 1.0, 4.0, 2.0]), 4).unwrap();
        assert_eq!(cdf, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 0.75), (4.0, 1.0)]);
        let zero = error_cdf(&series(vec![0.0; 9]), 5).unwrap();
        assert!(zero.iter().all(|&(v, p)| v == 0.0 && p == 1.0));
        assert!(error_cdf(&series(vec![]), 4).is_err());
    }

    #[test]
    fn cdf_csv() {
        let mut buf = Vec::new();
        write_cdf_csv(&[(0.5, 1.0)], ErrorDomain::Db, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "err_db,prob\n0.5,1\n");
    }

    proptest! {
        #[test]
        fn cdf_monotone_and_permutation_invariant(
            mut xs in prop::collection::vec(0.0f64..50.0, 1..200),
            n in 1usize..64,
            rot in 0usize..200,
        ) {
            let cdf = error_cdf(&series(xs.clone()), n).unwrap();
            prop_assert_eq!(cdf.last().unwrap().1, 1.0);
            for w in cdf.windows(2) {
                prop_assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
            }
            let k = rot % xs.len();
            xs.rotate_left(k);
            xs.reverse();
            prop_assert_eq!(error_cdf(&series(xs), n).unwrap(), cdf);
        }
    }

    fn small_scenario(blockage: BlockageSource) -> Scenario {
        Scenario {
            channel: ScenarioConfig::default(),
            sync: SyncConfig::default(),
            bs: ArrayGeometry::default_bs(),
            ue: ArrayGeometry::default_ue(),
            blockage,
            sync_tx: SyncTxMode::Omni,
            budget: LinkBudget {
                ptx_w: 1.0,
                n0_w_per_hz: 4e-21,
            },
            horizon_s: 1.0,
            integration: BandIntegration::Exact,
        }
    }

    fn settings(targets: Vec<f64>, seeds: Vec<u64>, exec: Execution) -> SweepSettings {
        SweepSettings {
            targets_db: targets,
            filters: vec![FilterSpec::None, FilterSpec::first_order(0.2), FilterSpec::moving_average(4)],
            seeds,
            drop_first: 2,
            execution: exec,
        }
    }

    #[test]
    fn realization_uses_best_beam() {
        let scn = small_scenario(BlockageSource::Synthetic(BlockageEventSpec::for_kind(EventKind::Walker, 0)));
        let r = Realization::new(&scn, 4).unwrap();
        assert_eq!(r.times.len(), (1000 - r.direction).div_ceil(16));
        let codebook = uniform_codebook(&scn.ue, 16).unwrap();
        let chosen = r.state.project(&r.w_tx, &r.w_rx).unwrap().wideband_gain(0.0).unwrap();
        for beam in codebook.beams() {
            assert!(r.state.project(&r.w_tx, beam).unwrap().wideband_gain(0.0).unwrap() <= chosen);
        }
    }

    #[test]
    fn sweep_deterministic_across_modes() {
        let scn = small_scenario(BlockageSource::Synthetic(BlockageEventSpec::for_kind(EventKind::Walker, 0)));
        let a = sweep_target_snr(&scn, &settings(vec![-20.0, 10.0], vec![1, 2, 3], Execution::Parallel)).unwrap();
        let b = sweep_target_snr(&scn, &settings(vec![-20.0, 10.0], vec![1, 2, 3], Execution::Sequential)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seeds_used, vec![3, 3]);
        // raw error shrinks with SNR
        assert!(a.get(1, 0).unwrap() < a.get(0, 0).unwrap());
    }

    #[test]
    fn raw_column_is_raw_error_mean() {
        let scn = small_scenario(BlockageSource::Synthetic(BlockageEventSpec::for_kind(EventKind::Hand, 0)));
        let s = settings(vec![0.0], vec![7], Execution::Sequential);
        let res = sweep_target_snr(&scn, &s).unwrap();
        let run = run_traces(&scn, 7, db_to_linear(0.0) / 64.0, &[]).unwrap();
        let direct = error_series(&run.truth, &run.raw, ErrorDomain::Db).unwrap().mean_after(2).unwrap();
        assert_eq!(res.get(0, 0).unwrap(), direct);
    }

    #[test]
    fn blocked_channel_is_missing() {
        let dead = Arc::new(BlockageTrace::new(vec![0.0; 10_000], 128e-6, "dead").unwrap());
        let scn = small_scenario(BlockageSource::Trace(dead));
        let res = sweep_target_snr(&scn, &settings(vec![0.0, 5.0], vec![1], Execution::Sequential)).unwrap();
        assert_eq!(res.seeds_used, vec![0, 0]);
        assert!(res.mean_err_db.iter().flatten().all(Option::is_none));
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3);
        assert!(text.lines().nth(1).unwrap().ends_with(",none,missing,0"));
    }

    #[test]
    fn filter_bank_and_grid() {
        assert_eq!(default_filter_bank().len(), 1 + 5 + 4);
        let g = default_target_grid_db();
        assert_eq!(g.len(), 12);
        assert_eq!((g[0], g[11]), (-30.0, 25.0));
    }
}
