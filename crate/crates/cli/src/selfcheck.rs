//! Fast invariant checks runnable from the command line.

use std::sync::Arc;

use mmw_snr::blockage::BlockageTrace;
use mmw_snr::calib::{target_snr, Percentile, RateProfile};
use mmw_snr::channel::{Band, ChannelState, Path, PathSet};
use mmw_snr::filters::{filter_trace, FilterSpec};
use mmw_snr::par::Execution;
use mmw_snr::rng::{stream_rng, SimRng};
use mmw_snr::sounder::{Sounder, SounderConfig, SounderTap};
use mmw_snr::syncsig::{aligned_times, monte_carlo_raw, LinkBudget, SnrKind, SnrTrace, SyncConfig};
use mmw_snr::units::linear_to_db;
use mmw_snr::arrays::SteeringVector;
use mmw_snr::Complex64;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn shannon() -> Check {
    let p = RateProfile::for_percentile(Percentile::P50);
    let g50 = linear_to_db(target_snr(&p, 1480e6).unwrap_or(f64::NAN));
    let g5 = linear_to_db(target_snr(&p, 70e6).unwrap_or(f64::NAN));
    check(
        "shannon_targets",
        (g50 - 10.79).abs() < 0.01 && (g5 + 8.89).abs() < 0.01,
        format!("p50 {g50:.3} dB, p5 {g5:.3} dB"),
    )
}

fn schedule() -> Check {
    let cfg = SyncConfig::default();
    let counts: Vec<usize> = (0..cfg.n_dir)
        .map(|d| aligned_times(&cfg, 10.0, d).map(|t| t.len()).unwrap_or(0))
        .collect();
    check(
        "schedule",
        counts.iter().all(|&c| c == 625),
        format!("aligned samples per direction over 10 s: {counts:?}"),
    )
}

fn direct_first_order(xs: &[f64], alpha: f64) -> Vec<f64> {
    // closed form of the recursion started at the first sample
    (0..xs.len())
        .map(|i| {
            let mut y = (1.0 - alpha).powi(i as i32) * xs[0];
            for (j, x) in xs.iter().enumerate().take(i + 1).skip(1) {
                y += alpha * (1.0 - alpha).powi((i - j) as i32) * x;
            }
            y
        })
        .collect()
}

fn direct_moving_average(xs: &[f64], m: usize) -> Vec<f64> {
    (0..xs.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(m);
            xs[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

fn filters(rng: &mut SimRng) -> Check {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..60);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..4.0)).collect();
        let t = (0..n).map(|i| i as f64).collect();
        let raw = match SnrTrace::new(t, xs.clone(), SnrKind::Raw) {
            Ok(r) => r,
            Err(_) => return check("filters", false, "trace construction failed".into()),
        };
        let alpha = rng.random_range(0.01..=1.0);
        let m = rng.random_range(1..12);
        for (spec, expect) in [
            (FilterSpec::first_order(alpha), direct_first_order(&xs, alpha)),
            (FilterSpec::moving_average(m), direct_moving_average(&xs, m)),
        ] {
            let Ok(out) = filter_trace(&raw, spec) else {
                return check("filters", false, format!("{spec} failed"));
            };
            for (a, b) in out.values().iter().zip(&expect) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check("filters", worst <= 1e-12, format!("max deviation {worst:e}"))
}

fn unbiased() -> Check {
    let band = Band {
        center_hz: 28e9,
        width_hz: 500e6,
    };
    let one = match SteeringVector::single_element(1, 0) {
        Ok(v) => v,
        Err(e) => return check("estimator_bias", false, e.to_string()),
    };
    let paths = [(0.6, 0.0, 12.0), (0.3, 35e-9, -40.0), (0.1, 90e-9, 75.0)]
        .iter()
        .map(|&(power, delay, doppler)| Path {
            power,
            delay,
            doppler,
            aoa_azimuth: 0.0,
            aod_azimuth: 0.0,
            sig_rx: one.clone(),
            sig_tx: one.clone(),
        })
        .collect();
    let result = (|| -> mmw_snr::Result<(f64, f64, f64)> {
        let trace = Arc::new(BlockageTrace::new(vec![1.0; 2], 1.0, "flat")?);
        let state = ChannelState::new(PathSet::new(paths)?, trace, 1.0, band)?;
        let link = state.project(&one, &one)?;
        let budget = LinkBudget {
            ptx_w: 1.0,
            n0_w_per_hz: 1e-5,
        };
        let truth = link.wideband_snr(0.3, budget.ptx_w, budget.n0_w_per_hz, Default::default())?;
        let stats = monte_carlo_raw(&link, 0.3, &SyncConfig::default(), budget, 20_000, 1, Execution::default())?;
        Ok((truth, stats.mean, stats.std_err()))
    })();
    match result {
        Ok((truth, mean, se)) => check(
            "estimator_bias",
            (mean - truth).abs() <= 4.0 * se,
            format!("mean {mean:.4e}, true {truth:.4e}, 4σ {:.1e}", 4.0 * se),
        ),
        Err(e) => check("estimator_bias", false, e.to_string()),
    }
}

fn sounder() -> Check {
    let cfg = SounderConfig::default();
    let result = (|| -> mmw_snr::Result<(usize, f64, f64)> {
        let s = Sounder::new(&cfg)?;
        let taps = [SounderTap {
            delay: 9,
            gain: Complex64::new(0.0, 1.0),
        }];
        let cap = s.capture(&taps, 25e3, f64::INFINITY, cfg.avg_symbols, 0)?;
        let frame = s.estimate(&cap, Execution::Sequential)?.remove(0);
        let (bin, power) = frame.peak();
        Ok((bin, power, frame.chosen_cfo_hz))
    })();
    match result {
        Ok((bin, power, cfo)) => check(
            "sounder",
            bin == 9 && (power - 1.0).abs() < 1e-6 && cfo == 25e3,
            format!("peak bin {bin}, power {power:.6}, CFO {cfo} Hz"),
        ),
        Err(e) => check("sounder", false, e.to_string()),
    }
}

pub fn run_checks() -> Vec<Check> {
    let mut rng = stream_rng(20_231, 0);
    vec![shannon(), schedule(), filters(&mut rng), unbiased(), sounder()]
}
