//! The `trace`, `sweep` and `sounder` runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mmw_snr::blockage::{load_trace, synthesize_trace, write_trace, BlockageTrace};
use mmw_snr::calib::derive_targets;
use mmw_snr::eval::{
    error_cdf, error_series, run_traces, sweep_target_snr, write_cdf_csv, ErrorDomain, SweepSettings,
};
use mmw_snr::par::{self, Execution};
use mmw_snr::rng::mix_seed;
use mmw_snr::sounder::{
    blockage_from_peaks, simulate_frame, write_capture, write_pdp_csv, PdpFrame, Sounder, SounderTap,
};
use mmw_snr::syncsig::{sub_signal_energy, SnrTrace};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Number of knots in the error CDF files.
pub const CDF_POINTS: usize = 100;

/// Files written by a run, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        body(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn trace(&mut self, name: &str, trace: &SnrTrace) -> Result<(), CliError> {
        self.write(name, |w| trace.write_csv(w))
    }

    fn finish(mut self, manifest_name: &str, mut manifest: Value) -> Result<RunReport, CliError> {
        let mut files = self.files.clone();
        files.push(manifest_name.to_string());
        manifest["outputs"] = json!(files);
        self.write(manifest_name, |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            writeln!(w)
        })?;
        Ok(RunReport {
            output_dir: self.dir,
            files: self.files,
        })
    }
}

fn core(e: mmw_snr::Error) -> CliError {
    CliError::from_core(e)
}

fn config_json(cfg: &ExperimentConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn schedule_json(cfg: &ExperimentConfig) -> Value {
    json!({
        "t_per_s": cfg.sync.t_per_s,
        "n_dir": cfg.sync.n_dir,
        "revisit_period_s": cfg.sync.revisit_period_s(),
        "horizon_s": cfg.horizon_s,
    })
}

/// True, raw and filtered traces for `seeds[0]` at each configured
/// percentile, plus dB error CDFs.
pub fn run_trace(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let scn = cfg.scenario()?;
    let seed = cfg.seeds[0];
    let mut out = Outputs::new(&cfg.output_dir)?;
    let mut cases = serde_json::Map::new();

    for &pct in &cfg.percentiles {
        let targets = derive_targets(&cfg.rates.profile(pct, scn.n_tx())).map_err(core)?;
        let run = run_traces(&scn, seed, targets.sync_level, &cfg.filters).map_err(core)?;

        out.trace(&format!("{pct}_true.csv"), &run.truth)?;
        out.trace(&format!("{pct}_raw.csv"), &run.raw)?;
        let mut estimates = vec![("raw".to_string(), &run.raw)];
        for (spec, trace) in cfg.filters.iter().zip(&run.filtered) {
            out.trace(&format!("{pct}_filtered_{spec}.csv"), trace)?;
            estimates.push((spec.id(), trace));
        }

        let mut mean_err = serde_json::Map::new();
        for (id, est) in estimates {
            let mut series = error_series(&run.truth, est, ErrorDomain::Db).map_err(core)?;
            let skip = cfg.sweep.drop_first.min(series.len().saturating_sub(1));
            series.t.drain(..skip);
            series.err.drain(..skip);
            let cdf = error_cdf(&series, CDF_POINTS).map_err(core)?;
            out.write(&format!("{pct}_cdf_{id}.csv"), |w| write_cdf_csv(&cdf, ErrorDomain::Db, w))?;
            mean_err.insert(id, json!(series.mean_after(0)));
        }

        cases.insert(
            pct.to_string(),
            json!({
                "targets": targets,
                "beta": run.beta,
                "direction": run.direction,
                "samples": run.truth.len(),
                "mean_err_db": mean_err,
            }),
        );
    }

    let manifest = json!({
        "command": "trace",
        "seed": seed,
        "config": config_json(cfg),
        "derived": {
            "n_tx": scn.n_tx(),
            "e_s_j": sub_signal_energy(cfg.link.ptx_w, &cfg.sync),
            "schedule": schedule_json(cfg),
            "cases": cases,
        },
    });
    out.finish("trace_manifest.json", manifest)
}

/// Mean dB error versus target SNR over all seeds.
pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let scn = cfg.scenario()?;
    let settings = SweepSettings {
        targets_db: cfg.sweep.targets_db.clone(),
        filters: cfg.sweep.filters(),
        seeds: cfg.seeds.clone(),
        drop_first: cfg.sweep.drop_first,
        execution: exec,
    };
    let result = sweep_target_snr(&scn, &settings).map_err(core)?;
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("sweep.csv", |w| result.write_csv(w))?;

    let n_tx = scn.n_tx() as f64;
    let levels: Vec<f64> = settings
        .targets_db
        .iter()
        .map(|t| t - 10.0 * n_tx.log10())
        .collect();
    let manifest = json!({
        "command": "sweep",
        "config": config_json(cfg),
        "derived": {
            "n_tx": scn.n_tx(),
            "e_s_j": sub_signal_energy(cfg.link.ptx_w, &cfg.sync),
            "schedule": schedule_json(cfg),
            "sync_levels_db": levels,
            "filters": settings.filters.iter().map(|f| f.id()).collect::<Vec<_>>(),
            "seeds_used": result.seeds_used,
        },
    });
    out.finish("sweep_manifest.json", manifest)
}

fn demo_blockage(cfg: &ExperimentConfig, seed: u64) -> Result<BlockageTrace, CliError> {
    match (&cfg.blockage.trace_path, cfg.blockage.event_spec(cfg.sounder.duration_s, seed)) {
        (Some(path), _) => load_trace(path).map_err(core),
        (None, Some(spec)) => synthesize_trace(&spec).map_err(core),
        (None, None) => unreachable!("event_spec is Some without a trace path"),
    }
}

/// Frames handled per parallel batch.
const SOUNDER_BATCH: usize = 2048;

/// Synthesizes a sounder recording whose taps follow the configured
/// blockage, then extracts the blockage trace back from the PDP peaks.
/// Only the PDPs kept by decimation are simulated; every frame has its own
/// noise seed, so skipping the others does not change the result.
pub fn run_sounder(cfg: &ExperimentConfig, exec: Execution) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let s = &cfg.sounder;
    let rx = &s.receiver;
    let seed = cfg.seeds[0];
    let sounder = Sounder::new(rx).map_err(core)?;
    let truth = demo_blockage(cfg, seed)?;
    let noise_seed = mix_seed(seed, u64::MAX);

    let n_frames = (s.duration_s / rx.frame_period_s).round() as usize;
    let kept: Vec<usize> = (0..n_frames).step_by(rx.decimation).collect();
    let scale_at = |index: usize| -> Result<f64, CliError> {
        let t = index as f64 * rx.frame_period_s;
        // the last kept frame may land a rounding error past the trace end
        let slack = 0.5 * truth.sample_period_s();
        let t = if t > truth.end_time() && t <= truth.end_time() + slack {
            truth.end_time()
        } else {
            t
        };
        truth.at(t).map_err(core)
    };

    let mut peaks = Vec::with_capacity(kept.len());
    let mut stored: Vec<PdpFrame> = Vec::new();
    for (batch_no, batch) in kept.chunks(SOUNDER_BATCH).enumerate() {
        let frames = par::map_indices(batch.len(), exec, |i| -> Result<PdpFrame, CliError> {
            let index = batch[i];
            simulate_frame(&sounder, &s.taps, s.cfo_hz, s.snr_db, index, scale_at(index)?, noise_seed)
                .map_err(core)
        });
        for (i, frame) in frames.into_iter().enumerate() {
            let frame = frame?;
            peaks.push(frame.peak().1);
            if (batch_no * SOUNDER_BATCH + i).is_multiple_of(s.pdp_stride) {
                stored.push(frame);
            }
        }
    }
    let extracted = blockage_from_peaks(peaks, rx.trace_period_s()).map_err(core)?;

    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("sounder_pdp.csv", |w| write_pdp_csv(&stored, rx.n_points, w))?;
    let trace_path = out.dir.join("sounder_blockage.csv");
    write_trace(&extracted, &trace_path).map_err(core)?;
    out.files.push("sounder_blockage.csv".into());
    if s.write_capture {
        let amp = scale_at(0)?.sqrt();
        let taps: Vec<SounderTap> = s
            .taps
            .iter()
            .map(|t| SounderTap {
                delay: t.delay,
                gain: t.gain * amp,
            })
            .collect();
        let cap = sounder
            .capture(&taps, s.cfo_hz, s.snr_db, rx.avg_symbols, mix_seed(noise_seed, 0))
            .map_err(core)?;
        out.write("sounder_capture.bin", |w| write_capture(&cap, w))?;
    }

    let cfo_counts = {
        let mut counts: Vec<(f64, usize)> = rx.hypotheses().into_iter().map(|f| (f, 0)).collect();
        for f in &stored {
            if let Some(c) = counts.iter_mut().find(|c| c.0 == f.chosen_cfo_hz) {
                c.1 += 1;
            }
        }
        counts
    };
    let manifest = json!({
        "command": "sounder",
        "seed": seed,
        "config": config_json(cfg),
        "derived": {
            "frames_total": n_frames,
            "frames_simulated": kept.len(),
            "trace_samples": extracted.len(),
            "trace_period_s": extracted.sample_period_s(),
            "window_duration_s": rx.window_duration_s(),
            "cfo_hypotheses_hz": rx.hypotheses(),
            "chosen_cfo_counts_in_pdp_csv": cfo_counts.iter().map(|c| c.1).collect::<Vec<_>>(),
            "pdp_rows": stored.len(),
        },
    });
    out.finish("sounder_manifest.json", manifest)
}
