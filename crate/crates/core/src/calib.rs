//! Target SNR from rate requirements.
//!
//! LTE spectral efficiency → LTE rate → mmWave rate (×9) → Shannon target
//! `γ_t = 2^{R/(δ W)} − 1` → synchronization-signal level `γ_t / N_tx`, since
//! the BS array gain is unavailable to the omnidirectional sync signals.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::units::linear_to_db;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Percentile {
    /// Median user.
    P50,
    /// Cell-edge user.
    P5,
}

impl fmt::Display for Percentile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Percentile::P50 => "p50",
            Percentile::P5 => "p5",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateProfile {
    pub percentile: Percentile,
    /// LTE cell spectral efficiency, bit/s/Hz.
    pub lte_spectral_eff: f64,
    pub lte_bw_hz: f64,
    pub mmw_bw_hz: f64,
    pub mmw_multiplier: f64,
    /// Fraction of resources left after control overhead.
    pub overhead_delta: f64,
    pub n_tx: usize,
}

impl RateProfile {
    /// Baseline of a 4×4 SU-MIMO LTE system on 50 MHz, scaled to 500 MHz.
    pub fn for_percentile(percentile: Percentile) -> Self {
        RateProfile {
            percentile,
            lte_spectral_eff: match percentile {
                Percentile::P50 => 3.28,
                Percentile::P5 => 0.154,
            },
            lte_bw_hz: 50e6,
            mmw_bw_hz: 500e6,
            mmw_multiplier: 9.0,
            overhead_delta: 0.8,
            n_tx: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lte_spectral_eff >= 0.0 && self.lte_spectral_eff.is_finite()) {
            return Err(Error::invalid("lte_spectral_eff", "must be nonnegative"));
        }
        for (name, v) in [
            ("lte_bw_hz", self.lte_bw_hz),
            ("mmw_bw_hz", self.mmw_bw_hz),
            ("mmw_multiplier", self.mmw_multiplier),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if !(self.overhead_delta > 0.0 && self.overhead_delta <= 1.0) {
            return Err(Error::invalid("overhead_delta", "must be in (0, 1]"));
        }
        if self.n_tx == 0 {
            return Err(Error::invalid("n_tx", "must be at least 1"));
        }
        Ok(())
    }
}

/// LTE rate `ρ · W_LTE`, bit/s.
pub fn lte_rate(profile: &RateProfile) -> f64 {
    profile.lte_spectral_eff * profile.lte_bw_hz
}

/// Expected mmWave rate, bit/s.
pub fn mmwave_rate(profile: &RateProfile) -> f64 {
    lte_rate(profile) * profile.mmw_multiplier
}

/// Shannon target `2^{R/(δ W)} − 1`, linear.
pub fn target_snr(profile: &RateProfile, rate_bps: f64) -> Result<f64> {
    if !(rate_bps >= 0.0 && rate_bps.is_finite()) {
        return Err(Error::invalid("rate_bps", "must be nonnegative"));
    }
    let exponent = rate_bps / (profile.overhead_delta * profile.mmw_bw_hz);
    // exp_m1 keeps precision for small rates
    Ok((exponent * std::f64::consts::LN_2).exp_m1())
}

/// `γ_t / N_tx`, linear.
pub fn sync_level(gamma_t: f64, n_tx: usize) -> Result<f64> {
    if n_tx == 0 {
        return Err(Error::invalid("n_tx", "must be at least 1"));
    }
    Ok(gamma_t / n_tx as f64)
}

/// All derived quantities for one profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Targets {
    pub mmwave_rate_bps: f64,
    pub gamma_t: f64,
    pub gamma_t_db: f64,
    pub sync_level: f64,
    pub sync_level_db: f64,
}

pub fn derive_targets(profile: &RateProfile) -> Result<Targets> {
    profile.validate()?;
    let rate = mmwave_rate(profile);
    let gamma_t = target_snr(profile, rate)?;
    let sync = sync_level(gamma_t, profile.n_tx)?;
    Ok(Targets {
        mmwave_rate_bps: rate,
        gamma_t,
        gamma_t_db: linear_to_db(gamma_t),
        sync_level: sync,
        sync_level_db: linear_to_db(sync),
    })
}
