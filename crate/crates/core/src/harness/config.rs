//! Experiment configuration files (TOML).
//!
//! Every field except `name`, `scenario` and `[sweep]` has a default; see
//! `experiments/` for one file per figure replica.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::equalizer::{CombinerKind, FseKind};
use crate::estimation::DEFAULT_PILOT_SEED;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Colocated,
    Cellfree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    Fbmc,
    Ofdm,
    Both,
}

impl Waveform {
    pub fn has_fbmc(self) -> bool {
        matches!(self, Waveform::Fbmc | Waveform::Both)
    }

    pub fn has_ofdm(self) -> bool {
        matches!(self, Waveform::Ofdm | Waveform::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiMode {
    Perfect,
    Estimated,
}

/// Where the FSE's composite pulse comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum FseDesign {
    /// The true power delay profile of each user.
    #[serde(rename = "pdp-exact")]
    PdpExact,
    /// The profile averaged from channel (estimate) powers over the antennas.
    #[serde(rename = "pdp-approx")]
    PdpApprox,
    /// The per-subcarrier equivalent channel.
    #[serde(rename = "equivalent")]
    Equivalent,
}

impl fmt::Display for FseDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FseDesign::PdpExact => "pdp-exact",
            FseDesign::PdpApprox => "pdp-approx",
            FseDesign::Equivalent => "equivalent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SweepParam {
    /// Receive antennas (co-located).
    #[serde(rename = "n")]
    Antennas,
    #[serde(rename = "snr_db")]
    SnrDb,
    /// Number of APs (cell-free).
    #[serde(rename = "n_ap")]
    Aps,
    /// Power-control exponent (cell-free).
    #[serde(rename = "nu")]
    Exponent,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Antennas => "n",
            SweepParam::SnrDb => "snr_db",
            SweepParam::Aps => "n_ap",
            SweepParam::Exponent => "nu",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

fn d_users() -> usize {
    4
}
fn d_subcarriers() -> usize {
    64
}
fn d_overlap() -> usize {
    4
}
fn d_combiner() -> CombinerKind {
    CombinerKind::Zf
}
fn d_csi() -> CsiMode {
    CsiMode::Perfect
}
fn d_fse_lengths() -> Vec<usize> {
    vec![0]
}
fn d_designs() -> Vec<FseDesign> {
    vec![FseDesign::PdpExact]
}
fn d_fse_kind() -> FseKind {
    FseKind::ZfLs
}
fn d_corrections() -> Vec<bool> {
    vec![false]
}
fn d_snr() -> f64 {
    10.0
}
fn d_trials() -> usize {
    100
}
fn d_seed() -> u64 {
    1
}
fn d_data_symbols() -> usize {
    16
}
fn d_constellation() -> usize {
    4
}
fn d_antennas() -> usize {
    128
}
fn d_aps() -> usize {
    9
}
fn d_antennas_per_ap() -> usize {
    4
}
fn d_area() -> f64 {
    2.0
}
fn d_exponent() -> f64 {
    0.5
}
fn d_max_power() -> f64 {
    0.2
}
fn d_temperature() -> f64 {
    290.0
}
fn d_boltzmann() -> f64 {
    crate::cellfree::BOLTZMANN
}
fn d_bandwidth() -> f64 {
    20e6
}
fn d_noise_figure() -> f64 {
    9.0
}
fn d_rms_delay() -> [f64; 2] {
    [90.0, 110.0]
}
fn d_sample_rate() -> f64 {
    15.36e6
}
fn d_threshold() -> f64 {
    -30.0
}
fn d_cp() -> usize {
    16
}
fn d_pilot_seed() -> u64 {
    DEFAULT_PILOT_SEED
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub scenario: Scenario,
    #[serde(default = "waveform_default")]
    pub waveform: Waveform,
    #[serde(default = "d_users")]
    pub num_users: usize,
    #[serde(default = "d_subcarriers")]
    pub num_subcarriers: usize,
    #[serde(default = "d_overlap")]
    pub overlap: usize,
    #[serde(default = "d_combiner")]
    pub combiner: CombinerKind,
    #[serde(default = "d_csi")]
    pub csi: CsiMode,
    /// FSE lengths to compare; `0` means combining only.
    #[serde(default = "d_fse_lengths")]
    pub fse_lengths: Vec<usize>,
    #[serde(default = "d_designs")]
    pub fse_designs: Vec<FseDesign>,
    #[serde(default = "d_fse_kind")]
    pub fse_kind: FseKind,
    /// With estimated CSI, run each FSE arm uncorrected (`false`) and/or corrected (`true`).
    #[serde(default = "d_corrections")]
    pub corrections: Vec<bool>,
    #[serde(default = "d_snr")]
    pub snr_db: f64,
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Complex data symbols per subcarrier and user (two FBMC slots each).
    #[serde(default = "d_data_symbols")]
    pub data_symbols: usize,
    #[serde(default = "d_constellation")]
    pub constellation: usize,
    #[serde(default = "d_antennas")]
    pub num_antennas: usize,
    #[serde(default = "d_aps")]
    pub num_aps: usize,
    #[serde(default = "d_antennas_per_ap")]
    pub antennas_per_ap: usize,
    #[serde(default = "d_area")]
    pub area_side_km: f64,
    #[serde(default = "d_exponent")]
    pub power_exponent: f64,
    #[serde(default = "d_max_power")]
    pub max_power_w: f64,
    #[serde(default = "d_temperature")]
    pub noise_temperature_k: f64,
    #[serde(default = "d_boltzmann")]
    pub boltzmann: f64,
    #[serde(default = "d_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "d_noise_figure")]
    pub noise_figure_db: f64,
    /// Drop the receiver noise entirely (SIR runs).
    #[serde(default)]
    pub noiseless: bool,
    /// RMS delay spread range in ns; drawn uniformly per user (or per AP-user pair).
    #[serde(default = "d_rms_delay")]
    pub rms_delay_ns: [f64; 2],
    #[serde(default = "d_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "d_threshold")]
    pub tap_threshold_db: f64,
    /// Estimated channel length; defaults to `num_subcarriers / num_users`.
    #[serde(default)]
    pub estimator_taps: Option<usize>,
    /// Empty slots after the pilot slot; defaults to `2 (overlap - 1)`, i.e.
    /// `overlap - 1` guard symbols of duration `T`.
    #[serde(default)]
    pub guard_slots: Option<usize>,
    #[serde(default = "d_cp")]
    pub cp_length: usize,
    #[serde(default = "d_pilot_seed")]
    pub pilot_seed: u64,
    /// Also emit every per-trial, per-user SINR/SIR as its own row.
    #[serde(default)]
    pub record_samples: bool,
    pub sweep: Sweep,
}

fn waveform_default() -> Waveform {
    Waveform::Fbmc
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|span| {
                    let start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
                    let end = text[span.start..].find('\n').map_or(text.len(), |i| span.start + i);
                    text[start..end].split('=').next().unwrap_or("").trim().to_string()
                })
                .filter(|f| !f.is_empty())
                .unwrap_or_else(|| "<file>".into());
            Error::config(&field, e.message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn estimator_taps(&self) -> usize {
        self.estimator_taps
            .unwrap_or(self.num_subcarriers / self.num_users.max(1))
    }

    pub fn guard_slots(&self) -> usize {
        self.guard_slots
            .unwrap_or(2 * self.overlap.saturating_sub(1))
    }

    /// Checks ranges and cross-field consistency.
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(Error::config(field, "must be positive"))
            } else {
                Ok(())
            }
        };
        positive("num_users", self.num_users)?;
        positive("trials", self.trials)?;
        positive("data_symbols", self.data_symbols)?;
        positive("num_antennas", self.num_antennas)?;
        positive("num_aps", self.num_aps)?;
        positive("antennas_per_ap", self.antennas_per_ap)?;
        if self.num_subcarriers < 2 || self.num_subcarriers % 2 != 0 {
            return Err(Error::config("num_subcarriers", "must be even and at least 2"));
        }
        if !(2..=4).contains(&self.overlap) {
            return Err(Error::config("overlap", "must be 2, 3 or 4"));
        }
        if crate::qam::Constellation::qam(self.constellation).is_err() {
            return Err(Error::config("constellation", "must be 4, 16, 64, 256, ..."));
        }
        if 2 * self.data_symbols * self.num_subcarriers < crate::harness::metrics::MIN_SINR_SYMBOLS {
            return Err(Error::config(
                "data_symbols",
                "too few symbols per user for an SINR estimate (need 2 x data_symbols x num_subcarriers >= 1000)",
            ));
        }
        if self.fse_lengths.is_empty() {
            return Err(Error::config("fse_lengths", "must not be empty"));
        }
        if let Some(l) = self.fse_lengths.iter().find(|&&l| l != 0 && l % 2 == 0) {
            return Err(Error::config("fse_lengths", format!("lengths must be odd or 0, got {l}")));
        }
        if self.fse_designs.is_empty() {
            return Err(Error::config("fse_designs", "must not be empty"));
        }
        if self.corrections.is_empty() {
            return Err(Error::config("corrections", "must not be empty"));
        }
        let taps = self.estimator_taps();
        if self.csi == CsiMode::Estimated && (taps == 0 || self.num_users * taps > self.num_subcarriers) {
            return Err(Error::config(
                "estimator_taps",
                format!(
                    "{} users x {taps} taps do not fit on {} subcarriers",
                    self.num_users, self.num_subcarriers
                ),
            ));
        }
        let [lo, hi] = self.rms_delay_ns;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::config("rms_delay_ns", "need 0 < min <= max"));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::config("sample_rate_hz", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.power_exponent) {
            return Err(Error::config("power_exponent", "must be in [0, 1]"));
        }
        if !(self.max_power_w > 0.0) {
            return Err(Error::config("max_power_w", "must be positive"));
        }
        if !(self.area_side_km > 0.0) {
            return Err(Error::config("area_side_km", "must be positive"));
        }
        if self.scenario == Scenario::Cellfree
            && self
                .fse_designs
                .iter()
                .any(|&d| d != FseDesign::Equivalent)
            && self.fse_lengths.iter().any(|&l| l > 0)
        {
            return Err(Error::config(
                "fse_designs",
                "the cell-free scenario supports only the `equivalent` design",
            ));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::config("sweep.values", "must not be empty"));
        }
        for &v in &self.sweep.values {
            match self.sweep.param {
                SweepParam::Antennas | SweepParam::Aps => {
                    if !(v >= 1.0 && v.fract() == 0.0) {
                        return Err(Error::config("sweep.values", format!("`{v}` is not a positive count")));
                    }
                }
                SweepParam::Exponent => {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::config("sweep.values", format!("exponent {v} outside [0, 1]")));
                    }
                }
                SweepParam::SnrDb => {
                    if !v.is_finite() {
                        return Err(Error::config("sweep.values", "SNR must be finite"));
                    }
                }
            }
        }
        match (self.scenario, self.sweep.param) {
            (Scenario::Colocated, SweepParam::Aps | SweepParam::Exponent) => {
                return Err(Error::config(
                    "sweep.param",
                    "n_ap and nu sweeps need the cell-free scenario",
                ))
            }
            (Scenario::Cellfree, SweepParam::Antennas | SweepParam::SnrDb) => {
                return Err(Error::config(
                    "sweep.param",
                    "the cell-free scenario sweeps n_ap or nu",
                ))
            }
            _ => {}
        }
        if self.scenario == Scenario::Cellfree && self.sweep.param == SweepParam::Aps {
            for &v in &self.sweep.values {
                let r = v.sqrt().round();
                if r * r != v {
                    return Err(Error::config("sweep.values", format!("AP count {v} is not a perfect square")));
                }
            }
        }
        if self.scenario == Scenario::Cellfree && self.sweep.param == SweepParam::Exponent {
            let r = (self.num_aps as f64).sqrt().round();
            if r * r != self.num_aps as f64 {
                return Err(Error::config("num_aps", "must be a perfect square"));
            }
        }
        if self.waveform.has_ofdm() {
            let longest = crate::channel::tdlc_pdp(hi * 1e-9, self.sample_rate_hz, self.tap_threshold_db)?.len();
            if self.cp_length + 1 < longest {
                return Err(Error::config(
                    "cp_length",
                    format!("cyclic prefix must cover {} channel taps", longest),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "mini"
scenario = "colocated"
[sweep]
param = "n"
values = [8, 16]
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.num_subcarriers, 64);
        assert_eq!(cfg.estimator_taps(), 16);
        assert_eq!(cfg.guard_slots(), 6);
        assert_eq!(cfg.combiner, CombinerKind::Zf);
    }

    #[test]
    fn errors_name_the_field() {
        let text = MINIMAL.replace("name = \"mini\"", "name = \"mini\"\nnum_users = 0");
        match ExperimentConfig::from_toml(&text).unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "num_users"),
            other => panic!("unexpected {other}"),
        }
        let text = MINIMAL.replace("name = \"mini\"", "name = \"mini\"\nbogus = 1");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn even_fse_length_is_rejected() {
        let text = MINIMAL.replace("name = \"mini\"", "name = \"mini\"\nfse_lengths = [0, 4]");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
