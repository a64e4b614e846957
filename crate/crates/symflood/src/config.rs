//! Simulation parameters and unit helpers.
//!
//! [`SimConfig`] carries every physical and receiver parameter of a run.
//! Defaults describe a 2.4 GHz on-off-keyed link at 100 kbps: 10 us
//! symbols, 0.2 us pulses, a 1.875 us detection window split into 18
//! buffers, simulated at a 96 MHz complex-baseband rate. Configs travel
//! as flat key-value TOML files; keys match the field names below.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm. Requires a positive power.
pub fn watts_to_dbm(p_watts: f64) -> f64 {
    10.0 * p_watts.log10() + 30.0
}

/// All parameters of a simulation run.
///
/// `|sample|^2` of any waveform is instantaneous power in watts, so the
/// amplitude scale is fixed by `tx_power_dbm` and the detector threshold
/// by `rx_sensitivity_dbm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Carrier frequency in Hz. Sets path loss and per-path phase.
    pub carrier_freq_hz: f64,
    /// Symbol interval in seconds. One bit occupies one interval.
    #[serde(rename = "symbol_interval_Ts_s")]
    pub symbol_interval_s: f64,
    /// Pulse duration in seconds; a 1-bit is one pulse, a 0-bit silence.
    #[serde(rename = "pulse_duration_Tp_s")]
    pub pulse_duration_s: f64,
    /// Listening window at the start of each symbol interval, seconds.
    #[serde(rename = "window_L_s")]
    pub window_s: f64,
    /// Duration of one detection buffer inside the window, seconds.
    pub buffer_duration_s: f64,
    /// Number of detection buffers evaluated per window.
    pub detections_per_window: u32,
    /// Transmit power in dBm; pulse peak power equals this.
    pub tx_power_dbm: f64,
    /// Receiver noise power in dBm (before the noise figure).
    pub noise_power_dbm: f64,
    /// Receiver noise figure in dB, added to `noise_power_dbm`.
    pub noise_figure_db: f64,
    /// Receiver sensitivity in dBm; the comparator threshold amplitude
    /// is the square root of this power.
    pub rx_sensitivity_dbm: f64,
    /// Occupied signal bandwidth in Hz (two-sided at baseband).
    pub signal_bandwidth_hz: f64,
    /// Complex-baseband simulation sample rate in Hz.
    pub baseband_sample_rate_hz: f64,
    /// Data rate in bits per second; must equal 1 / symbol interval.
    pub data_rate_bps: f64,
    /// Adds first-order image-source wall reflections when true.
    pub reflections_enabled: bool,
    /// Switches receiver noise injection on or off.
    pub noise_enabled: bool,
    /// Master seed; all per-trial and per-node streams derive from it.
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            carrier_freq_hz: 2.4e9,
            symbol_interval_s: 10e-6,
            pulse_duration_s: 0.2e-6,
            window_s: 1.875e-6,
            buffer_duration_s: 1.875e-6 / 18.0,
            detections_per_window: 18,
            tx_power_dbm: 0.0,
            noise_power_dbm: -103.0,
            noise_figure_db: 5.0,
            rx_sensitivity_dbm: -90.0,
            signal_bandwidth_hz: 10e6,
            baseband_sample_rate_hz: 96e6,
            data_rate_bps: 1e5,
            reflections_enabled: false,
            noise_enabled: true,
            rng_seed: 1,
        }
    }
}

/// A violated configuration invariant. Each variant names the fields
/// involved, in config-file key spelling.
#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("detections_per_window must be at least 1")]
    NoDetections,
    #[error(
        "pulse_duration_Tp_s = {tp} exceeds symbol_interval_Ts_s / 10 = {limit}"
    )]
    PulseTooLong { tp: f64, limit: f64 },
    #[error("window_L_s = {window} must be shorter than symbol_interval_Ts_s = {ts}")]
    WindowTooLong { window: f64, ts: f64 },
    #[error(
        "buffer_duration_s * detections_per_window = {total} exceeds window_L_s = {window}"
    )]
    BuffersExceedWindow { total: f64, window: f64 },
    #[error(
        "baseband_sample_rate_hz = {rate} is below 2 * signal_bandwidth_hz = {nyquist}"
    )]
    Undersampled { rate: f64, nyquist: f64 },
    #[error(
        "data_rate_bps * symbol_interval_Ts_s = {product}, expected exactly 1"
    )]
    RateMismatch { product: f64 },
    #[error("config file error: {0}")]
    Io(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Relative slack for invariants that are exact in real arithmetic but
/// accumulate rounding when expressed in floating point.
const REL_TOL: f64 = 1e-9;

impl SimConfig {
    /// Checks every cross-field invariant. Pure and idempotent.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive: [(&'static str, f64); 9] = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("symbol_interval_Ts_s", self.symbol_interval_s),
            ("pulse_duration_Tp_s", self.pulse_duration_s),
            ("window_L_s", self.window_s),
            ("buffer_duration_s", self.buffer_duration_s),
            ("signal_bandwidth_hz", self.signal_bandwidth_hz),
            ("baseband_sample_rate_hz", self.baseband_sample_rate_hz),
            ("data_rate_bps", self.data_rate_bps),
            ("rx_sensitivity_dbm", dbm_to_watts(self.rx_sensitivity_dbm)),
        ];
        for (field, value) in positive {
            // NaN must fail too, so test the finite case explicitly.
            if !value.is_finite() || value <= 0.0 {
                return Err(ConfigError::NonPositive { field, value });
            }
        }
        if self.detections_per_window == 0 {
            return Err(ConfigError::NoDetections);
        }
        let tp_limit = self.symbol_interval_s / 10.0;
        if self.pulse_duration_s > tp_limit * (1.0 + REL_TOL) {
            return Err(ConfigError::PulseTooLong {
                tp: self.pulse_duration_s,
                limit: tp_limit,
            });
        }
        if self.window_s >= self.symbol_interval_s {
            return Err(ConfigError::WindowTooLong {
                window: self.window_s,
                ts: self.symbol_interval_s,
            });
        }
        let buffers_total = self.buffer_duration_s * self.detections_per_window as f64;
        if buffers_total > self.window_s * (1.0 + REL_TOL) {
            return Err(ConfigError::BuffersExceedWindow {
                total: buffers_total,
                window: self.window_s,
            });
        }
        let nyquist = 2.0 * self.signal_bandwidth_hz;
        if self.baseband_sample_rate_hz < nyquist * (1.0 - REL_TOL) {
            return Err(ConfigError::Undersampled {
                rate: self.baseband_sample_rate_hz,
                nyquist,
            });
        }
        let product = self.data_rate_bps * self.symbol_interval_s;
        if (product - 1.0).abs() > REL_TOL {
            return Err(ConfigError::RateMismatch { product });
        }
        Ok(())
    }

    /// Samples in one detection buffer (10 at the defaults).
    pub fn samples_per_buffer(&self) -> usize {
        snap_round(self.buffer_duration_s * self.baseband_sample_rate_hz) as usize
    }

    /// Samples in one symbol interval (960 at the defaults).
    pub fn samples_per_symbol(&self) -> usize {
        snap_round(self.symbol_interval_s * self.baseband_sample_rate_hz) as usize
    }

    /// Samples covering one transmit pulse before shaping (20 at the
    /// defaults): enough whole samples to span the pulse duration.
    pub fn pulse_samples(&self) -> usize {
        let x = self.pulse_duration_s * self.baseband_sample_rate_hz;
        let r = x.round();
        if (x - r).abs() < 1e-6 {
            r as usize
        } else {
            x.ceil() as usize
        }
    }

    /// Detection buffers per symbol interval (96 at the defaults).
    pub fn buffers_per_symbol(&self) -> usize {
        self.samples_per_symbol() / self.samples_per_buffer()
    }

    /// Peak transmit amplitude: sqrt of the transmit power in watts.
    pub fn tx_amplitude(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm).sqrt()
    }

    /// Comparator threshold amplitude: sqrt of the sensitivity in watts.
    pub fn detection_threshold(&self) -> f64 {
        dbm_to_watts(self.rx_sensitivity_dbm).sqrt()
    }

    /// Total receiver noise power in watts (noise power plus figure),
    /// or zero when noise is disabled.
    pub fn noise_power_watts(&self) -> f64 {
        if self.noise_enabled {
            dbm_to_watts(self.noise_power_dbm + self.noise_figure_db)
        } else {
            0.0
        }
    }

    /// Serializes to the flat key-value config format.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parses the flat key-value config format. Missing keys take their
    /// defaults; unknown keys are rejected. Validates before returning.
    pub fn from_toml(text: &str) -> Result<SimConfig, ConfigError> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file.
    pub fn load(path: &std::path::Path) -> Result<SimConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        SimConfig::from_toml(&text)
    }

    /// Short stable digest of the config, for trace records. Hashes an
    /// explicit field list rather than the TOML form so it works for
    /// any in-memory seed value (TOML integers cap at i64::MAX).
    pub fn hash_hex(&self) -> String {
        let fields = format!(
            "carrier_freq_hz={:?};symbol_interval_Ts_s={:?};pulse_duration_Tp_s={:?};\
             window_L_s={:?};buffer_duration_s={:?};detections_per_window={};\
             tx_power_dbm={:?};noise_power_dbm={:?};noise_figure_db={:?};\
             rx_sensitivity_dbm={:?};signal_bandwidth_hz={:?};baseband_sample_rate_hz={:?};\
             data_rate_bps={:?};reflections_enabled={};noise_enabled={};rng_seed={}",
            self.carrier_freq_hz,
            self.symbol_interval_s,
            self.pulse_duration_s,
            self.window_s,
            self.buffer_duration_s,
            self.detections_per_window,
            self.tx_power_dbm,
            self.noise_power_dbm,
            self.noise_figure_db,
            self.rx_sensitivity_dbm,
            self.signal_bandwidth_hz,
            self.baseband_sample_rate_hz,
            self.data_rate_bps,
            self.reflections_enabled,
            self.noise_enabled,
            self.rng_seed
        );
        let mut hasher = Sha256::new();
        hasher.update(fields.as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(16);
        for byte in &digest[..8] {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// Rounds to the nearest integer, trusting the rounded value only when
/// the product is within absolute 1e-6 of it; otherwise truncates down.
/// Sample-count conversions hit exact integers at the defaults and this
/// keeps representation error from shifting them by one.
fn snap_round(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() < 1e-6 {
        r as u64
    } else {
        x.floor() as u64
    }
}
