//! Physical layer: pulse shaping, path model, superposition, noise.
//!
//! A 1-bit is a short rectangular pulse at peak transmit power, passed
//! through a linear-phase lowpass FIR so its spectrum stays inside the
//! occupied bandwidth. Propagation is free-space line of sight with an
//! optional first-order image-source reflection off each deployment
//! area wall. Receivers see the sample-accurate sum of all arrivals:
//! envelopes are placed on the nearest sample, carrier phase is taken
//! from the exact continuous delay. Receiver noise is circularly
//! symmetric complex Gaussian, white at the sample rate, with
//! per-sample power equal to the in-band noise budget; that makes the
//! detector's comparator samples independent draws, which is the model
//! behind its false-alarm arithmetic.

use crate::config::SimConfig;
use crate::topology::AREA_SIDE_M;
use crate::waveform::{ComplexSample, Waveform};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A physical-layer precondition failure.
#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("transmitter and receiver positions coincide")]
    DegenerateLink,
    #[error("waveform sample rate {found} Hz does not match config rate {expected} Hz")]
    RateMismatch { found: f64, expected: f64 },
}

/// One propagation path: a delay and a complex amplitude gain that
/// already includes the carrier phase rotation for that delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub delay_s: f64,
    pub gain: ComplexSample,
}

/// Free-space amplitude gain at distance `d_m` and carrier `fc_hz`:
/// received amplitude = transmitted amplitude times this factor.
pub fn free_space_amplitude(d_m: f64, fc_hz: f64) -> f64 {
    SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * d_m * fc_hz)
}

/// Free-space path loss in dB at distance `d_m` and carrier `fc_hz`.
pub fn fspl_db(d_m: f64, fc_hz: f64) -> f64 {
    -20.0 * free_space_amplitude(d_m, fc_hz).log10()
}

fn one_path(d_m: f64, fc_hz: f64, sign: f64) -> Path {
    let delay_s = d_m / SPEED_OF_LIGHT;
    let amp = sign * free_space_amplitude(d_m, fc_hz);
    let phase = -2.0 * std::f64::consts::PI * fc_hz * delay_s;
    Path {
        delay_s,
        gain: Complex64::from_polar(amp.abs(), phase + if amp < 0.0 { std::f64::consts::PI } else { 0.0 }),
    }
}

/// Propagation paths from `tx` to `rx` positions (meters).
///
/// Always returns the line-of-sight path first. With reflections
/// enabled, adds one image-source path per deployment area wall with
/// reflection coefficient -1. Positions must not coincide.
pub fn path_model(
    tx: (f64, f64),
    rx: (f64, f64),
    cfg: &SimConfig,
) -> Result<Vec<Path>, PhyError> {
    let los = distance(tx, rx);
    if los == 0.0 {
        return Err(PhyError::DegenerateLink);
    }
    let mut paths = vec![one_path(los, cfg.carrier_freq_hz, 1.0)];
    if cfg.reflections_enabled {
        let images = [
            (-tx.0, tx.1),
            (2.0 * AREA_SIDE_M - tx.0, tx.1),
            (tx.0, -tx.1),
            (tx.0, 2.0 * AREA_SIDE_M - tx.1),
        ];
        for image in images {
            let d = distance(image, rx);
            if d > 0.0 {
                paths.push(one_path(d, cfg.carrier_freq_hz, -1.0));
            }
        }
    }
    Ok(paths)
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Shaping filter taps: a linear-phase windowed-sinc lowpass with unity
/// DC gain. The cutoff sits inside half the signal bandwidth so the
/// transition band finishes before the band edge and the shaped pulse
/// spectrum clears 40 dB of suppression beyond it; tap count scales
/// with the rate-to-bandwidth ratio.
pub fn shaping_taps(cfg: &SimConfig) -> Vec<f64> {
    let fs = cfg.baseband_sample_rate_hz;
    let cutoff = 0.43 * cfg.signal_bandwidth_hz;
    let scale = (fs / cfg.signal_bandwidth_hz) / 9.6;
    let mut n = (127.0 * scale).round() as usize;
    // Odd length keeps the group delay an integer number of samples.
    n |= 1;
    let n = n.max(5);
    let mid = (n - 1) as f64 / 2.0;
    let fc_norm = cutoff / fs;
    let mut taps = Vec::with_capacity(n);
    for i in 0..n {
        let x = i as f64 - mid;
        let sinc = if x == 0.0 {
            2.0 * fc_norm
        } else {
            (2.0 * std::f64::consts::PI * fc_norm * x).sin() / (std::f64::consts::PI * x)
        };
        let window = 0.54
            - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
        taps.push(sinc * window);
    }
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// The unshaped transmit pulse: a rectangular burst at peak transmit
/// power, spanning the pulse duration (20 samples at the defaults),
/// starting at time zero relative to emission.
pub fn rect_pulse(cfg: &SimConfig) -> Waveform {
    let amp = cfg.tx_amplitude();
    let n = cfg.pulse_samples();
    Waveform::new(
        0.0,
        cfg.baseband_sample_rate_hz,
        vec![Complex64::new(amp, 0.0); n],
    )
}

/// Applies the shaping filter with group-delay compensation: the
/// output start time shifts back by half the filter length, so the
/// shaped envelope stays centred where the unshaped pulse was.
pub fn shape_pulse(w: &Waveform, cfg: &SimConfig) -> Waveform {
    let taps = shaping_taps(cfg);
    let x = w.samples();
    let mut y = vec![Complex64::new(0.0, 0.0); x.len() + taps.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &h) in taps.iter().enumerate() {
            y[i + j] += xi * h;
        }
    }
    let lead = (taps.len() - 1) as f64 / 2.0;
    Waveform::new(
        w.start_time_s() - lead / w.sample_rate_hz(),
        w.sample_rate_hz(),
        y,
    )
}

/// The canonical 1-symbol waveform: the rectangular pulse through the
/// shaping filter. A 0-symbol transmits nothing; see
/// [`symbol_waveform`].
pub fn make_pulse(cfg: &SimConfig) -> Waveform {
    shape_pulse(&rect_pulse(cfg), cfg)
}

/// On-off keying: a 1-bit maps to the shaped pulse, a 0-bit to no
/// waveform at all.
pub fn symbol_waveform(bit: u8, cfg: &SimConfig) -> Option<Waveform> {
    if bit == 0 {
        None
    } else {
        Some(make_pulse(cfg))
    }
}

/// One waveform arrival to be mixed into a receiver span.
#[derive(Debug, Clone, Copy)]
pub struct Placement<'a> {
    /// Arrival time of the waveform's nominal origin (emission time
    /// plus path delay), seconds.
    pub arrival_time_s: f64,
    /// Complex amplitude applied to every sample (path gain times any
    /// carrier phase offset).
    pub gain: ComplexSample,
    pub waveform: &'a Waveform,
}

/// Adds `gain * src` into `dst`, where `src[0]` sits at global sample
/// index `src_start` and `dst[0]` at `dst_start`. Out-of-range samples
/// are clipped. Shared by waveform superposition and the engine's
/// per-buffer synthesis so placement arithmetic lives in one place.
pub(crate) fn accumulate(
    dst: &mut [ComplexSample],
    dst_start: i64,
    src: &[ComplexSample],
    src_start: i64,
    gain: ComplexSample,
) {
    let lo = dst_start.max(src_start);
    let hi = (dst_start + dst.len() as i64).min(src_start + src.len() as i64);
    for g in lo..hi {
        dst[(g - dst_start) as usize] += gain * src[(g - src_start) as usize];
    }
}

/// Sample-accurate sum of pulse arrivals over a receiver span.
///
/// Each placement's envelope lands on the nearest sample of the span's
/// grid; its carrier phase is whatever the caller folded into `gain`
/// from the exact continuous delay. Accumulation order is the input
/// order, so superposition is exactly additive: summing two placement
/// lists separately and adding the results matches one combined call.
pub fn superpose(
    placements: &[Placement<'_>],
    span_start_s: f64,
    span_len: usize,
    cfg: &SimConfig,
) -> Result<Waveform, PhyError> {
    let fs = cfg.baseband_sample_rate_hz;
    let mut samples = vec![Complex64::new(0.0, 0.0); span_len];
    let span_start = (span_start_s * fs).round() as i64;
    for p in placements {
        if p.waveform.sample_rate_hz() != fs {
            return Err(PhyError::RateMismatch {
                found: p.waveform.sample_rate_hz(),
                expected: fs,
            });
        }
        let src_start =
            ((p.arrival_time_s + p.waveform.start_time_s()) * fs).round() as i64;
        accumulate(&mut samples, span_start, p.waveform.samples(), src_start, p.gain);
    }
    Ok(Waveform::new(span_start as f64 / fs, fs, samples))
}

/// Adds receiver noise: circularly symmetric complex Gaussian, white
/// at the sample rate, per-sample power equal to the in-band noise
/// budget (noise power plus noise figure). With noise disabled the
/// input passes through unchanged.
pub fn add_noise<R: Rng>(w: &Waveform, cfg: &SimConfig, rng: &mut R) -> Waveform {
    let power = cfg.noise_power_watts();
    if power == 0.0 {
        return w.clone();
    }
    let sigma_c = (power / 2.0).sqrt();
    let samples = w
        .samples()
        .iter()
        .map(|s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + Complex64::new(re * sigma_c, im * sigma_c)
        })
        .collect();
    Waveform::new(w.start_time_s(), w.sample_rate_hz(), samples)
}

/// Fills `dst` with noise samples drawn from `rng`, at per-component
/// deviation `sigma_c`. The engine's per-buffer path; zero deviation
/// leaves `dst` untouched.
pub(crate) fn add_noise_into<R: Rng>(dst: &mut [ComplexSample], sigma_c: f64, rng: &mut R) {
    if sigma_c == 0.0 {
        return;
    }
    for s in dst {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += Complex64::new(re * sigma_c, im * sigma_c);
    }
}
