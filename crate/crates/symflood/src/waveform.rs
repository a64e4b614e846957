//! Complex-baseband sample buffers.
//!
//! A [`Waveform`] is a non-empty run of complex samples with a start
//! time and a sample rate. The magnitude convention is physical:
//! `|sample|^2` is instantaneous power in watts.

use num_complex::Complex64;
use std::io::Write;

/// One complex-baseband sample; `|s|^2` is power in watts.
pub type ComplexSample = Complex64;

/// A contiguous run of complex-baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    start_time_s: f64,
    sample_rate_hz: f64,
    samples: Vec<ComplexSample>,
}

impl Waveform {
    /// Builds a waveform. Panics on an empty sample run or a
    /// non-positive sample rate; both break every downstream consumer.
    pub fn new(start_time_s: f64, sample_rate_hz: f64, samples: Vec<ComplexSample>) -> Waveform {
        assert!(!samples.is_empty(), "waveform must hold at least one sample");
        assert!(sample_rate_hz > 0.0, "sample rate must be positive");
        Waveform {
            start_time_s,
            sample_rate_hz,
            samples,
        }
    }

    /// Time of the first sample in seconds.
    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    /// Sample rate in Hz.
    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// The samples, oldest first.
    pub fn samples(&self) -> &[ComplexSample] {
        &self.samples
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false: emptiness is rejected at construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Covered duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Time one past the last sample.
    pub fn end_time_s(&self) -> f64 {
        self.start_time_s + self.duration_s()
    }

    /// Largest instantaneous power over the waveform, watts.
    pub fn peak_power_w(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.norm_sqr())
            .fold(0.0, f64::max)
    }

    /// Mean instantaneous power over the waveform, watts.
    pub fn mean_power_w(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Total energy in joules: sum of sample powers times the sample
    /// period.
    pub fn energy_j(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.sample_rate_hz
    }

    /// Writes the waveform as `time_s,re,im` rows for offline
    /// inspection.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "time_s,re,im")?;
        for (i, s) in self.samples.iter().enumerate() {
            let t = self.start_time_s + i as f64 / self.sample_rate_hz;
            writeln!(out, "{:.12e},{:.9e},{:.9e}", t, s.re, s.im)?;
        }
        Ok(())
    }
}
