//! Ideal 12-pulse rectifier output and single-bin phasor extraction.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::io::Write;

use crate::circuit::Phasor;
use crate::{format_f64, Error, Result};

/// Delta secondary lags the star secondary by 30° (Yy0d1).
const DELTA_SHIFT_RAD: f64 = PI / 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl Waveform {
    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn time_at(&self, n: usize) -> f64 {
        n as f64 / self.sample_rate_hz
    }

    /// Two columns, `time_s,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time_s,value")?;
        for (n, v) in self.samples.iter().enumerate() {
            writeln!(out, "{},{}", format_f64(self.time_at(n)), format_f64(*v))?;
        }
        Ok(())
    }
}

/// Output of one ideal 6-pulse bridge at electrical angle `theta`: the
/// largest of the six line-to-line voltages.
fn six_pulse(peak_ll: f64, theta: f64) -> f64 {
    (0..6)
        .map(|k| peak_ll * (theta - k as f64 * PI / 3.0).cos())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Parallel 12-pulse output: mean of a star-fed and a delta-fed 6-pulse
/// bridge. Commutation overlap and device drops are ignored.
pub fn synthesize_12pulse(
    v_ll_rms: f64,
    line_freq_hz: f64,
    samples_per_cycle: usize,
    n_cycles: usize,
) -> Result<Waveform> {
    if samples_per_cycle < 24 {
        return Err(Error::InsufficientResolution(format!(
            "{samples_per_cycle} samples per cycle, need at least 24"
        )));
    }
    if n_cycles < 1 {
        return Err(Error::InsufficientResolution("need at least one cycle".into()));
    }
    if !(line_freq_hz > 0.0 && line_freq_hz.is_finite()) || !v_ll_rms.is_finite() {
        return Err(Error::InsufficientResolution(format!(
            "invalid line frequency {line_freq_hz} Hz or voltage {v_ll_rms} V"
        )));
    }
    let peak = SQRT_2 * v_ll_rms;
    let samples = (0..samples_per_cycle * n_cycles)
        .map(|n| {
            let theta = TAU * (n % samples_per_cycle) as f64 / samples_per_cycle as f64;
            0.5 * (six_pulse(peak, theta) + six_pulse(peak, theta - DELTA_SHIFT_RAD))
        })
        .collect();
    Ok(Waveform {
        samples,
        sample_rate_hz: line_freq_hz * samples_per_cycle as f64,
    })
}

/// Amplitude-scaled single-bin DFT, `(2/N)·Σ x[n]·exp(−j·2π·f·n/fs)`.
///
/// The record must hold a whole number of periods of `target_freq_hz`, in
/// which case a coherent cosine `A·cos(2πft + φ)` comes back as `A∠φ`.
pub fn extract_phasor(w: &Waveform, target_freq_hz: f64) -> Result<Phasor> {
    if !(target_freq_hz > 0.0 && target_freq_hz.is_finite()) || !(w.sample_rate_hz > 0.0) {
        return Err(Error::IncoherentSampling(format!(
            "target {target_freq_hz} Hz at {} Hz sampling",
            w.sample_rate_hz
        )));
    }
    let n = w.samples.len();
    let samples_per_period = w.sample_rate_hz / target_freq_hz;
    if samples_per_period < 2.0 {
        return Err(Error::InsufficientResolution(format!(
            "{samples_per_period} samples per {target_freq_hz} Hz period"
        )));
    }
    let periods = n as f64 / samples_per_period;
    let whole = periods.round();
    if whole < 1.0 || (periods - whole).abs() > 1e-6 * periods {
        return Err(Error::IncoherentSampling(format!(
            "{periods} periods of {target_freq_hz} Hz in the record"
        )));
    }
    let cycles_per_sample = target_freq_hz / w.sample_rate_hz;
    let mut acc = Phasor::new(0.0, 0.0);
    for (k, &x) in w.samples.iter().enumerate() {
        // reduce the phase before scaling by 2π to keep long records exact
        let phase = (k as f64 * cycles_per_sample).fract() * TAU;
        acc += Phasor::from_polar(x, -phase);
    }
    Ok(acc * (2.0 / n as f64))
}
