//! Sampled-signal containers and the DSP primitives shared by the link and
//! the receivers: FFT helpers, root-raised-cosine filtering, band-limited
//! rational resampling and finite-resolution converter models.
//!
//! Every signal carries its sample rate. Operations that combine two signals
//! check the rates and refuse to mix them.
//!
//! Transform-based operations treat a record as one period of a cyclic
//! sequence. The link simulator always builds cyclic records, so exact-length
//! transforms are used instead of zero padding.

mod quantize;
mod resample;
mod rrc;

pub use quantize::{quantize_enob, quantize_enob_with, FullScale};
pub use resample::{rational_ratio, resample, Resample};
pub use rrc::{circular_fir, rrc_frequency_response, rrc_taps};

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

/// Non-fatal conditions attached to a signal as it moves through the chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Converter input exceeded full scale on this fraction of samples.
    Clipping { fraction: f64 },
    /// The field trajectory crossed the origin's branch cut `count` times.
    NonMinimumPhase { winding: usize },
    /// Halving the split-step size changed the output by this relative RMS.
    StepConvergence { rms_change: f64 },
}

/// Real-valued sampled stream (photocurrent, ADC output, node response).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub warnings: Vec<Warning>,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        check_rate(sample_rate)?;
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(invalid("samples", "non-finite value"));
        }
        Ok(Self {
            samples,
            sample_rate,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.samples)
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn with_warning(mut self, w: Warning) -> Self {
        self.warnings.push(w);
        self
    }
}

/// Complex optical field envelope in sqrt(W).
///
/// `center_frequency_offset` is the optical frequency of the envelope's DC
/// bin relative to the channel centre. The transmitter emits its field in
/// the carrier frame, so the offset equals the carrier detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnvelope {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub center_frequency_offset: f64,
    pub warnings: Vec<Warning>,
}

impl ComplexEnvelope {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, center_frequency_offset: f64) -> Result<Self> {
        check_rate(sample_rate)?;
        if samples.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(invalid("samples", "non-finite value"));
        }
        Ok(Self {
            samples,
            sample_rate,
            center_frequency_offset,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean |E|^2 in W.
    pub fn power(&self) -> f64 {
        power(&self.samples)
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.sample_rate
    }

    /// Rescale to a mean power in W.
    pub fn set_power(&mut self, watts: f64) {
        let p = self.power();
        if p > 0.0 {
            let g = (watts / p).sqrt();
            self.samples.iter_mut().for_each(|s| *s *= g);
        }
    }

    /// Re-reference the samples to a new frame offset by multiplying with a
    /// complex exponential. The record stays cyclic only when the frequency
    /// shift is a multiple of the bin spacing.
    pub fn reframed(&self, new_offset: f64) -> Self {
        let shift = self.center_frequency_offset - new_offset;
        let w = 2.0 * std::f64::consts::PI * shift / self.sample_rate;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(n, s)| s * Complex64::from_polar(1.0, w * n as f64))
            .collect();
        Self {
            samples,
            sample_rate: self.sample_rate,
            center_frequency_offset: new_offset,
            warnings: self.warnings.clone(),
        }
    }

    pub fn with_warning(mut self, w: Warning) -> Self {
        self.warnings.push(w);
        self
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(invalid("sample_rate", format!("must be positive and finite, got {rate}")))
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

pub(crate) fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
    }
}

pub(crate) fn power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward DFT.
pub fn fft_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse DFT, normalized by 1/n.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
}

pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    fft_in_place(&mut buf);
    buf
}

pub fn ifft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    ifft_in_place(&mut buf);
    buf
}

pub fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf);
    buf
}

/// Signed DFT bin frequencies in Hz, in FFT order.
pub fn fft_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    let df = sample_rate / n as f64;
    (0..n)
        .map(|k| {
            if k <= (n - 1) / 2 {
                k as f64 * df
            } else {
                (k as f64 - n as f64) * df
            }
        })
        .collect()
}

/// Multiply the spectrum of a real record by `h(f)` and return the real part
/// of the result.
pub fn filter_real<F>(x: &[f64], sample_rate: f64, h: F) -> Vec<f64>
where
    F: Fn(f64) -> Complex64,
{
    let n = x.len();
    let mut spec = fft_real(x);
    let freqs = fft_frequencies(n, sample_rate);
    for (k, s) in spec.iter_mut().enumerate() {
        // the Nyquist bin of an even record must stay real
        let hk = if n % 2 == 0 && k == n / 2 {
            Complex64::new(h(freqs[k]).re, 0.0)
        } else {
            h(freqs[k])
        };
        *s *= hk;
    }
    ifft_in_place(&mut spec);
    spec.into_iter().map(|c| c.re).collect()
}

pub fn filter_complex<F>(x: &[Complex64], sample_rate: f64, h: F) -> Vec<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let mut spec = fft(x);
    let freqs = fft_frequencies(x.len(), sample_rate);
    for (s, f) in spec.iter_mut().zip(freqs) {
        *s *= h(f);
    }
    ifft_in_place(&mut spec);
    spec
}

/// First-order low-pass response 1 / (1 + j f / fc).
pub fn first_order_lowpass(f: f64, corner: f64) -> Complex64 {
    Complex64::new(1.0, f / corner).inv()
}

/// Circular delay by a possibly fractional number of samples, band-limited.
pub fn fractional_delay_real(x: &[f64], delay: f64) -> Vec<f64> {
    let n = x.len() as f64;
    filter_real(x, n, |f| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * delay / n))
}
