use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ffe::ffe_train_apply;
use crate::channel::{dispersion_operator, sync_and_downsample, SyncConfig};
use crate::error::{invalid, Result};
use crate::readout::{decide_pam4, evaluate_ber, BerReport, SplitSpec};
use crate::signal::{fft_in_place, filter_real, ifft_in_place, rrc_frequency_response, ComplexEnvelope, Resample, SampledSignal};
use crate::transmitter::{Pam4Symbols, Sideband};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KkConfig {
    pub upsample_factor: usize,
    /// Fiber length to compensate, km.
    pub cd_length: f64,
    /// ps^2/km
    pub cd_beta2: f64,
    pub ffe_taps: usize,
    pub matched_beta: f64,
    pub baud: f64,
    /// Side of the carrier the signal occupies.
    pub sideband: Sideband,
    /// Frame label given to the reconstructed field (carrier at 0 Hz).
    pub carrier_detune: f64,
}

impl Default for KkConfig {
    fn default() -> Self {
        Self {
            upsample_factor: 4,
            cd_length: 0.0,
            cd_beta2: -21.7,
            ffe_taps: 48,
            matched_beta: 0.1,
            baud: 56e9,
            sideband: Sideband::Lower,
            carrier_detune: 24.5e9,
        }
    }
}

impl KkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.upsample_factor < 2 {
            return Err(invalid("upsample_factor", "must be >= 2"));
        }
        if self.ffe_taps == 0 {
            return Err(invalid("ffe_taps", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.matched_beta) {
            return Err(invalid("matched_beta", "must be in [0, 1]"));
        }
        if !(self.baud > 0.0) || !self.cd_length.is_finite() || !self.cd_beta2.is_finite() {
            return Err(invalid("kk", "baud must be positive and CD parameters finite"));
        }
        Ok(())
    }
}

/// Hilbert transform by the spectral sign-flip method.
fn hilbert(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut s: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut s);
    for (k, v) in s.iter_mut().enumerate() {
        let nyquist = n % 2 == 0 && k == n / 2;
        *v = if k == 0 || nyquist {
            Complex64::new(0.0, 0.0)
        } else if k < n.div_ceil(2) {
            *v * Complex64::new(0.0, -1.0)
        } else {
            *v * Complex64::new(0.0, 1.0)
        };
    }
    ifft_in_place(&mut s);
    s.into_iter().map(|c| c.re).collect()
}

/// Recover the optical field from a photocurrent of a minimum-phase signal.
///
/// The intensity is upsampled, the phase is the Hilbert transform of
/// `ln(I) / 2` (sign set by the sideband), and the field is returned in the
/// carrier frame, carrier at 0 Hz.
pub fn kk_reconstruct(intensity: &SampledSignal, cfg: &KkConfig) -> Result<ComplexEnvelope> {
    cfg.validate()?;
    let up = intensity.resample(cfg.upsample_factor, 1)?;
    let mean = up.mean().abs().max(f64::MIN_POSITIVE);
    let floor = 1e-9 * mean;
    let amp: Vec<f64> = up.samples.iter().map(|&v| v.max(floor)).collect();
    let half_log: Vec<f64> = amp.iter().map(|v| 0.5 * v.ln()).collect();
    let sign = match cfg.sideband {
        Sideband::Upper => 1.0,
        Sideband::Lower => -1.0,
    };
    let phase = hilbert(&half_log);
    let samples = amp
        .iter()
        .zip(&phase)
        .map(|(&i, &p)| Complex64::from_polar(i.sqrt(), sign * p))
        .collect();
    let mut env = ComplexEnvelope::new(samples, up.sample_rate, cfg.carrier_detune)?;
    env.warnings = intensity.warnings.clone();
    Ok(env)
}

/// Undo the dispersion of `length` km of fiber: the all-pass
/// `exp(-i beta2/2 w^2 L)` on the envelope's own frequency grid.
pub fn cd_compensate(env: &ComplexEnvelope, length: f64, beta2: f64) -> ComplexEnvelope {
    if length == 0.0 || env.is_empty() {
        return env.clone();
    }
    let op = dispersion_operator(env.len(), env.sample_rate, beta2, -length);
    let mut s = env.samples.clone();
    fft_in_place(&mut s);
    s.iter_mut().zip(&op).for_each(|(a, d)| *a *= d);
    ifft_in_place(&mut s);
    ComplexEnvelope {
        samples: s,
        ..env.clone()
    }
}

/// Direct-detection receiver baseline: field recovery, dispersion
/// compensation, matched filter, timing recovery, FFE, slicer, error count.
pub fn kk_receiver_pipeline(
    detected: &SampledSignal,
    cfg: &KkConfig,
    truth: &Pam4Symbols,
    split: &SplitSpec,
) -> Result<BerReport> {
    let field = kk_reconstruct(detected, cfg)?;
    let field = cd_compensate(&field, cfg.cd_length, cfg.cd_beta2);
    let carrier = field.samples.iter().sum::<Complex64>() / field.len() as f64;
    let rot = carrier.conj() / carrier.norm().max(f64::MIN_POSITIVE);
    let real: Vec<f64> = field.samples.iter().map(|s| ((s - carrier) * rot).re).collect();
    let (baud, beta) = (cfg.baud, cfg.matched_beta);
    let matched = filter_real(&real, field.sample_rate, |f| Complex64::new(rrc_frequency_response(f, baud, beta), 0.0));
    let matched = SampledSignal::new(matched, field.sample_rate)?;
    let sync = SyncConfig {
        baud,
        rolloff: beta,
        sps_out: 2,
    };
    let aligned = sync_and_downsample(&matched, truth, &sync)?;
    let (_, eq) = ffe_train_apply(&aligned, truth, cfg.ffe_taps, split)?;
    evaluate_ber(&decide_pam4(&eq.samples), truth, split)
}
