//! The optical plant: fiber propagation, ASE noise loading, optical
//! filtering, square-law detection and receiver synchronization.

mod fiber;
mod noise;

pub use fiber::{propagate_ssmf, FiberParams, STEP_WARNING_THRESHOLD};
pub(crate) use fiber::dispersion_operator;
#[cfg(test)]
pub(crate) use fiber::relative_rms;
pub use noise::{amplify_noise_load, estimate_osnr_db, osnr_reference_bandwidth};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{
    fft_frequencies, fft_in_place, filter_complex, filter_real, fractional_delay_real, ifft_in_place, mean,
    rational_ratio, rrc_frequency_response, ComplexEnvelope, Resample, SampledSignal,
};
use crate::transmitter::Pam4Symbols;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub launch_power_dbm: f64,
    /// OSNR in the 0.1 nm reference bandwidth; `inf` disables noise loading.
    pub target_osnr_db: f64,
    /// Width of the ideal optical band-pass centred on the channel, Hz.
    pub rx_filter_bw: f64,
    /// Photodiode (brick-wall) bandwidth, Hz.
    pub pd_bandwidth: f64,
    pub adc_rate: f64,
    /// `inf` disables the converter model.
    pub adc_enob: f64,
    /// Standard deviation (rad) of band-limited phase noise applied at the
    /// fiber input, standing in for cross-phase modulation from neighbouring
    /// channels. Zero disables it.
    pub xpm_phase_std: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            launch_power_dbm: 6.5,
            target_osnr_db: 35.9,
            rx_filter_bw: 62e9,
            pd_bandwidth: 40e9,
            adc_rate: 160e9,
            adc_enob: 5.5,
            xpm_phase_std: 0.0,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rx_filter_bw > 0.0 && self.pd_bandwidth > 0.0 && self.adc_rate > 0.0) {
            return Err(invalid("rx_filter_bw", "bandwidths and rates must be positive"));
        }
        if !(self.target_osnr_db >= 10.0) {
            return Err(invalid("target_osnr_db", "must be >= 10 dB or inf"));
        }
        if !(self.adc_enob > 0.0) {
            return Err(invalid("adc_enob", "must be positive"));
        }
        if !(self.xpm_phase_std >= 0.0) {
            return Err(invalid("xpm_phase_std", "must be >= 0"));
        }
        Ok(())
    }

    pub fn launch_power_w(&self) -> f64 {
        10f64.powf((self.launch_power_dbm - 30.0) / 10.0)
    }
}

/// Ideal band-pass of width `bandwidth` centred on the channel centre.
pub fn optical_filter(env: &ComplexEnvelope, bandwidth: f64) -> ComplexEnvelope {
    let centre = -env.center_frequency_offset;
    let samples = filter_complex(&env.samples, env.sample_rate, |f| {
        if (f - centre).abs() <= bandwidth / 2.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    ComplexEnvelope {
        samples,
        sample_rate: env.sample_rate,
        center_frequency_offset: env.center_frequency_offset,
        warnings: env.warnings.clone(),
    }
}

/// Band-limited random phase noise with the given standard deviation.
pub fn apply_phase_noise(env: &ComplexEnvelope, std_rad: f64, bandwidth: f64, seed: u64) -> ComplexEnvelope {
    if std_rad == 0.0 {
        return env.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let white: Vec<f64> = (0..env.len()).map(|_| normal.sample(&mut rng)).collect();
    let mut phase = filter_real(&white, env.sample_rate, |f| {
        Complex64::new(if f.abs() <= bandwidth { 1.0 } else { 0.0 }, 0.0)
    });
    let sd = crate::signal::variance(&phase).sqrt();
    if sd > 0.0 {
        phase.iter_mut().for_each(|p| *p *= std_rad / sd);
    }
    let samples = env
        .samples
        .iter()
        .zip(&phase)
        .map(|(s, p)| s * Complex64::from_polar(1.0, *p))
        .collect();
    ComplexEnvelope { samples, ..env.clone() }
}

/// Square-law detection followed by an ideal low-pass at `pd_bandwidth`.
/// Responsivity is 1 A/W.
pub fn photodetect(env: &ComplexEnvelope, pd_bandwidth: f64) -> SampledSignal {
    let intensity: Vec<f64> = env.samples.iter().map(|s| s.norm_sqr()).collect();
    let filtered = filter_real(&intensity, env.sample_rate, |f| {
        Complex64::new(if f.abs() <= pd_bandwidth { 1.0 } else { 0.0 }, 0.0)
    });
    SampledSignal {
        samples: filtered,
        sample_rate: env.sample_rate,
        warnings: env.warnings.clone(),
    }
}

/// Parameters of the reference used for timing recovery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    pub baud: f64,
    pub rolloff: f64,
    pub sps_out: usize,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            baud: 56e9,
            rolloff: 0.1,
            sps_out: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEstimate {
    /// Delay of the signal relative to the reference, in input samples.
    pub delay_samples: f64,
    /// Correlation peak over RMS sidelobe level.
    pub peak_to_sidelobe: f64,
}

pub const MIN_SYNC_REFERENCE: usize = 1000;
const SIDELOBE_EXCLUSION: usize = 64;

/// Resample a cyclic record holding exactly `reference.len()` symbols to
/// `sps_out` samples per symbol.
fn to_output_rate(sig: &SampledSignal, reference: &Pam4Symbols, cfg: &SyncConfig) -> Result<(SampledSignal, f64)> {
    if reference.len() < MIN_SYNC_REFERENCE {
        return Err(invalid("reference", format!("need >= {MIN_SYNC_REFERENCE} symbols, got {}", reference.len())));
    }
    if sig.is_empty() {
        return Err(Error::EmptyInput);
    }
    let out_rate = cfg.baud * cfg.sps_out as f64;
    let (p, q) = rational_ratio(sig.sample_rate, out_rate)?;
    let expected = reference.len() * cfg.sps_out;
    if sig.len() * p % q != 0 || sig.len() * p / q != expected {
        return Err(Error::LengthMismatch {
            expected: expected * q / p,
            found: sig.len(),
        });
    }
    Ok((sig.resample(p, q)?, sig.sample_rate / out_rate))
}

/// Spectrum of the RRC-shaped reference waveform at `sps_out`.
fn reference_spectrum(reference: &Pam4Symbols, cfg: &SyncConfig) -> Vec<Complex64> {
    let n = reference.len() * cfg.sps_out;
    let mut up = vec![Complex64::new(0.0, 0.0); n];
    for (k, &l) in reference.levels().iter().enumerate() {
        up[k * cfg.sps_out] = Complex64::new(l as f64, 0.0);
    }
    fft_in_place(&mut up);
    let freqs = fft_frequencies(n, cfg.baud * cfg.sps_out as f64);
    up.iter_mut()
        .zip(freqs)
        .for_each(|(s, f)| *s *= rrc_frequency_response(f, cfg.baud, cfg.rolloff));
    up
}

fn estimate_on_grid(y: &[f64], reference: &Pam4Symbols, cfg: &SyncConfig) -> Result<DelayEstimate> {
    let n = y.len();
    let m = mean(y);
    let mut yspec: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v - m, 0.0)).collect();
    fft_in_place(&mut yspec);
    let rspec = reference_spectrum(reference, cfg);
    let cross: Vec<Complex64> = yspec.iter().zip(&rspec).map(|(a, b)| a * b.conj()).collect();
    let mut corr = cross.clone();
    ifft_in_place(&mut corr);
    let (k0, peak) = corr
        .iter()
        .enumerate()
        .map(|(k, c)| (k, c.re.abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::EmptyInput)?;
    let (mut ss, mut cnt) = (0.0, 0usize);
    for (k, c) in corr.iter().enumerate() {
        let d = (k as isize - k0 as isize).rem_euclid(n as isize) as usize;
        if d.min(n - d) > SIDELOBE_EXCLUSION {
            ss += c.re * c.re;
            cnt += 1;
        }
    }
    let sidelobe = if cnt > 0 { (ss / cnt as f64).sqrt() } else { 0.0 };
    let ratio = if sidelobe > 0.0 { peak / sidelobe } else { f64::INFINITY };
    if !(ratio >= 3.0) {
        return Err(Error::SyncFailure { ratio });
    }
    // band-limited interpolation of the correlation around the integer peak
    let freqs: Vec<f64> = fft_frequencies(n, n as f64);
    let eval = |tau: f64| -> f64 {
        let mut acc = 0.0;
        for (c, &f) in cross.iter().zip(&freqs) {
            let ph = 2.0 * std::f64::consts::PI * f * tau / n as f64;
            acc += c.re * ph.cos() - c.im * ph.sin();
        }
        (acc / n as f64).abs()
    };
    let (mut a, mut b) = (k0 as f64 - 1.0, k0 as f64 + 1.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (eval(x1), eval(x2));
    for _ in 0..48 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = eval(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = eval(x1);
        }
    }
    let mut tau = 0.5 * (a + b);
    if tau > n as f64 / 2.0 {
        tau -= n as f64;
    }
    Ok(DelayEstimate {
        delay_samples: tau,
        peak_to_sidelobe: ratio,
    })
}

/// Cross-correlate against the RRC-shaped reference and return the delay in
/// input samples. The record must be one period of the cyclic symbol
/// sequence.
pub fn estimate_delay(sig: &SampledSignal, reference: &Pam4Symbols, cfg: &SyncConfig) -> Result<DelayEstimate> {
    let (y, ratio) = to_output_rate(sig, reference, cfg)?;
    let mut est = estimate_on_grid(&y.samples, reference, cfg)?;
    est.delay_samples *= ratio;
    Ok(est)
}

/// Timing recovery and resampling to `sps_out` samples per symbol, aligned so
/// that sample `sps_out * k` sits at the centre of symbol `k`.
pub fn sync_and_downsample(sig: &SampledSignal, reference: &Pam4Symbols, cfg: &SyncConfig) -> Result<SampledSignal> {
    let (y, _) = to_output_rate(sig, reference, cfg)?;
    let est = estimate_on_grid(&y.samples, reference, cfg)?;
    let aligned = fractional_delay_real(&y.samples, -est.delay_samples);
    let mut out = SampledSignal::new(aligned, y.sample_rate)?;
    out.warnings = sig.warnings.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transmitter::{shape_baseband, TxConfig};
    use std::f64::consts::PI;

    #[test]
    fn constant_field_gives_constant_photocurrent() {
        let env = ComplexEnvelope::new(vec![Complex64::from_polar(0.7, 0.3); 128], 100e9, 0.0).unwrap();
        let i = photodetect(&env, 40e9);
        assert!(i.samples.iter().all(|v| (v - 0.49).abs() < 1e-12));
    }

    #[test]
    fn two_tone_beat_has_full_contrast() {
        let fs = 256e9;
        let n = 4096;
        let df = fs / n as f64;
        let (f1, f2) = (-200.0 * df, 300.0 * df); // spacing 31.25 GHz < 40 GHz
        let samples = (0..n)
            .map(|k| {
                let t = k as f64 / fs;
                Complex64::from_polar(1.0, 2.0 * PI * f1 * t) + Complex64::from_polar(1.0, 2.0 * PI * f2 * t)
            })
            .collect();
        let env = ComplexEnvelope::new(samples, fs, 0.0).unwrap();
        let i = photodetect(&env, 40e9);
        let max = i.samples.iter().cloned().fold(f64::MIN, f64::max);
        let min = i.samples.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - 4.0).abs() < 1e-9 && min.abs() < 1e-9);
        // beat frequency
        let spec = crate::signal::fft_real(&i.samples);
        let (k, _) = spec.iter().enumerate().skip(1).take(n / 2).max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
        assert_eq!(k, 500);
    }

    #[test]
    fn detection_is_square_law_before_filtering() {
        let env = ComplexEnvelope::new(vec![Complex64::new(-0.3, 0.4), Complex64::new(0.0, -2.0)], 1.0, 0.0).unwrap();
        let i = photodetect(&env, 10.0);
        assert!(i.samples.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn optical_filter_removes_far_tone() {
        let fs = 200e9;
        let n = 1000;
        let samples = (0..n)
            .map(|k| Complex64::new(1.0, 0.0) + Complex64::from_polar(0.5, 2.0 * PI * 60e9 * k as f64 / fs))
            .collect();
        // carrier frame offset +24.5 GHz: the 60 GHz tone sits at 84.5 GHz from centre
        let env = ComplexEnvelope::new(samples, fs, 24.5e9).unwrap();
        let out = optical_filter(&env, 62e9);
        assert!(out.samples.iter().all(|s| (s - Complex64::new(1.0, 0.0)).norm() < 1e-9));
    }

    fn shaped(symbols: &Pam4Symbols, sps: usize) -> SampledSignal {
        let cfg = TxConfig { sps, ..TxConfig::default() };
        shape_baseband(symbols, &cfg).unwrap()
    }

    #[test]
    fn zero_delay_loopback() {
        let sym = Pam4Symbols::random(2048, 8);
        let sig = shaped(&sym, 4);
        let est = estimate_delay(&sig, &sym, &SyncConfig::default()).unwrap();
        assert!(est.delay_samples.abs() < 0.05, "{}", est.delay_samples);
        let out = sync_and_downsample(&sig, &sym, &SyncConfig::default()).unwrap();
        assert_eq!(out.len(), 2 * sym.len());
    }

    #[test]
    fn injected_fractional_delay_is_recovered() {
        let sym = Pam4Symbols::random(2048, 9);
        let sig = shaped(&sym, 4);
        let delayed = SampledSignal::new(fractional_delay_real(&sig.samples, 13.5), sig.sample_rate).unwrap();
        let est = estimate_delay(&delayed, &sym, &SyncConfig::default()).unwrap();
        assert!((est.delay_samples - 13.5).abs() < 0.05, "{}", est.delay_samples);
        // after sync, even samples land on the symbol centres
        let out = sync_and_downsample(&delayed, &sym, &SyncConfig::default()).unwrap();
        let direct = SampledSignal::new(sig.samples.iter().step_by(2).cloned().collect(), sig.sample_rate / 2.0).unwrap();
        let err = out.samples.iter().zip(&direct.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-2 * direct.samples.iter().fold(0.0f64, |m, v| m.max(v.abs())), "{err}");
    }

    #[test]
    fn periodic_signal_fails_to_sync() {
        let sym = Pam4Symbols::random(2048, 10);
        let n = 4 * 2048;
        let tone: Vec<f64> = (0..n).map(|k| (2.0 * PI * 37.0 * k as f64 / n as f64).cos()).collect();
        let other = SampledSignal::new(tone, 224e9).unwrap();
        assert!(matches!(estimate_delay(&other, &sym, &SyncConfig::default()), Err(Error::SyncFailure { .. })));
    }

    #[test]
    fn short_reference_rejected() {
        let sym = Pam4Symbols::random(100, 1);
        let sig = shaped(&sym, 4);
        assert!(estimate_delay(&sig, &sym, &SyncConfig::default()).is_err());
    }
}
