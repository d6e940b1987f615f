use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::signal::{fft_frequencies, fft_in_place, ifft_in_place, ComplexEnvelope, Warning};

/// Relative RMS change (step vs. half step) above which a warning is attached.
pub const STEP_WARNING_THRESHOLD: f64 = 1e-3;

/// Standard single-mode fiber span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberParams {
    pub length_km: f64,
    /// Group-velocity dispersion, ps^2/km.
    pub beta2_ps2_per_km: f64,
    /// Kerr coefficient, 1/(W km).
    pub gamma_per_w_km: f64,
    /// Power attenuation, dB/km.
    pub alpha_db_per_km: f64,
    pub step_km: f64,
    /// Re-run at half the step and compare.
    pub check_convergence: bool,
}

impl Default for FiberParams {
    fn default() -> Self {
        Self {
            length_km: 100.0,
            beta2_ps2_per_km: -21.7,
            gamma_per_w_km: 1.3,
            alpha_db_per_km: 0.2,
            step_km: 0.1,
            check_convergence: true,
        }
    }
}

impl FiberParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_km >= 0.0) {
            return Err(invalid("length_km", "must be >= 0"));
        }
        if !(self.step_km > 0.0) {
            return Err(invalid("step_km", "must be > 0"));
        }
        if self.length_km > 0.0 && self.step_km > self.length_km {
            return Err(invalid("step_km", "must not exceed the fiber length"));
        }
        for (name, v) in [
            ("beta2_ps2_per_km", self.beta2_ps2_per_km),
            ("gamma_per_w_km", self.gamma_per_w_km),
            ("alpha_db_per_km", self.alpha_db_per_km),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// Linear field attenuation per km (half the power coefficient).
    fn field_loss_per_km(&self) -> f64 {
        self.alpha_db_per_km * std::f64::consts::LN_10 / 10.0 / 2.0
    }
}

/// Symmetric split-step Fourier solution of the scalar NLSE
/// `dA/dz = -alpha/2 A - i beta2/2 d^2A/dt^2 + i gamma |A|^2 A`.
///
/// Dispersion and loss are applied in half steps around each full Kerr step;
/// consecutive half steps are merged. The dispersion operator uses the
/// envelope's own frequency grid.
pub fn propagate_ssmf(env: &ComplexEnvelope, fp: &FiberParams) -> Result<ComplexEnvelope> {
    fp.validate()?;
    if fp.length_km == 0.0 || env.is_empty() {
        return Ok(env.clone());
    }
    let steps = (fp.length_km / fp.step_km).ceil().max(1.0) as usize;
    let out = split_step(env, fp, steps);
    if !fp.check_convergence {
        return Ok(out);
    }
    let fine = split_step(env, fp, 2 * steps);
    let change = relative_rms(&out.samples, &fine.samples);
    if change > STEP_WARNING_THRESHOLD {
        log::warn!("split-step not converged: halving the step changes the field by {change:.2e} RMS");
        return Ok(fine.with_warning(Warning::StepConvergence { rms_change: change }));
    }
    Ok(fine)
}

pub(crate) fn relative_rms(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Frequency-domain dispersion phase `exp(i beta2/2 w^2 L)` for every bin.
pub(crate) fn dispersion_operator(n: usize, sample_rate: f64, beta2_ps2_per_km: f64, length_km: f64) -> Vec<Complex64> {
    let beta2 = beta2_ps2_per_km * 1e-24; // s^2/km
    fft_frequencies(n, sample_rate)
        .into_iter()
        .map(|f| {
            let w = 2.0 * std::f64::consts::PI * f;
            Complex64::from_polar(1.0, 0.5 * beta2 * w * w * length_km)
        })
        .collect()
}

fn split_step(env: &ComplexEnvelope, fp: &FiberParams, steps: usize) -> ComplexEnvelope {
    let n = env.len();
    let h = fp.length_km / steps as f64;
    let loss_half = (-fp.field_loss_per_km() * h / 2.0).exp();
    let half: Vec<Complex64> = dispersion_operator(n, env.sample_rate, fp.beta2_ps2_per_km, h / 2.0)
        .into_iter()
        .map(|d| d * loss_half)
        .collect();
    let full: Vec<Complex64> = half.iter().map(|d| d * d).collect();
    let kerr = fp.gamma_per_w_km * h;

    let mut field = env.samples.clone();
    fft_in_place(&mut field);
    field.iter_mut().zip(&half).for_each(|(a, d)| *a *= d);
    for s in 0..steps {
        ifft_in_place(&mut field);
        if kerr != 0.0 {
            for a in field.iter_mut() {
                *a *= Complex64::from_polar(1.0, kerr * a.norm_sqr());
            }
        }
        fft_in_place(&mut field);
        let op = if s + 1 == steps { &half } else { &full };
        field.iter_mut().zip(op).for_each(|(a, d)| *a *= d);
    }
    ifft_in_place(&mut field);
    ComplexEnvelope {
        samples: field,
        sample_rate: env.sample_rate,
        center_frequency_offset: env.center_frequency_offset,
        warnings: env.warnings.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::fft;

    fn gaussian(n: usize, dt: f64, t0: f64, p0: f64) -> ComplexEnvelope {
        let samples = (0..n)
            .map(|k| {
                let t = (k as f64 - n as f64 / 2.0) * dt;
                Complex64::new(p0.sqrt() * (-t * t / (2.0 * t0 * t0)).exp(), 0.0)
            })
            .collect();
        ComplexEnvelope::new(samples, 1.0 / dt, 0.0).unwrap()
    }

    fn lossless(beta2: f64, gamma: f64, length: f64) -> FiberParams {
        FiberParams {
            length_km: length,
            beta2_ps2_per_km: beta2,
            gamma_per_w_km: gamma,
            alpha_db_per_km: 0.0,
            step_km: 0.1,
            check_convergence: false,
        }
    }

    #[test]
    fn zero_length_is_identity() {
        let env = gaussian(256, 1e-12, 10e-12, 1e-3);
        let fp = FiberParams { length_km: 0.0, ..FiberParams::default() };
        assert_eq!(propagate_ssmf(&env, &fp).unwrap(), env);
    }

    #[test]
    fn invalid_params_rejected() {
        let env = gaussian(64, 1e-12, 5e-12, 1e-3);
        let fp = FiberParams { step_km: 0.0, ..FiberParams::default() };
        assert!(propagate_ssmf(&env, &fp).is_err());
        let fp = FiberParams { length_km: 1.0, step_km: 2.0, ..FiberParams::default() };
        assert!(propagate_ssmf(&env, &fp).is_err());
    }

    #[test]
    fn energy_conserved_without_loss() {
        let env = gaussian(2048, 0.5e-12, 8e-12, 0.5);
        let out = propagate_ssmf(&env, &lossless(-21.7, 1.3, 20.0)).unwrap();
        let rel = (out.energy() - env.energy()).abs() / env.energy();
        assert!(rel < 1e-9, "{rel}");
    }

    #[test]
    fn dispersion_only_matches_single_exact_operator() {
        let env = gaussian(4096, 0.5e-12, 10e-12, 1e-3);
        let out = propagate_ssmf(&env, &lossless(-21.7, 0.0, 50.0)).unwrap();
        let op = dispersion_operator(env.len(), env.sample_rate, -21.7, 50.0);
        let mut spec = fft(&env.samples);
        spec.iter_mut().zip(&op).for_each(|(a, d)| *a *= d);
        ifft_in_place(&mut spec);
        let rms = (out.samples.iter().zip(&spec).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / env.len() as f64).sqrt();
        assert!(rms < 1e-10, "{rms}");
    }

    #[test]
    fn attenuation_matches_decibel_loss() {
        let env = gaussian(512, 1e-12, 20e-12, 1e-3);
        let fp = FiberParams { length_km: 50.0, gamma_per_w_km: 0.0, check_convergence: false, ..FiberParams::default() };
        let out = propagate_ssmf(&env, &fp).unwrap();
        let loss_db = 10.0 * (env.energy() / out.energy()).log10();
        assert!((loss_db - 10.0).abs() < 1e-9);
    }

    #[test]
    fn coarse_step_warns() {
        // strong nonlinearity with a single 10 km step
        let env = gaussian(1024, 0.5e-12, 5e-12, 2.0);
        let fp = FiberParams {
            length_km: 10.0,
            step_km: 10.0,
            check_convergence: true,
            ..FiberParams::default()
        };
        let out = propagate_ssmf(&env, &fp).unwrap();
        assert!(out.warnings.iter().any(|w| matches!(w, Warning::StepConvergence { .. })));
    }
}
