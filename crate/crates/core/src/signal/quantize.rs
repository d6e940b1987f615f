use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{mean, variance, SampledSignal, Warning};
use crate::error::{invalid, Result};

/// How the converter's input range is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FullScale {
    /// Range is mean +/- k standard deviations of the record.
    Sigma(f64),
    /// Explicit range `center +/- half_range`.
    Explicit { center: f64, half_range: f64 },
}

impl Default for FullScale {
    fn default() -> Self {
        FullScale::Sigma(4.0)
    }
}

const CLIP_WARNING_FRACTION: f64 = 0.01;

/// Converter model for a non-integer effective number of bits, full scale at
/// mean +/- 4 sigma. `enob = f64::INFINITY` is the identity.
pub fn quantize_enob(sig: &SampledSignal, enob: f64, seed: u64) -> Result<SampledSignal> {
    quantize_enob_with(sig, enob, FullScale::default(), seed)
}

/// Uniform mid-rise quantizer with `floor(2^enob)` levels over the full-scale
/// range, followed by white Gaussian noise sized so that a full-scale sine
/// reaches SNDR = 6.02 * enob + 1.76 dB. When the level count alone already
/// sits at or below that SNDR no noise is added.
pub fn quantize_enob_with(sig: &SampledSignal, enob: f64, full_scale: FullScale, seed: u64) -> Result<SampledSignal> {
    if enob.is_infinite() && enob > 0.0 {
        return Ok(sig.clone());
    }
    if !(enob > 0.0) {
        return Err(invalid("enob", format!("must be > 0, got {enob}")));
    }
    let (center, half) = match full_scale {
        FullScale::Sigma(k) => {
            let sd = variance(&sig.samples).sqrt();
            let half = if sd > 0.0 { k * sd } else { mean(&sig.samples).abs().max(1.0) };
            (mean(&sig.samples), half)
        }
        FullScale::Explicit { center, half_range } => {
            if !(half_range > 0.0) {
                return Err(invalid("half_range", "full scale must be positive"));
            }
            (center, half_range)
        }
    };
    let levels = (2f64.powf(enob).floor() as usize).max(2);
    let step = 2.0 * half / levels as f64;
    let target_sndr = 10f64.powf((6.02 * enob + 1.76) / 10.0);
    let sine_power = half * half / 2.0;
    let noise_var = (sine_power / target_sndr - step * step / 12.0).max(0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_var.sqrt()).expect("finite std");
    let lo = center - half;
    let mut clipped = 0usize;
    let out: Vec<f64> = sig
        .samples
        .iter()
        .map(|&v| {
            let mut idx = ((v - lo) / step).floor();
            if idx < 0.0 {
                idx = 0.0;
                clipped += 1;
            } else if idx > (levels - 1) as f64 {
                idx = (levels - 1) as f64;
                clipped += 1;
            }
            let q = lo + (idx + 0.5) * step;
            if noise_var > 0.0 {
                q + normal.sample(&mut rng)
            } else {
                q
            }
        })
        .collect();
    let mut result = SampledSignal::new(out, sig.sample_rate)?;
    result.warnings = sig.warnings.clone();
    let fraction = if sig.is_empty() { 0.0 } else { clipped as f64 / sig.len() as f64 };
    if fraction > CLIP_WARNING_FRACTION {
        result.warnings.push(Warning::Clipping { fraction });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// SNDR by least-squares sine fit at the known frequency: the fitted
    /// sinusoid is the signal, everything else is noise plus distortion.
    fn sndr_db(x: &[f64], w: f64) -> f64 {
        let n = x.len();
        // normal equations for [cos, sin, 1]
        let mut a = [[0.0f64; 3]; 3];
        let mut b = [0.0f64; 3];
        for (k, &v) in x.iter().enumerate() {
            let basis = [(w * k as f64).cos(), (w * k as f64).sin(), 1.0];
            for i in 0..3 {
                b[i] += basis[i] * v;
                for j in 0..3 {
                    a[i][j] += basis[i] * basis[j];
                }
            }
        }
        // Cramer's rule
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(a);
        let mut coef = [0.0; 3];
        for c in 0..3 {
            let mut m = a;
            for r in 0..3 {
                m[r][c] = b[r];
            }
            coef[c] = det(m) / d;
        }
        let mut sig_p = 0.0;
        let mut err_p = 0.0;
        for (k, &v) in x.iter().enumerate() {
            let fit = coef[0] * (w * k as f64).cos() + coef[1] * (w * k as f64).sin();
            sig_p += fit * fit;
            err_p += (v - fit - coef[2]).powi(2);
        }
        let _ = n;
        10.0 * (sig_p / err_p).log10()
    }

    #[test]
    fn infinite_enob_is_identity() {
        let s = SampledSignal::new(vec![0.1, -0.7, 3.0], 1e9).unwrap();
        assert_eq!(quantize_enob(&s, f64::INFINITY, 0).unwrap(), s);
    }

    #[test]
    fn enob_5_5_full_scale_sine_sndr() {
        let n = 1 << 16;
        let w = 2.0 * PI * 1031.0 / n as f64;
        let x: Vec<f64> = (0..n).map(|k| (w * k as f64).sin()).collect();
        let s = SampledSignal::new(x, 160e9).unwrap();
        let q = quantize_enob_with(&s, 5.5, FullScale::Explicit { center: 0.0, half_range: 1.0 }, 3).unwrap();
        let sndr = sndr_db(&q.samples, w);
        let expected = 6.02 * 5.5 + 1.76;
        assert!((sndr - expected).abs() < 0.3, "sndr {sndr} vs {expected}");
    }

    #[test]
    fn integer_enob_sndr_close_to_formula() {
        let n = 1 << 15;
        let w = 2.0 * PI * 517.0 / n as f64;
        let x: Vec<f64> = (0..n).map(|k| 0.999 * (w * k as f64).sin()).collect();
        let s = SampledSignal::new(x, 1.0).unwrap();
        for enob in [4.0, 6.0, 7.3] {
            let q = quantize_enob_with(&s, enob, FullScale::Explicit { center: 0.0, half_range: 1.0 }, 9).unwrap();
            let sndr = sndr_db(&q.samples, w);
            assert!((sndr - (6.02 * enob + 1.76)).abs() < 0.3, "enob {enob}: {sndr}");
        }
    }

    #[test]
    fn zero_input_stays_within_one_lsb() {
        let s = SampledSignal::new(vec![0.0; 512], 1.0).unwrap();
        let q = quantize_enob(&s, 8.0, 1).unwrap();
        let lsb = 2.0 * 1.0 / 256.0;
        assert!(q.samples.iter().all(|v| v.abs() <= lsb));
    }

    #[test]
    fn heavy_clipping_is_flagged() {
        let x: Vec<f64> = (0..1000).map(|k| if k % 10 == 0 { 50.0 } else { (k as f64).sin() }).collect();
        let s = SampledSignal::new(x, 1.0).unwrap();
        let q = quantize_enob_with(&s, 5.5, FullScale::Explicit { center: 0.0, half_range: 1.0 }, 0).unwrap();
        assert!(q.warnings.iter().any(|w| matches!(w, Warning::Clipping { fraction } if *fraction > 0.09)));
    }

    #[test]
    fn non_positive_enob_rejected() {
        let s = SampledSignal::new(vec![0.0; 4], 1.0).unwrap();
        assert!(quantize_enob(&s, 0.0, 0).is_err());
        assert!(quantize_enob(&s, -1.0, 0).is_err());
    }
}
