use num_complex::Complex64;

use super::{fft, ifft_in_place, ComplexEnvelope, SampledSignal};
use crate::error::{invalid, Error, Result};

/// Band-limited rational resampling by `p / q`.
///
/// The transform method is used: the record's spectrum is truncated or
/// zero-extended and transformed back. On a cyclic band-limited record this is
/// exact. When `len * p` is not a multiple of `q` the record is first extended
/// by mirroring its tail, and the result is truncated to `floor(len * p / q)`.
pub trait Resample: Sized {
    fn resample(&self, p: usize, q: usize) -> Result<Self>;
}

pub fn resample<T: Resample>(sig: &T, p: usize, q: usize) -> Result<T> {
    sig.resample(p, q)
}

impl Resample for SampledSignal {
    fn resample(&self, p: usize, q: usize) -> Result<Self> {
        let (p, q) = reduce(p, q)?;
        let x: Vec<Complex64> = self.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let y = resample_samples(&x, p, q)?;
        let mut out = SampledSignal::new(y.into_iter().map(|c| c.re).collect(), self.sample_rate * p as f64 / q as f64)?;
        out.warnings = self.warnings.clone();
        Ok(out)
    }
}

impl Resample for ComplexEnvelope {
    fn resample(&self, p: usize, q: usize) -> Result<Self> {
        let (p, q) = reduce(p, q)?;
        let y = resample_samples(&self.samples, p, q)?;
        let mut out = ComplexEnvelope::new(y, self.sample_rate * p as f64 / q as f64, self.center_frequency_offset)?;
        out.warnings = self.warnings.clone();
        Ok(out)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn reduce(p: usize, q: usize) -> Result<(usize, usize)> {
    if p == 0 || q == 0 {
        return Err(invalid("p/q", "resampling factors must be >= 1"));
    }
    let g = gcd(p, q);
    Ok((p / g, q / g))
}

/// Smallest `p / q` with `from * p / q == to` to within a part in 1e9.
pub fn rational_ratio(from_rate: f64, to_rate: f64) -> Result<(usize, usize)> {
    if !(from_rate > 0.0 && to_rate > 0.0) {
        return Err(invalid("sample_rate", "rates must be positive"));
    }
    let target = to_rate / from_rate;
    for q in 1..=100_000usize {
        let p = (target * q as f64).round();
        if p >= 1.0 && (p / q as f64 - target).abs() <= 1e-9 * target {
            return reduce(p as usize, q);
        }
    }
    Err(invalid("sample_rate", format!("no small rational ratio for {from_rate} -> {to_rate}")))
}

fn resample_samples(x: &[Complex64], p: usize, q: usize) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if p == q {
        return Ok(x.to_vec());
    }
    let len = x.len();
    let (work, out_len) = if (len * p) % q == 0 {
        (x.to_vec(), len * p / q)
    } else {
        let padded_len = len.div_ceil(q) * q;
        let mut w = x.to_vec();
        // reflect about the last sample
        for j in 0..padded_len - len {
            let src = (len as isize - 2 - j as isize).rem_euclid(len as isize) as usize;
            w.push(x[src]);
        }
        (w, len * p / q)
    };
    let mut y = respectrum(&work, work.len() * p / q);
    y.truncate(out_len.max(1));
    Ok(y)
}

/// Move a length-`n` record to length `m` through the frequency domain.
fn respectrum(x: &[Complex64], m: usize) -> Vec<Complex64> {
    let n = x.len();
    let spec = fft(x);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let k = n.min(m);
    let pos = k / 2 + k % 2; // bins 0..pos are non-negative frequencies
    let neg = k / 2; // bins -1..-neg, minus the Nyquist bin when k is even
    for i in 0..pos {
        out[i] = spec[i];
    }
    let neg_plain = if k % 2 == 0 { neg - 1 } else { neg };
    for i in 1..=neg_plain {
        out[m - i] = spec[n - i];
    }
    if k % 2 == 0 && k > 0 {
        let h = k / 2;
        if m < n {
            // fold both +h and -h input bins onto the output Nyquist bin
            out[h] = spec[h] + spec[n - h];
        } else if m > n {
            // split the input Nyquist bin across +h and -h
            out[h] = spec[h] * 0.5;
            out[m - h] = spec[h] * 0.5;
        } else {
            out[h] = spec[h];
        }
    }
    ifft_in_place(&mut out);
    let scale = m as f64 / n as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_ratio() {
        let s = SampledSignal::new(vec![1.0, -2.0, 3.5, 0.25], 10.0).unwrap();
        let r = s.resample(3, 3).unwrap();
        assert_eq!(r.samples, s.samples);
        assert_eq!(r.sample_rate, 10.0);
    }

    #[test]
    fn adc_rate_to_two_samples_per_symbol() {
        let s = SampledSignal::new(vec![0.0; 1600], 160e9).unwrap();
        let r = s.resample(7, 10).unwrap();
        assert!((r.sample_rate - 112e9).abs() < 1.0);
        assert_eq!(r.len(), 1120);
        assert!((r.sample_rate / 56e9 - 2.0).abs() < 1e-12);
        assert_eq!(rational_ratio(160e9, 112e9).unwrap(), (7, 10));
        assert_eq!(rational_ratio(224e9, 160e9).unwrap(), (5, 7));
    }

    #[test]
    fn sine_survives_two_to_one() {
        let fs = 16e9;
        let f = 1e9;
        let n = 1024;
        let x: Vec<f64> = (0..n).map(|k| (2.0 * PI * f * k as f64 / fs).sin()).collect();
        let s = SampledSignal::new(x, fs).unwrap();
        let r = s.resample(2, 1).unwrap();
        assert_eq!(r.sample_rate, 32e9);
        let err = r
            .samples
            .iter()
            .enumerate()
            .map(|(k, v)| (v - (2.0 * PI * f * k as f64 / 32e9).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn empty_input_is_an_error() {
        let s = SampledSignal::new(vec![], 1.0).unwrap();
        assert!(s.resample(2, 1).is_err());
    }

    #[test]
    fn non_multiple_length_is_padded() {
        let s = SampledSignal::new((0..101).map(|k| (k as f64 * 0.05).cos()).collect(), 100.0).unwrap();
        let r = s.resample(1, 2).unwrap();
        assert_eq!(r.len(), 50);
    }

    fn band_limited(n: usize, max_bin: usize, coeffs: &[(f64, f64)]) -> Vec<f64> {
        (0..n)
            .map(|t| {
                coeffs
                    .iter()
                    .enumerate()
                    .take(max_bin)
                    .map(|(k, (a, b))| {
                        let w = 2.0 * PI * (k + 1) as f64 * t as f64 / n as f64;
                        a * w.cos() + b * w.sin()
                    })
                    .sum()
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn up_then_down_recovers_band_limited(
            p in 1usize..6, q in 1usize..6, periods in 4usize..12,
            coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)
        ) {
            let g = gcd(p, q);
            let (p, q) = (p / g, q / g);
            // record length divisible by q so the first pass is exact
            let n = 2 * q * p * periods * 8;
            // occupy < 80 % of the narrower Nyquist band
            let narrow_nyq = n.min(n * p / q) / 2;
            let max_bin = ((0.8 * narrow_nyq as f64) as usize).min(coeffs.len()).max(1) - 1;
            let x = band_limited(n, max_bin, &coeffs);
            let s = SampledSignal::new(x.clone(), 1.0).unwrap();
            let back = s.resample(p, q).unwrap().resample(q, p).unwrap();
            prop_assert_eq!(back.len(), n);
            let rms = (x.iter().zip(&back.samples).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt();
            prop_assert!(rms < 1e-6, "rms {}", rms);
        }
    }
}
