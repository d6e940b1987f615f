use std::f64::consts::PI;

use num_complex::Complex64;

use super::{fft_in_place, fft_real, ifft_in_place};
use crate::error::{invalid, Result};

/// Root-raised-cosine FIR taps, unit energy, symmetric about the centre tap.
///
/// `span` is the filter length in symbols and `sps` the samples per symbol;
/// the filter has `span * sps + 1` taps.
pub fn rrc_taps(beta: f64, span: usize, sps: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid("beta", format!("roll-off must lie in [0, 1], got {beta}")));
    }
    if span < 2 {
        return Err(invalid("span", "need at least 2 symbols"));
    }
    if sps < 2 {
        return Err(invalid("sps", "need at least 2 samples per symbol"));
    }
    if (span * sps) % 2 != 0 {
        return Err(invalid("span", "span * sps must be even so the filter has odd length"));
    }
    let len = span * sps + 1;
    let half = (len / 2) as isize;
    // Build one side and mirror it so the symmetry is exact.
    let mut taps = vec![0.0; len];
    for k in 0..=half {
        let t = k as f64 / sps as f64;
        let v = rrc_impulse(t, beta);
        taps[(half + k as isize) as usize] = v;
        taps[(half - k as isize) as usize] = v;
    }
    let energy = taps.iter().map(|v| v * v).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|v| *v /= energy);
    Ok(taps)
}

/// RRC impulse response at `t` symbol periods, unnormalized (T = 1).
fn rrc_impulse(t: f64, beta: f64) -> f64 {
    let t = t.abs();
    if t < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && (t - 1.0 / (4.0 * beta)).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Magnitude response of an RRC filter with unit DC gain.
pub fn rrc_frequency_response(f: f64, baud: f64, beta: f64) -> f64 {
    let f = f.abs();
    let f1 = (1.0 - beta) * baud / 2.0;
    let f2 = (1.0 + beta) * baud / 2.0;
    if f <= f1 {
        1.0
    } else if f > f2 {
        0.0
    } else {
        (0.5 * (1.0 + (PI / (beta * baud) * (f - f1)).cos())).sqrt()
    }
}

/// Zero-phase circular convolution with a centred FIR kernel.
pub fn circular_fir(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 || taps.is_empty() {
        return x.to_vec();
    }
    let centre = (taps.len() / 2) as isize;
    let mut kernel = vec![Complex64::new(0.0, 0.0); n];
    for (j, &h) in taps.iter().enumerate() {
        let idx = (j as isize - centre).rem_euclid(n as isize) as usize;
        kernel[idx].re += h;
    }
    fft_in_place(&mut kernel);
    let mut spec = fft_real(x);
    spec.iter_mut().zip(&kernel).for_each(|(s, k)| *s *= k);
    ifft_in_place(&mut spec);
    spec.into_iter().map(|c| c.re).collect()
}
