use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::signal::{fft, fft_frequencies, ComplexEnvelope};

/// 0.1 nm expressed in Hz at the 1545.5 nm operating wavelength.
pub fn osnr_reference_bandwidth() -> f64 {
    const C: f64 = 299_792_458.0;
    let lambda = 1545.5e-9;
    C * 0.1e-9 / (lambda * lambda)
}

/// Add complex white Gaussian noise so that the OSNR in the 0.1 nm reference
/// bandwidth equals `target_osnr_db`. Signal power is the mean power of the
/// input (carrier included). `f64::INFINITY` returns the input unchanged.
pub fn amplify_noise_load(env: &ComplexEnvelope, target_osnr_db: f64, seed: u64) -> ComplexEnvelope {
    if target_osnr_db.is_infinite() && target_osnr_db > 0.0 {
        return env.clone();
    }
    let p_sig = env.power();
    let osnr = 10f64.powf(target_osnr_db / 10.0);
    // total noise variance over the simulation bandwidth
    let var = p_sig * env.sample_rate / (osnr_reference_bandwidth() * osnr);
    let normal = Normal::new(0.0, (var / 2.0).sqrt()).expect("finite std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = env
        .samples
        .iter()
        .map(|s| s + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    ComplexEnvelope {
        samples,
        sample_rate: env.sample_rate,
        center_frequency_offset: env.center_frequency_offset,
        warnings: env.warnings.clone(),
    }
}

/// Spectral OSNR estimate.
///
/// The noise density is the mean periodogram outside `occupied` (lo, hi) in
/// the envelope frame; signal power is total power minus the noise integrated
/// over the whole simulation bandwidth.
pub fn estimate_osnr_db(env: &ComplexEnvelope, occupied: (f64, f64)) -> f64 {
    let n = env.len();
    let spec = fft(&env.samples);
    let freqs = fft_frequencies(n, env.sample_rate);
    let nn = (n as f64) * (n as f64);
    let (mut sum, mut count) = (0.0, 0usize);
    for (s, f) in spec.iter().zip(freqs) {
        if f < occupied.0 || f > occupied.1 {
            sum += s.norm_sqr() / nn;
            count += 1;
        }
    }
    if count == 0 {
        return f64::NAN;
    }
    let per_bin = sum / count as f64;
    let noise_total = per_bin * n as f64;
    let signal = env.power() - noise_total;
    let noise_ref = noise_total * osnr_reference_bandwidth() / env.sample_rate;
    10.0 * (signal / noise_ref).log10()
}
