use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DriveWaveform;
use crate::error::{invalid, Result};
use crate::signal::SampledSignal;

/// Fixed random input mask, shared by every symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub values: Vec<f64>,
    pub seed: u64,
}

impl Mask {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Uniform [0, 1] mask of even length `n`.
pub fn build_mask(n: usize, seed: u64) -> Result<Mask> {
    if n < 2 || n % 2 != 0 {
        return Err(invalid("n_nodes", format!("mask length must be even and >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n).map(|_| rng.gen::<f64>()).collect();
    Ok(Mask { values, seed })
}

/// Apply the mask to a 2 samples-per-symbol stream: the first sample of each
/// symbol is multiplied by the first half of the mask, the second sample by
/// the second half. The result is contiguous, one value per virtual node.
pub fn mask_symbols(samples_2sps: &SampledSignal, mask: &Mask) -> Result<DriveWaveform> {
    let x = &samples_2sps.samples;
    if x.len() % 2 != 0 {
        return Err(invalid("samples_2sps", format!("length {} is not a multiple of 2", x.len())));
    }
    if mask.len() < 2 || mask.len() % 2 != 0 {
        return Err(invalid("mask", "mask length must be even"));
    }
    let n = mask.len();
    let half = n / 2;
    let mut values = Vec::with_capacity(x.len() / 2 * n);
    for pair in x.chunks_exact(2) {
        values.extend(mask.values[..half].iter().map(|m| pair[0] * m));
        values.extend(mask.values[half..].iter().map(|m| pair[1] * m));
    }
    let symbol_boundaries = (0..x.len() / 2).map(|s| s * n).collect();
    Ok(DriveWaveform {
        values,
        symbol_boundaries,
        n_nodes: n,
        schedule: None,
    })
}

/// Affine map of the record onto [0, 1] by its own minimum and maximum.
/// A constant record maps to zeros.
pub fn normalize_unit(sig: &SampledSignal) -> SampledSignal {
    let lo = sig.samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sig.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let samples = if span > 0.0 {
        sig.samples.iter().map(|v| (v - lo) / span).collect()
    } else {
        vec![0.0; sig.len()]
    };
    SampledSignal {
        samples,
        sample_rate: sig.sample_rate,
        warnings: sig.warnings.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mask_is_deterministic_and_bounded() {
        let a = build_mask(20, 5).unwrap();
        assert_eq!(a, build_mask(20, 5).unwrap());
        assert_eq!(a.len(), 20);
        assert!(a.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(a, build_mask(20, 6).unwrap());
    }

    #[test]
    fn odd_or_tiny_mask_rejected() {
        assert!(build_mask(21, 0).is_err());
        assert!(build_mask(0, 0).is_err());
    }

    #[test]
    fn two_node_mask_multiplies_each_sample() {
        let mask = Mask { values: vec![0.25, 0.5], seed: 0 };
        let x = SampledSignal::new(vec![2.0, 4.0], 112e9).unwrap();
        let d = mask_symbols(&x, &mask).unwrap();
        assert_eq!(d.values, vec![0.5, 2.0]);
    }

    #[test]
    fn output_is_symbols_times_nodes() {
        let mask = build_mask(20, 1).unwrap();
        let x = SampledSignal::new(vec![0.3; 2 * 37], 112e9).unwrap();
        let d = mask_symbols(&x, &mask).unwrap();
        assert_eq!(d.values.len(), 37 * 20);
        assert_eq!(d.symbol_boundaries.len(), 37);
    }

    #[test]
    fn odd_sample_count_rejected() {
        let mask = build_mask(4, 1).unwrap();
        let x = SampledSignal::new(vec![0.3; 5], 112e9).unwrap();
        assert!(mask_symbols(&x, &mask).is_err());
    }

    proptest! {
        #[test]
        fn masking_is_linear(xs in prop::collection::vec(-10.0f64..10.0, 1..40), a in -5.0f64..5.0, seed in 0u64..100) {
            let mut xs = xs;
            if xs.len() % 2 == 1 { xs.pop(); }
            let mask = build_mask(8, seed).unwrap();
            let x = SampledSignal::new(xs.clone(), 1.0).unwrap();
            let ax = SampledSignal::new(xs.iter().map(|v| a * v).collect(), 1.0).unwrap();
            let lhs = mask_symbols(&ax, &mask).unwrap().values;
            let rhs: Vec<f64> = mask_symbols(&x, &mask).unwrap().values.iter().map(|v| a * v).collect();
            for (l, r) in lhs.iter().zip(&rhs) {
                prop_assert!((l - r).abs() <= 1e-15 * r.abs().max(1.0));
            }
        }

        #[test]
        fn power_of_two_scaling_is_exact(xs in prop::collection::vec(-10.0f64..10.0, 2..40), k in -8i32..8, seed in 0u64..100) {
            let mut xs = xs;
            if xs.len() % 2 == 1 { xs.pop(); }
            let a = 2f64.powi(k);
            let mask = build_mask(6, seed).unwrap();
            let x = SampledSignal::new(xs.clone(), 1.0).unwrap();
            let ax = SampledSignal::new(xs.iter().map(|v| a * v).collect(), 1.0).unwrap();
            let lhs = mask_symbols(&ax, &mask).unwrap().values;
            let rhs: Vec<f64> = mask_symbols(&x, &mask).unwrap().values.iter().map(|v| a * v).collect();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
