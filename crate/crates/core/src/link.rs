//! End-to-end transmission: transmitter, fiber, noise loading, receiver
//! front end, converter and timing recovery down to 2 samples per symbol.

use serde::{Deserialize, Serialize};

use crate::channel::{
    amplify_noise_load, apply_phase_noise, optical_filter, photodetect, propagate_ssmf, sync_and_downsample,
    FiberParams, LinkConfig, SyncConfig,
};
use crate::error::Result;
use crate::readout::SplitSpec;
use crate::signal::{quantize_enob, rational_ratio, ComplexEnvelope, Resample, SampledSignal};
use crate::transmitter::{shape_and_ssb, Pam4Symbols, TxConfig};

/// Guard symbols at each end of a record; keeps tap windows away from the
/// record edges.
pub const GUARD_SYMBOLS: usize = 64;

/// Seeds for the random processes of one link realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSeeds {
    pub data: u64,
    pub noise: u64,
    pub adc: u64,
    pub xpm: u64,
}

impl LinkSeeds {
    /// Distinct, reproducible seeds derived from one run seed.
    pub fn from_seed(seed: u64) -> Self {
        let mix = |k: u64| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) ^ k.wrapping_mul(0xD1B5_4A32_D192_ED03);
        Self {
            data: seed,
            noise: mix(1),
            adc: mix(2),
            xpm: mix(3),
        }
    }
}

/// Smallest record length `>= min` that is a multiple of 7 and has only
/// prime factors 2, 3, 5 and 7. The multiple of 7 keeps the converter rate
/// change exact; the small factors keep the transforms fast.
pub fn record_length(min: usize) -> usize {
    let smooth = |mut n: usize| {
        for p in [2, 3, 5, 7] {
            while n % p == 0 {
                n /= p;
            }
        }
        n == 1
    };
    let mut n = min.max(7).div_ceil(7) * 7;
    while !smooth(n) {
        n += 7;
    }
    n
}

/// Split with the guard offset applied, and the record length that holds it.
pub fn record_layout(split: &SplitSpec) -> (SplitSpec, usize) {
    let placed = SplitSpec {
        lead: split.lead + GUARD_SYMBOLS,
        ..*split
    };
    (placed, record_length(placed.total() + GUARD_SYMBOLS))
}

/// Field after the fiber, before noise loading. Deterministic in the data
/// seed, so sweeps over receiver-side parameters can reuse it.
#[derive(Debug, Clone)]
pub struct Propagated {
    pub symbols: Pam4Symbols,
    pub field: ComplexEnvelope,
    pub split: SplitSpec,
}

/// Detected record at 2 samples per symbol, aligned with `symbols`.
#[derive(Debug, Clone)]
pub struct Received {
    pub symbols: Pam4Symbols,
    pub detected: SampledSignal,
    pub split: SplitSpec,
}

pub fn transmit_and_propagate(
    tx: &TxConfig,
    fiber: &FiberParams,
    link: &LinkConfig,
    split: &SplitSpec,
    seeds: &LinkSeeds,
) -> Result<Propagated> {
    tx.validate()?;
    fiber.validate()?;
    link.validate()?;
    let (placed, len) = record_layout(split);
    let symbols = Pam4Symbols::random(len, seeds.data);
    let mut env = shape_and_ssb(&symbols, tx)?;
    env.set_power(link.launch_power_w());
    let env = apply_phase_noise(&env, link.xpm_phase_std, tx.baud, seeds.xpm);
    let field = propagate_ssmf(&env, fiber)?;
    Ok(Propagated {
        symbols,
        field,
        split: placed,
    })
}

/// Amplify back to the launch power, load noise, filter, detect, convert
/// and synchronize.
pub fn receive(p: &Propagated, tx: &TxConfig, link: &LinkConfig, seeds: &LinkSeeds) -> Result<Received> {
    let mut field = p.field.clone();
    field.set_power(link.launch_power_w());
    let noisy = amplify_noise_load(&field, link.target_osnr_db, seeds.noise);
    let filtered = optical_filter(&noisy, link.rx_filter_bw);
    let current = photodetect(&filtered, link.pd_bandwidth);
    let (up, down) = rational_ratio(current.sample_rate, link.adc_rate)?;
    let adc_in = current.resample(up, down)?;
    let adc = quantize_enob(&adc_in, link.adc_enob, seeds.adc)?;
    let sync = SyncConfig {
        baud: tx.baud,
        rolloff: tx.beta,
        sps_out: 2,
    };
    let detected = sync_and_downsample(&adc, &p.symbols, &sync)?;
    Ok(Received {
        symbols: p.symbols.clone(),
        detected,
        split: p.split,
    })
}

/// Full chain for one seed.
pub fn simulate_link(
    tx: &TxConfig,
    fiber: &FiberParams,
    link: &LinkConfig,
    split: &SplitSpec,
    seed: u64,
) -> Result<Received> {
    let seeds = LinkSeeds::from_seed(seed);
    let p = transmit_and_propagate(tx, fiber, link, split, &seeds)?;
    receive(&p, tx, link, &seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_lengths_are_smooth_multiples_of_seven() {
        for min in [1, 100, 1000, 14_628, 29_128] {
            let n = record_length(min);
            assert!(n >= min && n % 7 == 0);
            let mut m = n;
            for p in [2, 3, 5, 7] {
                while m % p == 0 {
                    m /= p;
                }
            }
            assert_eq!(m, 1, "{n}");
        }
    }

    #[test]
    fn layout_leaves_guards_at_both_ends() {
        let (placed, len) = record_layout(&SplitSpec::reduced());
        assert_eq!(placed.lead, GUARD_SYMBOLS);
        assert!(len >= placed.total() + GUARD_SYMBOLS);
    }

    #[test]
    fn seeds_differ() {
        let s = LinkSeeds::from_seed(3);
        assert_ne!(s.noise, s.adc);
        assert_ne!(s.data, s.noise);
        assert_eq!(s, LinkSeeds::from_seed(3));
    }

    #[test]
    fn back_to_back_output_is_aligned() {
        let split = SplitSpec {
            train: 1000,
            buffer: 50,
            test: 1000,
            lead: 0,
        };
        let fiber = FiberParams {
            length_km: 0.0,
            ..FiberParams::default()
        };
        let link = LinkConfig {
            target_osnr_db: f64::INFINITY,
            adc_enob: f64::INFINITY,
            ..LinkConfig::default()
        };
        let tx = TxConfig {
            dac_enob: f64::INFINITY,
            ..TxConfig::default()
        };
        let r = simulate_link(&tx, &fiber, &link, &split, 1).unwrap();
        assert_eq!(r.detected.len(), 2 * r.symbols.len());
        // even samples track the symbol levels
        let even: Vec<f64> = r.detected.samples.iter().step_by(2).cloned().collect();
        let lv = r.symbols.levels_f64();
        let me = even.iter().sum::<f64>() / even.len() as f64;
        let ml = lv.iter().sum::<f64>() / lv.len() as f64;
        let cov: f64 = even.iter().zip(&lv).map(|(a, b)| (a - me) * (b - ml)).sum();
        let va: f64 = even.iter().map(|a| (a - me).powi(2)).sum();
        let vb: f64 = lv.iter().map(|b| (b - ml).powi(2)).sum();
        let r2 = cov * cov / (va * vb);
        assert!(r2 > 0.8, "{r2}");
    }
}
