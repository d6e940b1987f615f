//! Gray-coded PAM-4 source, RRC pulse shaping and single-sideband optical
//! field generation with a controlled carrier-to-signal power ratio.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{
    circular_fir, fft_frequencies, fft_in_place, filter_real, first_order_lowpass, ifft_in_place, quantize_enob,
    rrc_taps, ComplexEnvelope, SampledSignal, Warning,
};

/// Binary source stream, two bits per PAM-4 symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<u8>,
}

impl BitStream {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.len() % 2 != 0 {
            return Err(invalid("bits", format!("need an even bit count, got {}", bits.len())));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(invalid("bits", "values must be 0 or 1"));
        }
        Ok(Self { bits })
    }

    /// Uniform random bits for `n_symbols` symbols.
    pub fn random(n_symbols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            bits: (0..2 * n_symbols).map(|_| rng.gen_range(0..=1u8)).collect(),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// PAM-4 amplitude levels in {-3, -1, +1, +3} with their source bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pam4Symbols {
    levels: Vec<i8>,
    source_bits: BitStream,
}

pub const PAM4_LEVELS: [i8; 4] = [-3, -1, 1, 3];

/// Gray map: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
pub fn gray_level(b0: u8, b1: u8) -> i8 {
    match (b0, b1) {
        (0, 0) => -3,
        (0, 1) => -1,
        (1, 1) => 1,
        _ => 3,
    }
}

pub fn gray_bits(level: i8) -> Result<(u8, u8)> {
    match level {
        -3 => Ok((0, 0)),
        -1 => Ok((0, 1)),
        1 => Ok((1, 1)),
        3 => Ok((1, 0)),
        other => Err(invalid("level", format!("{other} is not a PAM-4 level"))),
    }
}

impl Pam4Symbols {
    /// Build from levels; the source bits are recovered through the Gray map.
    pub fn from_levels(levels: Vec<i8>) -> Result<Self> {
        let mut bits = Vec::with_capacity(2 * levels.len());
        for &l in &levels {
            let (b0, b1) = gray_bits(l)?;
            bits.push(b0);
            bits.push(b1);
        }
        Ok(Self {
            levels,
            source_bits: BitStream { bits },
        })
    }

    pub fn random(n_symbols: usize, seed: u64) -> Self {
        gray_encode_pam4(&BitStream::random(n_symbols, seed)).expect("even length")
    }

    pub fn levels(&self) -> &[i8] {
        &self.levels
    }

    pub fn levels_f64(&self) -> Vec<f64> {
        self.levels.iter().map(|&l| l as f64).collect()
    }

    pub fn source_bits(&self) -> &BitStream {
        &self.source_bits
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

pub fn gray_encode_pam4(bits: &BitStream) -> Result<Pam4Symbols> {
    if bits.len() % 2 != 0 {
        return Err(invalid("bits", "odd bit count"));
    }
    let levels = bits.bits.chunks_exact(2).map(|p| gray_level(p[0], p[1])).collect();
    Ok(Pam4Symbols {
        levels,
        source_bits: bits.clone(),
    })
}

pub fn gray_decode_pam4(symbols: &Pam4Symbols) -> BitStream {
    let bits = symbols
        .levels
        .iter()
        .flat_map(|&l| {
            let (a, b) = gray_bits(l).expect("validated levels");
            [a, b]
        })
        .collect();
    BitStream { bits }
}

/// Which side of the carrier the modulation occupies in the carrier frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sideband {
    Upper,
    /// Towards the channel centre when the carrier sits at +detune.
    #[default]
    Lower,
}

impl Sideband {
    pub fn sign(self) -> f64 {
        match self {
            Sideband::Upper => 1.0,
            Sideband::Lower => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxConfig {
    /// Symbol rate in Bd.
    pub baud: f64,
    /// RRC roll-off.
    pub beta: f64,
    /// Carrier offset from the channel centre, Hz.
    pub carrier_detune: f64,
    /// Carrier-to-signal power ratio, dB. `inf` emits the carrier alone.
    pub cspr_db: f64,
    /// DAC effective number of bits; `inf` disables the converter model.
    pub dac_enob: f64,
    /// Corner of the first-order inverse (pre-emphasis) filter, Hz.
    pub preemph_corner: f64,
    /// First-order bandwidth of the DAC + modulator electrical path, Hz.
    pub analog_bandwidth: f64,
    /// Internal samples per symbol.
    pub sps: usize,
    /// RRC filter span in symbols.
    pub rrc_span: usize,
    pub sideband: Sideband,
    pub dac_seed: u64,
}

impl Default for TxConfig {
    fn default() -> Self {
        Self {
            baud: 56e9,
            beta: 0.1,
            carrier_detune: 24.5e9,
            cspr_db: 9.0,
            dac_enob: 5.5,
            preemph_corner: 20e9,
            analog_bandwidth: 20e9,
            sps: 4,
            rrc_span: 32,
            sideband: Sideband::Lower,
            dac_seed: 0,
        }
    }
}

impl TxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.baud > 0.0) {
            return Err(invalid("baud", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid("beta", "roll-off must lie in [0, 1]"));
        }
        if self.sps < 4 {
            return Err(invalid("sps", "transmitter runs at >= 4 samples per symbol"));
        }
        if !(self.preemph_corner > 0.0 && self.analog_bandwidth > 0.0) {
            return Err(invalid("preemph_corner", "corners must be positive"));
        }
        if !(self.dac_enob > 0.0) {
            return Err(invalid("dac_enob", "must be positive"));
        }
        if self.cspr_db.is_nan() {
            return Err(invalid("cspr_db", "NaN"));
        }
        if self.carrier_detune < 0.0 {
            return Err(invalid("carrier_detune", "must be >= 0"));
        }
        Ok(())
    }

    pub fn sample_rate(&self) -> f64 {
        self.baud * self.sps as f64
    }

    /// One-sided width of the modulated sideband, Hz.
    pub fn signal_bandwidth(&self) -> f64 {
        self.baud * (1.0 + self.beta) / 2.0
    }

    /// Occupied band (lo, hi) in the carrier frame.
    pub fn occupied_band(&self) -> (f64, f64) {
        match self.sideband {
            Sideband::Upper => (0.0, self.signal_bandwidth()),
            Sideband::Lower => (-self.signal_bandwidth(), 0.0),
        }
    }
}

/// Real RRC-shaped PAM-4 drive waveform at `cfg.sps` samples per symbol.
pub fn shape_baseband(symbols: &Pam4Symbols, cfg: &TxConfig) -> Result<SampledSignal> {
    cfg.validate()?;
    if symbols.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = symbols.len() * cfg.sps;
    let mut up = vec![0.0; n];
    for (k, &l) in symbols.levels().iter().enumerate() {
        up[k * cfg.sps] = l as f64;
    }
    let taps = rrc_taps(cfg.beta, cfg.rrc_span, cfg.sps)?;
    SampledSignal::new(circular_fir(&up, &taps), cfg.sample_rate())
}

/// Gray-coded PAM-4 to single-sideband optical field.
///
/// Chain: RRC shaping, first-order pre-emphasis, DAC converter model, the
/// first-order electrical low-pass it compensates, ideal sideband filter,
/// carrier insertion at the requested CSPR. The modulator is linear in field.
/// The result is in the carrier frame (`center_frequency_offset =
/// carrier_detune`) and normalized to 1 mW.
pub fn shape_and_ssb(symbols: &Pam4Symbols, cfg: &TxConfig) -> Result<ComplexEnvelope> {
    let base = shape_baseband(symbols, cfg)?;
    let fs = base.sample_rate;
    let fc = cfg.preemph_corner;
    let pre = filter_real(&base.samples, fs, |f| Complex64::new(1.0, f / fc));
    let pre = SampledSignal::new(pre, fs)?;
    let dac = quantize_enob(&pre, cfg.dac_enob, cfg.dac_seed)?;
    let bw = cfg.analog_bandwidth;
    let drive = filter_real(&dac.samples, fs, |f| first_order_lowpass(f, bw));

    let mut sideband = single_sideband(&drive, fs, cfg.sideband);
    let sig_power = crate::signal::power(&sideband);
    let carrier = if cfg.cspr_db.is_infinite() && cfg.cspr_db > 0.0 {
        sideband.iter_mut().for_each(|s| *s = Complex64::new(0.0, 0.0));
        1.0
    } else {
        if sig_power <= 0.0 {
            return Err(Error::DegenerateResponse("transmit signal has zero power".into()));
        }
        let g = 1.0 / sig_power.sqrt();
        sideband.iter_mut().for_each(|s| *s *= g);
        10f64.powf(cfg.cspr_db / 20.0)
    };
    let samples: Vec<Complex64> = sideband.into_iter().map(|s| s + carrier).collect();
    let mut env = ComplexEnvelope::new(samples, fs, cfg.carrier_detune)?;
    env.warnings = dac.warnings;
    env.set_power(1e-3);
    let winding = check_minimum_phase(&env);
    if winding > 0 {
        env.warnings.push(Warning::NonMinimumPhase { winding });
    }
    Ok(env)
}

/// Keep one sideband of a real signal (doubling it) and drop DC and the other
/// side. This is the ideal sideband filter.
pub fn single_sideband(x: &[f64], sample_rate: f64, side: Sideband) -> Vec<Complex64> {
    let mut spec: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut spec);
    let freqs = fft_frequencies(x.len(), sample_rate);
    let n = x.len();
    for (k, (s, f)) in spec.iter_mut().zip(freqs).enumerate() {
        let keep = match side {
            Sideband::Upper => f > 0.0,
            Sideband::Lower => f < 0.0,
        };
        let nyquist = n % 2 == 0 && k == n / 2;
        *s = if keep && !nyquist { *s * 2.0 } else { Complex64::new(0.0, 0.0) };
    }
    ifft_in_place(&mut spec);
    spec
}

/// Number of times the field trajectory crosses the ray opposite its mean
/// phasor, over the cyclic record. Zero means the trajectory never winds
/// around the origin, which is the minimum-phase condition.
pub fn check_minimum_phase(env: &ComplexEnvelope) -> usize {
    let n = env.samples.len();
    if n == 0 {
        return 0;
    }
    let mean: Complex64 = env.samples.iter().sum::<Complex64>() / n as f64;
    let rot = if mean.norm() > 0.0 { mean.conj() / mean.norm() } else { Complex64::new(1.0, 0.0) };
    let mut crossings = 0;
    for k in 0..n {
        let a = env.samples[k] * rot;
        let b = env.samples[(k + 1) % n] * rot;
        if (a.im >= 0.0) != (b.im >= 0.0) {
            let t = a.im / (a.im - b.im);
            let x = a.re + t * (b.re - a.re);
            if x < 0.0 {
                crossings += 1;
            }
        } else if a.im == 0.0 && b.im == 0.0 && (a.re < 0.0 || b.re < 0.0) && a.re * b.re <= 0.0 {
            crossings += 1;
        }
    }
    crossings
}
