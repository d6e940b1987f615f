//! Power split between carrier, wanted sideband and image of the SSB
//! transmitter output.

use photonic_link::signal::{fft, fft_frequencies};
use photonic_link::transmitter::{shape_and_ssb, Pam4Symbols, TxConfig};

fn main() -> photonic_link::Result<()> {
    let tx = TxConfig::default();
    let symbols = Pam4Symbols::random(4096, 1);
    let env = shape_and_ssb(&symbols, &tx)?;
    let spec = fft(&env.samples);
    let freqs = fft_frequencies(env.len(), env.sample_rate);
    let bin = env.sample_rate / env.len() as f64;

    let (mut carrier, mut lower, mut upper) = (0.0, 0.0, 0.0);
    for (s, &f) in spec.iter().zip(&freqs) {
        let p = s.norm_sqr();
        if f.abs() < bin / 2.0 {
            carrier += p;
        } else if f < 0.0 {
            lower += p;
        } else {
            upper += p;
        }
    }
    let db = |x: f64| 10.0 * x.log10();
    println!("record: {} symbols, {:.0} GSa/s, carrier at +{:.1} GHz from channel centre", symbols.len(), env.sample_rate / 1e9, tx.carrier_detune / 1e9);
    let (lo, hi) = tx.occupied_band();
    println!("occupied band (carrier frame): {:.1} .. {:.1} GHz", lo / 1e9, hi / 1e9);
    println!("CSPR measured {:.2} dB (configured {} dB)", db(carrier / (lower + upper)), tx.cspr_db);
    println!("image rejection {:.1} dB", db(lower / upper.max(f64::MIN_POSITIVE)));
    for w in &env.warnings {
        println!("warning: {w:?}");
    }
    Ok(())
}
