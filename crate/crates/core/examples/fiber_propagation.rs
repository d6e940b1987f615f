//! Eye closure from dispersion and Kerr effect over a standard fiber span.

use photonic_link::channel::{propagate_ssmf, FiberParams};
use photonic_link::transmitter::{shape_and_ssb, Pam4Symbols, TxConfig};

fn main() -> photonic_link::Result<()> {
    let tx = TxConfig::default();
    let symbols = Pam4Symbols::random(2048, 3);
    let mut launch = shape_and_ssb(&symbols, &tx)?;
    launch.set_power(10f64.powf(6.5 / 10.0) * 1e-3);

    println!("{:>8} {:>12} {:>14} {:>12}", "km", "power (dBm)", "I peak/mean", "rel. change");
    for km in [0.0, 10.0, 25.0, 50.0, 100.0] {
        let fiber = FiberParams {
            length_km: km,
            ..FiberParams::default()
        };
        let out = propagate_ssmf(&launch, &fiber)?;
        let i: Vec<f64> = out.samples.iter().map(|c| c.norm_sqr()).collect();
        let mean = i.iter().sum::<f64>() / i.len() as f64;
        let peak = i.iter().cloned().fold(0.0, f64::max);
        let dev: f64 = out
            .samples
            .iter()
            .zip(&launch.samples)
            .map(|(a, b)| (a / out.power().sqrt() - b / launch.power().sqrt()).norm_sqr())
            .sum::<f64>()
            / out.len() as f64;
        println!("{km:>8.0} {:>12.2} {:>14.2} {:>12.3}", 10.0 * (mean * 1e3).log10(), peak / mean, dev.sqrt());
        for w in &out.warnings {
            println!("         warning: {w:?}");
        }
    }
    Ok(())
}
