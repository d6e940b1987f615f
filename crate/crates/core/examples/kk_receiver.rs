//! Kramers-Kronig field recovery with dispersion compensation against a
//! plain linear equalizer on the detected intensity.

use photonic_link::benchmarks::KkConfig;
use photonic_link::channel::{FiberParams, LinkConfig};
use photonic_link::link::simulate_link;
use photonic_link::node::{LaserParams, NodeConfig};
use photonic_link::readout::SplitSpec;
use photonic_link::task::{evaluate, Mode, ReadoutConfig};
use photonic_link::transmitter::TxConfig;

fn main() -> photonic_link::Result<()> {
    let tx = TxConfig::default();
    let split = SplitSpec::reduced();
    println!("{:>6} {:>12} {:>12}", "km", "KK log10BER", "LR log10BER");
    for km in [0.0, 50.0, 100.0] {
        let fiber = FiberParams {
            length_km: km,
            ..FiberParams::default()
        };
        let rx = simulate_link(&tx, &fiber, &LinkConfig::default(), &split, 1)?;
        let kk = KkConfig {
            cd_length: km,
            ..KkConfig::default()
        };
        let run = |mode| {
            evaluate(mode, &rx, &NodeConfig::default(), &LaserParams::default(), &kk, &ReadoutConfig::default())
                .map(|o| o.ber.log10_ber_or_bound())
        };
        println!("{km:>6.0} {:>12.3} {:>12.3}", run(Mode::Kk)?, run(Mode::RawLr)?);
    }
    Ok(())
}
