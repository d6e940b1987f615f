//! The same received record through the node with the delay loop open and
//! closed, at a few feedback ratios.

use photonic_link::benchmarks::KkConfig;
use photonic_link::channel::{FiberParams, LinkConfig};
use photonic_link::link::simulate_link;
use photonic_link::node::{EncodingMethod, LaserParams, NodeConfig};
use photonic_link::readout::SplitSpec;
use photonic_link::task::{evaluate, Mode, ReadoutConfig};
use photonic_link::transmitter::TxConfig;

fn main() -> photonic_link::Result<()> {
    let rx = simulate_link(
        &TxConfig::default(),
        &FiberParams::default(),
        &LinkConfig::default(),
        &SplitSpec::reduced(),
        1,
    )?;
    let lp = LaserParams::default();
    let rc = ReadoutConfig::default();
    let kk = KkConfig::default();

    let elm = evaluate(Mode::Elm, &rx, &NodeConfig::default(), &lp, &kk, &rc)?;
    println!("ELM (contiguous symbols):  log10 BER {:.3}, {} taps", elm.ber.log10_ber_or_bound(), elm.taps);
    for ratio in [0.0011, 0.0035, 0.011] {
        let nc = NodeConfig {
            feedback_ratio: ratio,
            encoding: EncodingMethod::C,
            ..NodeConfig::default()
        };
        let o = evaluate(Mode::Tdrc, &rx, &nc, &lp, &kk, &rc)?;
        println!("TDRC ratio {ratio:<7} (C):  log10 BER {:.3}, {} taps", o.ber.log10_ber_or_bound(), o.taps);
    }
    Ok(())
}
