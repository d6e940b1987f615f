//! The four ways of placing masked symbols relative to the delay, on the
//! transmission task.

use photonic_link::benchmarks::KkConfig;
use photonic_link::channel::{FiberParams, LinkConfig};
use photonic_link::link::simulate_link;
use photonic_link::node::{EncodingMethod, LaserParams, NodeConfig};
use photonic_link::readout::SplitSpec;
use photonic_link::task::{evaluate, Mode, ReadoutConfig};
use photonic_link::transmitter::TxConfig;

fn main() -> photonic_link::Result<()> {
    // one symbol per delay makes A and B slow to simulate; keep the record short
    let split = SplitSpec {
        train: 3000,
        buffer: 100,
        test: 2000,
        lead: 0,
    };
    let rx = simulate_link(
        &TxConfig::default(),
        &FiberParams::default(),
        &LinkConfig::default(),
        &split,
        1,
    )?;
    let lp = LaserParams::default();
    for (method, mode) in [
        (EncodingMethod::A, Mode::Tdrc),
        (EncodingMethod::B, Mode::Elm),
        (EncodingMethod::C, Mode::Tdrc),
        (EncodingMethod::D, Mode::Elm),
    ] {
        let nc = NodeConfig {
            encoding: method,
            feedback_ratio: 0.0035,
            ..NodeConfig::default()
        };
        let o = evaluate(mode, &rx, &nc, &lp, &KkConfig::default(), &ReadoutConfig::default())?;
        println!("{} ({mode}): log10 BER {:.3}, {} taps", method.as_str(), o.ber.log10_ber_or_bound(), o.taps);
    }
    Ok(())
}
