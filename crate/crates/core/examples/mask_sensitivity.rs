//! Spread of the open-loop BER over masking sequences, for two node counts.

use photonic_link::benchmarks::KkConfig;
use photonic_link::channel::{FiberParams, LinkConfig};
use photonic_link::link::simulate_link;
use photonic_link::node::{LaserParams, NodeConfig};
use photonic_link::readout::SplitSpec;
use photonic_link::task::{evaluate, Mode, ReadoutConfig};
use photonic_link::transmitter::TxConfig;
use rayon::prelude::*;

fn main() -> photonic_link::Result<()> {
    let rx = simulate_link(
        &TxConfig::default(),
        &FiberParams::default(),
        &LinkConfig::default(),
        &SplitSpec::reduced(),
        1,
    )?;
    for n in [20, 24] {
        let mut bers = (1..=8u64)
            .into_par_iter()
            .map(|mask_seed| {
                let nc = NodeConfig {
                    n_nodes: n,
                    mask_seed,
                    ..NodeConfig::default()
                };
                evaluate(Mode::Elm, &rx, &nc, &LaserParams::default(), &KkConfig::default(), &ReadoutConfig::default())
                    .map(|o| o.ber.log10_ber_or_bound())
            })
            .collect::<photonic_link::Result<Vec<f64>>>()?;
        bers.sort_by(f64::total_cmp);
        println!(
            "N = {n}: min {:.3}  median {:.3}  max {:.3}  spread {:.3}",
            bers[0],
            0.5 * (bers[3] + bers[4]),
            bers[7],
            bers[7] - bers[0]
        );
    }
    Ok(())
}
