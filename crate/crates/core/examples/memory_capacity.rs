//! Linear memory capacity of the node with and without the delay loop.

use photonic_link::benchmarks::memory_capacity;
use photonic_link::node::{EncodingMethod, LaserParams, NodeConfig};

fn main() -> photonic_link::Result<()> {
    let lp = LaserParams::default();
    let open = NodeConfig {
        encoding: EncodingMethod::D,
        ..NodeConfig::default()
    };
    let r = memory_capacity(&open, &lp, 10, 6000, 1)?;
    print_report("open loop, contiguous", &r.per_step_correlation, r.mc);

    for ratio in [0.0011, 0.0035, 0.011] {
        let closed = NodeConfig {
            encoding: EncodingMethod::A,
            loop_closed: true,
            feedback_ratio: ratio,
            ..NodeConfig::default()
        };
        let r = memory_capacity(&closed, &lp, 10, 5000, 1)?;
        print_report(&format!("closed loop, ratio {ratio}"), &r.per_step_correlation, r.mc);
    }
    Ok(())
}

fn print_report(label: &str, r2: &[f64], mc: f64) {
    let steps: Vec<String> = r2.iter().take(5).map(|c| format!("{c:.3}")).collect();
    println!("{label:<28} MC {mc:.3}   r2[0..5] {}", steps.join(" "));
}
