use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::node::{build_mask, mask_symbols, run_node, schedule_drive, LaserParams, NodeConfig, StateMatrix};
use crate::readout::{NestedRidge, SplitSpec, DEFAULT_RIDGE};
use crate::signal::SampledSignal;

/// Shortest record accepted by [`memory_capacity`].
pub const MIN_MC_RECORD: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    /// Squared correlation for recall depths `0..=m_max`.
    pub per_step_correlation: Vec<f64>,
    /// Sum over depths `1..=m_max`.
    pub mc: f64,
}

/// Drive the node with i.i.d. uniform inputs and measure how well a linear
/// readout (one tap plus bias) recalls past inputs.
///
/// Each input value fills both samples of a symbol slot, so the masking and
/// scheduling path is the same one used for the transmission task.
pub fn memory_capacity(nc: &NodeConfig, lp: &LaserParams, m_max: usize, record: usize, seed: u64) -> Result<McReport> {
    if record < MIN_MC_RECORD {
        return Err(invalid("record", format!("need >= {MIN_MC_RECORD} symbols, got {record}")));
    }
    nc.validate()?;
    lp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..record).map(|_| rng.gen::<f64>()).collect();
    let two_sps: Vec<f64> = u.iter().flat_map(|&v| [v, v]).collect();
    let mask = build_mask(nc.n_nodes, nc.mask_seed)?;
    let masked = mask_symbols(&SampledSignal::new(two_sps, 1.0)?, &mask)?;
    let drive = schedule_drive(&masked, nc.encoding, nc.tau(), nc.theta())?;
    let states = run_node(&drive, lp, nc)?;
    memory_capacity_from_states(&states, &u, m_max, &mc_split(record, m_max))
}

/// Train segment of 60 % after an `m_max` lead-in, the rest for testing.
fn mc_split(record: usize, m_max: usize) -> SplitSpec {
    let usable = record - m_max;
    let train = usable * 3 / 5;
    let buffer = m_max.min(usable - train);
    SplitSpec {
        lead: m_max,
        train,
        buffer,
        test: usable - train - buffer,
    }
}

/// Memory capacity from a precomputed state matrix; row `k` of `states` is
/// the response to input `u[k]`.
pub fn memory_capacity_from_states(states: &StateMatrix, u: &[f64], m_max: usize, split: &SplitSpec) -> Result<McReport> {
    if states.rows() != u.len() {
        return Err(Error::LengthMismatch {
            expected: states.rows(),
            found: u.len(),
        });
    }
    split.validate(states.rows())?;
    if split.lead < m_max {
        return Err(invalid("split", "lead must cover the deepest recall"));
    }
    let varies = (0..states.cols()).any(|c| {
        let first = states.get(split.train_range().start, c);
        split.train_range().any(|r| states.get(r, c) != first)
    });
    if !varies {
        return Err(Error::DegenerateResponse("node states are constant over the train segment".into()));
    }
    let test = split.test_range();
    let mut per_step = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let target: Vec<f64> = (0..u.len()).map(|k| if k >= m { u[k - m] } else { 0.0 }).collect();
        let model = NestedRidge::fit(states, &target, split, 1, DEFAULT_RIDGE)?.model(1)?;
        let pred = model.predict(states)?;
        per_step.push(squared_correlation(&pred[test.clone()], &target[test.clone()]));
    }
    let mc = per_step[1..].iter().sum();
    Ok(McReport {
        per_step_correlation: per_step,
        mc,
    })
}

fn squared_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab * sab / (saa * sbb)).clamp(0.0, 1.0)
}
