//! The equalization task: recover transmitted PAM-4 symbols from the
//! detected 2 samples-per-symbol stream, either through the photonic node or
//! with a linear readout on the raw samples.

use serde::{Deserialize, Serialize};

use crate::benchmarks::{kk_receiver_pipeline, KkConfig};
use crate::error::Result;
use crate::link::Received;
use crate::node::{build_mask, mask_symbols, normalize_unit, run_node, schedule_drive, LaserParams, NodeConfig, StateMatrix};
use crate::readout::{tune_taps, BerReport, RidgeModel, DEFAULT_RIDGE, MAX_TAPS};
use crate::signal::SampledSignal;

/// Processing chain applied to a received record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Node with the delay loop closed.
    Tdrc,
    /// Node with the delay loop open.
    Elm,
    /// Kramers-Kronig DSP receiver.
    Kk,
    /// Linear readout directly on the detected samples.
    RawLr,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Tdrc => "tdrc",
            Mode::Elm => "elm",
            Mode::Kk => "kk",
            Mode::RawLr => "raw_lr",
        }
    }

    /// Node configuration with the loop switch set by the mode.
    pub fn node_config(self, nc: &NodeConfig) -> NodeConfig {
        let mut nc = nc.clone();
        match self {
            Mode::Tdrc => nc.loop_closed = true,
            Mode::Elm => nc.loop_closed = false,
            Mode::Kk | Mode::RawLr => {}
        }
        nc
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Readout settings shared by the trained modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutConfig {
    pub max_taps: usize,
    pub ridge: f64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            max_taps: MAX_TAPS,
            ridge: DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub ber: BerReport,
    /// Readout taps (FFE taps for the DSP receiver).
    pub taps: usize,
}

/// Node responses to a detected 2 samples-per-symbol record.
pub fn node_states(detected: &SampledSignal, nc: &NodeConfig, lp: &LaserParams) -> Result<StateMatrix> {
    let x = normalize_unit(detected);
    let mask = build_mask(nc.n_nodes, nc.mask_seed)?;
    let masked = mask_symbols(&x, &mask)?;
    let drive = schedule_drive(&masked, nc.encoding, nc.tau(), nc.theta())?;
    run_node(&drive, lp, nc)
}

/// The two detected samples of every symbol as a state matrix.
pub fn raw_states(detected: &SampledSignal) -> Result<StateMatrix> {
    StateMatrix::new(detected.len() / 2, 2, detected.samples[..detected.len() / 2 * 2].to_vec())
}

pub fn readout(states: &StateMatrix, rx: &Received, rc: &ReadoutConfig) -> Result<(RidgeModel, BerReport)> {
    tune_taps(states, &rx.symbols, &rx.split, rc.max_taps, rc.ridge)
}

/// Run one processing chain on a received record.
pub fn evaluate(
    mode: Mode,
    rx: &Received,
    nc: &NodeConfig,
    lp: &LaserParams,
    kk: &KkConfig,
    rc: &ReadoutConfig,
) -> Result<Outcome> {
    match mode {
        Mode::Tdrc | Mode::Elm => {
            let states = node_states(&rx.detected, &mode.node_config(nc), lp)?;
            let (model, ber) = readout(&states, rx, rc)?;
            Ok(Outcome { ber, taps: model.taps })
        }
        Mode::RawLr => {
            let (model, ber) = readout(&raw_states(&rx.detected)?, rx, rc)?;
            Ok(Outcome { ber, taps: model.taps })
        }
        Mode::Kk => {
            let ber = kk_receiver_pipeline(&rx.detected, kk, &rx.symbols, &rx.split)?;
            Ok(Outcome { ber, taps: kk.ffe_taps })
        }
    }
}
