//! Reference evaluations that do not go through the photonic readout: the
//! linear memory capacity of the node and a Kramers-Kronig DSP receiver.

mod ffe;
mod kk;
mod memory;

pub use ffe::{ffe_train, ffe_train_apply, Ffe};
pub use kk::{cd_compensate, kk_receiver_pipeline, kk_reconstruct, KkConfig};
pub use memory::{memory_capacity, memory_capacity_from_states, McReport, MIN_MC_RECORD};
