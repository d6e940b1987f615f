pub mod benchmarks;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod link;
pub mod node;
pub mod readout;
pub mod signal;
pub mod task;
pub mod transmitter;

pub use error::{Error, Result};
