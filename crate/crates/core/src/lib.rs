//! Constrained-phase 3MSK over DFT-s-OFDM: mapping, transmit and receive
//! chains, channel and hardware impairments, and signal metrology.

pub mod error;
pub mod fft;
pub mod impairments;
pub mod io;
pub mod link;
pub mod mapping;
pub mod metrics;
pub mod rx;
pub mod seed;
pub mod tx;

pub use error::{Error, Result};
pub use mapping::{MappingKind, MappingTable, MskBlock, Transition};
pub use tx::{FrameSamples, Modulator, WaveformConfig};
