//! Simulation, optimization and analysis for frequency-bin entanglement-based
//! BBM92 key distribution networks built on a microresonator biphoton comb.
//!
//! The crate is organised bottom-up:
//!
//! - [`spectrum`]: the frequency comb, joint spectral intensity records and
//!   the channel allocator that packs resonances into quantum channels.
//! - [`qudit`]: frequency-bin Bell states, the Z/X mutually unbiased bases and
//!   projection probabilities with apparatus imperfections.
//! - [`link`]: pair generation with saturation, the loss chain, detectors,
//!   the Voigt coincidence profile and expected coincidence matrices.
//! - [`keyrate`]: QBER, the d-level entropy, raw rate and secure key rate.
//! - [`sweep`]: the power/window cartography, distance scaling and
//!   dimension recommendation, evaluated in parallel.
//! - [`timetag`]: a Monte Carlo time-tag generator plus the streaming
//!   coincidence counter, delay histogram and Voigt fit.
//! - [`cli`]: run configuration, the subcommand implementations and the
//!   CSV/JSON emitters used by the `fbqkd` binary.
//!
//! Units are fixed everywhere: rates in Hz, times in ps (durations in s),
//! powers in mW and losses in dB.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod error;
pub mod keyrate;
pub mod link;
pub mod qudit;
pub mod spectrum;
pub mod sweep;
pub mod timetag;

pub use error::{Error, Result};
pub use keyrate::KeyRateReport;
pub use link::{
    ApparatusParams, CoincidenceMatrix, LinkParams, LinkRates, SourceModel, TemporalProfile,
};
pub use qudit::{Basis, BellStateSpec, MeasurementSetting};
pub use sweep::{ChannelModel, SweepGrid};
