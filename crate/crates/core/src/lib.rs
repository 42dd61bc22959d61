//! Population-level simulation of repetitive spin readout for an NV center
//! whose electron spin state is stored in the host ¹⁴N nuclear spin.
//!
//! The crate is `no_std` (it needs `alloc`) and covers:
//!
//! - [`physics`]: optically induced flip-flop probabilities, the ESLAC
//!   field and the dynamic-nuclear-polarization steady state.
//! - [`pulse`]: the 10-level state space (9 NV⁻ levels plus one NV⁰ level)
//!   and every pulse primitive as a column-stochastic map.
//! - [`protocol`]: repetitive, error-corrected and polarization sequences
//!   and their wall-clock timing.
//! - [`simulator`]: expectation propagation and seeded Monte Carlo sampling.
//! - [`analysis`]: the readout fidelity figure of merit, saturation fits,
//!   error-correction metrics and parameter calibration.
//! - [`experiment`]: a bundled readout model used by the calibrations.
//!
//! File formats, plotting and the command-line front end live in the
//! `nvreadout` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
mod error;
pub mod experiment;
mod math;
pub mod physics;
pub mod protocol;
pub mod pulse;
pub mod simulator;

pub use crate::error::Error;
pub use crate::experiment::{ProtocolKind, ReadoutModel};
pub use crate::physics::{FlipFlopProbs, MagneticField, NuclearDistribution, PhysicsParams};
pub use crate::protocol::{PulseSequence, TimingBudget};
pub use crate::pulse::{GateParams, Level, PopulationState, ReadoutParams, StochasticMap, TransitionLabel};
pub use crate::simulator::{ExpectedTrace, InitialCondition, ShotTraces};
