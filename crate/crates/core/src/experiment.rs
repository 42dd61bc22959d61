//! A readout setup bundled with its initial nuclear state, and the two
//! preparations (|0⟩_e and |−1⟩_e) every readout figure compares.

use alloc::vec::Vec;

use crate::analysis::{self, FidelityCurve, ImprovementResult};
use crate::error::Error;
use crate::physics::NuclearDistribution;
use crate::protocol::{self, ElectronPrep, PulseSequence};
use crate::pulse::PopulationState;
use crate::simulator::{self, initial_state, InitialCondition, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Plain,
    ErrorCorrected { period: usize },
}

impl ProtocolKind {
    pub fn build(self, prep: ElectronPrep, n: usize) -> Result<PulseSequence, Error> {
        match self {
            ProtocolKind::Plain => protocol::build_repetitive_readout(prep, n),
            ProtocolKind::ErrorCorrected { period } => protocol::build_error_corrected(prep, n, period),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutModel {
    pub system: SystemParams,
    /// Nuclear state before the electron is stored.
    pub nuclear_init: NuclearDistribution,
}

/// Expected per-slot counts for both preparations.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePair {
    pub bright: Vec<f64>,
    pub dark: Vec<f64>,
}

impl TracePair {
    pub fn signal(&self) -> Vec<f64> {
        analysis::cumulative_signal(&self.bright, &self.dark).expect("equal lengths by construction")
    }

    pub fn fidelity_curve(&self) -> FidelityCurve {
        analysis::fidelity_vs_n(&self.bright, &self.dark).expect("equal lengths by construction")
    }
}

impl ReadoutModel {
    pub fn new(system: SystemParams, nuclear_init: NuclearDistribution) -> Self {
        ReadoutModel { system, nuclear_init }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.system.validate()
    }

    pub fn initial_condition(&self) -> InitialCondition {
        InitialCondition::pumped(&self.system.physics, self.nuclear_init)
    }

    pub fn initial_state(&self) -> PopulationState {
        initial_state(&self.initial_condition())
    }

    pub fn traces(&self, kind: ProtocolKind, n: usize) -> Result<TracePair, Error> {
        let start = self.initial_state();
        let run = |prep| -> Result<Vec<f64>, Error> {
            let seq = kind.build(prep, n)?;
            Ok(simulator::propagate(&seq, &start, &self.system).counts)
        };
        Ok(TracePair {
            bright: run(ElectronPrep::Zero)?,
            dark: run(ElectronPrep::MinusOne)?,
        })
    }

    pub fn fidelity_curve(&self, kind: ProtocolKind, n: usize) -> Result<FidelityCurve, Error> {
        Ok(self.traces(kind, n)?.fidelity_curve())
    }

    /// Expected (C₀, C₁) of one conventional electron readout.
    pub fn conventional_counts(&self) -> (f64, f64) {
        let start = self.initial_state();
        let count = |prep| {
            let seq = protocol::build_conventional_readout(prep);
            simulator::propagate(&seq, &start, &self.system).counts[0]
        };
        (count(ElectronPrep::Zero), count(ElectronPrep::MinusOne))
    }

    pub fn conventional_fidelity(&self) -> f64 {
        let (c0, c1) = self.conventional_counts();
        analysis::readout_fidelity(c0, c1)
    }

    /// Peak-to-peak comparison of plain and corrected readout up to `n_max` readouts.
    pub fn improvement(&self, period: usize, n_max: usize) -> Result<ImprovementResult, Error> {
        let plain = self.fidelity_curve(ProtocolKind::Plain, n_max)?;
        let ec = self.fidelity_curve(ProtocolKind::ErrorCorrected { period }, n_max)?;
        analysis::improvement(&plain, &ec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{MagneticField, PhysicsParams};
    use crate::pulse::{GateParams, ReadoutParams};

    fn model(mt: f64) -> ReadoutModel {
        ReadoutModel::new(
            SystemParams {
                field: MagneticField::from_millitesla(mt).unwrap(),
                physics: PhysicsParams::default(),
                readout: ReadoutParams::default(),
                gates: GateParams::default(),
            },
            NuclearDistribution::pure(1),
        )
    }

    #[test]
    fn signal_decays_at_high_field() {
        let tr = model(244.0).traces(ProtocolKind::Plain, 6000).unwrap();
        let diff: Vec<f64> = tr.bright.iter().zip(&tr.dark).map(|(a, b)| a - b).collect();
        // Past the electron transient the per-slot difference is positive and shrinking.
        for k in 10..diff.len() - 1 {
            assert!(diff[k] > 0.0);
            assert!(diff[k + 1] <= diff[k] + 1e-15, "slot {k}");
        }
        assert!(diff[5999] < 0.2 * diff[10]);
    }

    #[test]
    fn high_field_curve_has_interior_peak() {
        let curve = model(244.0).fidelity_curve(ProtocolKind::Plain, 8000).unwrap();
        let (n_opt, f_max) = curve.peak();
        assert!(n_opt > 500 && n_opt < 7000, "{n_opt}");
        assert!(f_max > curve.f[7999]);
    }
}
