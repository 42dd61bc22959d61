//! Pulse-sequence builders for the readout and polarization protocols, and
//! their wall-clock cost.

use alloc::vec::Vec;

use crate::error::Error;
use crate::pulse::{Branch, LaserRole, TransitionLabel};

/// What a gate is doing within its sequence. Only used for bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateRole {
    Prepare,
    Store,
    Readout,
    Correction,
    Polarize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Gate {
        label: TransitionLabel,
        role: GateRole,
    },
    Laser(LaserRole),
    /// Idle time in ns.
    Wait(f64),
}

/// Electron state written into the nuclear memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElectronPrep {
    /// |0⟩_e, giving the bright count total C₀.
    Zero,
    /// |−1⟩_e, giving the dark count total C₁.
    MinusOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub steps: Vec<Primitive>,
    /// Number of readout slots.
    pub n_readouts: usize,
    /// Readouts between correction blocks, if any.
    pub correction_period: Option<usize>,
}

impl PulseSequence {
    pub fn empty() -> Self {
        PulseSequence {
            steps: Vec::new(),
            n_readouts: 0,
            correction_period: None,
        }
    }

    pub fn readout_slots(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, Primitive::Laser(LaserRole::Readout)))
            .count()
    }

    pub fn correction_blocks(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, Primitive::Gate { role: GateRole::Correction, label } if label.is_rf()))
            .count()
    }

    /// `self` followed by `other`. The correction period of `self` is kept.
    pub fn concat(&self, other: &PulseSequence) -> PulseSequence {
        let mut steps = self.steps.clone();
        steps.extend_from_slice(&other.steps);
        PulseSequence {
            steps,
            n_readouts: self.n_readouts + other.n_readouts,
            correction_period: self.correction_period.or(other.correction_period),
        }
    }
}

fn gate(label: TransitionLabel, role: GateRole) -> Primitive {
    Primitive::Gate { label, role }
}

fn preamble(prep: ElectronPrep) -> Vec<Primitive> {
    let mut steps = alloc::vec![Primitive::Laser(LaserRole::Init)];
    if prep == ElectronPrep::MinusOne {
        steps.push(gate(TransitionLabel::MWB, GateRole::Prepare));
    }
    steps.push(gate(TransitionLabel::RFA, GateRole::Store));
    steps.push(gate(TransitionLabel::RFB, GateRole::Store));
    steps
}

fn push_readout(steps: &mut Vec<Primitive>) {
    steps.push(gate(TransitionLabel::MWE, GateRole::Readout));
    steps.push(Primitive::Laser(LaserRole::Readout));
}

/// Initialize, optionally flip with MWB, store with the RF CNOT, then read
/// the nucleus `n` times through MWE and a readout pulse.
pub fn build_repetitive_readout(prep: ElectronPrep, n: usize) -> Result<PulseSequence, Error> {
    if n < 1 {
        return Err(Error::InvalidN { n });
    }
    let mut steps = preamble(prep);
    for _ in 0..n {
        push_readout(&mut steps);
    }
    Ok(PulseSequence {
        steps,
        n_readouts: n,
        correction_period: None,
    })
}

/// Repetitive readout with a MWC + RFB correction after every `period`
/// readouts. No block follows the final readout, since it could not change
/// any recorded count.
pub fn build_error_corrected(prep: ElectronPrep, n: usize, period: usize) -> Result<PulseSequence, Error> {
    if n < 1 {
        return Err(Error::InvalidN { n });
    }
    if period < 1 {
        return Err(Error::InvalidN { n: period });
    }
    let mut steps = preamble(prep);
    for k in 1..=n {
        push_readout(&mut steps);
        if k % period == 0 && k < n {
            steps.push(gate(TransitionLabel::MWC, GateRole::Correction));
            steps.push(gate(TransitionLabel::RFB, GateRole::Correction));
        }
    }
    Ok(PulseSequence {
        steps,
        n_readouts: n,
        correction_period: Some(period),
    })
}

/// A single conventional electron readout: initialize, optionally flip with
/// a non-selective π pulse, read once.
pub fn build_conventional_readout(prep: ElectronPrep) -> PulseSequence {
    let mut steps = alloc::vec![Primitive::Laser(LaserRole::Init)];
    if prep == ElectronPrep::MinusOne {
        steps.push(gate(TransitionLabel::MwHard(Branch::Minus), GateRole::Prepare));
    }
    steps.push(Primitive::Laser(LaserRole::Readout));
    PulseSequence {
        steps,
        n_readouts: 1,
        correction_period: None,
    }
}

/// `n` initialization pulses and nothing else: polarization by optical
/// pumping near the ESLAC.
pub fn build_dnp_eslac(n: usize) -> Result<PulseSequence, Error> {
    if n < 1 {
        return Err(Error::InvalidN { n });
    }
    Ok(PulseSequence {
        steps: alloc::vec![Primitive::Laser(LaserRole::Init); n],
        n_readouts: 0,
        correction_period: None,
    })
}

/// Polarization into m_I = 0 by repeated SWAPs. Odd rounds move m_I = +1
/// down (MWB, RFA); even rounds move m_I = −1 up (MWE, RFB). Each round
/// re-pumps the electron first.
pub fn build_swap_polarization(n_rounds: usize) -> Result<PulseSequence, Error> {
    if n_rounds < 1 {
        return Err(Error::InvalidN { n: n_rounds });
    }
    let mut steps = Vec::with_capacity(3 * n_rounds);
    for round in 0..n_rounds {
        let (mw, rf) = if round % 2 == 0 {
            (TransitionLabel::MWB, TransitionLabel::RFA)
        } else {
            (TransitionLabel::MWE, TransitionLabel::RFB)
        };
        steps.push(Primitive::Laser(LaserRole::Init));
        steps.push(gate(mw, GateRole::Polarize));
        steps.push(gate(rf, GateRole::Polarize));
    }
    Ok(PulseSequence {
        steps,
        n_readouts: 0,
        correction_period: None,
    })
}

/// Durations in ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingBudget {
    pub t_init: f64,
    pub t_read: f64,
    /// Nuclear-selective MW π pulse.
    pub t_mw_selective: f64,
    /// Non-selective MW π pulse.
    pub t_mw_hard: f64,
    pub t_rf_ringdown: f64,
    /// One correction block (MWC + RFB), dominated by RF ring-down.
    pub t_ec: f64,
    /// Dead time charged to every readout slot on top of MWE and the laser.
    pub t_readout_dead: f64,
}

impl Default for TimingBudget {
    fn default() -> Self {
        TimingBudget {
            t_init: 850.0,
            t_read: 350.0,
            t_mw_selective: 399.0,
            t_mw_hard: 4.0,
            t_rf_ringdown: 20_000.0,
            t_ec: 30_000.0,
            // Pinned so that a 2300-readout measurement including
            // initialization and storage takes 3.2 ms.
            t_readout_dead: 616.2,
        }
    }
}

impl TimingBudget {
    pub fn validate(&self) -> Result<(), Error> {
        let fields = [
            self.t_init,
            self.t_read,
            self.t_mw_selective,
            self.t_mw_hard,
            self.t_rf_ringdown,
            self.t_ec,
            self.t_readout_dead,
        ];
        if fields.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "timing",
                reason: "durations must be finite and >= 0",
            });
        }
        if self.t_ec < self.t_mw_selective + self.t_rf_ringdown {
            return Err(Error::InvalidParameter {
                name: "t_ec",
                reason: "must cover the MW pulse and the RF ring-down",
            });
        }
        Ok(())
    }

    /// One RF π pulse including its ring-down; a correction block (one MW
    /// and one RF pulse) then costs exactly `t_ec`.
    pub fn rf_pi_cost(&self) -> f64 {
        self.t_ec - self.t_mw_selective
    }

    pub fn primitive_ns(&self, p: &Primitive) -> f64 {
        match p {
            Primitive::Gate { label, .. } => match label {
                TransitionLabel::Mw(_) => self.t_mw_selective,
                TransitionLabel::MwHard(_) => self.t_mw_hard,
                TransitionLabel::Rf(_) => self.rf_pi_cost(),
            },
            Primitive::Laser(LaserRole::Init) => self.t_init,
            Primitive::Laser(LaserRole::Readout) => self.t_read + self.t_readout_dead,
            Primitive::Wait(t) => *t,
        }
    }
}

/// Total duration of `seq` in µs.
pub fn sequence_duration(seq: &PulseSequence, t: &TimingBudget) -> f64 {
    seq.steps.iter().map(|p| t.primitive_ns(p)).sum::<f64>() * 1e-3
}
