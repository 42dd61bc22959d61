use crate::physics::NuclearDistribution;

/// Errors reported by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    /// `p_plus` vanished, so the polarization ladder has no finite ratio.
    /// `fallback` puts all weight on m_I = +1.
    #[error("degenerate flip-flop rates (p_plus = 0)")]
    DegenerateRates { fallback: NuclearDistribution },

    #[error("invalid readout count {n}: at least 1 is required")]
    InvalidN { n: usize },

    #[error("trace length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("saturation fit diverged after {iterations} iterations")]
    FitDiverged { iterations: usize },

    #[error("calibration target {target} not bracketed: reachable range is [{low}, {high}]")]
    NoBracket { target: f64, low: f64, high: f64 },

    #[error("target {target} is unreachable for any contrast in (0, 1]")]
    Unreachable { target: f64 },

    #[error("need at least {required} shots, got {got}")]
    InsufficientShots { required: usize, got: usize },
}
