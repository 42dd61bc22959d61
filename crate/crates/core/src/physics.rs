//! NV-center constants and the optically induced electron–nuclear
//! flip-flop model.
//!
//! The flip-flop probability per optical cycle is
//!
//! ```text
//! p± = 2A² / (2A² + (D ± γ_e·B0)²)
//! ```
//!
//! with `A` the perpendicular excited-state hyperfine coupling, `D` the
//! excited-state zero-field splitting and `γ_e = g_e·μ_B/h`. `p₋` increments
//! m_I and `p₊` decrements it.

use crate::error::Error;
use crate::pulse::ReadoutParams;

/// Excited-state and polarization parameters of the NV center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsParams {
    /// Excited-state zero-field splitting (GHz).
    pub d_es: f64,
    /// Perpendicular excited-state hyperfine coupling (GHz).
    pub a_es: f64,
    /// Electron gyromagnetic ratio g_e·μ_B/h (GHz/T).
    pub gyromag: f64,
    /// Probability the electron ends in m_s = 0 after optical pumping.
    pub p_e0: f64,
    /// Probability the center is in the active NV⁻ charge state.
    pub charge_fidelity: f64,
    /// Share of the unpolarized remainder `1 - p_e0` that lands in
    /// m_s = −1; the rest goes to m_s = +1.
    pub residual_minus_share: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams {
            d_es: 1.42,
            a_es: 0.040,
            gyromag: 27.992,
            p_e0: 0.81,
            charge_fidelity: 0.75,
            residual_minus_share: 0.5,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<(), Error> {
        // D_es = 0 is admitted so the ESLAC field degenerates to zero.
        if !(self.d_es >= 0.0 && self.d_es.is_finite()) {
            return Err(invalid("d_es", "must be a finite frequency >= 0"));
        }
        if !(self.a_es > 0.0 && self.a_es.is_finite()) {
            return Err(invalid("a_es", "must be a finite frequency > 0"));
        }
        if !(self.gyromag > 0.0 && self.gyromag.is_finite()) {
            return Err(invalid("gyromag", "must be a finite value > 0"));
        }
        if !(0.0..=1.0).contains(&self.p_e0) {
            return Err(invalid("p_e0", "must be a probability in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.charge_fidelity) {
            return Err(invalid("charge_fidelity", "must be a probability in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.residual_minus_share) {
            return Err(invalid("residual_minus_share", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}

/// Axial magnetic field in tesla. Off-axis components are not modeled.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct MagneticField(f64);

impl MagneticField {
    /// Largest field magnitude accepted (T).
    pub const MAX_TESLA: f64 = 1.0;

    pub fn from_tesla(b0: f64) -> Result<Self, Error> {
        if !b0.is_finite() || b0.abs() > Self::MAX_TESLA {
            return Err(invalid("b0", "field magnitude must be at most 1 T"));
        }
        Ok(MagneticField(b0))
    }

    pub fn from_millitesla(b0_mt: f64) -> Result<Self, Error> {
        Self::from_tesla(b0_mt * 1e-3)
    }

    pub fn tesla(self) -> f64 {
        self.0
    }

    pub fn millitesla(self) -> f64 {
        self.0 * 1e3
    }
}

impl core::ops::Neg for MagneticField {
    type Output = MagneticField;

    fn neg(self) -> MagneticField {
        MagneticField(-self.0)
    }
}

/// Flip-flop probabilities: per optical cycle, or per readout pulse once
/// scaled by [`per_readout_flip_probs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipFlopProbs {
    /// Probability of an m_I decrement (γ₊/γ₀).
    pub p_plus: f64,
    /// Probability of an m_I increment (γ₋/γ₀).
    pub p_minus: f64,
}

impl FlipFlopProbs {
    /// `p_minus / p_plus`, the imbalance that drives polarization toward m_I = +1.
    pub fn imbalance(&self) -> f64 {
        self.p_minus / self.p_plus
    }
}

/// Populations of the nuclear m_I = −1, 0, +1 levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuclearDistribution {
    pub pi_minus1: f64,
    pub pi_0: f64,
    pub pi_plus1: f64,
}

impl NuclearDistribution {
    pub const UNIFORM: NuclearDistribution = NuclearDistribution {
        pi_minus1: 1.0 / 3.0,
        pi_0: 1.0 / 3.0,
        pi_plus1: 1.0 / 3.0,
    };

    /// All weight on one m_I value.
    pub fn pure(m_i: i8) -> Self {
        let mut p = [0.0; 3];
        p[(m_i + 1) as usize] = 1.0;
        Self::from_array(p)
    }

    /// Builds from weights ordered (m_I = −1, 0, +1), normalizing them.
    pub fn new(pi_minus1: f64, pi_0: f64, pi_plus1: f64) -> Result<Self, Error> {
        let w = [pi_minus1, pi_0, pi_plus1];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("nuclear", "weights must be finite and non-negative"));
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(invalid("nuclear", "weights must not all vanish"));
        }
        Ok(Self::from_array([w[0] / total, w[1] / total, w[2] / total]))
    }

    pub fn from_array(p: [f64; 3]) -> Self {
        NuclearDistribution {
            pi_minus1: p[0],
            pi_0: p[1],
            pi_plus1: p[2],
        }
    }

    /// Weights ordered (m_I = −1, 0, +1).
    pub fn as_array(&self) -> [f64; 3] {
        [self.pi_minus1, self.pi_0, self.pi_plus1]
    }

    pub fn get(&self, m_i: i8) -> f64 {
        self.as_array()[(m_i + 1) as usize]
    }

    pub fn total_variation(&self, other: &NuclearDistribution) -> f64 {
        let a = self.as_array();
        let b = other.as_array();
        0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }
}

/// Field at which the m_s = 0 and m_s = −1 excited-state levels cross.
pub fn eslac_field(params: &PhysicsParams) -> MagneticField {
    MagneticField(params.d_es / params.gyromag)
}

pub fn flip_flop_probabilities(b0: MagneticField, params: &PhysicsParams) -> FlipFlopProbs {
    let two_a_sq = 2.0 * params.a_es * params.a_es;
    let zeeman = params.gyromag * b0.tesla();
    let lorentz = |detuning: f64| two_a_sq / (two_a_sq + detuning * detuning);
    FlipFlopProbs {
        p_plus: lorentz(params.d_es + zeeman),
        p_minus: lorentz(params.d_es - zeeman),
    }
}

/// Flip-flop probabilities accumulated over one readout pulse of
/// `readout.kappa` effective optical cycles, clipped at 1.
pub fn per_readout_flip_probs(b0: MagneticField, params: &PhysicsParams, readout: &ReadoutParams) -> FlipFlopProbs {
    scale_probs(flip_flop_probabilities(b0, params), readout.kappa)
}

pub(crate) fn scale_probs(p: FlipFlopProbs, cycles: f64) -> FlipFlopProbs {
    FlipFlopProbs {
        p_plus: (cycles * p.p_plus).min(1.0),
        p_minus: (cycles * p.p_minus).min(1.0),
    }
}

/// Stationary nuclear distribution under optical pumping.
///
/// m_I climbs with `p_minus` and descends with `p_plus`; detailed balance on
/// the three-level ladder gives π(+1) : π(0) : π(−1) = r² : r : 1 with
/// r = p_minus / p_plus.
pub fn dnp_steady_state(b0: MagneticField, params: &PhysicsParams) -> Result<NuclearDistribution, Error> {
    ladder_steady_state(flip_flop_probabilities(b0, params))
}

/// [`dnp_steady_state`] for explicit ladder probabilities.
pub fn ladder_steady_state(p: FlipFlopProbs) -> Result<NuclearDistribution, Error> {
    if p.p_plus == 0.0 {
        return Err(Error::DegenerateRates {
            fallback: NuclearDistribution::pure(1),
        });
    }
    let r = p.p_minus / p.p_plus;
    // Normalize against the largest weight so r up to ~1e308 stays finite.
    let (w_minus, w_zero, w_plus) = if r <= 1.0 {
        (1.0, r, r * r)
    } else {
        let inv = 1.0 / r;
        (inv * inv, inv, 1.0)
    };
    let total = w_minus + w_zero + w_plus;
    Ok(NuclearDistribution {
        pi_minus1: w_minus / total,
        pi_0: w_zero / total,
        pi_plus1: w_plus / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn field(mt: f64) -> MagneticField {
        MagneticField::from_millitesla(mt).unwrap()
    }

    #[test]
    fn eslac_field_examples() {
        let p = PhysicsParams::default();
        assert_relative_eq!(eslac_field(&p).millitesla(), 50.728_779_651, epsilon = 1e-6);
        let zero = PhysicsParams { d_es: 0.0, ..p };
        assert_eq!(eslac_field(&zero).tesla(), 0.0);
        let doubled = PhysicsParams { d_es: 2.84, ..p };
        assert_relative_eq!(eslac_field(&doubled).millitesla(), 101.457_559_303, epsilon = 1e-6);
    }

    #[test]
    fn flip_flops_at_eslac_and_zero_field() {
        let p = PhysicsParams::default();
        let at_eslac = flip_flop_probabilities(eslac_field(&p), &p);
        assert!((at_eslac.p_minus - 1.0).abs() < 1e-12);

        let zero = flip_flop_probabilities(MagneticField::default(), &p);
        assert_relative_eq!(zero.p_plus, 1.584_472_172_7e-3, max_relative = 1e-9);
        assert_eq!(zero.p_plus, zero.p_minus);

        let near = flip_flop_probabilities(field(50.7), &p);
        assert_relative_eq!(near.imbalance(), 2519.559, max_relative = 1e-5);
    }

    #[test]
    fn per_readout_scaling() {
        let phys = PhysicsParams::default();
        let b = field(244.0);
        let mut r = ReadoutParams {
            kappa: 0.0,
            ..ReadoutParams::default()
        };
        let none = per_readout_flip_probs(b, &phys, &r);
        assert_eq!((none.p_plus, none.p_minus), (0.0, 0.0));

        r.kappa = 1.0;
        assert_eq!(per_readout_flip_probs(b, &phys, &r), flip_flop_probabilities(b, &phys));

        r.kappa = 3.8;
        assert_relative_eq!(
            per_readout_flip_probs(b, &phys, &r).p_minus,
            4.154_166e-4,
            max_relative = 1e-6
        );

        r.kappa = 10.0;
        assert_eq!(per_readout_flip_probs(eslac_field(&phys), &phys, &r).p_minus, 1.0);
    }

    #[test]
    fn dnp_examples() {
        let p = PhysicsParams::default();
        let near = dnp_steady_state(field(50.7), &p).unwrap();
        assert_relative_eq!(near.pi_plus1, 0.999_603_105, max_relative = 1e-8);
        assert!(near.pi_plus1 > 0.95);

        let zero = dnp_steady_state(MagneticField::default(), &p).unwrap();
        for x in zero.as_array() {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }

        let two = ladder_steady_state(FlipFlopProbs {
            p_plus: 0.1,
            p_minus: 0.2,
        })
        .unwrap();
        assert_relative_eq!(two.pi_plus1, 4.0 / 7.0, epsilon = 1e-15);
        assert_relative_eq!(two.pi_0, 2.0 / 7.0, epsilon = 1e-15);
        assert_relative_eq!(two.pi_minus1, 1.0 / 7.0, epsilon = 1e-15);
    }

    #[test]
    fn dnp_degenerate_rates() {
        let err = ladder_steady_state(FlipFlopProbs {
            p_plus: 0.0,
            p_minus: 0.3,
        })
        .unwrap_err();
        assert_eq!(
            err,
            Error::DegenerateRates {
                fallback: NuclearDistribution::pure(1)
            }
        );
    }

    #[test]
    fn field_bounds() {
        assert!(MagneticField::from_tesla(1.0).is_ok());
        assert!(MagneticField::from_tesla(-1.2).is_err());
        assert!(MagneticField::from_tesla(f64::NAN).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(PhysicsParams::default().validate().is_ok());
        let bad = PhysicsParams {
            p_e0: 1.2,
            ..Default::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidParameter { name: "p_e0", .. })
        ));
        let bad = PhysicsParams {
            a_es: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mirror_symmetry(b in -1.0f64..1.0) {
                let p = PhysicsParams::default();
                let f = MagneticField::from_tesla(b).unwrap();
                let fwd = flip_flop_probabilities(f, &p);
                let rev = flip_flop_probabilities(-f, &p);
                prop_assert_eq!(fwd.p_plus, rev.p_minus);
                prop_assert_eq!(fwd.p_minus, rev.p_plus);
            }

            #[test]
            fn p_minus_peaks_at_eslac(a in 0.0f64..1.0, b in 0.0f64..1.0) {
                let p = PhysicsParams::default();
                let eslac = eslac_field(&p).tesla();
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assume!(hi - lo > 1e-6);
                let pm = |x: f64| flip_flop_probabilities(MagneticField::from_tesla(x).unwrap(), &p).p_minus;
                if hi <= eslac {
                    prop_assert!(pm(lo) < pm(hi));
                } else if lo >= eslac {
                    prop_assert!(pm(lo) > pm(hi));
                }
            }

            #[test]
            fn ladder_normalized_and_scale_invariant(pp in 1e-9f64..1.0, pm in 0.0f64..1.0, s in 1e-3f64..1e3) {
                let base = ladder_steady_state(FlipFlopProbs { p_plus: pp, p_minus: pm }).unwrap();
                let sum: f64 = base.as_array().iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                let scaled = ladder_steady_state(FlipFlopProbs { p_plus: pp * s, p_minus: pm * s }).unwrap();
                prop_assert!(base.total_variation(&scaled) < 1e-12);
            }
        }
    }
}
