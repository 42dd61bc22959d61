//! Execution of pulse sequences: deterministic expectation propagation and
//! seeded Monte Carlo shot sampling.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::Error;
use crate::physics::{MagneticField, NuclearDistribution, PhysicsParams};
use crate::protocol::{Primitive, PulseSequence};
use crate::pulse::{
    gate_map, laser_pulse_map, pumped_electron, GateParams, LaserRole, Level, PopulationState, ReadoutParams,
    StochasticMap, DARK, N_LEVELS,
};

/// Everything needed to turn a primitive into a [`StochasticMap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub field: MagneticField,
    pub physics: PhysicsParams,
    pub readout: ReadoutParams,
    pub gates: GateParams,
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), Error> {
        self.physics.validate()?;
        self.readout.validate()?;
        self.gates.validate()
    }

    pub fn map_for(&self, p: &Primitive) -> StochasticMap {
        match p {
            Primitive::Gate { label, .. } => gate_map(*label, &self.gates),
            Primitive::Laser(role) => laser_pulse_map(self.field, &self.physics, &self.readout, *role),
            Primitive::Wait(_) => StochasticMap::identity(),
        }
    }
}

/// Sequence steps resolved to a table of distinct maps.
struct Compiled {
    maps: Vec<StochasticMap>,
    /// (map index, is readout slot)
    steps: Vec<(usize, bool)>,
}

fn map_key(p: &Primitive) -> Primitive {
    match p {
        Primitive::Gate { label, .. } => Primitive::Gate {
            label: *label,
            role: crate::protocol::GateRole::Readout,
        },
        Primitive::Wait(_) => Primitive::Wait(0.0),
        other => *other,
    }
}

fn compile(seq: &PulseSequence, params: &SystemParams) -> Compiled {
    let mut keys: Vec<Primitive> = Vec::new();
    let mut maps = Vec::new();
    let mut steps = Vec::with_capacity(seq.steps.len());
    for p in &seq.steps {
        let key = map_key(p);
        let idx = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                keys.push(key);
                maps.push(params.map_for(p));
                keys.len() - 1
            }
        };
        steps.push((idx, matches!(p, Primitive::Laser(LaserRole::Readout))));
    }
    Compiled { maps, steps }
}

/// Starting distribution of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    /// Electron populations for m_s = −1, 0, +1.
    pub electron: [f64; 3],
    pub nuclear: NuclearDistribution,
    /// Weight of the NV⁻ charge state; the rest sits in the dark level.
    pub charge_fidelity: f64,
}

impl InitialCondition {
    /// Electron as left by optical pumping, NV⁻ weight from `phys`.
    pub fn pumped(phys: &PhysicsParams, nuclear: NuclearDistribution) -> Self {
        InitialCondition {
            electron: pumped_electron(phys),
            nuclear,
            charge_fidelity: phys.charge_fidelity,
        }
    }
}

pub fn initial_state(ic: &InitialCondition) -> PopulationState {
    let mut p = [0.0; N_LEVELS];
    let nuclear = ic.nuclear.as_array();
    let electron_total: f64 = ic.electron.iter().sum();
    for level in Level::bright() {
        p[level.index()] = ic.charge_fidelity * ic.electron[(level.m_s + 1) as usize] / electron_total
            * nuclear[(level.m_i + 1) as usize];
    }
    p[DARK] = 1.0 - ic.charge_fidelity;
    PopulationState(p)
}

/// Expected photon counts per readout slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedTrace {
    pub counts: Vec<f64>,
    pub final_state: PopulationState,
}

/// Propagates `state0` through every step of `seq`. Each readout slot
/// records the expected photons of the state entering the readout pulse.
pub fn propagate(seq: &PulseSequence, state0: &PopulationState, params: &SystemParams) -> ExpectedTrace {
    propagate_observed(seq, state0, params, |_| {})
}

/// [`propagate`], calling `observe` with the state after every step.
pub fn propagate_observed(
    seq: &PulseSequence,
    state0: &PopulationState,
    params: &SystemParams,
    mut observe: impl FnMut(&PopulationState),
) -> ExpectedTrace {
    let compiled = compile(seq, params);
    let mut state = *state0;
    let mut counts = Vec::with_capacity(seq.n_readouts);
    for &(idx, is_readout) in &compiled.steps {
        let map = &compiled.maps[idx];
        if is_readout {
            counts.push(map.expected_photons(&state));
        }
        state = map.apply(&state);
        observe(&state);
    }
    ExpectedTrace {
        counts,
        final_state: state,
    }
}

/// Per-shot photon counts, row-major `n_shots × n_readouts`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotTraces {
    pub n_shots: usize,
    pub n_readouts: usize,
    pub counts: Vec<u32>,
    pub seed: u64,
}

impl ShotTraces {
    pub fn row(&self, shot: usize) -> &[u32] {
        &self.counts[shot * self.n_readouts..(shot + 1) * self.n_readouts]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.counts.chunks_exact(self.n_readouts.max(1)).take(self.n_shots)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = alloc::vec![0.0; self.n_readouts];
        for row in self.rows() {
            for (s, &c) in sums.iter_mut().zip(row) {
                *s += c as f64;
            }
        }
        sums.iter().map(|s| s / self.n_shots as f64).collect()
    }

    /// Unbiased per-slot sample variances.
    pub fn column_variances(&self) -> Vec<f64> {
        let means = self.column_means();
        let mut acc = alloc::vec![0.0; self.n_readouts];
        for row in self.rows() {
            for ((a, &c), m) in acc.iter_mut().zip(row).zip(&means) {
                let d = c as f64 - m;
                *a += d * d;
            }
        }
        let denom = (self.n_shots.max(2) - 1) as f64;
        acc.iter().map(|a| a / denom).collect()
    }
}

/// Shots per independently seeded shard.
pub const SHARD_SHOTS: usize = 1024;

/// Per-shard random stream: ChaCha8 keyed by `seed`, stream = shard index.
pub(crate) fn shard_rng(seed: u64, shard: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard as u64);
    rng
}

/// Draws an index from cumulative weights `cdf` (last entry ≈ 1).
fn draw(cdf: &[f64; N_LEVELS], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random::<f64>() * cdf[N_LEVELS - 1];
    cdf.iter().position(|&c| u < c).unwrap_or_else(|| {
        // Round-off at the top: fall back to the last level with weight.
        (0..N_LEVELS)
            .rev()
            .find(|&i| i == 0 || cdf[i] > cdf[i - 1])
            .unwrap_or(0)
    })
}

fn cumulative(weights: impl Iterator<Item = f64>) -> [f64; N_LEVELS] {
    let mut out = [0.0; N_LEVELS];
    let mut acc = 0.0;
    for (o, w) in out.iter_mut().zip(weights) {
        acc += w.max(0.0);
        *o = acc;
    }
    out
}

/// Monte Carlo sampler for one sequence. Shots are grouped into shards of
/// [`SHARD_SHOTS`], each with its own random stream, so the output does not
/// depend on how shards are distributed over workers.
pub struct Sampler {
    compiled: Compiled,
    /// Per map: cumulative distribution of the destination for each source.
    columns: Vec<[[f64; N_LEVELS]; N_LEVELS]>,
    /// Per map: photon distribution for each source (`None` when the yield is 0).
    photons: Vec<[Option<Poisson<f64>>; N_LEVELS]>,
    start: [f64; N_LEVELS],
    n_readouts: usize,
}

impl Sampler {
    pub fn new(seq: &PulseSequence, state0: &PopulationState, params: &SystemParams) -> Self {
        let compiled = compile(seq, params);
        let columns = compiled
            .maps
            .iter()
            .map(|m| core::array::from_fn(|from| cumulative((0..N_LEVELS).map(|to| m.matrix[to][from]))))
            .collect();
        let photons = compiled
            .maps
            .iter()
            .map(|m| core::array::from_fn(|from| Poisson::new(m.photon_yield[from]).ok()))
            .collect();
        let n_readouts = compiled.steps.iter().filter(|s| s.1).count();
        Sampler {
            compiled,
            columns,
            photons,
            start: cumulative(state0.0.iter().copied()),
            n_readouts,
        }
    }

    pub fn n_readouts(&self) -> usize {
        self.n_readouts
    }

    pub fn shard_count(n_shots: usize) -> usize {
        n_shots.div_ceil(SHARD_SHOTS)
    }

    /// Counts for shard `shard` of an `n_shots` run, row-major.
    pub fn run_shard(&self, shard: usize, n_shots: usize, seed: u64) -> Vec<u32> {
        let first = shard * SHARD_SHOTS;
        let shots = SHARD_SHOTS.min(n_shots.saturating_sub(first));
        let mut rng = shard_rng(seed, shard);
        let mut out = Vec::with_capacity(shots * self.n_readouts);
        for _ in 0..shots {
            let mut level = draw(&self.start, &mut rng);
            for &(idx, is_readout) in &self.compiled.steps {
                if is_readout {
                    let k = match &self.photons[idx][level] {
                        Some(p) => p.sample(&mut rng) as u32,
                        None => 0,
                    };
                    out.push(k);
                }
                level = draw(&self.columns[idx][level], &mut rng);
            }
        }
        out
    }

    pub fn assemble(&self, n_shots: usize, seed: u64, shards: impl IntoIterator<Item = Vec<u32>>) -> ShotTraces {
        let mut counts = Vec::with_capacity(n_shots * self.n_readouts);
        for s in shards {
            counts.extend(s);
        }
        ShotTraces {
            n_shots,
            n_readouts: self.n_readouts,
            counts,
            seed,
        }
    }
}

/// Samples `n_shots` independent runs of `seq` starting from `ic`.
pub fn sample(
    seq: &PulseSequence,
    ic: &InitialCondition,
    params: &SystemParams,
    n_shots: usize,
    seed: u64,
) -> Result<ShotTraces, Error> {
    if n_shots < 1 {
        return Err(Error::InsufficientShots { required: 1, got: 0 });
    }
    let sampler = Sampler::new(seq, &initial_state(ic), params);
    let shards = (0..Sampler::shard_count(n_shots)).map(|s| sampler.run_shard(s, n_shots, seed));
    Ok(sampler.assemble(n_shots, seed, shards))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{build_error_corrected, build_repetitive_readout, ElectronPrep, GateRole};
    use crate::pulse::TransitionLabel;
    use approx::assert_relative_eq;

    fn params(kappa: f64, gates: GateParams) -> SystemParams {
        SystemParams {
            field: MagneticField::from_millitesla(244.0).unwrap(),
            physics: PhysicsParams::default(),
            readout: ReadoutParams {
                kappa,
                ..Default::default()
            },
            gates,
        }
    }

    fn slot_only() -> PulseSequence {
        PulseSequence {
            steps: alloc::vec![
                Primitive::Gate {
                    label: TransitionLabel::MWE,
                    role: GateRole::Readout
                },
                Primitive::Laser(LaserRole::Readout),
            ],
            n_readouts: 1,
            correction_period: None,
        }
    }

    #[test]
    fn initial_state_examples() {
        let ic = InitialCondition {
            electron: [0.0, 1.0, 0.0],
            nuclear: NuclearDistribution::pure(1),
            charge_fidelity: 1.0,
        };
        assert_eq!(initial_state(&ic), PopulationState::pure(Level::new(0, 1)));

        let phys = PhysicsParams {
            charge_fidelity: 1.0,
            ..Default::default()
        };
        let s = initial_state(&InitialCondition::pumped(&phys, NuclearDistribution::pure(1)));
        assert_relative_eq!(s.get(Level::new(0, 1)), 0.81);
        assert_relative_eq!(s.get(Level::new(-1, 1)), 0.095, epsilon = 1e-15);
        assert_relative_eq!(s.get(Level::new(1, 1)), 0.095, epsilon = 1e-15);

        let s = initial_state(&InitialCondition::pumped(
            &PhysicsParams::default(),
            NuclearDistribution::UNIFORM,
        ));
        assert_relative_eq!(s.dark_population(), 0.25);
        assert!(s.is_normalized(1e-12));
    }

    #[test]
    fn propagate_examples() {
        let p = params(0.0, GateParams::PERFECT);
        let empty = PulseSequence {
            steps: alloc::vec![Primitive::Gate {
                label: TransitionLabel::MWB,
                role: GateRole::Prepare
            }],
            n_readouts: 0,
            correction_period: None,
        };
        let tr = propagate(&empty, &PopulationState::pure(Level::new(0, 1)), &p);
        assert!(tr.counts.is_empty());
        assert_eq!(tr.final_state, PopulationState::pure(Level::new(-1, 1)));

        let tr = propagate(&slot_only(), &PopulationState::pure(Level::new(0, 1)), &p);
        assert_relative_eq!(tr.counts[0], p.readout.alpha0);

        let tr = propagate(&slot_only(), &PopulationState::pure(Level::new(0, -1)), &p);
        assert_relative_eq!(tr.counts[0], p.readout.alpha0 * (1.0 - p.readout.contrast));
    }

    #[test]
    fn propagation_keeps_normalization() {
        let p = params(50.0, GateParams::default());
        let seq = build_error_corrected(ElectronPrep::MinusOne, 200, 3).unwrap();
        let start = initial_state(&InitialCondition::pumped(&p.physics, NuclearDistribution::pure(1)));
        let mut worst: f64 = 0.0;
        propagate_observed(&seq, &start, &p, |s| {
            worst = worst.max((s.total() - 1.0).abs());
            assert!(s.0.iter().all(|&x| x >= 0.0));
        });
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = params(6.0, GateParams::default());
        let seq = build_repetitive_readout(ElectronPrep::MinusOne, 12).unwrap();
        let ic = InitialCondition::pumped(&p.physics, NuclearDistribution::pure(1));
        let a = sample(&seq, &ic, &p, 3000, 7).unwrap();
        let b = sample(&seq, &ic, &p, 3000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.len(), 3000 * 12);
        let c = sample(&seq, &ic, &p, 3000, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_yield_gives_zero_counts() {
        let mut p = params(6.0, GateParams::default());
        p.readout.alpha0 = 0.0;
        let seq = build_repetitive_readout(ElectronPrep::Zero, 5).unwrap();
        let ic = InitialCondition::pumped(&p.physics, NuclearDistribution::pure(1));
        let shots = sample(&seq, &ic, &p, 200, 1).unwrap();
        assert!(shots.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn monte_carlo_means_match_expectation() {
        // Bright yields so each slot carries a clear Poisson signal.
        let mut p = params(2000.0, GateParams::default());
        p.readout.alpha0 = 3.0;
        let seq = build_error_corrected(ElectronPrep::MinusOne, 20, 4).unwrap();
        let ic = InitialCondition::pumped(&p.physics, NuclearDistribution::pure(1));
        let expected = propagate(&seq, &initial_state(&ic), &p).counts;
        let n = 10_000;
        let shots = sample(&seq, &ic, &p, n, 42).unwrap();
        let means = shots.column_means();
        let vars = shots.column_variances();
        let mut inside = 0;
        for k in 0..seq.n_readouts {
            let se = (vars[k] / n as f64).sqrt();
            if (means[k] - expected[k]).abs() <= 3.0 * se {
                inside += 1;
            }
        }
        assert!(inside >= 19, "{inside}/20 slots within 3 SE");
    }

    #[test]
    fn rejects_zero_shots() {
        let p = params(1.0, GateParams::default());
        let seq = build_repetitive_readout(ElectronPrep::Zero, 1).unwrap();
        let ic = InitialCondition::pumped(&p.physics, NuclearDistribution::pure(1));
        assert!(sample(&seq, &ic, &p, 0, 1).is_err());
    }
}
