//! Rayon versions of the sharded core routines. Shards and resamples carry
//! their own random streams, so results match the serial versions exactly.

use nvreadout_core::analysis::{bootstrap_check, bootstrap_replicate, standard_error, Resample};
use nvreadout_core::protocol::PulseSequence;
use nvreadout_core::simulator::{initial_state, InitialCondition, Sampler, SystemParams};
use nvreadout_core::{Error, ShotTraces};
use rayon::prelude::*;

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
    let shards: Vec<Vec<u32>> = (0..Sampler::shard_count(n_shots))
        .into_par_iter()
        .map(|s| sampler.run_shard(s, n_shots, seed))
        .collect();
    Ok(sampler.assemble(n_shots, seed, shards))
}

pub fn bootstrap_se<F>(a: &ShotTraces, b: &ShotTraces, statistic: F, resamples: usize, seed: u64) -> Result<f64, Error>
where
    F: Fn(&Resample, &Resample) -> f64 + Sync,
{
    bootstrap_check(a, b)?;
    let reps: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| bootstrap_replicate(a, b, &statistic, r, seed))
        .collect();
    Ok(standard_error(&reps))
}
