//! Shared fixtures for the benchmarks.

use gdcycles::lift::{lift, normalize_into_ball};
use gdcycles::transforms::{trial_rng, GeneratorSpec};
use gdcycles::{Dataset, LiftedDataset};

/// Base dataset of the first generator draw for `seed`.
pub fn base_dataset(seed: u64) -> Dataset {
    GeneratorSpec::default().sample(&mut trial_rng(seed, 0)).expect("default generator is valid")
}

/// The normalized base of [`base_dataset`] lifted into dimension `d`.
pub fn lifted_fixture(seed: u64, d: usize) -> LiftedDataset {
    let (unit, _) = normalize_into_ball(&base_dataset(seed)).expect("non-empty base");
    lift(&unit, d).expect("d >= 3")
}

/// A deterministic point with entries of mixed sign.
pub fn probe_point(d: usize) -> Vec<f64> {
    (0..d).map(|j| ((j * 7919) % 13) as f64 / 13.0 - 0.5).collect()
}
