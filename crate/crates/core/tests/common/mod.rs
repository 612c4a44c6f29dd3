#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rloc::circuit::{NetworkScenario, Phasor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A physically plausible scenario with every parameter drawn at random.
pub fn random_scenario(rng: &mut ChaCha8Rng) -> NetworkScenario {
    let line_length_km = rng.random_range(5.0..30.0);
    let train_pos_km = line_length_km * rng.random_range(0.2..0.95);
    let emf = Phasor::from_polar(rng.random_range(1.0..20.0), rng.random_range(-3.1..3.1));
    NetworkScenario {
        line_length_km,
        z_rail_per_km: Phasor::new(rng.random_range(0.01..0.1), rng.random_range(0.1..1.0)),
        z_train: Phasor::new(rng.random_range(0.5..5.0), rng.random_range(5.0..30.0)),
        train_pos_km,
        fault_pos_km: line_length_km * rng.random_range(0.01..0.99),
        fault_resistance_ohm: rng.random_range(0.5..500.0),
        bleed_pos_ohm: rng.random_range(50.0..1000.0),
        bleed_neg_ohm: rng.random_range(50.0..1000.0),
        source_emf: emf,
        source_impedance: Phasor::new(rng.random_range(0.005..0.1), rng.random_range(0.1..1.0)),
    }
}

/// Runs the command line in-process and returns its exit code.
pub fn rloc(args: &[&str]) -> i32 {
    rloc::cli::run(std::iter::once("rloc").chain(args.iter().copied()))
}
