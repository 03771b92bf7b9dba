//! Shared fixtures for the benchmark targets.

use msmaxmin_core::gen::{GeneratorParams, gen_random};
use msmaxmin_core::model::Horizon;

pub fn medium_horizon(tau: u32, players: u32, entities: u32, seed: u64) -> Horizon {
    gen_random(&GeneratorParams {
        players,
        entities,
        tau,
        lookahead: 1,
        delta: 3,
        value_max: 50,
        availability_density: 0.5,
        churn: 0.3,
        seed,
    })
    .expect("valid parameters")
}
