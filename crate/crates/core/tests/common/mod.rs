#![allow(dead_code)]

use eebc::model::{draw_channels, ChannelSet, PowerModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dimensions and distances drawn from `seed`; reference power model and
/// noise, users between 0.1 and 2 km.
pub fn random_scenario(
    seed: u64,
    max_m: usize,
    max_n: usize,
    max_k: usize,
) -> (ChannelSet, PowerModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let m = rng.random_range(1..=max_m);
    let n = rng.random_range(1..=max_n);
    let k = rng.random_range(1..=max_k);
    sized_scenario(seed, m, n, k)
}

pub fn sized_scenario(seed: u64, m: usize, n: usize, k: usize) -> (ChannelSet, PowerModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let distances: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
    let ch = draw_channels(seed, m, n, k, &distances, -110.0, 5e6).unwrap();
    (ch, PowerModel::reference())
}
