//! Per-sample RNG streams derived from `(seed, image id, epoch)`, so results
//! do not depend on worker count or processing order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn sample_seed(seed: u64, image_id: u64, epoch: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ image_id) ^ epoch)
}

pub fn sample_rng(seed: u64, image_id: u64, epoch: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(sample_seed(seed, image_id, epoch))
}
