use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere a seed is accepted.
pub type ItemRng = ChaCha8Rng;

/// Derives an independent stream from a base seed and a list of stream labels
/// (epoch, worker index, ...). SplitMix64 finalizer over the mixed words.
pub fn seeded_rng(seed: u64, stream: &[u64]) -> ItemRng {
    let mut state = splitmix(seed ^ 0x6a09_e667_f3bc_c909);
    for &s in stream {
        state = splitmix(state ^ splitmix(s.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    ChaCha8Rng::seed_from_u64(state)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
