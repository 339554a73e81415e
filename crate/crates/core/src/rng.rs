use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent deterministic RNG stream `stream` under master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a sub-seed, e.g. one per pipeline stage.
pub fn derive_seed(seed: u64, salt: &str) -> u64 {
    // FNV-1a over the salt, folded into the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in salt.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
