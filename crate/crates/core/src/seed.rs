//! Stable seed derivation. Per-group streams are keyed by a hash of the
//! group id so results do not depend on scheduling or input order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(stream, key)` under `base`.
pub fn derive_seed(base: u64, stream: &str, key: &str) -> u64 {
    let s = splitmix64(base ^ fnv1a(stream.as_bytes()));
    splitmix64(s ^ fnv1a(key.as_bytes()))
}

pub fn rng_for(base: u64, stream: &str, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream, key))
}
