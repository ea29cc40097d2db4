//! Labeled random substreams.
//!
//! Every random draw in the toolkit comes from ChaCha8 keyed by a single
//! top-level seed. The 64-bit ChaCha stream id is derived from a text label
//! and an index (`splitmix64(fnv1a(label) ^ splitmix64(index))`), so that
//! per-pulse or per-draw streams are independent of evaluation order and a
//! parallel run reproduces a serial one bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator for substream `(label, index)` of `seed`.
pub fn substream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(splitmix64(fnv1a(label) ^ splitmix64(index)));
    rng
}

/// Derives a child seed, used when one configured seed fans out to several
/// independent consumers.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ fnv1a(label))
}
