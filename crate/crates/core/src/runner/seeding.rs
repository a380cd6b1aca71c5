//! Label-keyed deterministic random streams.
//!
//! Every consumer (init, permutations, batching, replay, noise, ...) gets
//! its own stream derived from `(master_seed, label)`. Streams are
//! independent by construction: adding a new consumer never shifts the
//! draws of existing ones, which is what makes runs with different update
//! rules see identical data order, memory contents, and replay draws.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A 64-bit value derived from the master seed and a stream label.
pub fn derive_seed(master_seed: u64, stream_label: &str) -> u64 {
    let mut bytes = master_seed.to_le_bytes().to_vec();
    bytes.push(b'/');
    bytes.extend_from_slice(stream_label.as_bytes());
    let mut state = fnv1a64(&bytes);
    splitmix64(&mut state)
}

/// An independent, reproducible generator for `(master_seed, stream_label)`.
pub fn seed_rng(master_seed: u64, stream_label: &str) -> ChaCha12Rng {
    let mut bytes = master_seed.to_le_bytes().to_vec();
    bytes.push(b'/');
    bytes.extend_from_slice(stream_label.as_bytes());
    let mut state = fnv1a64(&bytes);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}
