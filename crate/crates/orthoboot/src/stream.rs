//! Counter-based splittable random streams.
//!
//! Every unit of parallel work (bootstrap draw, replicate, tree) receives a
//! stream derived from a master seed and a counter, so results do not depend
//! on scheduling or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 step; mixes a 64-bit state into a well-distributed output.
#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a counter.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    let mut state = master;
    let a = splitmix64(&mut state);
    let mut state = a ^ counter.wrapping_mul(0xd1b5_4a32_d192_ed03);
    let b = splitmix64(&mut state);
    splitmix64(&mut { b })
}

/// Independent random stream for work unit `counter` under `master`.
pub fn substream(master: u64, counter: u64) -> ChaCha12Rng {
    let mut state = derive_seed(master, counter);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
