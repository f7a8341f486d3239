//! Reproducible per-frame random streams.
//!
//! Every Monte-Carlo frame owns an independent stream derived from the run
//! seed and the frame's coordinates `(snr_index, frame_index)`. Streams are
//! keyed, not split sequentially, so workers can process frames in any order
//! (or in parallel) and still produce bit-identical results.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// SplitMix64 step; used only to expand key material, never as the stream
/// generator itself.
#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the stream for frame `frame_index` of SNR point `snr_index`
/// under the given run seed.
pub fn frame_rng(seed: u64, snr_index: u32, frame_index: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mixed_seed = splitmix64(&mut state);
    let mut state = mixed_seed ^ (u64::from(snr_index)).wrapping_mul(0xA076_1D64_78BD_642F);
    let mixed_snr = splitmix64(&mut state);
    let mut state = mixed_snr ^ frame_index.wrapping_mul(0xE703_7ED1_A0B4_28DB);

    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
