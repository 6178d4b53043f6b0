//! Deterministic random streams.
//!
//! Every cell owns a ChaCha stream selected by its insertion index, so a
//! trajectory depends only on `(seed, cell index)` and never on scheduling or
//! thread interleaving. Within a stream, the life time is drawn from word 0
//! and division draws start at [`DIVISION_WORD_OFFSET`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DIVISION_WORD_OFFSET: u128 = 1 << 32;

/// SplitMix64 finalizer; decorrelates replicate seeds derived from a master.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `index` in family `tag` under `master`.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    mix64(mix64(master ^ mix64(tag)).wrapping_add(index))
}

pub fn cell_stream(seed: u64, cell: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell);
    rng
}

pub fn division_stream(seed: u64, cell: u64) -> ChaCha8Rng {
    let mut rng = cell_stream(seed, cell);
    rng.set_word_pos(DIVISION_WORD_OFFSET);
    rng
}
