//! Seed derivation for reproducible, scheduling-independent random streams.
//!
//! Every generator in the crate is a ChaCha8 instance keyed by the master seed.
//! Independent substreams (replicas, sweep cells, repeated runs) select a ChaCha
//! stream id from a hash of their index path, so the draws of one substream do
//! not depend on how many others were consumed or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Seed used by every command and experiment when none is given.
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Generator for the substream identified by `path` under `master`.
pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream_id(path));
    rng
}

fn stream_id(path: &[u64]) -> u64 {
    path.iter().fold(0x6A09_E667_F3BC_C908, |acc, &i| splitmix(acc ^ splitmix(i.wrapping_add(1))))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
