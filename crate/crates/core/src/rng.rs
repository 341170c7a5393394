//! Seeded random streams.
//!
//! Every stochastic operation takes a caller-owned stream. Parallel runs split
//! work into fixed-size shards and give shard `i` the ChaCha stream `i` of the
//! run seed, so results never depend on how shards are scheduled.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream number `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// An independent seed for sub-run `index` of a run seeded with `seed`
/// (e.g. one point of a pump-power sweep).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // Stream numbers at the top of the range are reserved for derived seeds so
    // they never coincide with shard streams of the parent run.
    stream(seed, u64::MAX - index).next_u64()
}
