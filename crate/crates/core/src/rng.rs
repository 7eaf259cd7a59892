//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the run seed and selected by
//! a 64-bit stream index; the block counter inside the stream plays the role
//! of the draw index. Work items always derive their stream from their own
//! index, so results never depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream `index` of the family keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream for sub-item `minor` of work item `major` (e.g. chunk of a sweep).
pub fn substream(seed: u64, major: u64, minor: u64) -> StreamRng {
    stream(seed, (major << 32) ^ minor)
}

/// Runs `f` on a dedicated pool with `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
