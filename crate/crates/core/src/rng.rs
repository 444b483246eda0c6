//! Deterministic random streams.
//!
//! Every random quantity is drawn from ChaCha8 keyed by a `u64` seed. Work
//! items that must not depend on execution order (Monte Carlo replications,
//! bootstrap resamples) each get their own stream number under the same key.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub type StreamRng = ChaCha8Rng;

/// Generator for stream 0 of `seed`.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for an independent substream of `seed`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for replication `index` of work unit `unit`; distinct for every
/// pair with `index < 2^32`.
pub fn stream_id(unit: u32, index: u64) -> u64 {
    debug_assert!(index < (1 << 32));
    ((unit as u64) << 32) | (index & 0xFFFF_FFFF)
}

/// Uniform draw on the open interval `(0, 1)`.
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    ((rng.next_u64() >> 11) as f64 + 0.5) * SCALE
}
