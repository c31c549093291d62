//! Deterministic RNG streams keyed by (experiment seed, grid point,
//! replicate, machine). Streams are disjoint, so machines and replicates can
//! run in any order or in parallel with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Machine slot reserved for non-distributed oracle runs.
pub const ORACLE_MACHINE: u32 = u32::MAX;

/// Counter-based stream derivation: the experiment seed picks the key, the
/// (point, replicate, machine) triple picks the stream.
pub fn stream_rng(seed: u64, point: u32, replicate: u32, machine: u32) -> ChaCha8Rng {
    assert!(point < 1 << 8, "grid point index too large");
    assert!(replicate < 1 << 24, "replicate index too large");
    let stream = (u64::from(point) << 56) | (u64::from(replicate) << 32) | u64::from(machine);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
