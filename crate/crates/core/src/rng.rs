//! Seeded random streams.
//!
//! Every run owns one master seed. Consumers never share a generator; they
//! derive a named substream (`init`, `dropout`, `splits`, `monte-carlo`, ...)
//! so that adding a draw in one place never shifts the numbers seen elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const INIT: &str = "init";
pub const DROPOUT: &str = "dropout";
pub const SPLITS: &str = "splits";
pub const MONTE_CARLO: &str = "monte-carlo";
pub const SYNTHETIC: &str = "synthetic";

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Generator for the substream `name` of `master`.
pub fn substream(master: u64, name: &str) -> StreamRng {
    indexed_substream(master, name, 0)
}

/// Generator for the `index`-th child of substream `name`, e.g. one per
/// epoch or one per Monte Carlo block.
pub fn indexed_substream(master: u64, name: &str, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(fnv1a(name).wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
    rng
}
