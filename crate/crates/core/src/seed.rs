//! Counter-mode seed derivation. Every random stage draws from its own
//! generator keyed by `(master, stream, index)` so that results do not depend
//! on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a path of counters into the master seed.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &c| {
        splitmix64(acc ^ splitmix64(c))
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    rng(derive(master, path))
}

/// Stream labels used by the link and metrology loops.
pub mod stream {
    pub const BITS: u64 = 1;
    pub const AWGN: u64 = 2;
    pub const TDL: u64 = 3;
    pub const PN_TX: u64 = 4;
    pub const PN_RX: u64 = 5;
    pub const OFFSET: u64 = 6;
}
