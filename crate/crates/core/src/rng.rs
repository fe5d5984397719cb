//! Deterministic random substreams.
//!
//! Every Monte-Carlo trial owns a generator seeded from a hash of the master
//! seed and the trial index, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every simulated trial.
pub type TrialRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `index` under `master`.
pub fn substream_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Generator for substream `index` under `master`.
pub fn substream(master: u64, index: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, index))
}
