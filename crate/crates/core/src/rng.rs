//! Seeding contract: one master seed, one independent ChaCha stream per chain.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type ChainRng = ChaCha20Rng;

/// Stream `chain_id` of the generator keyed by `master_seed`.
pub fn chain_rng(master_seed: u64, chain_id: u64) -> ChainRng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(chain_id);
    rng
}

/// Generator for auxiliary randomness (data simulation, restarts), kept on a
/// stream no chain uses.
pub fn aux_rng(seed: u64) -> ChainRng {
    chain_rng(seed, u64::MAX)
}
