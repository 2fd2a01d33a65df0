//! Seed derivation and the crate-wide random stream type.
//!
//! Every component seed is `derive_seed(master, label, index)`:
//! FNV-1a (64-bit) over the UTF-8 label, xor'd with the master seed and the
//! index multiplied by the golden-ratio constant, then passed through the
//! SplitMix64 finaliser. The function is pure and its output is part of the
//! reproducibility contract; changing it changes every result file.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng64 = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(master ^ fnv1a(label) ^ index.wrapping_mul(GOLDEN))
}

pub fn rng_from_seed(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

pub fn derive_rng(master: u64, label: &str, index: u64) -> Rng64 {
    rng_from_seed(derive_seed(master, label, index))
}
