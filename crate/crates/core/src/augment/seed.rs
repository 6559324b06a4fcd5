//! Seed derivation. One root seed fans out to per-job seeds through a fixed
//! hash, so the order in which workers pick up jobs cannot change any draw.
//!
//! `job_seed(root, log_id, index) = splitmix64(splitmix64(root ^ fnv1a64(log_id)) + index)`

/// One step of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over `bytes`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn job_seed(root: u64, log_id: &str, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ fnv1a64(log_id.as_bytes())).wrapping_add(index))
}

/// Seed for the choice of which ego clips get perturbed twins.
pub fn selection_seed(root: u64) -> u64 {
    splitmix64(root ^ 0x5045_5254_5552_4221)
}
