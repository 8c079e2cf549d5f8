//! Deterministic seed derivation. Every random stream in an experiment is a
//! pure function of the master seed and a small tuple of labels, so results
//! do not depend on thread scheduling.

/// One splitmix64 output step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines two words into a well-mixed seed.
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b.rotate_left(17))
}

/// FNV-1a, stable across platforms and compiler versions.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed for `stream` at sample size `n`, replication `rep`.
pub fn derive(master: u64, stream: &str, n: usize, rep: usize) -> u64 {
    mix(mix(mix(master, stable_hash(stream)), n as u64), rep as u64)
}
