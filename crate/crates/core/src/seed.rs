//! Seed derivation helpers.
//!
//! Every random decision in this crate flows from a single user seed. To keep
//! independent subsystems (tree training, sampling, per-explanation runs)
//! from sharing RNG streams, each derives its own 64-bit seed by mixing the
//! base seed with a stream tag. Mixing uses the SplitMix64 finalizer, whose
//! output is well distributed even for adjacent inputs.

/// Derives an independent stream seed from `seed` and a stream `tag`.
pub fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(tag)
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over an arbitrary byte string, for hashing structured state into a
/// stream tag.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
