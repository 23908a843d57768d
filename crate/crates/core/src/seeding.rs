//! Deterministic seed derivation.
//!
//! Every random draw in the engine comes from a ChaCha stream whose seed is
//! derived from the run seed plus structural tags (step number, completion
//! index, epoch, ...). Derivation is stateless, so resuming a run or
//! sampling a group concurrently reproduces the exact same streams.

/// splitmix64 finalizer; a cheap, well-mixed 64-bit permutation.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a root seed and a list of tags.
pub fn derive(root: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(root);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag));
    }
    state
}

/// FNV-1a 64-bit over bytes. Used for feature hashing; stable across
/// platforms and toolchain versions, unlike the std hasher.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
