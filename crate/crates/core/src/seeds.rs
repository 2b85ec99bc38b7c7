//! Deterministic derivation of independent RNG streams from one master
//! seed, so paired scenario runs can share disturbance sequences while
//! keeping measurement noise streams separate.

/// SplitMix64 finalizer over (seed, stream id).
pub fn substream(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
