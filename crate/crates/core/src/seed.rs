//! Deterministic seed derivation for independent random streams.
//!
//! Every random decision in the crate draws from a stream whose seed is
//! derived from the run seed plus a purpose tag, so adding or removing one
//! consumer never shifts another consumer's stream.

/// Derive a child seed from a base seed, a purpose tag, and an index.
pub fn derive(base: u64, tag: &str, index: u64) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &b in tag.as_bytes() {
        h = mix(h ^ u64::from(b));
    }
    mix(h ^ index)
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
