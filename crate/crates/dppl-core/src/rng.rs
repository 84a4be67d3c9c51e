//! Counter-based pseudo-random primitives. Every random draw in the
//! interpreter is a pure function of a key and a counter, so runs are
//! reproducible independent of scheduling.

/// splitmix64 finalizer; full-avalanche 64-bit mixer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn mix2(a: u64, b: u64) -> u64 {
    mix64(a ^ mix64(b))
}

pub(crate) fn mix3(a: u64, b: u64, c: u64) -> u64 {
    mix64(a ^ mix64(b ^ mix64(c)))
}

/// Uniform draw in [0, 1) from a key/counter pair.
pub(crate) fn prf_unit(key: u64, counter: u64) -> f64 {
    unit_f64(mix2(key, counter))
}

/// Map 64 random bits to [0, 1) with 53-bit resolution.
pub(crate) fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}
