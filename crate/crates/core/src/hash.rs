//! Keyed 64-bit mixing used to derive per-node and per-task randomness from a
//! master seed, independent of traversal order.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a key with a word.
#[inline]
pub fn combine(key: u64, word: u64) -> u64 {
    mix64(key ^ word.wrapping_mul(GOLDEN).rotate_left(17))
}

/// Uniform in `[0, 1)` from the top 53 bits.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stable hash of a stream name, for named substreams of the master seed.
pub fn tag(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Seed of substream `index` of stream `name` under `master`.
pub fn substream(master: u64, name: &str, index: u64) -> u64 {
    combine(combine(mix64(master), tag(name)), index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_is_in_range_and_spread() {
        let mut lo = 0;
        for i in 0..10_000u64 {
            let u = unit_f64(mix64(i));
            assert!((0.0..1.0).contains(&u));
            if u < 0.5 {
                lo += 1;
            }
        }
        assert!((4800..5200).contains(&lo));
    }

    #[test]
    fn substreams_differ() {
        assert_ne!(substream(1, "gw", 0), substream(1, "gw", 1));
        assert_ne!(substream(1, "gw", 0), substream(1, "sample", 0));
        assert_ne!(substream(1, "gw", 0), substream(2, "gw", 0));
    }
}
