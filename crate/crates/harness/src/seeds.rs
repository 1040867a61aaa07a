//! Order-independent seed derivation for Monte Carlo grids.
//!
//! A trial seed is a pure function of the master seed and the trial's
//! coordinates, so cells and trials can run in any order or in parallel.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `coords` into `master` one word at a time.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(mix64(master), |acc, &c| mix64(acc ^ mix64(c)))
}

/// Bit pattern of a float coordinate such as an SNR or a ratio.
pub fn float_coord(v: f64) -> u64 {
    v.to_bits()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_values() {
        // Pinned so that published CSVs stay reproducible across releases.
        assert_eq!(mix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
    }

    #[test]
    fn coordinates_matter() {
        let a = derive_seed(7, &[1, 2]);
        assert_ne!(a, derive_seed(7, &[2, 1]));
        assert_ne!(a, derive_seed(8, &[1, 2]));
        assert_ne!(a, derive_seed(7, &[1, 2, 0]));
    }
}
