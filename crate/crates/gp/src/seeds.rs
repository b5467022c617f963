//! Seed derivation. Every random stream in a run is keyed by its position
//! (run, generation, individual), so scheduling never changes results.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with a path of keys into a new 64-bit seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(base), |h, &k| splitmix(h ^ splitmix(k)))
}

pub(crate) const INIT: u64 = 1;
pub(crate) const BREED: u64 = 2;
pub(crate) const SIM: u64 = 3;
pub(crate) const PARAM: u64 = 4;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_order_matters() {
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[]));
        assert_eq!(derive_seed(9, &[4, 5]), derive_seed(9, &[4, 5]));
    }
}
