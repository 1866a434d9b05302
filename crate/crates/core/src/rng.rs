//! Seeded random draws shared by the test-signal generator and the ensemble
//! reports. ChaCha8 keeps streams identical across platforms.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex sample with real and imaginary parts uniform in `[-1, 1)`.
pub fn complex_uniform(rng: &mut SeededRng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn complex_vec(rng: &mut SeededRng, len: usize) -> Vec<Complex64> {
    (0..len).map(|_| complex_uniform(rng)).collect()
}

/// Derive an independent child seed, so that instance `i` of a sweep can be
/// regenerated on its own.
pub fn child_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
