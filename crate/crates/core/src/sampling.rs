//! Seeded random streams and categorical sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent stream `index` of the generator seeded by `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Inverse-CDF draw from `(outcome, probability)` pairs. Rounding slack at
/// the top of the CDF goes to the last outcome with positive mass.
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, dist: &[(usize, f64)]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for &(i, p) in dist {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(i);
        if u < acc {
            return i;
        }
    }
    last.expect("distribution with positive mass")
}
