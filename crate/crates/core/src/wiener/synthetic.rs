//! Seeded synthetic capacity profiles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CapacityProfile;
use crate::Result;

/// Densities drawn uniformly from `[delta_min, 1]`; the amplitudes stay
/// bounded below, so the Wiener sum diverges with depth.
pub fn diverging_profile(seed: u64, depth: usize, p: f64, c_bar: f64, delta_min: f64) -> Result<CapacityProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deltas: Vec<f64> = (0..depth).map(|_| rng.random_range(delta_min..=1.0)).collect();
    CapacityProfile::from_deltas(1.0, c_bar, p, &deltas)
}

/// Amplitudes `level · (1 + η_i)` with `η_i` uniform in `[-noise, noise]`,
/// clipped to 1.
pub fn noisy_constant_profile(
    seed: u64,
    depth: usize,
    p: f64,
    c_bar: f64,
    level: f64,
    noise: f64,
) -> Result<CapacityProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<f64> = (0..depth).map(|_| (level * (1.0 + rng.random_range(-noise..=noise))).min(1.0)).collect();
    CapacityProfile::from_amplitudes(1.0, c_bar, p, &amps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_profiles_are_reproducible() {
        let a = diverging_profile(7, 10, 3.0, 0.25, 0.05).unwrap();
        let b = diverging_profile(7, 10, 3.0, 0.25, 0.05).unwrap();
        assert_eq!(a, b);
        assert!(a.entries.iter().all(|e| e.delta >= 0.05 && e.delta <= 1.0));
        assert_ne!(a, diverging_profile(8, 10, 3.0, 0.25, 0.05).unwrap());
    }
}
