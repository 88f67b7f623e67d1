//! Uniform scene drops over the service rectangle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Scene, Vec3};

/// User and target drawn uniformly from `[-D_x/2, D_x/2] × [-D_y/2, D_y/2]`.
/// The user is on the ground; the target sits at `target_z`.
pub fn sample_scene<R: Rng + ?Sized>(d_x: f64, d_y: f64, target_z: f64, rng: &mut R) -> Scene {
    let mut coordinate = |side: f64| {
        if side > 0.0 {
            rng.random_range(-side / 2.0..=side / 2.0)
        } else {
            0.0
        }
    };
    let user = Vec3::new(coordinate(d_x), coordinate(d_y), 0.0);
    let target = Vec3::new(coordinate(d_x), coordinate(d_y), target_z);
    Scene::new(user, target)
}

/// Generator for one drop. Scenes depend only on the seed, the side-length
/// index and the drop, so every weight, method and element count sees the
/// same drops.
pub fn drop_rng(seed: u64, side_length_index: usize, drop: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((side_length_index as u64) << 32) | drop as u64);
    rng
}

pub fn drop_scene(
    seed: u64,
    side_length_index: usize,
    drop: usize,
    d_x: f64,
    d_y: f64,
    target_z: f64,
) -> Scene {
    sample_scene(d_x, d_y, target_z, &mut drop_rng(seed, side_length_index, drop))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_width_pins_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let s = sample_scene(0.0, 8.0, 0.0, &mut rng);
            assert_eq!(s.user.x, 0.0);
            assert_eq!(s.target.x, 0.0);
            assert!(s.user.y.abs() <= 4.0);
        }
    }

    #[test]
    fn empirical_mean_is_centred() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let d_x = 40.0;
        let mean = (0..n)
            .map(|_| sample_scene(d_x, 8.0, 0.0, &mut rng).user.x)
            .sum::<f64>()
            / n as f64;
        let sigma = d_x / 12f64.sqrt() / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean}, 3σ {}", 3.0 * sigma);
    }

    #[test]
    fn fixed_seed_repeats() {
        let a: Vec<Scene> = (0..10).map(|d| drop_scene(7, 1, d, 40.0, 8.0, 0.0)).collect();
        let b: Vec<Scene> = (0..10).map(|d| drop_scene(7, 1, d, 40.0, 8.0, 0.0)).collect();
        assert_eq!(a, b);
        assert_ne!(drop_scene(7, 0, 0, 40.0, 8.0, 0.0), drop_scene(7, 1, 0, 40.0, 8.0, 0.0));
        assert_ne!(drop_scene(7, 0, 0, 40.0, 8.0, 0.0), drop_scene(8, 0, 0, 40.0, 8.0, 0.0));
    }

    #[test]
    fn target_altitude_is_applied() {
        let s = drop_scene(1, 0, 0, 40.0, 8.0, 1.5);
        assert_eq!(s.user.z, 0.0);
        assert_eq!(s.target.z, 1.5);
    }
}
