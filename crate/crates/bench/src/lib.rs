//! Shared fixtures for the benchmarks.

use percscan::experiment::{ParticleLayout, SceneTemplate, WindowRule};
use percscan::{Image, NoiseModel, SceneSpec};

/// Three `n/8` squares on a zero background, Gaussian noise with sigma 0.5.
pub fn three_particle_scene(n: usize) -> SceneSpec {
    SceneTemplate {
        a: 0.0,
        b: 1.0,
        noise: NoiseModel::Gaussian { sigma: 0.5 },
        layout: ParticleLayout::Squares { count: 3, side: WindowRule::Fraction { divisor: 8 } },
    }
    .scene(n)
    .expect("valid scene")
}

pub fn noisy_image(n: usize, seed: u64) -> Image {
    percscan::observe(&three_particle_scene(n), seed).expect("valid scene")
}
