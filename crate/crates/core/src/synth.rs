//! Ground-truth scenes and additive noise.
//!
//! A scene is a constant background `a` with particles of constant intensity
//! `b > a`. Observations are `clean + noise`, with noise drawn i.i.d. per
//! pixel.
//!
//! # Random streams
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. [`add_noise`]
//! consumes the stream pixel by pixel in row-major order, so a given
//! `(image, noise, seed)` produces the same output on every platform for the
//! noise kinds that need no transcendental functions (uniform, two-point).

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist, StudentsT};

use crate::error::{Error, Result};
use crate::grid::{BinaryImage, LatticeKind};
use crate::image::{Coord, Image};
use crate::scan;

/// Centered noise distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Uniform on `[-m, m]`.
    UniformBounded {
        m: f64,
    },
    Gaussian {
        sigma: f64,
    },
    /// `+m` or `-m` with equal probability.
    TwoPointSymmetric {
        m: f64,
    },
    /// `scale * T` with `T` Student-t on `nu > 2` degrees of freedom.
    StudentT {
        nu: f64,
        scale: f64,
    },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::UniformBounded { m } | NoiseModel::TwoPointSymmetric { m } => m.is_finite() && m >= 0.0,
            NoiseModel::Gaussian { sigma } => sigma.is_finite() && sigma >= 0.0,
            NoiseModel::StudentT { nu, scale } => nu.is_finite() && nu > 2.0 && scale.is_finite() && scale >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid noise parameters {self:?}")))
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::UniformBounded { m } => m * m / 3.0,
            NoiseModel::Gaussian { sigma } => sigma * sigma,
            NoiseModel::TwoPointSymmetric { m } => m * m,
            NoiseModel::StudentT { nu, scale } => scale * scale * nu / (nu - 2.0),
        }
    }

    /// Almost-sure bound on `|noise|`, if one exists.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            NoiseModel::UniformBounded { m } | NoiseModel::TwoPointSymmetric { m } => Some(m),
            NoiseModel::Gaussian { sigma: 0.0 } => Some(0.0),
            NoiseModel::StudentT { scale: 0.0, .. } => Some(0.0),
            _ => None,
        }
    }

    /// Distribution function of the noise.
    pub fn cdf(&self, x: f64) -> f64 {
        let step = |x: f64| if x >= 0.0 { 1.0 } else { 0.0 };
        match *self {
            NoiseModel::UniformBounded { m } => {
                if m == 0.0 {
                    step(x)
                } else {
                    ((x + m) / (2.0 * m)).clamp(0.0, 1.0)
                }
            }
            NoiseModel::Gaussian { sigma } => {
                if sigma == 0.0 {
                    step(x)
                } else {
                    NormalDist::new(0.0, sigma).expect("valid sigma").cdf(x)
                }
            }
            NoiseModel::TwoPointSymmetric { m } => {
                if x < -m {
                    0.0
                } else if x < m {
                    0.5
                } else {
                    1.0
                }
            }
            NoiseModel::StudentT { nu, scale } => {
                if scale == 0.0 {
                    step(x)
                } else {
                    StudentsT::new(0.0, scale, nu).expect("valid t parameters").cdf(x)
                }
            }
        }
    }

    /// A scale on which the bulk of the distribution lives, used to lay out
    /// evaluation grids. Zero for degenerate noise.
    pub fn spread(&self) -> f64 {
        match self.bound() {
            Some(m) => m,
            None => 4.0 * self.variance().sqrt(),
        }
    }

    fn sampler(&self) -> Sampler {
        match *self {
            NoiseModel::UniformBounded { m } => Sampler::Uniform(m),
            NoiseModel::Gaussian { sigma } => Sampler::Normal(Normal::new(0.0, sigma).expect("validated sigma")),
            NoiseModel::TwoPointSymmetric { m } => Sampler::TwoPoint(m),
            NoiseModel::StudentT { nu, scale } => Sampler::StudentT(StudentT::new(nu).expect("validated nu"), scale),
        }
    }
}

enum Sampler {
    Uniform(f64),
    Normal(Normal<f64>),
    TwoPoint(f64),
    StudentT(StudentT<f64>, f64),
}

impl Sampler {
    #[inline]
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Uniform(m) => m * (2.0 * rng.random::<f64>() - 1.0),
            Sampler::Normal(d) => d.sample(rng),
            Sampler::TwoPoint(m) => {
                if rng.random::<bool>() {
                    *m
                } else {
                    -m
                }
            }
            Sampler::StudentT(d, scale) => scale * d.sample(rng),
        }
    }
}

/// A particle: an explicit set of pixels, kept sorted row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pixels: Vec<Coord>,
}

impl Mask {
    pub fn from_pixels(pixels: impl IntoIterator<Item = Coord>) -> Self {
        let mut pixels: Vec<Coord> = pixels.into_iter().collect();
        pixels.sort_unstable();
        pixels.dedup();
        Self { pixels }
    }

    pub fn rect(top: usize, left: usize, height: usize, width: usize) -> Self {
        Self { pixels: (top..top + height).flat_map(|i| (left..left + width).map(move |j| (i, j))).collect() }
    }

    pub fn square(top: usize, left: usize, side: usize) -> Self {
        Self::rect(top, left, side, side)
    }

    /// Pixels whose centre lies within `radius` of `(row, col)`. Pixels that
    /// would have negative coordinates are dropped.
    pub fn disc(row: usize, col: usize, radius: f64) -> Self {
        let r = radius.max(0.0).floor() as usize;
        let r2 = radius * radius;
        let mut pixels = Vec::new();
        for i in row.saturating_sub(r)..=row + r {
            for j in col.saturating_sub(r)..=col + r {
                let di = i as f64 - row as f64;
                let dj = j as f64 - col as f64;
                if di * di + dj * dj <= r2 {
                    pixels.push((i, j));
                }
            }
        }
        Self { pixels }
    }

    pub fn pixels(&self) -> &[Coord] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Horizontal runs `[row, col, length]` in row-major order.
    pub fn runs(&self) -> Vec<[usize; 3]> {
        let mut runs: Vec<[usize; 3]> = Vec::new();
        for &(i, j) in &self.pixels {
            match runs.last_mut() {
                Some(run) if run[0] == i && run[1] + run[2] == j => run[2] += 1,
                _ => runs.push([i, j, 1]),
            }
        }
        runs
    }

    pub fn from_runs(runs: &[[usize; 3]]) -> Self {
        Self::from_pixels(runs.iter().flat_map(|&[i, j, len]| (j..j + len).map(move |c| (i, c))))
    }
}

/// Ground-truth scene description.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub n: usize,
    /// Background intensity.
    pub a: f64,
    /// Particle intensity.
    pub b: f64,
    pub particles: Vec<Mask>,
    pub noise: NoiseModel,
}

impl SceneSpec {
    pub fn new(n: usize, a: f64, b: f64, particles: Vec<Mask>, noise: NoiseModel) -> Result<Self> {
        let scene = Self { n, a, b, particles, noise };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("scene side must be positive"));
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::invalid("intensities must be finite"));
        }
        if self.b <= self.a {
            return Err(Error::invalid(format!("particle intensity {} must exceed background {}", self.b, self.a)));
        }
        self.noise.validate()?;
        let mut seen = HashSet::new();
        for (k, mask) in self.particles.iter().enumerate() {
            for &(i, j) in mask.pixels() {
                if i >= self.n || j >= self.n {
                    return Err(Error::invalid(format!("particle {k} pixel ({i}, {j}) outside {0}x{0} scene", self.n)));
                }
                if !seen.insert((i, j)) {
                    return Err(Error::invalid(format!("particle {k} overlaps an earlier particle at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    /// Indicator of particle pixels, row-major.
    pub fn particle_indicator(&self) -> Vec<bool> {
        let mut bits = vec![false; self.n * self.n];
        for mask in &self.particles {
            for &(i, j) in mask.pixels() {
                bits[i * self.n + j] = true;
            }
        }
        bits
    }

    pub fn particle_fraction(&self) -> f64 {
        let covered: usize = self.particles.iter().map(Mask::len).sum();
        covered as f64 / (self.n * self.n) as f64
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text).map_err(|e| Error::Scene(e.to_string()))?;
        if file.version != SCENE_FILE_VERSION {
            return Err(Error::Scene(format!(
                "unsupported scene version {} (expected {SCENE_FILE_VERSION})",
                file.version
            )));
        }
        let particles = file.particles.iter().map(|p| Mask::from_runs(&p.runs)).collect();
        Self::new(file.n, file.a, file.b, particles, file.noise)
    }

    pub fn to_json(&self) -> String {
        let file = SceneFile {
            version: SCENE_FILE_VERSION,
            n: self.n,
            a: self.a,
            b: self.b,
            noise: self.noise,
            particles: self.particles.iter().map(|m| ParticleRuns { runs: m.runs() }).collect(),
        };
        serde_json::to_string_pretty(&file).expect("scene serializes") + "\n"
    }
}

pub const SCENE_FILE_VERSION: u32 = 1;

/// On-disk scene schema. Particles are stored as row runs `[row, col, len]`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    version: u32,
    n: usize,
    a: f64,
    b: f64,
    noise: NoiseModel,
    particles: Vec<ParticleRuns>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParticleRuns {
    runs: Vec<[usize; 3]>,
}

/// Noise-free image: `b` on particle pixels, `a` elsewhere.
pub fn render_clean(scene: &SceneSpec) -> Result<Image> {
    scene.validate()?;
    let values = scene.particle_indicator().into_iter().map(|inside| if inside { scene.b } else { scene.a }).collect();
    Image::new(scene.n, values)
}

/// Adds i.i.d. noise to every pixel, drawing in row-major order.
pub fn add_noise(clean: &Image, noise: &NoiseModel, seed: u64) -> Image {
    noise.validate().expect("noise model parameters must be valid");
    let sampler = noise.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = clean.values().iter().map(|&v| v + sampler.sample(&mut rng)).collect();
    Image::from_raw_unchecked(clean.n(), values)
}

/// Renders and perturbs a scene in one step.
pub fn observe(scene: &SceneSpec, seed: u64) -> Result<Image> {
    Ok(add_noise(&render_clean(scene)?, &scene.noise, seed))
}

/// Row-major-first top-left corner of a `phi0 x phi0` window that touches no
/// particle, or `None` if every window is contaminated.
pub fn has_noise_only_square(scene: &SceneSpec, phi0: usize) -> Result<Option<Coord>> {
    if phi0 == 0 || phi0 > scene.n {
        return Err(Error::invalid(format!("window side {phi0} outside 1..={}", scene.n)));
    }
    let coverage = Image::from_raw_unchecked(
        scene.n,
        scene.particle_indicator().into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect(),
    );
    let sums = scan::sliding_window_sums(&coverage, phi0)?;
    let m = sums.positions_per_axis();
    Ok(sums.sums().iter().position(|&s| s == 0.0).map(|k| (k / m, k % m)))
}

/// I.i.d. site-percolation configuration: each pixel black with probability `p`.
pub fn bernoulli_image(n: usize, p: f64, seed: u64, lattice: LatticeKind) -> Result<BinaryImage> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = (0..n * n).map(|_| rng.random::<f64>() < p).collect();
    BinaryImage::new(n, bits, lattice)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(m: f64) -> NoiseModel {
        NoiseModel::UniformBounded { m }
    }

    #[test]
    fn clean_without_particles_is_background() {
        let scene = SceneSpec::new(4, 0.0, 1.0, vec![], uniform(0.0)).unwrap();
        let img = render_clean(&scene).unwrap();
        assert!(img.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn clean_single_pixel_particle() {
        let scene = SceneSpec::new(4, 0.0, 1.0, vec![Mask::from_pixels([(0, 0)])], uniform(0.0)).unwrap();
        let img = render_clean(&scene).unwrap();
        assert_eq!(img.get(0, 0), 1.0);
        assert_eq!(img.values().iter().filter(|&&v| v == 1.0).count(), 1);
    }

    #[test]
    fn clean_two_squares_counts() {
        let scene =
            SceneSpec::new(8, 0.3, 0.9, vec![Mask::square(0, 0, 2), Mask::square(5, 5, 2)], uniform(0.0)).unwrap();
        let img = render_clean(&scene).unwrap();
        assert_eq!(img.values().iter().filter(|&&v| v == 0.9).count(), 8);
        assert_eq!(img.values().iter().filter(|&&v| v == 0.3).count(), 56);
    }

    #[test]
    fn overlapping_masks_rejected() {
        let scene = SceneSpec {
            n: 8,
            a: 0.0,
            b: 1.0,
            particles: vec![Mask::square(0, 0, 3), Mask::square(2, 2, 3)],
            noise: uniform(0.0),
        };
        assert!(matches!(render_clean(&scene), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn scene_requires_contrast_and_bounds() {
        assert!(SceneSpec::new(4, 1.0, 1.0, vec![], uniform(0.0)).is_err());
        assert!(SceneSpec::new(4, 0.0, 1.0, vec![Mask::square(3, 3, 2)], uniform(0.0)).is_err());
        assert!(SceneSpec::new(4, 0.0, 1.0, vec![], NoiseModel::StudentT { nu: 2.0, scale: 1.0 }).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let clean = Image::from_rows(&[[0.25, -1.5], [3.0, 0.0]]).unwrap();
        assert_eq!(add_noise(&clean, &uniform(0.0), 99), clean);
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let clean = Image::filled(2, 0.0).unwrap();
        let x = add_noise(&clean, &uniform(1.0), 5);
        assert_eq!(x, add_noise(&clean, &uniform(1.0), 5));
        assert_ne!(x, add_noise(&clean, &uniform(1.0), 6));
        assert!(x.values().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn gaussian_moments_on_256() {
        let sigma = 0.5;
        let count = 256.0 * 256.0;
        let img = add_noise(&Image::filled(256, 0.0).unwrap(), &NoiseModel::Gaussian { sigma }, 11);
        let mean = img.values().iter().sum::<f64>() / count;
        let var = img.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        assert!(mean.abs() < 4.0 * sigma / count.sqrt(), "mean {mean}");
        assert!((var - 0.25).abs() < 0.025, "var {var}");
    }

    #[test]
    fn bounded_kinds_respect_bound() {
        for noise in [uniform(0.7), NoiseModel::TwoPointSymmetric { m: 0.7 }] {
            let img = add_noise(&Image::filled(32, 0.0).unwrap(), &noise, 3);
            assert!(img.values().iter().all(|v| v.abs() <= 0.7));
        }
    }

    /// Single pixel, many replicates: sample mean within 5 standard errors of
    /// the clean value, and sample skewness near zero.
    #[test]
    fn noise_is_centered_and_symmetric() {
        let kinds = [
            uniform(1.0),
            NoiseModel::Gaussian { sigma: 0.5 },
            NoiseModel::TwoPointSymmetric { m: 0.3 },
            NoiseModel::StudentT { nu: 5.0, scale: 0.2 },
        ];
        let clean = Image::filled(1, 0.4).unwrap();
        let reps = 20_000u64;
        for noise in kinds {
            let draws: Vec<f64> = (0..reps).map(|s| add_noise(&clean, &noise, s).get(0, 0)).collect();
            let mean = draws.iter().sum::<f64>() / reps as f64;
            let se = (noise.variance() / reps as f64).sqrt();
            assert!((mean - 0.4).abs() < 5.0 * se, "{noise:?}: mean {mean}");
            let m2 = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / reps as f64;
            let m3 = draws.iter().map(|d| (d - mean).powi(3)).sum::<f64>() / reps as f64;
            let skew = m3 / m2.powf(1.5);
            // Student-t with 5 dof has a heavy sixth moment; allow a wider band.
            let tol = if matches!(noise, NoiseModel::StudentT { .. }) { 0.5 } else { 0.1 };
            assert!(skew.abs() < tol, "{noise:?}: skew {skew}");
        }
    }

    /// Exhaustive scan over every window, independent of the sliding sums.
    fn brute_noise_square(scene: &SceneSpec, phi0: usize) -> Option<Coord> {
        let ind = scene.particle_indicator();
        let n = scene.n;
        for r in 0..=n - phi0 {
            for c in 0..=n - phi0 {
                let clean = (r..r + phi0).all(|i| (c..c + phi0).all(|j| !ind[i * n + j]));
                if clean {
                    return Some((r, c));
                }
            }
        }
        None
    }

    #[test]
    fn noise_only_square_examples() {
        let empty = SceneSpec::new(10, 0.0, 1.0, vec![], uniform(1.0)).unwrap();
        assert_eq!(has_noise_only_square(&empty, 7).unwrap(), Some((0, 0)));

        let full = SceneSpec::new(5, 0.0, 1.0, vec![Mask::square(0, 0, 5)], uniform(1.0)).unwrap();
        assert_eq!(has_noise_only_square(&full, 1).unwrap(), None);

        let corner = SceneSpec::new(8, 0.0, 1.0, vec![Mask::square(0, 0, 4)], uniform(1.0)).unwrap();
        assert_eq!(brute_noise_square(&corner, 4), Some((0, 4)));
        assert_eq!(has_noise_only_square(&corner, 4).unwrap(), Some((0, 4)));

        assert!(has_noise_only_square(&corner, 0).is_err());
        assert!(has_noise_only_square(&corner, 9).is_err());
    }

    #[test]
    fn noise_only_square_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let n = rng.random_range(4..20);
            let masks: Vec<Mask> = (0..3)
                .map(|_| {
                    let side = rng.random_range(1..4);
                    Mask::square(rng.random_range(0..n - side), rng.random_range(0..n - side), side)
                })
                .collect();
            let pix: HashSet<Coord> = masks.iter().flat_map(|m| m.pixels().to_vec()).collect();
            let scene = SceneSpec { n, a: 0.0, b: 1.0, particles: vec![Mask::from_pixels(pix)], noise: uniform(1.0) };
            let phi0 = rng.random_range(1..=n);
            assert_eq!(has_noise_only_square(&scene, phi0).unwrap(), brute_noise_square(&scene, phi0));
        }
    }

    #[test]
    fn scene_json_roundtrip() {
        let scene = SceneSpec::new(
            16,
            0.25,
            0.75,
            vec![Mask::disc(5, 5, 3.0), Mask::rect(12, 1, 2, 7)],
            NoiseModel::StudentT { nu: 4.0, scale: 0.1 },
        )
        .unwrap();
        let text = scene.to_json();
        assert!(text.contains("\"version\": 1"));
        assert!(text.contains("\"kind\": \"student_t\""));
        assert_eq!(SceneSpec::from_json(&text).unwrap(), scene);
    }

    #[test]
    fn scene_json_rejects_bad_version_and_fields() {
        let bad_version = r#"{"version":2,"n":4,"a":0,"b":1,"noise":{"kind":"gaussian","sigma":1},"particles":[]}"#;
        assert!(matches!(SceneSpec::from_json(bad_version), Err(Error::Scene(_))));
        let extra = r#"{"version":1,"n":4,"a":0,"b":1,"noise":{"kind":"gaussian","sigma":1},"particles":[],"x":1}"#;
        assert!(matches!(SceneSpec::from_json(extra), Err(Error::Scene(_))));
    }

    #[test]
    fn mask_runs_roundtrip() {
        let m = Mask::from_pixels([(0, 1), (0, 2), (0, 4), (1, 0)]);
        assert_eq!(m.runs(), vec![[0, 1, 2], [0, 4, 1], [1, 0, 1]]);
        assert_eq!(Mask::from_runs(&m.runs()), m);
    }

    #[test]
    fn bernoulli_extremes() {
        let lattice = LatticeKind::Triangular6;
        assert_eq!(bernoulli_image(8, 0.0, 1, lattice).unwrap().black_count(), 0);
        assert_eq!(bernoulli_image(8, 1.0, 1, lattice).unwrap().black_count(), 64);
        assert!(bernoulli_image(8, 1.5, 1, lattice).is_err());
    }
}
