//! Threshold-and-percolate detection of multiple objects.
//!
//! The pipeline estimates the background and object intensities with the
//! scan estimators, thresholds the image at their midpoint, labels the black
//! clusters on the chosen lattice, and keeps the clusters with at least
//! `significance_size` pixels. Below the midpoint the background is coloured
//! black with probability under the percolation threshold, inside objects
//! above it, so large clusters concentrate on objects.

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, BinaryImage, Cluster, LatticeKind};
use crate::image::Image;
use crate::ops::{NoTally, OpCount, Tally};
use crate::scan::{self, ScanEstimate};
use crate::synth::SceneSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    /// Window side for the background estimate.
    pub phi0: usize,
    /// Window side for the object estimate.
    pub phi1: usize,
    /// Minimum pixel count of a reported cluster.
    pub significance_size: usize,
    pub lattice: LatticeKind,
    /// Fixed threshold; when set the scan estimators are skipped.
    pub threshold_override: Option<f64>,
}

impl DetectionConfig {
    /// Defaults for an `n x n` image: both window sides `ceil(2 ln n)`,
    /// significance size equal to `phi1`, triangular lattice.
    pub fn for_side(n: usize) -> Self {
        let side = scan::default_window_side(n);
        Self {
            phi0: side,
            phi1: side,
            significance_size: side,
            lattice: LatticeKind::Triangular6,
            threshold_override: None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.significance_size == 0 {
            return Err(Error::invalid("significance size must be at least 1"));
        }
        if let Some(theta) = self.threshold_override {
            if !theta.is_finite() {
                return Err(Error::invalid("threshold override must be finite"));
            }
            // Window sides are unused when the threshold is fixed.
            return Ok(());
        }
        for (name, side) in [("phi0", self.phi0), ("phi1", self.phi1)] {
            if side == 0 || side > n {
                return Err(Error::invalid(format!("{name} = {side} outside 1..={n}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    ParticlesFound(usize),
    NoParticles,
}

impl Decision {
    pub fn particles_found(&self) -> bool {
        matches!(self, Decision::ParticlesFound(_))
    }
}

/// Counts over all black clusters, significant or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClusterSummary {
    pub count: usize,
    pub black_pixels: usize,
    pub largest: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub n: usize,
    pub lattice: LatticeKind,
    /// `None` when the threshold was overridden.
    pub a_hat: Option<ScanEstimate>,
    pub b_hat: Option<ScanEstimate>,
    pub theta: f64,
    pub significance_size: usize,
    pub clusters_all: ClusterSummary,
    /// Size-descending.
    pub clusters_significant: Vec<Cluster>,
    pub decision: Decision,
}

impl DetectionReport {
    pub fn threshold_overridden(&self) -> bool {
        self.a_hat.is_none()
    }

    /// The thresholded picture with every non-significant cluster whitened.
    pub fn filtered_image(&self) -> BinaryImage {
        let mut black = Vec::new();
        for c in &self.clusters_significant {
            black.extend_from_slice(c.pixels());
        }
        BinaryImage::from_black_pixels(self.n, self.lattice, &black).expect("cluster pixels lie inside the image")
    }

    /// Pretty-printed JSON with a trailing newline. Pixel lists are included
    /// only when `include_pixels` is set.
    pub fn to_json(&self, include_pixels: bool) -> String {
        let json = ReportJson { report: self, include_pixels };
        serde_json::to_string_pretty(&json).expect("report serializes") + "\n"
    }
}

struct ReportJson<'a> {
    report: &'a DetectionReport,
    include_pixels: bool,
}

struct EstimateJson<'a>(&'a Option<ScanEstimate>);

impl Serialize for EstimateJson<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(est) => est.serialize(s),
            None => s.serialize_str("overridden"),
        }
    }
}

struct ClusterJson<'a> {
    cluster: &'a Cluster,
    include_pixels: bool,
}

impl Serialize for ClusterJson<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (r0, c0, r1, c1) = self.cluster.bbox();
        let mut st = s.serialize_struct("Cluster", 3)?;
        st.serialize_field("size", &self.cluster.size())?;
        st.serialize_field("bbox", &[r0, c0, r1, c1])?;
        if self.include_pixels {
            st.serialize_field("pixels", self.cluster.pixels())?;
        }
        st.end()
    }
}

impl Serialize for ReportJson<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let r = self.report;
        let clusters: Vec<ClusterJson> = r
            .clusters_significant
            .iter()
            .map(|cluster| ClusterJson { cluster, include_pixels: self.include_pixels })
            .collect();
        let mut st = s.serialize_struct("DetectionReport", 10)?;
        st.serialize_field("n", &r.n)?;
        st.serialize_field("lattice", &r.lattice)?;
        st.serialize_field("theta", &r.theta)?;
        st.serialize_field("a_hat", &EstimateJson(&r.a_hat))?;
        st.serialize_field("b_hat", &EstimateJson(&r.b_hat))?;
        st.serialize_field("significance_size", &r.significance_size)?;
        st.serialize_field("clusters_total", &r.clusters_all.count)?;
        st.serialize_field("black_pixels", &r.clusters_all.black_pixels)?;
        st.serialize_field("clusters", &clusters)?;
        st.serialize_field("decision", &r.decision)?;
        st.end()
    }
}

/// Midpoint of the two intensity estimates.
pub fn compute_threshold(a_hat: f64, b_hat: f64) -> f64 {
    (a_hat + b_hat) / 2.0
}

/// Pixels with value `>= theta` become black.
pub fn threshold_image(img: &Image, theta: f64, lattice: LatticeKind) -> BinaryImage {
    threshold_tallied(img, theta, lattice, &mut NoTally)
}

fn threshold_tallied<T: Tally>(img: &Image, theta: f64, lattice: LatticeKind, tally: &mut T) -> BinaryImage {
    let bits = img.values().iter().map(|&y| y >= theta).collect();
    tally.add(img.values().len() as u64);
    BinaryImage::new(img.n(), bits, lattice).expect("same shape as the source image")
}

/// Operation counts of one [`detect_particles_counted`] run, per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DetectOps {
    /// Window sums plus arg-min / arg-max search.
    pub scan: u64,
    pub threshold: u64,
    /// Pixel tests and neighbour inspections of the cluster search.
    pub clustering: u64,
}

impl DetectOps {
    pub fn total(&self) -> u64 {
        self.scan + self.threshold + self.clustering
    }
}

pub fn detect_particles(img: &Image, cfg: &DetectionConfig) -> Result<DetectionReport> {
    let mut ops = [NoTally; 3];
    let [scan_t, thr_t, cl_t] = &mut ops;
    detect_tallied(img, cfg, scan_t, thr_t, cl_t)
}

pub fn detect_particles_counted(img: &Image, cfg: &DetectionConfig) -> Result<(DetectionReport, DetectOps)> {
    let (mut s, mut t, mut c) = (OpCount::default(), OpCount::default(), OpCount::default());
    let report = detect_tallied(img, cfg, &mut s, &mut t, &mut c)?;
    Ok((report, DetectOps { scan: s.0, threshold: t.0, clustering: c.0 }))
}

fn detect_tallied<T: Tally>(
    img: &Image,
    cfg: &DetectionConfig,
    scan_tally: &mut T,
    threshold_tally: &mut T,
    cluster_tally: &mut T,
) -> Result<DetectionReport> {
    cfg.validate(img.n())?;

    let (a_hat, b_hat, theta) = match cfg.threshold_override {
        Some(theta) => (None, None, theta),
        None => {
            let a = scan::estimate_a_tallied(img, cfg.phi0, scan_tally)?;
            let b = scan::estimate_b_tallied(img, cfg.phi1, scan_tally)?;
            if a.value >= b.value {
                return Err(Error::DegenerateContrast { a_hat: a.value, b_hat: b.value });
            }
            (Some(a), Some(b), compute_threshold(a.value, b.value))
        }
    };

    let binary = threshold_tallied(img, theta, cfg.lattice, threshold_tally);
    let labels = grid::label_black_clusters_tallied(&binary, cluster_tally);
    let clusters_all = ClusterSummary {
        count: labels.sizes.len(),
        black_pixels: labels.sizes.iter().sum(),
        largest: labels.largest(),
    };
    let mut clusters = grid::clusters_from_labels(img.n(), &labels);
    clusters.retain(|c| c.size() >= cfg.significance_size);

    let decision = if clusters.is_empty() { Decision::NoParticles } else { Decision::ParticlesFound(clusters.len()) };

    Ok(DetectionReport {
        n: img.n(),
        lattice: cfg.lattice,
        a_hat,
        b_hat,
        theta,
        significance_size: cfg.significance_size,
        clusters_all,
        clusters_significant: clusters,
        decision,
    })
}

/// For each particle of `scene`, whether some significant cluster covers at
/// least `min(significance_size, |particle|)` of its pixels. A merged cluster
/// can detect several particles.
pub fn particles_detected(report: &DetectionReport, scene: &SceneSpec) -> Result<Vec<bool>> {
    if report.n != scene.n {
        return Err(Error::invalid(format!("report is for a {0}x{0} image, scene is {1}x{1}", report.n, scene.n)));
    }
    let n = report.n;
    let mut owner = vec![u32::MAX; n * n];
    for (k, c) in report.clusters_significant.iter().enumerate() {
        for &(i, j) in c.pixels() {
            owner[i * n + j] = k as u32;
        }
    }
    let mut overlap = vec![0usize; report.clusters_significant.len()];
    Ok(scene
        .particles
        .iter()
        .map(|mask| {
            if mask.is_empty() {
                return false;
            }
            overlap.iter_mut().for_each(|o| *o = 0);
            for &(i, j) in mask.pixels() {
                let k = owner[i * n + j];
                if k != u32::MAX {
                    overlap[k as usize] += 1;
                }
            }
            let need = report.significance_size.min(mask.len());
            overlap.iter().any(|&o| o >= need)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{observe, render_clean, Mask, NoiseModel};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noiseless_single() -> (SceneSpec, Image) {
        let scene = SceneSpec::new(64, 0.0, 1.0, vec![Mask::square(20, 30, 10)], NoiseModel::UniformBounded { m: 0.0 })
            .unwrap();
        let img = render_clean(&scene).unwrap();
        (scene, img)
    }

    #[test]
    fn threshold_examples() {
        assert!((compute_threshold(0.319, 0.453) - 0.386).abs() < 1e-12);
        assert_eq!(compute_threshold(0.25, 0.25), 0.25);
        assert_eq!(compute_threshold(0.0, 1.0), 0.5);
    }

    #[test]
    fn threshold_image_ties_are_black() {
        let img = Image::from_rows(&[[0.453, 0.319], [0.386, 0.1]]).unwrap();
        let bin = threshold_image(&img, 0.386, LatticeKind::Triangular6);
        assert!(bin.is_black(0, 0));
        assert!(!bin.is_black(0, 1));
        assert!(bin.is_black(1, 0));
        assert!(!bin.is_black(1, 1));
        assert_eq!(threshold_image(&img, 0.5, LatticeKind::Square4).black_count(), 0);
    }

    #[test]
    fn noiseless_particle_is_recovered_exactly() {
        let (scene, img) = noiseless_single();
        let cfg = DetectionConfig { significance_size: 10, ..DetectionConfig::for_side(64) };
        let report = detect_particles(&img, &cfg).unwrap();
        assert_eq!(report.theta, 0.5);
        assert_eq!(report.decision, Decision::ParticlesFound(1));
        assert_eq!(report.clusters_significant[0].pixels(), scene.particles[0].pixels());
        assert_eq!(particles_detected(&report, &scene).unwrap(), vec![true]);
    }

    #[test]
    fn overridden_threshold_on_empty_scene() {
        let img = Image::filled(32, 0.2).unwrap();
        let cfg = DetectionConfig { threshold_override: Some(0.5), ..DetectionConfig::for_side(32) };
        let report = detect_particles(&img, &cfg).unwrap();
        assert_eq!(report.decision, Decision::NoParticles);
        assert!(report.threshold_overridden());
        assert!(report.to_json(false).contains("\"a_hat\": \"overridden\""));
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = Image::filled(16, 0.2).unwrap();
        let err = detect_particles(&img, &DetectionConfig::for_side(16)).unwrap_err();
        assert!(matches!(err, Error::DegenerateContrast { .. }));
    }

    #[test]
    fn oversized_windows_rejected() {
        let img = Image::filled(8, 0.2).unwrap();
        let cfg = DetectionConfig { phi0: 9, ..DetectionConfig::for_side(8) };
        assert!(matches!(detect_particles(&img, &cfg), Err(Error::InvalidArgument(_))));
        let cfg = DetectionConfig { significance_size: 0, ..DetectionConfig::for_side(8) };
        assert!(detect_particles(&img, &cfg).is_err());
    }

    #[test]
    fn no_particles_report_detects_nothing() {
        let (scene, img) = noiseless_single();
        let cfg = DetectionConfig { threshold_override: Some(2.0), ..DetectionConfig::for_side(64) };
        let report = detect_particles(&img, &cfg).unwrap();
        assert_eq!(report.decision, Decision::NoParticles);
        assert_eq!(particles_detected(&report, &scene).unwrap(), vec![false]);
    }

    #[test]
    fn merged_cluster_detects_both_particles() {
        // Two 6x6 particles sharing an edge produce one black cluster.
        let left = Mask::square(10, 10, 6);
        let right = Mask::square(10, 16, 6);
        let scene =
            SceneSpec::new(32, 0.0, 1.0, vec![left.clone(), right.clone()], NoiseModel::UniformBounded { m: 0.0 })
                .unwrap();
        let img = render_clean(&scene).unwrap();
        let cfg = DetectionConfig { significance_size: 20, ..DetectionConfig::for_side(32) };
        let report = detect_particles(&img, &cfg).unwrap();
        assert_eq!(report.clusters_significant.len(), 1);
        // Oracle: count overlap directly against the merged cluster's pixel set.
        let merged: std::collections::HashSet<_> = report.clusters_significant[0].pixels().iter().copied().collect();
        for mask in [&left, &right] {
            assert_eq!(mask.pixels().iter().filter(|p| merged.contains(p)).count(), 36);
        }
        assert_eq!(particles_detected(&report, &scene).unwrap(), vec![true, true]);
    }

    #[test]
    fn particles_detected_dimension_mismatch() {
        let (_, img) = noiseless_single();
        let report = detect_particles(&img, &DetectionConfig::for_side(64)).unwrap();
        let other = SceneSpec::new(8, 0.0, 1.0, vec![], NoiseModel::Gaussian { sigma: 1.0 }).unwrap();
        assert!(particles_detected(&report, &other).is_err());
    }

    #[test]
    fn json_shape() {
        let (_, img) = noiseless_single();
        let cfg = DetectionConfig { significance_size: 10, ..DetectionConfig::for_side(64) };
        let report = detect_particles(&img, &cfg).unwrap();
        let v: serde_json::Value = serde_json::from_str(&report.to_json(true)).unwrap();
        assert_eq!(v["theta"], 0.5);
        assert_eq!(v["a_hat"]["value"], 0.0);
        assert_eq!(v["b_hat"]["side"], 9);
        assert_eq!(v["clusters"][0]["size"], 100);
        assert_eq!(v["clusters"][0]["bbox"], serde_json::json!([20, 30, 29, 39]));
        assert_eq!(v["clusters"][0]["pixels"][0], serde_json::json!([20, 30]));
        assert_eq!(v["decision"]["particles_found"], 1);
        let v: serde_json::Value = serde_json::from_str(&report.to_json(false)).unwrap();
        assert!(v["clusters"][0].get("pixels").is_none());
    }

    #[test]
    fn counted_run_matches_plain_run() {
        let scene =
            SceneSpec::new(48, 0.0, 1.0, vec![Mask::square(5, 5, 12)], NoiseModel::Gaussian { sigma: 0.4 }).unwrap();
        let img = observe(&scene, 4).unwrap();
        let cfg = DetectionConfig::for_side(48);
        let (counted, ops) = detect_particles_counted(&img, &cfg).unwrap();
        assert_eq!(counted, detect_particles(&img, &cfg).unwrap());
        assert_eq!(ops.threshold, 48 * 48);
        assert!(ops.scan > 0 && ops.clustering >= 48 * 48);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let scene = SceneSpec::new(
            64,
            0.1,
            0.9,
            vec![Mask::disc(20, 20, 8.0), Mask::square(40, 40, 15)],
            NoiseModel::UniformBounded { m: 0.5 },
        )
        .unwrap();
        let img = observe(&scene, 77).unwrap();
        let cfg = DetectionConfig::for_side(64);
        let a = detect_particles(&img, &cfg).unwrap().to_json(true);
        let b = detect_particles(&img, &cfg).unwrap().to_json(true);
        assert_eq!(a, b);
    }

    fn dyadic_image(n: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::new(n, (0..n * n).map(|_| rng.random_range(0..256) as f64 / 256.0).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn raising_theta_shrinks_black_set(seed in any::<u64>(), t1 in 0.0f64..1.0, dt in 0.0f64..0.5) {
            let img = dyadic_image(16, seed);
            let low = threshold_image(&img, t1, LatticeKind::Triangular6);
            let high = threshold_image(&img, t1 + dt, LatticeKind::Triangular6);
            for (h, l) in high.bits().iter().zip(low.bits()) {
                prop_assert!(!h || *l);
            }
            prop_assert!(grid::largest_cluster_size(&high) <= grid::largest_cluster_size(&low));
        }

        // Dyadic pixels, power-of-two scale and window sides keep every
        // intermediate exact, so the transformed run must agree bit for bit.
        #[test]
        fn affine_equivariance(
            seed in any::<u64>(),
            log_alpha in -2i32..=3,
            beta_q in -8i32..=8,
            phi0 in prop_oneof![Just(1usize), Just(2), Just(4)],
            phi1 in prop_oneof![Just(1usize), Just(2), Just(4)],
        ) {
            let img = dyadic_image(16, seed);
            let alpha = 2f64.powi(log_alpha);
            let beta = beta_q as f64 / 4.0;
            let cfg = DetectionConfig {
                phi0, phi1, significance_size: 3,
                lattice: LatticeKind::Triangular6, threshold_override: None,
            };
            let base = detect_particles(&img, &cfg);
            let moved = detect_particles(&img.map(|v| alpha * v + beta), &cfg);
            match (base, moved) {
                (Ok(x), Ok(y)) => {
                    prop_assert_eq!(&x.clusters_significant, &y.clusters_significant);
                    prop_assert_eq!(x.clusters_all, y.clusters_all);
                    prop_assert!((alpha * x.theta + beta - y.theta).abs() < 1e-12);
                }
                (Err(Error::DegenerateContrast { .. }), Err(Error::DegenerateContrast { .. })) => {}
                (x, y) => prop_assert!(false, "mismatch: {:?} vs {:?}", x.is_ok(), y.is_ok()),
            }
        }
    }
}
