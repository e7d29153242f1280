//! Particle detection in noisy images via scan statistics and percolation.
//!
//! An `n x n` image `Y = I + noise` shows particles of intensity `b` on a
//! background of intensity `a < b`. The background and particle levels are
//! estimated by scanning for the window with the smallest and largest sum,
//! the image is thresholded halfway between them, and any black cluster on
//! the triangular lattice large enough to be unlikely under pure noise is
//! reported as a particle.
//!
//! ```
//! use percscan::{detect_particles, observe, DetectionConfig, Mask, NoiseModel, SceneSpec};
//!
//! let scene = SceneSpec::new(
//!     64, 0.0, 1.0,
//!     vec![Mask::square(20, 20, 16)],
//!     NoiseModel::UniformBounded { m: 0.4 },
//! ).unwrap();
//! let img = observe(&scene, 7).unwrap();
//! let report = detect_particles(&img, &DetectionConfig::for_side(64)).unwrap();
//! assert!(report.decision.particles_found());
//! ```

pub mod bounds;
pub mod detect;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod image;
pub mod ops;
pub mod pgm;
pub mod pipeline;
pub mod scan;
pub mod synth;

pub use bounds::{SelectionBoundParams, WindowContamination};
pub use detect::{
    compute_threshold, detect_particles, particles_detected, threshold_image, ClusterSummary, Decision,
    DetectionConfig, DetectionReport,
};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentKind, ExperimentRow};
pub use grid::{find_black_clusters, largest_cluster_size, BinaryImage, Cluster, LatticeKind};
pub use image::{Coord, Image};
pub use pgm::PgmImage;
pub use scan::{estimate_a, estimate_b, ScanEstimate, Window, WindowSums};
pub use synth::{observe, Mask, NoiseModel, SceneSpec};
