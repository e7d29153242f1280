//! End-to-end detection run: load, preprocess, detect, and render outputs.

use crate::detect::{detect_particles, threshold_image, DetectionConfig, DetectionReport};
use crate::error::{Error, Result};
use crate::grid::LatticeKind;
use crate::image::Image;
use crate::pgm::{downsample2x, normalize, read_pgm, write_pgm_binary};
use crate::scan::default_window_side;
use crate::synth::{observe, SceneSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub phi0: Option<usize>,
    pub phi1: Option<usize>,
    /// Significance size; defaults to `phi1`.
    pub min_cluster: Option<usize>,
    pub lattice: LatticeKind,
    /// Number of successive 2x block-mean reductions.
    pub downsample: u32,
    pub theta: Option<f64>,
    /// Noise seed when the input is a scene description.
    pub seed: u64,
    pub include_pixels: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            phi0: None,
            phi1: None,
            min_cluster: None,
            lattice: LatticeKind::Triangular6,
            downsample: 0,
            theta: None,
            seed: 0,
            include_pixels: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: DetectionReport,
    pub report_json: String,
    /// Thresholded picture, `P5`.
    pub thresholded_pgm: Vec<u8>,
    /// Significant clusters only, `P5`.
    pub filtered_pgm: Vec<u8>,
}

/// Loads either a PGM micrograph (`P2`/`P5`) or a JSON scene description,
/// which is rendered and perturbed with `opts.seed`.
pub fn load_input(bytes: &[u8], seed: u64) -> Result<Image> {
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    match first {
        Some(b'{') => {
            let text = std::str::from_utf8(bytes).map_err(|e| Error::Scene(e.to_string()))?;
            observe(&SceneSpec::from_json(text)?, seed)
        }
        _ => normalize(&read_pgm(bytes)?),
    }
}

pub fn run(input: &[u8], opts: &PipelineOptions) -> Result<PipelineOutput> {
    let mut img = load_input(input, opts.seed)?;
    for _ in 0..opts.downsample {
        img = downsample2x(&img)?;
    }
    run_on_image(&img, opts)
}

pub fn run_on_image(img: &Image, opts: &PipelineOptions) -> Result<PipelineOutput> {
    let side = default_window_side(img.n());
    let phi1 = opts.phi1.unwrap_or(side);
    let cfg = DetectionConfig {
        phi0: opts.phi0.unwrap_or(side),
        phi1,
        significance_size: opts.min_cluster.unwrap_or(phi1),
        lattice: opts.lattice,
        threshold_override: opts.theta,
    };
    let report = detect_particles(img, &cfg)?;
    let thresholded = threshold_image(img, report.theta, cfg.lattice);
    Ok(PipelineOutput {
        report_json: report.to_json(opts.include_pixels),
        thresholded_pgm: write_pgm_binary(&thresholded),
        filtered_pgm: write_pgm_binary(&report.filtered_image()),
        report,
    })
}
