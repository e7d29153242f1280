//! Pilot runs that freeze the Monte Carlo pass thresholds used by the
//! acceptance suite. Pilot seeds never overlap the acceptance seeds.
//!
//! cargo run --release -p percscan-core --example pilot > crates/core/tests/data/thresholds.toml

use percscan::experiment::{median, ExperimentConfig, ExperimentKind};
use percscan::grid::largest_cluster_size;
use percscan::synth::{bernoulli_image, observe};
use percscan::{detect_particles, DetectionConfig, LatticeKind, SceneSpec};
use rayon::prelude::*;

const PILOT_SEEDS: std::ops::Range<u64> = 1_000_000..1_000_200;
/// Target false-alarm level for the frozen significance size; stricter than
/// the 5% acceptance limit so the choice is not tuned to the limit itself.
const PILOT_FALSE_ALARM: f64 = 0.01;

fn main() {
    let cfg = ExperimentConfig::new(ExperimentKind::ErrorRates);
    let n = cfg.n_values[0];
    let empty = SceneSpec::new(n, cfg.scene.a, cfg.scene.b, vec![], cfg.empty_scene.noise).unwrap();
    let det = DetectionConfig { significance_size: usize::MAX, ..cfg.empty_detection_config(n) };
    let mut largest: Vec<usize> = PILOT_SEEDS
        .into_par_iter()
        .map(|seed| {
            let img = observe(&empty, seed).unwrap();
            detect_particles(&img, &det).unwrap().clusters_all.largest
        })
        .collect();
    largest.sort_unstable();
    let k = ((1.0 - PILOT_FALSE_ALARM) * largest.len() as f64).ceil() as usize - 1;
    let significance_size = largest[k] + 1;

    let medians: Vec<f64> = [0.4, 0.6]
        .iter()
        .map(|&p| {
            let mut sizes: Vec<f64> = PILOT_SEEDS
                .take(100)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|seed| {
                    largest_cluster_size(&bernoulli_image(512, p, seed, LatticeKind::Triangular6).unwrap()) as f64
                })
                .collect();
            median(&mut sizes)
        })
        .collect();

    println!("# Frozen by the pilot example; do not edit by hand.");
    println!("pilot_seeds = [{}, {}]", PILOT_SEEDS.start, PILOT_SEEDS.end);
    println!();
    println!("[false_alarm]");
    println!("pilot_target = {PILOT_FALSE_ALARM}");
    println!("pilot_largest_noise_cluster_max = {}", largest[largest.len() - 1]);
    println!("significance_size = {significance_size}");
    println!();
    println!("[percolation]");
    println!("pilot_median_p04 = {}", medians[0]);
    println!("pilot_median_p06 = {}", medians[1]);
    println!("min_median_ratio = 100.0");
}
