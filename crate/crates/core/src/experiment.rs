//! Monte Carlo experiments over synthetic scenes.
//!
//! Every trial derives its random stream from `(experiment, n, seed)` alone,
//! so trials can run in any order or in parallel and still produce the same
//! rows. Rows are emitted in canonical order: ascending `n`, then seed, then
//! a fixed metric order, with per-`n` aggregates (empty seed column) last.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::bounds::{self, WindowContamination};
use crate::detect::{detect_particles, detect_particles_counted, particles_detected, DetectionConfig};
use crate::error::{Error, Result};
use crate::grid::{largest_cluster_size, LatticeKind};
use crate::image::Image;
use crate::scan::{self, Window};
use crate::synth::{self, Mask, NoiseModel, SceneSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Consistency,
    NaiveVsScan,
    ErrorRates,
    Complexity,
    PercolationPhase,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Consistency,
        ExperimentKind::NaiveVsScan,
        ExperimentKind::ErrorRates,
        ExperimentKind::Complexity,
        ExperimentKind::PercolationPhase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::NaiveVsScan => "naive-vs-scan",
            ExperimentKind::ErrorRates => "error-rates",
            ExperimentKind::Complexity => "complexity",
            ExperimentKind::PercolationPhase => "percolation",
        }
    }

    fn stream_id(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            Error::invalid(format!("unknown experiment {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// A size that depends on the image side `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowRule {
    /// `ceil(factor * ln n)`.
    LogScaled {
        factor: f64,
    },
    Fixed(usize),
    /// `n / divisor`.
    Fraction {
        divisor: usize,
    },
}

impl WindowRule {
    pub const DEFAULT: WindowRule = WindowRule::LogScaled { factor: 2.0 };

    fn raw(&self, n: usize) -> usize {
        match *self {
            WindowRule::LogScaled { factor } => (factor * (n as f64).ln()).ceil() as usize,
            WindowRule::Fixed(k) => k,
            WindowRule::Fraction { divisor } => n / divisor.max(1),
        }
    }

    /// Evaluates the rule as a window side, clamped to `1..=n`.
    pub fn side(&self, n: usize) -> usize {
        self.raw(n).clamp(1, n.max(1))
    }

    /// Evaluates the rule as a pixel count, clamped to `1..=n*n`.
    pub fn pixel_count(&self, n: usize) -> usize {
        self.raw(n).clamp(1, (n * n).max(1))
    }
}

impl fmt::Display for WindowRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowRule::LogScaled { factor } => write!(f, "ceil({factor}*ln(n))"),
            WindowRule::Fixed(k) => write!(f, "{k}"),
            WindowRule::Fraction { divisor } => write!(f, "n/{divisor}"),
        }
    }
}

impl FromStr for WindowRule {
    type Err = Error;

    /// Accepts `ceil(<f>*ln(n))`, `n/<d>` or a plain integer.
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::invalid(format!("cannot parse window rule {s:?}"));
        if let Some(inner) = t.strip_prefix("ceil(").and_then(|r| r.strip_suffix("*ln(n))")) {
            let factor: f64 = inner.parse().map_err(|_| bad())?;
            if !(factor.is_finite() && factor > 0.0) {
                return Err(bad());
            }
            return Ok(WindowRule::LogScaled { factor });
        }
        if let Some(d) = t.strip_prefix("n/") {
            let divisor: usize = d.parse().map_err(|_| bad())?;
            if divisor == 0 {
                return Err(bad());
            }
            return Ok(WindowRule::Fraction { divisor });
        }
        t.parse().map(WindowRule::Fixed).map_err(|_| bad())
    }
}

/// How particles are placed in a synthetic scene of side `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParticleLayout {
    Empty,
    /// `count` squares, each centred in its own cell of a
    /// `ceil(sqrt(count))`-per-axis grid; cells are filled row-major.
    Squares {
        count: usize,
        side: WindowRule,
    },
    /// One square in the top-left corner covering `fraction` of the image.
    AreaFraction {
        fraction: f64,
    },
}

impl ParticleLayout {
    pub fn masks(&self, n: usize) -> Result<Vec<Mask>> {
        match *self {
            ParticleLayout::Empty => Ok(vec![]),
            ParticleLayout::Squares { count, side } => {
                if count == 0 {
                    return Ok(vec![]);
                }
                let per_axis = (count as f64).sqrt().ceil() as usize;
                let cell = n / per_axis;
                let side = side.side(n);
                if side > cell {
                    return Err(Error::Config(format!("{count} particles of side {side} do not fit a {n}x{n} scene")));
                }
                let pad = (cell - side) / 2;
                Ok((0..count)
                    .map(|k| Mask::square((k / per_axis) * cell + pad, (k % per_axis) * cell + pad, side))
                    .collect())
            }
            ParticleLayout::AreaFraction { fraction } => {
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(Error::Config(format!("particle fraction {fraction} outside [0, 1]")));
                }
                let side = (n as f64 * fraction.sqrt()).round() as usize;
                Ok(if side == 0 { vec![] } else { vec![Mask::square(0, 0, side)] })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneTemplate {
    pub a: f64,
    pub b: f64,
    pub noise: NoiseModel,
    pub layout: ParticleLayout,
}

impl SceneTemplate {
    pub fn scene(&self, n: usize) -> Result<SceneSpec> {
        SceneSpec::new(n, self.a, self.b, self.layout.masks(n)?, self.noise)
    }

    pub fn empty_scene(&self, n: usize) -> Result<SceneSpec> {
        SceneSpec::new(n, self.a, self.b, vec![], self.noise)
    }
}

/// Detection setup for the particle-free scenes of the error-rate experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmptySceneSetup {
    pub noise: NoiseModel,
    pub phi0_rule: WindowRule,
    pub phi1_rule: WindowRule,
    pub significance_rule: WindowRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Ascending image sides.
    pub n_values: Vec<usize>,
    /// Seeds `0..seeds` are run for every `n`.
    pub seeds: u64,
    pub scene: SceneTemplate,
    /// Background window side.
    pub window_rule: WindowRule,
    /// Object window side.
    pub phi1_rule: WindowRule,
    /// Significance size; defaults to the object window side.
    pub significance_rule: Option<WindowRule>,
    pub lattice: LatticeKind,
    pub threshold_override: Option<f64>,
    /// False-alarm half of the error-rate experiment.
    pub empty_scene: EmptySceneSetup,
    /// Rate constant for the missed-detection bound rows.
    pub c1: Option<f64>,
    /// Colouring probabilities for the percolation experiment.
    pub p_values: Vec<f64>,
    /// Window sides for the complexity experiment.
    pub complexity_windows: Vec<usize>,
    /// Also count full detection runs in the complexity experiment.
    pub complexity_detect: bool,
    /// Wall-clock rows make output irreproducible; off by default.
    pub include_timings: bool,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// Defaults for each experiment.
    pub fn new(experiment: ExperimentKind) -> Self {
        let uniform = |m| NoiseModel::UniformBounded { m };
        let three_squares = ParticleLayout::Squares { count: 3, side: WindowRule::Fraction { divisor: 8 } };
        let base = Self {
            experiment,
            n_values: vec![128, 256, 512],
            seeds: 50,
            scene: SceneTemplate { a: 0.0, b: 1.0, noise: uniform(1.0), layout: three_squares },
            window_rule: WindowRule::DEFAULT,
            phi1_rule: WindowRule::DEFAULT,
            significance_rule: None,
            lattice: LatticeKind::Triangular6,
            threshold_override: None,
            empty_scene: EmptySceneSetup {
                noise: uniform(1.0),
                phi0_rule: WindowRule::DEFAULT,
                phi1_rule: WindowRule::DEFAULT,
                // 4 * ceil(2 ln 512)
                significance_rule: WindowRule::Fixed(52),
            },
            c1: None,
            p_values: vec![0.4, 0.6],
            complexity_windows: vec![8, 64],
            complexity_detect: true,
            include_timings: false,
            jobs: None,
        };
        match experiment {
            ExperimentKind::Consistency => base,
            ExperimentKind::NaiveVsScan => Self {
                scene: SceneTemplate {
                    noise: uniform(0.2),
                    layout: ParticleLayout::AreaFraction { fraction: 0.25 },
                    ..base.scene
                },
                ..base
            },
            ExperimentKind::ErrorRates => Self {
                n_values: vec![512],
                seeds: 100,
                scene: SceneTemplate {
                    noise: NoiseModel::Gaussian { sigma: 0.5 },
                    layout: ParticleLayout::Squares { count: 3, side: WindowRule::Fixed(40) },
                    ..base.scene
                },
                window_rule: WindowRule::Fixed(13),
                phi1_rule: WindowRule::Fixed(9),
                significance_rule: Some(WindowRule::Fixed(40)),
                ..base
            },
            ExperimentKind::Complexity => Self {
                n_values: vec![1024, 2048],
                seeds: 1,
                scene: SceneTemplate { noise: NoiseModel::Gaussian { sigma: 0.5 }, ..base.scene },
                ..base
            },
            ExperimentKind::PercolationPhase => Self { n_values: vec![512], seeds: 100, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::Config("n_values must not be empty".into()));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) || self.n_values[0] == 0 {
            return Err(Error::Config("n_values must be positive and strictly ascending".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let Some(c1) = self.c1 {
            if !(c1.is_finite() && c1 > 0.0) {
                return Err(Error::Config("c1 must be positive".into()));
            }
        }
        if self.p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("p values must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn detection_config(&self, n: usize) -> DetectionConfig {
        let phi1 = self.phi1_rule.side(n);
        DetectionConfig {
            phi0: self.window_rule.side(n),
            phi1,
            significance_size: self.significance_rule.map_or(phi1, |r| r.pixel_count(n)),
            lattice: self.lattice,
            threshold_override: self.threshold_override,
        }
    }

    pub fn empty_detection_config(&self, n: usize) -> DetectionConfig {
        let e = &self.empty_scene;
        DetectionConfig {
            phi0: e.phi0_rule.side(n),
            phi1: e.phi1_rule.side(n),
            significance_size: e.significance_rule.pixel_count(n),
            lattice: self.lattice,
            threshold_override: self.threshold_override,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub experiment: &'static str,
    pub n: usize,
    /// `None` for aggregates over all seeds.
    pub seed: Option<u64>,
    pub metric: String,
    pub value: f64,
}

impl ExperimentRow {
    fn new(kind: ExperimentKind, n: usize, seed: Option<u64>, metric: impl Into<String>, value: f64) -> Self {
        Self { experiment: kind.name(), n, seed, metric: metric.into(), value }
    }
}

/// Deterministic per-trial seed from `(experiment, n, seed, stream)`.
pub fn trial_seed(kind: ExperimentKind, n: usize, seed: u64, stream: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    [kind.stream_id(), n as u64, seed, stream].into_iter().fold(0u64, |h, x| splitmix(h ^ x))
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    values.sort_by(f64::total_cmp);
    let k = values.len() / 2;
    if values.len() % 2 == 1 {
        values[k]
    } else {
        (values[k - 1] + values[k]) / 2.0
    }
}

/// Runs `trial` for every `(n, seed)` pair, keeping canonical order.
fn run_trials<F>(cfg: &ExperimentConfig, trial: F) -> Result<Vec<Vec<ExperimentRow>>>
where
    F: Fn(usize, u64) -> Result<Vec<ExperimentRow>> + Sync,
{
    let pairs: Vec<(usize, u64)> = cfg.n_values.iter().flat_map(|&n| (0..cfg.seeds).map(move |s| (n, s))).collect();
    let go = || pairs.par_iter().map(|&(n, s)| trial(n, s)).collect::<Result<Vec<_>>>();
    match cfg.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(go),
        None => go(),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    match cfg.experiment {
        ExperimentKind::Consistency => run_consistency(cfg),
        ExperimentKind::NaiveVsScan => run_naive_vs_scan(cfg),
        ExperimentKind::ErrorRates => run_error_rates(cfg),
        ExperimentKind::Complexity => run_complexity(cfg),
        ExperimentKind::PercolationPhase => run_percolation_phase(cfg),
    }
}

/// Supremum distance between the scan estimate of the distribution function
/// and the true distribution of background pixels, on a fixed grid around `a`.
fn cdf_sup_distance(img: &Image, window: Window, a: f64, noise: &NoiseModel) -> Result<f64> {
    let spread = if noise.spread() > 0.0 { noise.spread() } else { 1.0 };
    let mut sup = 0.0f64;
    for k in -150i32..=150 {
        let t = a + spread * k as f64 / 100.0;
        let est = scan::empirical_f(img, window, t)?;
        sup = sup.max((est - noise.cdf(t - a)).abs());
    }
    Ok(sup)
}

/// Per `(n, seed)`: `abs_err_a`, `abs_err_b`, `abs_err_sigma2`, `sup_err_cdf`.
pub fn run_consistency(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let kind = ExperimentKind::Consistency;
    for &n in &cfg.n_values {
        let scene = cfg.scene.scene(n)?;
        let phi0 = cfg.window_rule.side(n);
        if synth::has_noise_only_square(&scene, phi0)?.is_none() {
            return Err(Error::Config(format!("n = {n}: no particle-free {phi0}x{phi0} window")));
        }
    }
    let rows = run_trials(cfg, |n, seed| {
        let scene = cfg.scene.scene(n)?;
        let img = synth::observe(&scene, trial_seed(kind, n, seed, 0))?;
        let a = scan::estimate_a(&img, cfg.window_rule.side(n))?;
        let b = scan::estimate_b(&img, cfg.phi1_rule.side(n))?;
        let window = a.window();
        let sigma2 = if window.side >= 2 { scan::estimate_sigma2(&img, window)? } else { 0.0 };
        let cdf = cdf_sup_distance(&img, window, scene.a, &scene.noise)?;
        Ok(vec![
            ExperimentRow::new(kind, n, Some(seed), "abs_err_a", (a.value - scene.a).abs()),
            ExperimentRow::new(kind, n, Some(seed), "abs_err_b", (b.value - scene.b).abs()),
            ExperimentRow::new(kind, n, Some(seed), "abs_err_sigma2", (sigma2 - scene.noise.variance()).abs()),
            ExperimentRow::new(kind, n, Some(seed), "sup_err_cdf", cdf),
        ])
    })?;
    Ok(rows.into_iter().flatten().collect())
}

/// Per `(n, seed)`: `naive_abs_err` and `scan_abs_err` for the background.
pub fn run_naive_vs_scan(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let kind = ExperimentKind::NaiveVsScan;
    let rows = run_trials(cfg, |n, seed| {
        let scene = cfg.scene.scene(n)?;
        let img = synth::observe(&scene, trial_seed(kind, n, seed, 0))?;
        let a = scan::estimate_a(&img, cfg.window_rule.side(n))?;
        Ok(vec![
            ExperimentRow::new(kind, n, Some(seed), "naive_abs_err", (scan::naive_mean(&img) - scene.a).abs()),
            ExperimentRow::new(kind, n, Some(seed), "scan_abs_err", (a.value - scene.a).abs()),
        ])
    })?;
    Ok(rows.into_iter().flatten().collect())
}

/// Per `(n, seed)`: `missed_any` on the particle scene and `false_alarm` on
/// a particle-free scene detected with `empty_scene` settings (both 0/1).
/// Per `n`: their frequencies and, when `c1` is set, the missed-detection
/// rate bound.
pub fn run_error_rates(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let kind = ExperimentKind::ErrorRates;
    let per_trial = run_trials(cfg, |n, seed| {
        let det = cfg.detection_config(n);
        let scene = cfg.scene.scene(n)?;
        let img = synth::observe(&scene, trial_seed(kind, n, seed, 0))?;
        let report = detect_particles(&img, &det)?;
        let missed = particles_detected(&report, &scene)?.iter().any(|d| !d);

        let empty = SceneSpec::new(n, cfg.scene.a, cfg.scene.b, vec![], cfg.empty_scene.noise)?;
        let img = synth::observe(&empty, trial_seed(kind, n, seed, 1))?;
        let alarm = detect_particles(&img, &cfg.empty_detection_config(n))?.decision.particles_found();
        Ok(vec![
            ExperimentRow::new(kind, n, Some(seed), "missed_any", f64::from(u8::from(missed))),
            ExperimentRow::new(kind, n, Some(seed), "false_alarm", f64::from(u8::from(alarm))),
        ])
    })?;

    let mut rows = Vec::new();
    for (k, &n) in cfg.n_values.iter().enumerate() {
        let trials = &per_trial[k * cfg.seeds as usize..(k + 1) * cfg.seeds as usize];
        let freq = |metric: &str| {
            trials.iter().flatten().filter(|r| r.metric == metric).map(|r| r.value).sum::<f64>() / cfg.seeds as f64
        };
        let (miss, alarm) = (freq("missed_any"), freq("false_alarm"));
        rows.extend(trials.iter().flatten().cloned());
        rows.push(ExperimentRow::new(kind, n, None, "miss_frequency", miss));
        rows.push(ExperimentRow::new(kind, n, None, "false_alarm_frequency", alarm));
        if let Some(c1) = cfg.c1 {
            let pi = cfg.scene.layout.masks(n)?.len();
            let size = cfg.detection_config(n).significance_size as f64;
            rows.push(ExperimentRow::new(
                kind,
                n,
                None,
                "missed_detection_rate_bound",
                bounds::missed_detection_rate(pi, size, c1)?,
            ));
        }
    }
    Ok(rows)
}

/// Instrumented operation counts per `(n, w)`; optionally full-detection
/// counts and wall-clock seconds. Per `n` and between consecutive `n`,
/// count ratios. Runs sequentially so timings are not disturbed.
pub fn run_complexity(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let kind = ExperimentKind::Complexity;
    let mut rows = Vec::new();
    // (n, w) -> sums op count from seed 0
    let mut counts: Vec<(usize, usize, u64)> = Vec::new();
    for &n in &cfg.n_values {
        let windows: Vec<usize> = cfg.complexity_windows.iter().copied().filter(|&w| w >= 1 && w <= n).collect();
        let scene = if cfg.complexity_detect { cfg.scene.scene(n)? } else { cfg.scene.empty_scene(n)? };
        for seed in 0..cfg.seeds {
            let img = synth::observe(&scene, trial_seed(kind, n, seed, 0))?;
            for &w in &windows {
                let start = Instant::now();
                let (_, ops) = scan::sliding_window_sums_counted(&img, w)?;
                let secs = start.elapsed().as_secs_f64();
                rows.push(ExperimentRow::new(kind, n, Some(seed), format!("sums_ops_w{w}"), ops as f64));
                if cfg.include_timings {
                    rows.push(ExperimentRow::new(kind, n, Some(seed), format!("sums_seconds_w{w}"), secs));
                }
                if seed == 0 {
                    counts.push((n, w, ops));
                }
                if cfg.complexity_detect {
                    let det = DetectionConfig { phi0: w, phi1: w, ..cfg.detection_config(n) };
                    let start = Instant::now();
                    let (_, ops) = detect_particles_counted(&img, &det)?;
                    let secs = start.elapsed().as_secs_f64();
                    rows.push(ExperimentRow::new(kind, n, Some(seed), format!("detect_ops_w{w}"), ops.total() as f64));
                    if cfg.include_timings {
                        rows.push(ExperimentRow::new(kind, n, Some(seed), format!("detect_seconds_w{w}"), secs));
                    }
                }
            }
        }
        let here: Vec<_> = counts.iter().filter(|c| c.0 == n).collect();
        if let (Some(first), Some(last)) = (here.first(), here.last()) {
            if here.len() > 1 {
                rows.push(ExperimentRow::new(
                    kind,
                    n,
                    None,
                    format!("sums_ops_ratio_w{}_over_w{}", last.1, first.1),
                    last.2 as f64 / first.2 as f64,
                ));
            }
        }
    }
    for pair in cfg.n_values.windows(2) {
        let (prev, next) = (pair[0], pair[1]);
        for &(_, w, ops) in counts.iter().filter(|c| c.0 == next) {
            if let Some(&(_, _, base)) = counts.iter().find(|c| c.0 == prev && c.1 == w) {
                rows.push(ExperimentRow::new(
                    kind,
                    next,
                    None,
                    format!("sums_ops_ratio_n{next}_over_n{prev}_w{w}"),
                    ops as f64 / base as f64,
                ));
            }
        }
    }
    Ok(rows)
}

/// Largest black cluster of i.i.d. Bernoulli(p) images, per `(p, n, seed)`,
/// plus per-`(p, n)` medians.
pub fn run_percolation_phase(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let kind = ExperimentKind::PercolationPhase;
    let per_trial = run_trials(cfg, |n, seed| {
        cfg.p_values
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let img = synth::bernoulli_image(n, p, trial_seed(kind, n, seed, k as u64), cfg.lattice)?;
                Ok(ExperimentRow::new(
                    kind,
                    n,
                    Some(seed),
                    format!("largest_cluster_p{}", format_g(p)),
                    largest_cluster_size(&img) as f64,
                ))
            })
            .collect()
    })?;
    let mut rows = Vec::new();
    for (k, &n) in cfg.n_values.iter().enumerate() {
        let trials = &per_trial[k * cfg.seeds as usize..(k + 1) * cfg.seeds as usize];
        rows.extend(trials.iter().flatten().cloned());
        for (j, &p) in cfg.p_values.iter().enumerate() {
            let mut sizes: Vec<f64> = trials.iter().map(|t| t[j].value).collect();
            rows.push(ExperimentRow::new(
                kind,
                n,
                None,
                format!("median_largest_cluster_p{}", format_g(p)),
                median(&mut sizes),
            ));
        }
    }
    Ok(rows)
}

/// Formats like C's `%.12g`.
pub fn format_g(value: f64) -> String {
    const PRECISION: i32 = 12;
    if value == 0.0 {
        return "0".into();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..PRECISION).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        trim(&format!("{:.*}", (PRECISION - 1 - exp) as usize, value))
    }
}

pub const CSV_HEADER: &str = "experiment,n,seed,metric,value";

/// Writes rows as CSV. With `timestamp` a leading `#` comment records the
/// generation time; omit it for byte-reproducible output.
pub fn write_csv<W: Write>(rows: &[ExperimentRow], mut out: W, timestamp: bool) -> Result<()> {
    if timestamp {
        let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        writeln!(out, "# generated unix_time={secs}")?;
    }
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        if !r.value.is_finite() {
            return Err(Error::invalid(format!("non-finite metric {} = {}", r.metric, r.value)));
        }
        let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.experiment, r.n, seed, r.metric, format_g(r.value))?;
    }
    out.flush()?;
    Ok(())
}

/// Contamination of `window` relative to the noise-only window `k0`.
pub fn contamination(scene: &SceneSpec, k0: Window, window: Window) -> WindowContamination {
    let inside = scene.particle_indicator();
    let (r, c) = window.origin;
    let mut s1 = 0;
    let mut excess = 0;
    for i in r..r + window.side {
        for j in c..c + window.side {
            s1 += usize::from(inside[i * scene.n + j]);
            excess += usize::from(!k0.contains((i, j)));
        }
    }
    WindowContamination { s1, excess }
}

/// Fraction of `seeds` noise draws in which some candidate window has a sum
/// no larger than the noise-only window `k0`.
pub fn selection_error_frequency(scene: &SceneSpec, k0: Window, candidates: &[Window], seeds: u64) -> Result<f64> {
    let side = k0.side;
    if candidates.iter().any(|w| w.side != side) {
        return Err(Error::invalid("all candidate windows must match the noise-only window side"));
    }
    let errors = (0..seeds)
        .into_par_iter()
        .map(|seed| -> Result<bool> {
            let img = synth::observe(scene, seed)?;
            let sums = scan::sliding_window_sums(&img, side)?;
            let base = sums.get(k0.origin.0, k0.origin.1);
            Ok(candidates.iter().any(|w| sums.get(w.origin.0, w.origin.1) <= base))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(errors.iter().filter(|&&e| e).count() as f64 / seeds as f64)
}
