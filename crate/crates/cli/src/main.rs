use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use percscan::experiment::{self, ExperimentConfig, ExperimentKind, WindowRule};
use percscan::pipeline::{self, PipelineOptions};
use percscan::{Error, LatticeKind};

/// Particle detection in noisy images.
#[derive(Debug, Parser)]
#[command(name = "percscan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect particles in a PGM micrograph or a JSON scene description.
    Detect(DetectArgs),
    /// Run a Monte Carlo experiment and write CSV rows.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Lattice {
    Square,
    Tri,
}

impl From<Lattice> for LatticeKind {
    fn from(l: Lattice) -> Self {
        match l {
            Lattice::Square => LatticeKind::Square4,
            Lattice::Tri => LatticeKind::Triangular6,
        }
    }
}

#[derive(Debug, clap::Args)]
struct DetectArgs {
    /// PGM (P2/P5) image or JSON scene file.
    input: PathBuf,
    /// Background window side [default: ceil(2 ln n)].
    #[arg(long)]
    phi0: Option<usize>,
    /// Object window side [default: ceil(2 ln n)].
    #[arg(long)]
    phi1: Option<usize>,
    /// Smallest cluster kept as a particle [default: phi1].
    #[arg(long)]
    min_cluster: Option<usize>,
    #[arg(long, value_enum, default_value = "tri")]
    lattice: Lattice,
    /// Number of successive 2x block-mean reductions.
    #[arg(long, default_value_t = 0)]
    downsample: u32,
    /// Use this threshold instead of estimating one.
    #[arg(long)]
    theta: Option<f64>,
    /// Output directory for report.json, thresholded.pgm and filtered.pgm.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Noise seed for scene inputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Leave per-cluster pixel lists out of the report.
    #[arg(long)]
    no_pixels: bool,
}

#[derive(Debug, clap::Args)]
struct BenchArgs {
    /// consistency, naive-vs-scan, error-rates, complexity or percolation.
    #[arg(long)]
    experiment: ExperimentKind,
    /// Comma-separated image sides.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Number of seeds per image side.
    #[arg(long)]
    seeds: Option<u64>,
    /// CSV destination [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp comment so repeated runs are byte-identical.
    #[arg(long)]
    deterministic_header: bool,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Background window rule, e.g. "ceil(2*ln(n))", "n/16" or "13".
    #[arg(long)]
    window_rule: Option<WindowRule>,
    /// Object window rule.
    #[arg(long)]
    phi1_rule: Option<WindowRule>,
    /// Significance size rule.
    #[arg(long)]
    min_cluster: Option<WindowRule>,
    /// Significance size rule for the particle-free scenes (error-rates).
    #[arg(long)]
    empty_min_cluster: Option<WindowRule>,
    #[arg(long, value_enum)]
    lattice: Option<Lattice>,
    /// Rate constant for missed-detection bound rows.
    #[arg(long)]
    c1: Option<f64>,
    /// Comma-separated colouring probabilities (percolation).
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Comma-separated window sides (complexity).
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    /// Add wall-clock rows (complexity); output is then not reproducible.
    #[arg(long)]
    timings: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 3,
        Error::BadMagic(_)
        | Error::MalformedHeader(_)
        | Error::TruncatedPayload { .. }
        | Error::SampleOutOfRange { .. }
        | Error::Scene(_) => 4,
        Error::InvalidArgument(_) => 5,
        Error::DegenerateContrast { .. } => 6,
        Error::Config(_) => 7,
    }
}

fn detect(args: DetectArgs) -> Result<(), Error> {
    let input = fs::read(&args.input)?;
    let opts = PipelineOptions {
        phi0: args.phi0,
        phi1: args.phi1,
        min_cluster: args.min_cluster,
        lattice: args.lattice.into(),
        downsample: args.downsample,
        theta: args.theta,
        seed: args.seed,
        include_pixels: !args.no_pixels,
    };
    let out = pipeline::run(&input, &opts)?;
    fs::create_dir_all(&args.out)?;
    write_atomic(&args.out.join("report.json"), out.report_json.as_bytes())?;
    write_atomic(&args.out.join("thresholded.pgm"), &out.thresholded_pgm)?;
    write_atomic(&args.out.join("filtered.pgm"), &out.filtered_pgm)?;
    eprintln!("theta = {}; {} significant cluster(s)", out.report.theta, out.report.clusters_significant.len());
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn bench(args: BenchArgs) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::new(args.experiment);
    if let Some(n) = args.n {
        cfg.n_values = n;
    }
    if let Some(seeds) = args.seeds {
        cfg.seeds = seeds;
    }
    if let Some(r) = args.window_rule {
        cfg.window_rule = r;
    }
    if let Some(r) = args.phi1_rule {
        cfg.phi1_rule = r;
    }
    if let Some(r) = args.min_cluster {
        cfg.significance_rule = Some(r);
    }
    if let Some(r) = args.empty_min_cluster {
        cfg.empty_scene.significance_rule = r;
    }
    if let Some(l) = args.lattice {
        cfg.lattice = l.into();
    }
    if let Some(p) = args.p {
        cfg.p_values = p;
    }
    if let Some(w) = args.windows {
        cfg.complexity_windows = w;
    }
    cfg.c1 = args.c1.or(cfg.c1);
    cfg.include_timings = args.timings;
    cfg.jobs = args.jobs;

    let rows = experiment::run(&cfg)?;
    let mut csv = Vec::new();
    experiment::write_csv(&rows, &mut csv, !args.deterministic_header)?;
    match args.out {
        Some(path) => write_atomic(&path, &csv)?,
        None => io::stdout().lock().write_all(&csv)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect(args) => detect(args),
        Command::Bench(args) => bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
