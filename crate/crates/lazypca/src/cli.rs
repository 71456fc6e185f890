//! The `lazypca` command-line pipeline: generate, degrade, denoise,
//! evaluate, bench.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 provenance
//! (lineage) mismatch.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{
    load_json, BenchFile, BenchParams, ConfigError, DegradeFile, DenoiseFile, GenerateFile,
};
use crate::image::LevelImage;
use crate::metrics;
use crate::model::{AnnealSchedule, NoiseModel, PcaParams, PriorParams};
use crate::pgm;
use crate::rng::{RngStream, Stage};
use crate::samplers::{self, Method};
use crate::sidecar::{self, Provenance, Sidecar};
use crate::synthesis;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("lineage mismatch: {0}")]
    Lineage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Lineage(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}
impl From<pgm::PgmError> for CliError {
    fn from(e: pgm::PgmError) -> Self {
        CliError::Io(e.to_string())
    }
}
impl From<sidecar::SidecarError> for CliError {
    fn from(e: sidecar::SidecarError) -> Self {
        CliError::Io(e.to_string())
    }
}
impl From<crate::samplers::SamplerError> for CliError {
    fn from(e: crate::samplers::SamplerError) -> Self {
        CliError::Config(e.to_string())
    }
}
impl From<crate::metrics::MetricsError> for CliError {
    fn from(e: crate::metrics::MetricsError) -> Self {
        CliError::Config(e.to_string())
    }
}
impl From<crate::model::ModelError> for CliError {
    fn from(e: crate::model::ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "lazypca",
    version,
    about = "MRF image synthesis, Gaussian degradation, and Bayesian retrieval \
             via Gibbs sampling or a lazy parallel cellular automaton"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a ground-truth MRF image from the smoothing prior.
    Generate(GenerateArgs),
    /// Add Gaussian luminance noise and requantize.
    Degrade(DegradeArgs),
    /// Restore a degraded image by annealed MAP retrieval.
    Denoise(DenoiseArgs),
    /// Compare a restored image against the ground truth.
    Evaluate(EvaluateArgs),
    /// Measure PCA step throughput across thread counts.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub levels: Option<u16>,
    /// Prior coupling J.
    #[arg(long = "coupling-j")]
    pub coupling_j: Option<f64>,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long)]
    pub increment: Option<f64>,
    #[arg(long)]
    pub period: Option<u32>,
    /// Number of generation sweeps.
    #[arg(long)]
    pub steps: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Also write an 8-bit view PGM next to the output.
    #[arg(long)]
    pub view: bool,
}

#[derive(Args, Debug)]
pub struct DegradeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Noise standard deviation on the [0,1] luminance scale.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub view: bool,
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Retrieval kernel: gibbs or pca.
    #[arg(long)]
    pub method: Option<Method>,
    /// Noise sigma; defaults to the input sidecar's value, then 0.25.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long = "coupling-j")]
    pub coupling_j: Option<f64>,
    /// PCA inertia weight q.
    #[arg(long = "q")]
    pub inertia_q: Option<f64>,
    /// Inertial norm exponent p (only 0 supported).
    #[arg(long = "p")]
    pub norm_exponent: Option<f64>,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long)]
    pub increment: Option<f64>,
    #[arg(long)]
    pub period: Option<u32>,
    #[arg(long)]
    pub steps: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for the PCA site loop (default: machine parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Trace CSV path (default: output path with extension trace.csv).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Dump a checkpoint PGM every k steps (0 = off).
    #[arg(long = "checkpoint-every")]
    pub checkpoint_every: Option<u32>,
    #[arg(long)]
    pub view: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Ground-truth image.
    pub original: PathBuf,
    /// Restored image.
    pub restored: PathBuf,
    /// Optional noisy image, reported as the baseline.
    pub noisy: Option<PathBuf>,
    /// Write the metrics JSON here instead of stdout.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Skip lineage (hash chain) verification.
    #[arg(long)]
    pub force: bool,
    #[arg(long = "ssim-c1")]
    pub ssim_c1: Option<f64>,
    #[arg(long = "ssim-c2")]
    pub ssim_c2: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub levels: Option<u16>,
    /// Timed PCA steps per thread count.
    #[arg(long)]
    pub steps: Option<u32>,
    /// Largest thread count to measure (default: machine parallelism).
    #[arg(long = "max-threads")]
    pub max_threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Degrade(a) => cmd_degrade(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn load_file_config<T: serde::de::DeserializeOwned + Default>(
    path: &Option<PathBuf>,
) -> Result<T, CliError> {
    match path {
        Some(p) => Ok(load_json(p)?),
        None => Ok(T::default()),
    }
}

fn write_image_outputs(
    img: &LevelImage,
    path: &Path,
    view: bool,
    seed: u64,
    provenance: Provenance,
) -> Result<String, CliError> {
    let bytes = pgm::to_pgm_bytes(img);
    std::fs::write(path, &bytes)?;
    let hash = sidecar::sha256_hex(&bytes);
    let sc = Sidecar {
        width: img.width(),
        height: img.height(),
        levels: img.levels(),
        seed,
        sha256: hash.clone(),
        provenance,
    };
    sidecar::write_sidecar(path, &sc)?;
    if view {
        pgm::write_view_pgm(img, &path.with_extension("view.pgm"))?;
    }
    Ok(hash)
}

pub fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let mut file: GenerateFile = load_file_config(&args.config)?;
    file.width = args.width.or(file.width);
    file.height = args.height.or(file.height);
    file.levels = args.levels.or(file.levels);
    file.coupling_j = args.coupling_j.or(file.coupling_j);
    file.beta0 = args.beta0.or(file.beta0);
    file.increment = args.increment.or(file.increment);
    file.period = args.period.or(file.period);
    file.steps = args.steps.or(file.steps);
    file.seed = args.seed.or(file.seed);
    file.output = args.output.or(file.output);
    if args.view {
        file.view = Some(true);
    }
    let params = file.resolve()?;
    let img = synthesis::generate_mrf(&params.spec);
    write_image_outputs(
        &img,
        &params.output,
        params.view,
        params.spec.seed,
        Provenance::Mrf {
            coupling_j: params.spec.coupling,
            schedule: params.spec.schedule,
        },
    )?;
    println!("wrote {}", params.output.display());
    Ok(())
}

pub fn cmd_degrade(args: DegradeArgs) -> Result<(), CliError> {
    let mut file: DegradeFile = load_file_config(&args.config)?;
    file.input = args.input.or(file.input);
    file.output = args.output.or(file.output);
    file.sigma = args.sigma.or(file.sigma);
    file.seed = args.seed.or(file.seed);
    if args.view {
        file.view = Some(true);
    }
    let params = file.resolve()?;
    let img = pgm::read_pgm(&params.input)?;
    let parent_hash = sidecar::sha256_of_file(&params.input)?;
    let root = match sidecar::try_read_sidecar(&params.input)? {
        Some(sc) => sc.root_sha256().to_string(),
        None => parent_hash.clone(),
    };
    let noisy = synthesis::degrade(&img, &params.noise, params.seed);
    write_image_outputs(
        &noisy,
        &params.output,
        params.view,
        params.seed,
        Provenance::Degraded {
            sigma: params.noise.sigma,
            parent_sha256: parent_hash,
            root_sha256: root,
        },
    )?;
    println!("wrote {}", params.output.display());
    Ok(())
}

pub fn cmd_denoise(args: DenoiseArgs) -> Result<(), CliError> {
    let mut file: DenoiseFile = load_file_config(&args.config)?;
    file.input = args.input.or(file.input);
    file.output = args.output.or(file.output);
    file.method = args.method.or(file.method);
    file.sigma = args.sigma.or(file.sigma);
    file.coupling_j = args.coupling_j.or(file.coupling_j);
    file.inertia_q = args.inertia_q.or(file.inertia_q);
    file.norm_exponent = args.norm_exponent.or(file.norm_exponent);
    file.beta0 = args.beta0.or(file.beta0);
    file.increment = args.increment.or(file.increment);
    file.period = args.period.or(file.period);
    file.steps = args.steps.or(file.steps);
    file.seed = args.seed.or(file.seed);
    file.threads = args.threads.or(file.threads);
    file.trace = args.trace.or(file.trace);
    file.checkpoint_every = args.checkpoint_every.or(file.checkpoint_every);
    if args.view {
        file.view = Some(true);
    }
    let params = file.resolve()?;

    let g = pgm::read_pgm(&params.input)?;
    let parent_hash = sidecar::sha256_of_file(&params.input)?;
    let input_sidecar = sidecar::try_read_sidecar(&params.input)?;
    let root = input_sidecar
        .as_ref()
        .map(|sc| sc.root_sha256().to_string())
        .unwrap_or_else(|| parent_hash.clone());
    let sigma = params.sigma.unwrap_or_else(|| {
        match input_sidecar.as_ref().map(|sc| &sc.provenance) {
            Some(Provenance::Degraded { sigma, .. }) => *sigma,
            _ => crate::config::DEFAULT_SIGMA,
        }
    });
    let noise = NoiseModel::new(sigma)?;

    if params.method == Method::Gibbs && params.threads.map_or(false, |t| t > 1) {
        eprintln!(
            "warning: the Gibbs sweep is sequential; --threads {} has no effect on it",
            params.threads.unwrap()
        );
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(params.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let ck_every = params.checkpoint_every;
    let out_path = params.output.clone();
    let (restored, trace) = pool.install(|| {
        samplers::run_chain_observed(
            g.clone(),
            &g,
            &params.prior,
            &noise,
            params.schedule,
            params.method,
            Some(&params.pca),
            params.seed,
            |step, img| {
                if ck_every > 0 && (step + 1) % ck_every == 0 {
                    let p = out_path.with_extension(format!("step{:05}.pgm", step + 1));
                    if let Err(e) = pgm::write_pgm(img, &p) {
                        eprintln!("warning: checkpoint {} failed: {e}", p.display());
                    }
                }
            },
        )
    })?;

    write_image_outputs(
        &restored,
        &params.output,
        params.view,
        params.seed,
        Provenance::Restored {
            method: params.method,
            sigma,
            coupling_j: params.prior.coupling,
            inertia_q: (params.method == Method::Pca).then_some(params.pca.inertia),
            norm_exponent: (params.method == Method::Pca).then_some(params.pca.norm_exponent),
            schedule: params.schedule,
            initial: "noisy-input".to_string(),
            parent_sha256: parent_hash,
            root_sha256: root,
        },
    )?;
    let trace_path = params
        .trace
        .unwrap_or_else(|| params.output.with_extension("trace.csv"));
    samplers::write_trace_csv(&trace_path, &trace)?;
    println!("wrote {}", params.output.display());
    Ok(())
}

#[derive(Serialize)]
struct EvaluateReport {
    image_id: String,
    width: usize,
    height: usize,
    levels: u16,
    restored: metrics::MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    noisy: Option<metrics::MetricsReport>,
}

pub fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let original = pgm::read_pgm(&args.original)?;
    let restored = pgm::read_pgm(&args.restored)?;
    let noisy = args.noisy.as_ref().map(|p| pgm::read_pgm(p)).transpose()?;

    if !args.force {
        verify_lineage(&args.original, &args.restored, args.noisy.as_deref())?;
    }

    let c1 = args.ssim_c1.unwrap_or(metrics::SSIM_C1_DEFAULT);
    let c2 = args.ssim_c2.unwrap_or(metrics::SSIM_C2_DEFAULT);
    let restored_report = metrics::report_with(&original, &restored, c1, c2)?;
    let noisy_report = noisy
        .as_ref()
        .map(|n| metrics::report_with(&original, n, c1, c2))
        .transpose()?;

    let image_id = args
        .original
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_string());
    let restored_sc = sidecar::try_read_sidecar(&args.restored)?;
    let (algo, sigma) = match restored_sc.as_ref().map(|sc| &sc.provenance) {
        Some(Provenance::Restored { method, sigma, .. }) => {
            (method.to_string(), Some(*sigma))
        }
        _ => ("restored".to_string(), None),
    };

    println!("{}", metrics::table_header());
    if let Some(nr) = &noisy_report {
        println!(
            "{}",
            metrics::table_row(&image_id, original.width(), sigma, original.levels(), "noisy", nr)
        );
    }
    println!(
        "{}",
        metrics::table_row(&image_id, original.width(), sigma, original.levels(), &algo, &restored_report)
    );

    let report = EvaluateReport {
        image_id,
        width: original.width(),
        height: original.height(),
        levels: original.levels(),
        restored: restored_report,
        noisy: noisy_report,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match &args.json {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

/// Checks the hash links original -> noisy -> restored where sidecars exist.
fn verify_lineage(
    original: &Path,
    restored: &Path,
    noisy: Option<&Path>,
) -> Result<(), CliError> {
    let original_hash = sidecar::sha256_of_file(original)?;
    let restored_sc = sidecar::try_read_sidecar(restored)?;
    match &restored_sc {
        Some(sc) => {
            if sc.root_sha256() != original_hash {
                return Err(CliError::Lineage(format!(
                    "restored image {} does not descend from {} (use --force to override)",
                    restored.display(),
                    original.display()
                )));
            }
        }
        None => eprintln!(
            "warning: no sidecar next to {}; lineage not verified",
            restored.display()
        ),
    }
    if let Some(noisy) = noisy {
        match sidecar::try_read_sidecar(noisy)? {
            Some(sc) => {
                if sc.root_sha256() != original_hash {
                    return Err(CliError::Lineage(format!(
                        "noisy image {} does not descend from {} (use --force to override)",
                        noisy.display(),
                        original.display()
                    )));
                }
                let noisy_hash = sidecar::sha256_of_file(noisy)?;
                if let Some(Provenance::Restored { parent_sha256, .. }) =
                    restored_sc.as_ref().map(|sc| &sc.provenance)
                {
                    if parent_sha256 != &noisy_hash {
                        return Err(CliError::Lineage(format!(
                            "restored image {} was not produced from {} (use --force to override)",
                            restored.display(),
                            noisy.display()
                        )));
                    }
                }
            }
            None => eprintln!(
                "warning: no sidecar next to {}; lineage not verified",
                noisy.display()
            ),
        }
    }
    Ok(())
}

#[derive(Serialize)]
pub struct BenchThreadResult {
    pub threads: usize,
    pub seconds: f64,
    pub site_updates_per_sec: f64,
    pub speedup_vs_1: f64,
}

#[derive(Serialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub levels: u16,
    pub steps: u32,
    pub sites_per_step: usize,
    pub available_parallelism: usize,
    pub pca: Vec<BenchThreadResult>,
    pub gibbs_seconds: f64,
    pub gibbs_site_updates_per_sec: f64,
}

pub fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let mut file: BenchFile = load_file_config(&args.config)?;
    file.width = args.width.or(file.width);
    file.height = args.height.or(file.height);
    file.levels = args.levels.or(file.levels);
    file.steps = args.steps.or(file.steps);
    file.max_threads = args.max_threads.or(file.max_threads);
    file.seed = args.seed.or(file.seed);
    file.output = args.output.or(file.output);
    let params = file.resolve()?;
    let report = run_bench(&params)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match &params.output {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

/// Times `steps` PCA steps at thread counts 1, 2, 4, ... and one Gibbs sweep
/// baseline on a synthetic image.
pub fn run_bench(params: &BenchParams) -> Result<BenchReport, CliError> {
    let stream = RngStream::new(params.seed);
    let n = params.width * params.height;
    let data: Vec<u16> = (0..n)
        .map(|i| {
            let u = stream.uniform(Stage::Init, 0, i as u64, 0);
            ((u * params.levels as f64) as u16).min(params.levels - 1)
        })
        .collect();
    let g = LevelImage::new(params.width, params.height, params.levels, data)
        .expect("bench image is valid");
    let prior = PriorParams::new(crate::config::DEFAULT_COUPLING)?;
    let noise = NoiseModel::new(crate::config::DEFAULT_SIGMA)?;
    let pca = PcaParams::new(crate::config::DEFAULT_INERTIA, 0.0)?;
    let schedule = AnnealSchedule::constant(1.5, params.steps)?;

    let hw = std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1);
    let max_threads = params.max_threads.unwrap_or(hw).max(1);
    let mut counts = vec![1usize];
    while counts.last().unwrap() * 2 <= max_threads {
        counts.push(counts.last().unwrap() * 2);
    }

    let mut results = Vec::new();
    let mut reference: Option<LevelImage> = None;
    let mut base_secs = 0.0;
    for &threads in &counts {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let start = Instant::now();
        let (out, _) = pool.install(|| {
            samplers::run_chain(
                g.clone(),
                &g,
                &prior,
                &noise,
                schedule,
                Method::Pca,
                Some(&pca),
                params.seed,
            )
        })?;
        let secs = start.elapsed().as_secs_f64();
        match &reference {
            None => reference = Some(out),
            Some(r) => assert_eq!(r, &out, "PCA output depends on thread count"),
        }
        if threads == 1 {
            base_secs = secs;
        }
        results.push(BenchThreadResult {
            threads,
            seconds: secs,
            site_updates_per_sec: n as f64 * params.steps as f64 / secs,
            speedup_vs_1: base_secs / secs,
        });
    }

    let start = Instant::now();
    let _ = samplers::run_chain(
        g.clone(),
        &g,
        &prior,
        &noise,
        schedule,
        Method::Gibbs,
        None,
        params.seed,
    )?;
    let gibbs_secs = start.elapsed().as_secs_f64();

    Ok(BenchReport {
        width: params.width,
        height: params.height,
        levels: params.levels,
        steps: params.steps,
        sites_per_step: n,
        available_parallelism: hw,
        pca: results,
        gibbs_seconds: gibbs_secs,
        gibbs_site_updates_per_sec: n as f64 * params.steps as f64 / gibbs_secs,
    })
}
