//! Command-line interface. [`run`] maps any argument list to an exit code:
//! 0 on success, 1 on usage errors, 2 when a command fails at runtime.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chanvese_core::baseline::EvolutionConfig;
use chanvese_core::optimizer::AdamWConfig;
use chanvese_core::segmentation::{RunConfig, DEFAULT_SEGMENTATION_LR};
use chanvese_core::trainer::{Dataset, TrainConfig, DEFAULT_VALIDATION_FRACTION};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::data::{generate_dataset_par, read_dataset_images, read_truth, stem, write_dataset};
use crate::error::{Error, Result};
use crate::logs::{pair_runs, read_run, write_csv, REPORT_HEADER};
use crate::pgm::read_image;
use crate::pipeline::{evolve_one, segment_all, train_and_save, Input, BASELINE_HEADER};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "chanvese", version, about = "Multiphase Chan-Vese segmentation with neural level sets")]
pub struct Cli {
    /// Seed for data generation, initialization and batch sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving all outputs.
    #[arg(long, global = true, env = "CHANVESE_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic circle images and ground-truth masks.
    GenerateData(GenerateArgs),
    /// Train an initialization prior over a dataset directory.
    Train(TrainArgs),
    /// Segment images with neural level-set functions.
    Segment(SegmentArgs),
    /// Segment images with classical grid level-set evolution.
    EvolveBaseline(BaselineArgs),
    /// Run the built-in property checks.
    Verify,
    /// Pair two runs image by image.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 50)]
    pub width: usize,
    #[arg(long, default_value_t = 50)]
    pub height: usize,
    #[arg(long, default_value_t = 1)]
    pub min_circles: usize,
    #[arg(long, default_value_t = 3)]
    pub max_circles: usize,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Number of level-set networks.
    #[arg(long)]
    pub m: Option<usize>,
    /// Neurons per network.
    #[arg(long, default_value_t = 64)]
    pub n1: usize,
    /// Sigmoid smoothing.
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Length weight.
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    /// Area weight.
    #[arg(long, default_value_t = 0.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    /// AdamW weight decay.
    #[arg(long, default_value_t = 1e-3)]
    pub wd: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `generate-data`.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 3e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = DEFAULT_VALIDATION_FRACTION)]
    pub val_frac: f64,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Input PGM; repeat for several images.
    #[arg(long, required = true)]
    pub image: Vec<PathBuf>,
    /// Ground-truth mask PGM per image, nonzero = foreground.
    #[arg(long)]
    pub truth: Vec<PathBuf>,
    /// Checkpoint whose networks initialize the run.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    /// Gradient-norm tolerance for early stopping.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_SEGMENTATION_LR)]
    pub lr: f64,
    /// Standard deviation of the random initialization.
    #[arg(long, default_value_t = 0.01)]
    pub init_std: f64,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, required = true)]
    pub image: Vec<PathBuf>,
    #[arg(long)]
    pub truth: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.0)]
    pub nu: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Summary or energy CSV of the first run.
    #[arg(long)]
    pub run_a: PathBuf,
    /// Summary or energy CSV of the second run.
    #[arg(long)]
    pub run_b: PathBuf,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "report.csv")]
    pub out: PathBuf,
}

/// Failure of a parsed command.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Runtime(e)
    }
}

impl From<chanvese_core::Error> for Failure {
    fn from(e: chanvese_core::Error) -> Self {
        Self::Runtime(e.into())
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{e}");
            return EXIT_USAGE;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn execute(cli: &Cli) -> std::result::Result<i32, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::GenerateData(a) => generate(a, cli.seed, out),
        Command::Train(a) => train(a, cli.seed, out),
        Command::Segment(a) => segment(a, cli.seed, out),
        Command::EvolveBaseline(a) => baseline(a, out),
        Command::Verify => {
            let checks = verify::run_all(cli.seed);
            for c in &checks {
                println!("{c}");
            }
            Ok(if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_RUNTIME })
        }
        Command::Report(a) => report(a, out),
    }
}

fn generate(a: &GenerateArgs, seed: u64, out: &Path) -> std::result::Result<i32, Failure> {
    if a.min_circles > a.max_circles {
        return Err(Failure::Usage("--min-circles exceeds --max-circles".into()));
    }
    let samples = generate_dataset_par(a.count, a.width, a.height, seed, a.min_circles..=a.max_circles)?;
    write_dataset(out, &samples)?;
    println!("wrote {} images", samples.len());
    Ok(EXIT_OK)
}

fn run_config(model: &ModelArgs, default_m: usize, seed: u64, lr: f64) -> RunConfig {
    RunConfig {
        phases: model.m.unwrap_or(default_m),
        neurons: model.n1,
        epsilon: model.eps,
        mu: model.mu,
        nu: model.nu,
        batch_size: model.batch,
        seed,
        optimizer: AdamWConfig { learning_rate: lr, weight_decay: model.wd, ..AdamWConfig::default() },
        ..RunConfig::default()
    }
}

fn train(a: &TrainArgs, seed: u64, out: &Path) -> std::result::Result<i32, Failure> {
    let run = run_config(&a.model, TrainConfig::default().run.phases, seed, a.lr);
    let cfg = TrainConfig { run, optimizer: run.optimizer, epochs: a.epochs, patience: a.patience };
    let images = read_dataset_images(&a.data)?.into_iter().map(|(_, img)| img).collect();
    let data = Dataset::split(images, a.val_frac, seed)?;
    let prior = train_and_save(&data, &cfg, out)?;
    let r = &prior.report;
    println!(
        "epochs {} stop {:?} initial validation {:e} best {:e} at epoch {}",
        r.epochs.len(),
        r.stop,
        r.initial_val_loss,
        r.best_val_loss,
        r.best_epoch
    );
    Ok(EXIT_OK)
}

fn inputs(images: &[PathBuf], truths: &[PathBuf]) -> std::result::Result<Vec<Input>, Failure> {
    if !truths.is_empty() && truths.len() != images.len() {
        return Err(Failure::Usage(format!("{} --truth files for {} images", truths.len(), images.len())));
    }
    let mut names: Vec<String> = images.iter().map(|p| stem(p)).collect();
    names.sort();
    names.dedup();
    if names.len() != images.len() {
        return Err(Failure::Usage("image file names must be distinct".into()));
    }
    images
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let truth = truths.get(i).map(|t| read_truth(t)).transpose()?;
            Ok(Input { name: stem(p), image: read_image(p)?, truth })
        })
        .collect()
}

fn segment(a: &SegmentArgs, seed: u64, out: &Path) -> std::result::Result<i32, Failure> {
    let init = a.init.as_deref().map(Checkpoint::load).transpose()?;
    let default_m = init.as_ref().map_or(RunConfig::default().phases, |c| c.model.phases());
    let mut cfg = run_config(&a.model, default_m, seed, a.lr);
    cfg.max_iterations = a.iters;
    cfg.tolerance = a.tol;
    cfg.init_std = a.init_std;
    if let Some(c) = &init {
        cfg.neurons = c.model.neurons();
        if c.model.phases() != cfg.phases {
            return Err(Failure::Usage(format!("checkpoint has m = {}, --m is {}", c.model.phases(), cfg.phases)));
        }
    }
    cfg.validate()?;
    let inputs = inputs(&a.image, &a.truth)?;
    let rows = segment_all(&inputs, &cfg, init.as_ref().map(|c| c.model.levelsets.as_slice()), out)?;
    for r in &rows {
        let dice = r.dice.map_or_else(String::new, |d| format!(" dice {d:.4}"));
        println!("{}: {} iterations, energy {:e} -> {:e}{dice}", r.image, r.iterations, r.initial_energy, r.final_energy);
    }
    Ok(EXIT_OK)
}

fn baseline(a: &BaselineArgs, out: &Path) -> std::result::Result<i32, Failure> {
    let cfg = EvolutionConfig { steps: a.steps, mu: a.mu, nu: a.nu, epsilon: a.eps };
    let inputs = inputs(&a.image, &a.truth)?;
    let rows = inputs
        .iter()
        .map(|i| evolve_one(i, a.m, &cfg, &out.join(&i.name)).map(|(_, r)| r))
        .collect::<Result<Vec<_>>>()?;
    write_csv(&out.join("baseline_summary.csv"), &rows, &BASELINE_HEADER)?;
    for r in &rows {
        let dice = r.dice.map_or_else(String::new, |d| format!(" dice {d:.4}"));
        println!("{}: {} steps{dice}", r.image, r.steps);
    }
    Ok(EXIT_OK)
}

fn report(a: &ReportArgs, out: &Path) -> std::result::Result<i32, Failure> {
    let rows = pair_runs(&read_run(&a.run_a)?, &read_run(&a.run_b)?)?;
    write_csv(&out.join(&a.out), &rows, &REPORT_HEADER)?;
    let lower = rows.iter().filter(|r| r.b_lower).count();
    println!("second run has the lower final energy on {lower} of {} images", rows.len());
    Ok(EXIT_OK)
}
