//! `baryalign`: train, project, score and evaluate barycentric alignments.

mod exit;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use baryalign::storage::{self, ReportFormat};
use baryalign::synth::GENERATOR;
use baryalign::{
    consistency_scores, evaluate, make_synthetic_pool, project, train_barycenter, ProjectOptions,
    ProjectedPool, Similarity, SynthSpec, TrainConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\nmatrix format: BARYMAT1 v1",
    "\npool manifest: v1",
    "\nmodel bundle: v1",
    "\nreports: v1"
);

#[derive(Debug, Parser)]
#[command(name = "baryalign", version, long_version = LONG_VERSION)]
#[command(about = "Procrustes barycenter alignment of representation matrices")]
struct Cli {
    /// Seed for synthetic data generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 picks the number of CPUs.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the barycenter and per-model transforms on a training pool.
    Train(TrainArgs),
    /// Map a held-out pool into the universal space of a trained model.
    Project(ProjectArgs),
    /// Per-stimulus consistency scores for a projected pool.
    Score(ScoreArgs),
    /// Correlation, RMS and top-K retrieval for a projected pool.
    Eval(EvalArgs),
    /// Generate train/test pools with a known ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Subtract each model's training column means before alignment.
    #[arg(long)]
    center: bool,
    /// Write the per-iteration objective trace into the bundle.
    #[arg(long)]
    trace: bool,
    /// Exit non-zero when the iteration cap is hit before convergence.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Accept a pool holding only some of the trained models.
    #[arg(long)]
    allow_subset: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimArg {
    Cosine,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Tsv,
    Table,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Tsv => ReportFormat::Tsv,
            FormatArg::Table => ReportFormat::Table,
        }
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    projected: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "cosine")]
    sim: SimArg,
    #[arg(long, value_enum, default_value = "tsv")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    projected: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 5, 10])]
    topk: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    n_train: usize,
    #[arg(long)]
    m_test: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    models: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Comma-separated per-model widths, e.g. `4,8,16`.
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();

    let threads = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(exit::USAGE);
        }
    };
    match threads.install(|| run(&cli)) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit::code_for(&err))
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Train(args) => train(args),
        Command::Project(args) => project_cmd(args),
        Command::Score(args) => score(args),
        Command::Eval(args) => eval(args),
        Command::Synth(args) => synth(args, cli.seed),
    }
}

fn train(args: &TrainArgs) -> Result<ExitCode> {
    let pool = storage::load_pool(&args.pool)
        .with_context(|| format!("loading pool {}", args.pool.display()))?;
    let config = TrainConfig {
        epsilon: args.eps,
        max_iterations: args.max_iters,
        record_trace: args.trace,
        center: args.center,
    };
    let (model, trace) = train_barycenter(&pool, &config)?;
    storage::write_dir_atomic(&args.out, |dir| storage::save_model(&model, trace.as_ref(), dir))
        .with_context(|| format!("writing model bundle {}", args.out.display()))?;

    let meta = model.meta();
    println!("iterations_run\t{}", meta.iterations_run);
    println!("final_objective\t{:.16e}", meta.final_objective);
    println!("final_relative_change\t{:.16e}", meta.final_relative_change);
    println!("converged\t{}", meta.converged);
    if !meta.converged && args.strict {
        eprintln!(
            "error: not converged after {} iterations (relative change {:e} >= {:e})",
            meta.iterations_run, meta.final_relative_change, meta.epsilon
        );
        return Ok(ExitCode::from(exit::NOT_CONVERGED));
    }
    Ok(ExitCode::SUCCESS)
}

fn project_cmd(args: &ProjectArgs) -> Result<ExitCode> {
    let model = storage::load_model(&args.model)
        .with_context(|| format!("loading model bundle {}", args.model.display()))?;
    let pool = storage::load_pool(&args.pool)
        .with_context(|| format!("loading pool {}", args.pool.display()))?;
    let options = ProjectOptions {
        allow_subset: args.allow_subset,
    };
    let projected = project(&pool, &model, options)?;
    storage::write_dir_atomic(&args.out, |dir| {
        storage::save_projected(&projected, dir, "projected").map(|_| ())
    })
    .with_context(|| format!("writing projected pool {}", args.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn load_projected(path: &Path) -> Result<ProjectedPool> {
    let pool = storage::load_pool(path)
        .with_context(|| format!("loading projected pool {}", path.display()))?;
    Ok(ProjectedPool::from_pool(&pool))
}

fn score(args: &ScoreArgs) -> Result<ExitCode> {
    let projected = load_projected(&args.projected)?;
    let sim = match args.sim {
        SimArg::Cosine => Similarity::Cosine,
    };
    let report = consistency_scores(&projected, sim)?;
    storage::save_consistency_report(&args.out, &report, args.format.into())
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn eval(args: &EvalArgs) -> Result<ExitCode> {
    let projected = load_projected(&args.projected)?;
    let report = evaluate(&projected, &args.topk)?;
    storage::save_eval_report(&args.out, &report, args.format.into())
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn synth(args: &SynthArgs, seed: u64) -> Result<ExitCode> {
    let spec = SynthSpec {
        n_train: args.n_train,
        m_test: args.m_test,
        d: args.d,
        n_models: args.models,
        noise_sigma: args.noise,
        width_schedule: args.widths.clone(),
        seed,
    };
    let pools = make_synthetic_pool(&spec)?;
    storage::write_dir_atomic(&args.out, |dir| {
        let train_dir = dir.join("train");
        let test_dir = dir.join("test");
        let truth_dir = dir.join("truth");
        let rotations_dir = truth_dir.join("rotations");
        for d in [&train_dir, &test_dir, &rotations_dir] {
            std::fs::create_dir_all(d).map_err(|e| baryalign::Error::IoFailure {
                path: d.clone(),
                source: e,
            })?;
        }
        storage::save_pool(&pools.train, &train_dir, "train")?;
        storage::save_pool(&pools.test, &test_dir, "test")?;
        storage::save_matrix(truth_dir.join("latent_train.bin"), &pools.truth.latent_train)?;
        storage::save_matrix(truth_dir.join("latent_test.bin"), &pools.truth.latent_test)?;
        for (id, q) in spec.model_ids().iter().zip(&pools.truth.rotations) {
            storage::save_matrix(rotations_dir.join(format!("{id}.bin")), q)?;
        }
        let truth = truth_manifest(&spec);
        let path = truth_dir.join("manifest.toml");
        std::fs::write(&path, truth).map_err(|e| baryalign::Error::IoFailure { path, source: e })
    })
    .with_context(|| format!("writing synthetic pools {}", args.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn truth_manifest(spec: &SynthSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("generator = {GENERATOR:?}\n"));
    out.push_str(&format!("seed = {}\n", spec.seed));
    out.push_str(&format!("n_train = {}\n", spec.n_train));
    out.push_str(&format!("m_test = {}\n", spec.m_test));
    out.push_str(&format!("d = {}\n", spec.d));
    out.push_str(&format!("n_models = {}\n", spec.n_models));
    out.push_str(&format!("noise_sigma = {:?}\n", spec.noise_sigma));
    if let Some(widths) = &spec.width_schedule {
        out.push_str(&format!("width_schedule = {widths:?}\n"));
    }
    out.push_str("latent_train = \"latent_train.bin\"\n");
    out.push_str("latent_test = \"latent_test.bin\"\n");
    out.push_str("\n[rotations]\n");
    for id in spec.model_ids() {
        out.push_str(&format!("{id} = \"rotations/{id}.bin\"\n"));
    }
    out
}
