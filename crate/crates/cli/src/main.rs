use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use attrgraph::baselines::{baseline_graph, BaselineKind};
use attrgraph::denoiser::Variant;
use attrgraph::generation::{generate, GenerationConfig, Precision};
use attrgraph::graphdata::{load_graph, save_graph};
use attrgraph::report::{evaluate, EvalOptions, Suite};
use attrgraph::training::{load_checkpoint, save_checkpoint, train, TrainConfig};
use attrgraph::{rng, Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

const THREADS_VAR: &str = "GRAPHMAKER_THREADS";

/// Train, sample, and evaluate diffusion models of attributed graphs.
#[derive(Parser)]
#[command(name = "attrgraph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to one graph and write a checkpoint.
    Train(TrainArgs),
    /// Sample graphs from a checkpoint.
    Generate(GenerateArgs),
    /// Compare generated graphs with the original.
    Evaluate(EvaluateArgs),
    /// Write reference graphs from simple random models.
    Baseline(BaselineArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sync,
    Async,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F64,
    F32,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Structural,
    Ml,
    Recovery,
    Diversity,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Er,
    Marginal,
    #[value(name = "er+marginal")]
    ErMarginal,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "async")]
    mode: Mode,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    conditional: bool,
    /// `key=value` settings layered over the size-based defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "model.ckpt")]
    out: PathBuf,
    /// Training log; defaults to the checkpoint path with `.log` appended.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    num: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_hat: Option<usize>,
    /// Take the most likely value at the final step of each component.
    #[arg(long)]
    argmax: bool,
    #[arg(long, value_enum, default_value = "f64")]
    precision: PrecisionArg,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    generated: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    suite: SuiteArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 1)]
    num: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample attributes per label class and keep labels; defaults to
    /// whether the input graph is labeled.
    #[arg(long, action = clap::ArgAction::Set)]
    conditional: Option<bool>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let g = load_graph(&a.data)?;
    let variant = match a.mode {
        Mode::Sync => Variant::Sync,
        Mode::Async => Variant::Async,
    };
    let mut cfg = TrainConfig::for_graph(variant, a.conditional, g.n());
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cfg.apply_text(&text)?;
        // command-line mode flags take precedence over the file
        cfg.model.variant = variant;
        cfg.model.conditional = a.conditional;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let outcome = train(&g, &cfg)?;
    save_checkpoint(&outcome.checkpoint, &a.out)?;
    let log_path = a.log.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".log");
        p.into()
    });
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    let text: String = outcome.log.iter().map(|e| e.line() + "\n").collect();
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(&log_path, e))?;
    println!(
        "trained {} steps, best validation {} -> {}",
        outcome.checkpoint.step,
        outcome.checkpoint.best_score,
        a.out.display()
    );
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let mut cfg = GenerationConfig::new(a.num, a.seed);
    cfg.n_hat = a.n_hat;
    cfg.argmax = a.argmax;
    cfg.precision = match a.precision {
        PrecisionArg::F64 => Precision::F64,
        PrecisionArg::F32 => Precision::F32,
    };
    for g in generate(&ckpt, &cfg)? {
        let dir = a.out.join(g.name());
        save_graph(&g, &dir)?;
        println!("{}", dir.display());
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let g = load_graph(&a.original)?;
    let generated = a
        .generated
        .iter()
        .map(load_graph)
        .collect::<Result<Vec<_>, _>>()?;
    let suite = match a.suite {
        SuiteArg::Structural => Suite::Structural,
        SuiteArg::Ml => Suite::Ml,
        SuiteArg::Recovery => Suite::Recovery,
        SuiteArg::Diversity => Suite::Diversity,
        SuiteArg::All => Suite::All,
    };
    let report = evaluate(&g, &generated, &EvalOptions::new(suite, a.seed))?;
    for p in report.write_dir(&a.out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_baseline(a: BaselineArgs) -> Result<()> {
    let g = load_graph(&a.data)?;
    let kind = match a.kind {
        KindArg::Er => BaselineKind::Er,
        KindArg::Marginal => BaselineKind::Marginal,
        KindArg::ErMarginal => BaselineKind::ErMarginal,
    };
    let conditional = a.conditional.unwrap_or(g.labels().is_some());
    for i in 0..a.num {
        let seed = rng::derive(a.seed, &[rng::tag("baseline"), i as u64]);
        let h = baseline_graph(&g, kind, conditional, seed)?;
        let dir = a.out.join(h.name());
        save_graph(&h, &dir)?;
        println!("{}", dir.display());
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| {
        Error::Config(format!(
            "{THREADS_VAR} must be a non-negative integer, got {value:?}"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("{THREADS_VAR}: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Baseline(a) => cmd_baseline(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 3 } else { 4 })
        }
    }
}
