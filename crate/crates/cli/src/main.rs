use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gtmcmc_cli::commands::{cmd_replicate, cmd_run, cmd_sequence, Overrides};
use gtmcmc_cli::config::{parse_config, Baseline, ExperimentConfig, Mode};
use gtmcmc_cli::validate::{run_suites, ValidateOptions};
use gtmcmc_cli::{exit, CliError};

#[derive(Parser)]
#[command(name = "gtmcmc", version, about = "Generalized transitional MCMC experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run: stages.csv, samples.csv, summary.json.
    Run(Common),
    /// Repeated runs with derived seeds: replicates.csv, replicate_summary.json.
    Replicate(Common),
    /// Chained sequence of problems: numbered run directories and sequence_summary.csv.
    Sequence(Common),
    /// Oracle property suites; nonzero exit if any property fails.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML, schema "v1").
    #[arg(long)]
    config: PathBuf,
    /// Overrides `sampler.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `replicates`.
    #[arg(long)]
    replicates: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "GTMCMC_WORKERS")]
    workers: Option<usize>,
    /// Also solve every sequence problem independently with classic TMCMC.
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Tmcmc,
    None,
}

#[derive(Args)]
struct ValidateArgs {
    /// Optional configuration with mode = "validate" and a `validate` table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `validate.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "GTMCMC_WORKERS")]
    workers: Option<usize>,
    /// Test hook: evaluates the weight CoV on a reversed grid.
    #[arg(long, hide = true)]
    corrupt_kappa: bool,
}

fn load(path: &Path, expected: Mode) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse_config(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if cfg.mode != expected {
        return Err(CliError::config(format!(
            "{}: config has mode \"{}\" but the command is \"{}\"",
            path.display(),
            cfg.mode.name(),
            expected.name()
        )));
    }
    Ok(cfg)
}

fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match workers {
        Some(0) => Err(CliError::config("worker count must be >= 1")),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::other(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run_common(c: Common, mode: Mode) -> Result<(), CliError> {
    let cfg = load(&c.config, mode)?;
    let ov = Overrides {
        seed: c.seed,
        out: c.out,
        replicates: c.replicates,
        baseline: c.baseline.map(|b| match b {
            BaselineArg::Tmcmc => Baseline::Tmcmc,
            BaselineArg::None => Baseline::None,
        }),
    };
    let base = base_dir(&c.config);
    let dir = with_workers(c.workers, || match mode {
        Mode::Run => cmd_run(&cfg, &ov, &base),
        Mode::Replicate => cmd_replicate(&cfg, &ov, &base),
        _ => cmd_sequence(&cfg, &ov, &base),
    })??;
    println!("wrote {}", dir.display());
    Ok(())
}

fn run_validate(a: ValidateArgs) -> Result<(), CliError> {
    let cfg = match &a.config {
        Some(p) => load(p, Mode::Validate)?,
        None => ExperimentConfig::bare(Mode::Validate),
    };
    let opts = ValidateOptions {
        seed: a.seed.unwrap_or(cfg.validate.seed),
        kl_cases: cfg.validate.kl_cases,
        cov_cases: cfg.validate.cov_cases,
        corrupt_kappa: a.corrupt_kappa,
    };
    let results = with_workers(a.workers, || run_suites(&opts))?;
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError {
            code: exit::VALIDATION,
            message: format!("{failed} of {} properties failed", results.len()),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Run(c) => run_common(c, Mode::Run),
        Command::Replicate(c) => run_common(c, Mode::Replicate),
        Command::Sequence(c) => run_common(c, Mode::Sequence),
        Command::Validate(a) => run_validate(a),
    };
    match out {
        Ok(()) => ExitCode::from(exit::SUCCESS),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
