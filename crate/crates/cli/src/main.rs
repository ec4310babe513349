//! `kwsfs`: prepare data, train encoders, enroll keywords, run inference and
//! evaluate few-shot open-set keyword spotting.

mod cmd;
mod config;
mod error;
mod files;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kws_fewshot::openset::ClassifierKind;

use crate::config::AppConfig;
use crate::error::{CliError, CliResult};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "kwsfs", version, about = "Few-shot open-set keyword spotting")]
struct Cli {
    /// TOML config; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the training and evaluation seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory of the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a class-per-directory corpus into manifests and class lists.
    Prepare {
        #[arg(long)]
        data_root: PathBuf,
        /// Held-out share per class when the root has no testing_list.txt.
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
    },
    /// Train an encoder episodically; writes per-epoch and final checkpoints.
    Train {
        /// Continue from the latest epoch checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Enroll keywords from a directory holding one subdirectory per keyword.
    Enroll {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        shots: PathBuf,
        /// openNCM, OpenMAX or DProto; the config value when omitted.
        #[arg(long)]
        kind: Option<ClassifierKind>,
        /// Non-keyword clips for the openNCM unknown prototype.
        #[arg(long)]
        filler: Option<PathBuf>,
    },
    /// Classify one clip against an enrollment.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        enrollment: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        clip: PathBuf,
    },
    /// Repeated K-shot N-way open-set evaluation.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        kind: Option<ClassifierKind>,
    },
    /// Write the synthetic tone-keyword corpus and a config sized for it.
    GenSynthetic,
    /// Print the effective config.
    Config,
}

fn out_dir(cli: &Cli, fallback: &Option<PathBuf>, default: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| fallback.clone())
        .unwrap_or_else(|| PathBuf::from(default))
}

fn run(cli: &Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    cfg.override_seed(cli.seed);
    let seed = cfg.train.schedule.seed;
    match &cli.command {
        Command::Prepare {
            data_root,
            test_fraction,
        } => cmd::prepare::run(
            &cfg,
            &cmd::prepare::PrepareArgs {
                data_root: data_root.clone(),
                test_fraction: *test_fraction,
            },
            &out_dir(cli, &None, "prepared"),
            seed,
        ),
        Command::Train { resume } => {
            let out = out_dir(cli, &cfg.paths.checkpoint_dir, "checkpoints");
            cmd::train::run(&cfg, &out, *resume)
        }
        Command::Enroll {
            checkpoint,
            shots,
            kind,
            filler,
        } => cmd::enroll::run(
            &cfg,
            &cmd::enroll::EnrollArgs {
                checkpoint: checkpoint.clone(),
                shots_dir: shots.clone(),
                kind: kind.unwrap_or(cfg.classifier.kind),
                filler_dir: filler.clone(),
            },
            &out_dir(cli, &None, "."),
        ),
        Command::Infer {
            checkpoint,
            enrollment,
            gamma,
            clip,
        } => cmd::infer::run(
            &cfg,
            &cmd::infer::InferArgs {
                checkpoint: checkpoint.clone(),
                enrollment: enrollment.clone(),
                clip: clip.clone(),
                gamma: *gamma,
            },
        ),
        Command::Eval { checkpoint, kind } => {
            let out = out_dir(cli, &cfg.paths.report_dir, "reports");
            cmd::eval::run(
                &cfg,
                &cmd::eval::EvalArgs {
                    checkpoint: checkpoint.clone(),
                    kind: kind.unwrap_or(cfg.classifier.kind),
                },
                &out,
            )
        }
        Command::GenSynthetic => {
            let out = cli
                .out
                .clone()
                .ok_or_else(|| CliError::validation("gen-synthetic needs --out"))?;
            cmd::synth::run(Path::new(&out), cli.seed)
        }
        Command::Config => {
            print!("{}", cfg.dump()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kwsfs: {e}");
            e.exit_code()
        }
    }
}
