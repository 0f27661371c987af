mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonArgs, EvalArgs, RunConfig, TrainArgs};
use failure::{Failure, ResultExt};

/// Micro-expression interval decoding and spot-then-recognize evaluation.
#[derive(Debug, Parser)]
#[command(name = "mekit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode one track CSV into labeled intervals.
    Decode {
        track: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Frame rate of the track, used to derive k.
        #[arg(long)]
        fps: Option<f64>,
        /// Defaults to the track file stem.
        #[arg(long)]
        video_id: Option<String>,
        /// Manifest supplying the class priors.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score a manifest, decoding each track or reading given predictions.
    Eval {
        manifest: PathBuf,
        #[arg(long = "out-dir", alias = "out")]
        out: Option<PathBuf>,
        /// Directory of `<video_id>.json` interval files.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Generate a synthetic suite from a suite spec JSON.
    Synth {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the two-head demo model and score the held-out videos.
    Traindemo {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the tool and file format versions.
    Version,
}

/// Thread count from the config, capped by `ME_KIT_THREADS`.
fn thread_limit(cfg: &RunConfig) -> Result<Option<usize>, Failure> {
    let env = match std::env::var("ME_KIT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => return Err(Failure::invalid(format!("ME_KIT_THREADS={v:?} is not a positive integer"))),
        },
        Err(_) => None,
    };
    Ok(match (cfg.threads, env) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    })
}

/// Loads the config, applies flags, and either prints it or returns it.
fn prepare(
    common: &CommonArgs,
    apply: impl FnOnce(&mut RunConfig),
) -> Result<Option<RunConfig>, Failure> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    apply(&mut cfg);
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    cfg.validate()?;
    if common.print_config {
        println!("{}", cfg.to_json());
        return Ok(None);
    }
    if let Some(n) = thread_limit(&cfg)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .internal()?;
    }
    Ok(Some(cfg))
}

fn run(cli: Cli) -> Result<Option<String>, Failure> {
    match cli.command {
        Command::Decode {
            track,
            out,
            fps,
            video_id,
            manifest,
            eval,
            common,
        } => {
            let Some(cfg) = prepare(&common, |c| eval.apply(&mut c.eval))? else {
                return Ok(None);
            };
            let input = commands::DecodeInput {
                track,
                out,
                fps,
                video_id,
                manifest,
            };
            commands::decode(input, &cfg).map(Some)
        }
        Command::Eval {
            manifest,
            out,
            predictions,
            eval,
            common,
        } => {
            let Some(cfg) = prepare(&common, |c| eval.apply(&mut c.eval))? else {
                return Ok(None);
            };
            commands::eval(&manifest, out, predictions.as_deref(), &cfg).map(Some)
        }
        Command::Synth { spec, out, common } => {
            let Some(cfg) = prepare(&common, |_| {})? else {
                return Ok(None);
            };
            commands::synth(&spec, out, &cfg).map(Some)
        }
        Command::Traindemo {
            manifest,
            out,
            train,
            eval,
            common,
        } => {
            let Some(cfg) = prepare(&common, |c| {
                train.apply(&mut c.train);
                eval.apply(&mut c.eval);
            })?
            else {
                return Ok(None);
            };
            commands::traindemo(&manifest, out, &cfg).map(Some)
        }
        Command::Version => Ok(Some(format!(
            "mekit {} (format version {})",
            env!("CARGO_PKG_VERSION"),
            mekit::FORMAT_VERSION
        ))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(msg) => {
            if let Some(m) = msg {
                println!("{m}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            log::debug!("{f:?}");
            eprintln!("mekit: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
