use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lms_autotsf::commands::{self, DecomposeRequest, EvalRequest};
use lms_autotsf::config::{parse_overrides, RunConfig};
use lms_autotsf::data::Split;
use lms_autotsf::Result;

/// Train and evaluate the multi-scale learnable-decomposition forecaster.
///
/// Every run config key can be given as `--key value` after the
/// subcommand's own options; flags override the `--config` file.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write checkpoint, log, resolved config and test metrics.
    Train(Common),
    /// Evaluate a checkpoint on a split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Forecast-step prefixes to report, e.g. 24,48,96.
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<usize>,
        #[arg(long)]
        dump_predictions: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Train the fixed / learnable / learnable+autocorrelation variants.
    Ablate(Common),
    /// Write the trend/seasonal split of the series at one scale.
    Decompose {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        scale: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic trend + seasonal CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` overrides of config entries.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&parse_overrides(&self.overrides)?)?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let s = commands::cmd_train(&common.resolve()?)?;
            println!(
                "trained {} epochs (best {:?}, val mse {:?}); test mse {:.6} mae {:.6}; outputs in {}",
                s.epochs_run,
                s.best_epoch,
                s.best_val_mse,
                s.test.average.mse,
                s.test.average.mae,
                s.output_dir.display()
            );
        }
        Command::Eval {
            checkpoint,
            split,
            horizons,
            dump_predictions,
            common,
        } => {
            let mut overrides = parse_overrides(&common.overrides)?;
            if let Some(path) = &common.config {
                let mut base = RunConfig::load(path)?.to_map();
                base.extend(overrides);
                overrides = base;
            }
            let report = commands::cmd_eval(&EvalRequest {
                checkpoint,
                overrides,
                split: split.parse::<Split>()?,
                horizons,
                dump_predictions,
            })?;
            print!("{}", report.to_csv()?);
        }
        Command::Ablate(common) => {
            for row in commands::cmd_ablate(&common.resolve()?)? {
                println!("{:<20} mse {:.6} mae {:.6}", row.variant, row.mse, row.mae);
            }
        }
        Command::Decompose {
            checkpoint,
            scale,
            common,
        } => {
            let config = match &common.config {
                Some(path) => RunConfig::load(path)?,
                None => RunConfig::default(),
            };
            let out = commands::cmd_decompose(&DecomposeRequest {
                checkpoint,
                config,
                overrides: parse_overrides(&common.overrides)?,
                scale,
            })?;
            for (c, (fc, s)) in out.filters.iter().enumerate() {
                println!("channel {c}: cutoff {fc} steepness {s}");
            }
        }
        Command::Synth { out, common } => {
            let frame = commands::cmd_synth(&common.resolve()?, &out)?;
            println!("wrote {} rows x {} channels to {}", frame.rows(), frame.channels(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
