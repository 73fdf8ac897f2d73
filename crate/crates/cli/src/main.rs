//! `hae`: dataset generation, semantic precomputation, training,
//! evaluation and embedding export for heterogeneous graph networks.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod exit;
mod manifest;

use commands::{CommuteArgs, EmbedArgs, EvalArgs, GenerateArgs, Global, ModelArgs, TrainArgs};

#[derive(Debug, Parser)]
#[command(name = "hae", version, about = "Semantic-structure graph networks over heterogeneous graphs")]
struct Cli {
    /// Overrides the seed of the config in use.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppresses progress messages on standard error.
    #[arg(long, global = true)]
    quiet: bool,
    /// Allows writing into a non-empty output location.
    #[arg(long, global = true)]
    force: bool,
    /// Caps the worker threads used for fan-out.
    #[arg(long, global = true, env = "HAE_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes a synthetic labeled network as nodes/edges/features TSV.
    Generate {
        /// SyntheticConfig JSON; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dumps commuting counts, similarities and the union mask per structure.
    Commute {
        #[arg(long)]
        data: PathBuf,
        /// Repeatable; wins over the model config's structures.
        #[arg(long = "structure")]
        structures: Vec<String>,
        #[arg(long)]
        model_config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains a model and writes the checkpoint, report and resolved configs.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model_config: Option<PathBuf>,
        #[arg(long)]
        train_config: Option<PathBuf>,
        /// Repeatable; wins over the model config's structures.
        #[arg(long = "structure")]
        structures: Vec<String>,
        /// Named variant such as gnn-4l, scl-2l or cal-4l.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scores checkpoint embeddings with the logistic probe and k-means.
    Eval {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long, default_value_t = 0.8)]
        train_ratio: f64,
        /// Independent seeds `seed, seed+1, ...` averaged in the summary.
        #[arg(long, default_value_t = 10)]
        repeats: usize,
    },
    /// Exports embeddings as `node_id<TAB>v0<TAB>...` TSV.
    Embed {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ModelFlags {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to model.json next to the checkpoint.
    #[arg(long)]
    model_config: Option<PathBuf>,
}

impl From<ModelFlags> for ModelArgs {
    fn from(f: ModelFlags) -> Self {
        ModelArgs {
            data: f.data,
            checkpoint: f.checkpoint,
            model_config: f.model_config,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.into()).build_global()?;
    }
    let global = Global {
        seed: cli.seed,
        quiet: cli.quiet,
        force: cli.force,
    };
    match cli.command {
        Command::Generate { config, out } => commands::generate(&GenerateArgs { config, out }, global),
        Command::Commute {
            data,
            structures,
            model_config,
            out,
        } => commands::commute(
            &CommuteArgs {
                data,
                structures,
                model_config,
                out,
            },
            global,
        ),
        Command::Train {
            data,
            model_config,
            train_config,
            structures,
            variant,
            out,
        } => commands::train_cmd(
            &TrainArgs {
                data,
                model_config,
                train_config,
                structures,
                variant,
                out,
            },
            global,
        ),
        Command::Eval {
            model,
            train_ratio,
            repeats,
        } => commands::eval(
            &EvalArgs {
                model: model.into(),
                train_ratio,
                repeats,
            },
            global,
        ),
        Command::Embed { model, out } => commands::embed(
            &EmbedArgs {
                model: model.into(),
                out,
            },
            global,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version go to stdout and are not failures
            return if e.use_stderr() {
                ExitCode::from(exit::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::classify(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn structure_flags_repeat() {
        let cli = Cli::try_parse_from([
            "hae", "commute", "--data", "d", "--structure", "A-P-A", "--structure", "A-P-C-P-A", "--out", "o", "--seed", "3",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(3));
        match cli.command {
            Command::Commute { structures, .. } => assert_eq!(structures, ["A-P-A", "A-P-C-P-A"]),
            other => panic!("{other:?}"),
        }
    }
}
