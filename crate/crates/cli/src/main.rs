//! `tdf`: synthesize data, fit models, encode videos, train, predict and
//! evaluate, either stage by stage or in one `run`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "tdf",
    version,
    about = "Temporal DFT video features with late fusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labelled dataset.
    Synth {
        /// Generator settings (key=value file).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit PCA and branch models on a training manifest.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Output bundle directory.
        #[arg(long)]
        out: PathBuf,
        /// Split the manifest as repetition R of `run` does, write
        /// train.tsv and test.tsv into the bundle and fit on the train part.
        #[arg(long, value_name = "R")]
        split_repetition: Option<u64>,
    },
    /// Encode every video of a manifest with a fitted bundle.
    Encode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory for vector files and vectors.tsv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the classifier on encoded vectors.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// vectors.tsv written by `encode`.
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the predicted class and scores of each encoded video.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
    },
    /// Print the accuracy report of a model on encoded vectors.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split, fit, encode, train and evaluate, repeated with fresh splits.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 10)]
        repeat: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("tdf: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("error")),
        )
        .init();

    let result = match cli.command {
        Command::Synth { spec, out } => commands::synth(&spec, &out),
        Command::Fit {
            config,
            manifest,
            out,
            split_repetition,
        } => commands::fit(&config, &manifest, &out, split_repetition),
        Command::Encode {
            config,
            bundle,
            manifest,
            out,
        } => commands::encode(&config, &bundle, &manifest, &out),
        Command::Train {
            config,
            vectors,
            out,
        } => commands::train(&config, &vectors, &out),
        Command::Predict { model, vectors } => commands::predict(&model, &vectors),
        Command::Evaluate {
            model,
            vectors,
            out,
        } => commands::evaluate(&model, &vectors, out.as_deref()),
        Command::Run {
            config,
            manifest,
            repeat,
        } => commands::run(&config, &manifest, repeat),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("tdf: {}", failure.message().replace('\n', " "));
            ExitCode::from(failure.code())
        }
    }
}
