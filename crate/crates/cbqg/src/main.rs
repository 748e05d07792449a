//! Command-line entry point for the closed-book question generation
//! pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cbqg::cli::{
    cmd_evaluate, cmd_generate, cmd_preprocess, cmd_synth, cmd_train, CliError, TrainMode,
};

#[derive(Parser)]
#[command(
    name = "cbqg",
    version,
    about = "Closed-book question generation: preprocess data, train QG/QA models, generate questions, build synthetic corpora, and evaluate with ROUGE"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter raw QA pairs and split them 80/10/10 into train/val/test.
    Preprocess {
        /// Raw pairs, JSON lines of {"question": ..., "answer": ...}.
        #[arg(long)]
        input: PathBuf,
        /// Output directory for train.jsonl, val.jsonl, test.jsonl, stats.json.
        #[arg(long)]
        out: PathBuf,
        /// Shuffle seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model; writes checkpoints and metrics into the run directory.
    Train {
        /// qg (joint loss), qg-baseline (generation loss only), or qa.
        #[arg(long)]
        mode: String,
        /// Directory containing train.jsonl and val.jsonl.
        #[arg(long)]
        data: PathBuf,
        /// JSON run configuration (model + train sections, all fields explicit).
        #[arg(long)]
        config: PathBuf,
        /// Run directory for epoch-<k>.ckpt, best.ckpt, metrics.jsonl, manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Frozen answer-reconstruction checkpoint (required for qg with ar_enabled).
        #[arg(long)]
        qa_checkpoint: Option<PathBuf>,
    },
    /// Greedy-generate the model's output side for each input record.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// JSON lines with an "answer" field (qg checkpoints) or "question" (qa).
        #[arg(long)]
        input: PathBuf,
        /// Output JSONL of {"question", "answer"} records.
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn summary sentences into synthetic QA pairs with a trained generator.
    Synth {
        #[arg(long)]
        checkpoint: PathBuf,
        /// JSON lines of {"title": ..., "summary": ...}.
        #[arg(long)]
        input: PathBuf,
        /// Output JSONL of pairs; a sidecar <out>.report.json is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score candidates against references with ROUGE-1/2/L/Lsum.
    Evaluate {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        references: PathBuf,
        /// JSON field holding the candidate text.
        #[arg(long, default_value = "text")]
        candidate_field: String,
        /// JSON field holding the reference text.
        #[arg(long, default_value = "text")]
        reference_field: String,
        /// Output JSON report (corpus means plus per-example rows).
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Preprocess { input, out, seed } => cmd_preprocess(&input, &out, seed),
        Command::Train { mode, data, config, out, seed, qa_checkpoint } => {
            let mode = TrainMode::parse(&mode)?;
            cmd_train(mode, &data, &config, &out, seed, qa_checkpoint.as_deref()).map(|_| ())
        }
        Command::Generate { checkpoint, input, out } => cmd_generate(&checkpoint, &input, &out),
        Command::Synth { checkpoint, input, out } => {
            cmd_synth(&checkpoint, &input, &out).map(|_| ())
        }
        Command::Evaluate { candidates, references, candidate_field, reference_field, out } => {
            cmd_evaluate(&candidates, &references, &candidate_field, &reference_field, &out)
                .map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
