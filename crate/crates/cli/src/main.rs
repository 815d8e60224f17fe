mod artifacts;
mod commands;
mod heatmap;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use amn_srl::amn::MergeStrategy;
use amn_srl::retrieval::DistanceMethod;

/// Errors raised by the driver itself rather than the library.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

#[derive(Parser, Debug)]
#[command(name = "amn-srl", version, about = "Dependency SRL tagger with memory over retrieved training sentences")]
pub struct Cli {
    /// Configuration file of `key=value` lines.
    #[arg(long, global = true, env = "AMN_SRL_CONFIG")]
    pub config: Option<PathBuf>,

    /// Override one configuration key, e.g. `--set d_e=256`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build vocabularies and corpus statistics.
    Prepare(PrepareArgs),
    /// Retrieve the nearest training instances of every query instance.
    Index(IndexArgs),
    /// Train a tagger and keep the checkpoint with the best dev score.
    Train(TrainArgs),
    /// Tag a corpus with a checkpoint and score it.
    Eval(EvalArgs),
    /// Train every cell of a distance / merge / memory-size grid.
    Ablate(AblateArgs),
    /// Export the attention weights behind one prediction.
    DumpAttention(DumpArgs),
    /// Gold-versus-predicted label counts.
    Confusion(EvalArgs),
    /// Write a synthetic CoNLL-2009 corpus.
    GenSynthetic(SynthArgs),
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Minimum count for word forms and lemmas (defaults to the config value).
    #[arg(long)]
    pub min_freq: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    /// ed, wmd, sd or rd[:seed] (defaults to the config value).
    #[arg(long)]
    pub method: Option<DistanceMethod>,
    /// Neighbors per query (defaults to the config value).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    /// Word vectors, required by wmd and sd.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    /// Pretrained word vectors (also used by wmd and sd retrieval).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Contextual token vectors for train and dev sentences.
    #[arg(long)]
    pub ctx: Option<PathBuf>,
    /// Precomputed index of the train set against itself.
    #[arg(long, requires = "dev_index")]
    pub train_index: Option<PathBuf>,
    /// Precomputed index of the dev set against the train set.
    #[arg(long, requires = "train_index")]
    pub dev_index: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ModelInputs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Corpus to tag.
    #[arg(long)]
    pub data: PathBuf,
    /// Training corpus the memory is drawn from (required with memory).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Precomputed index of `--data` against `--train`.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub ctx: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub inputs: ModelInputs,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_merge(s: &str) -> Result<Option<MergeStrategy>, String> {
    match s.trim() {
        "base" | "none" => Ok(None),
        other => other.parse().map(Some).map_err(|e: amn_srl::Error| e.to_string()),
    }
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub ctx: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "ed")]
    pub methods: Vec<DistanceMethod>,
    /// Merge strategies; `base` adds the tagger without memory.
    #[arg(long, value_delimiter = ',', value_parser = parse_merge, default_value = "base,average")]
    pub merges: Vec<Option<MergeStrategy>>,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DumpArgs {
    #[command(flatten)]
    pub inputs: ModelInputs,
    /// Instance id `<sentence id>#<predicate position>`.
    #[arg(long)]
    pub instance: String,
    /// Pixels per matrix cell in the graymap.
    #[arg(long, default_value_t = 16)]
    pub cell: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub sentences: usize,
    #[arg(long, default_value_t = 5)]
    pub roles: usize,
    #[arg(long, default_value_t = 20)]
    pub clusters: usize,
    #[arg(long, default_value_t = 40)]
    pub nouns: usize,
    #[arg(long, default_value_t = 0.2)]
    pub two_predicate_rate: f64,
    /// Let each paraphrase cluster fix its own preposition-to-role mapping.
    #[arg(long)]
    pub shared_prepositions: bool,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// 1 usage or configuration, 2 data, 3 internal.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Usage(_) => 1,
                CliError::Data(_) => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<amn_srl::Error>() {
            return match e {
                amn_srl::Error::Config(_) => 1,
                amn_srl::Error::Shape { .. } | amn_srl::Error::NonFinite(_) => 3,
                _ => 2,
            };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
