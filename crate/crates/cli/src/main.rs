//! `scene-forge`: scene generation, embedding evaluation and annotation
//! study pipelines.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod inputs;

use config::ProviderKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Dataset(#[from] scene_forge::datasets::DatasetError),
    #[error(transparent)]
    Generation(#[from] scene_forge::generation::GenerationError),
    #[error(transparent)]
    Embedding(#[from] scene_forge::embedding::EmbeddingError),
    #[error(transparent)]
    Eval(#[from] scene_forge::evaluation::EvalError),
    #[error(transparent)]
    Provider(#[from] scene_forge::transport::ProviderError),
    #[error(transparent)]
    Service(#[from] scene_forge_service::ServiceError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "scene-forge", version, about = "Scene representations for words in context")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every sampling step; echoed into report headers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Chat and embedding backends (default: mock).
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Response cache directory.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// Extra mock fixtures directory.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    /// Maximum concurrent provider calls.
    #[arg(long, global = true)]
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// keyword, scene_type, sentence_id, sentence
    Corpus,
    DwugLike,
    PlainTsv,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Corpus TSV or usage file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "corpus")]
    pub input_format: InputFormat,
    /// Use the bundled 15-sentence sample corpus.
    #[arg(long, conflicts_with_all = ["input", "synthetic"])]
    pub sample: bool,
    /// Use the constructed 26-keyword separable corpus.
    #[arg(long, conflicts_with = "input")]
    pub synthetic: bool,
    /// Fail on corpus shape deviations instead of warning.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderKind {
    Hashbag,
    Http,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate scene representations into a directory.
    Generate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate ATOMIC-style baseline profiles into a directory.
    Atomic {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed one representation condition per instance.
    Embed {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long, default_value = "text")]
        condition: String,
        #[arg(long, value_enum)]
        embedder: Option<EmbedderKind>,
        /// Vector file; instance ids go to `<out>.ids`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Odd-scene-out accuracy for one condition or `all`.
    OddEval {
        #[command(flatten)]
        input: InputArgs,
        /// Trials file; sampled from the input corpus when absent.
        #[arg(long)]
        trials: Option<PathBuf>,
        #[arg(long, default_value_t = scene_forge::datasets::TRIALS_PER_KEYWORD)]
        per_keyword: usize,
        /// Pre-generated scenes; missing ones are generated.
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long, default_value = "all")]
        condition: String,
        #[arg(long, value_enum)]
        embedder: Option<EmbedderKind>,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Agreement on odd-scene-out choices or on a generic ratings table.
    Iaa {
        /// Choice log from the annotation service.
        #[arg(long, requires = "trials", conflicts_with = "ratings")]
        choices: Option<PathBuf>,
        #[arg(long)]
        trials: Option<PathBuf>,
        /// Manifest supplying annotator groups.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// TSV of item, rater, category index.
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        categories: usize,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Preference, rating and failure-reason report over a judgment log.
    Stats {
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample odd-scene-out trials from a corpus.
    SampleTrials {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = scene_forge::datasets::TRIALS_PER_KEYWORD)]
        per_keyword: usize,
        /// Keep only these keywords (comma-separated).
        #[arg(long, value_delimiter = ',')]
        keywords: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an annotation manifest from scenes, atomic profiles and trials.
    BuildManifest {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        atomic: PathBuf,
        #[arg(long)]
        trials: Option<PathBuf>,
        /// `annotator:group` pairs, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        annotators: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the annotation service.
    Serve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "annotation-data")]
        data_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Static UI assets served for non-API paths.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    let ctx = commands::Context::new(&cli.global)?;
    match cli.command {
        Command::Generate { input, out } => commands::generate(&ctx, &input, &out),
        Command::Atomic { input, out } => commands::atomic(&ctx, &input, &out),
        Command::Embed {
            input,
            scenes,
            condition,
            embedder,
            out,
        } => commands::embed(&ctx, &input, scenes.as_deref(), &condition, embedder, &out),
        Command::OddEval {
            input,
            trials,
            per_keyword,
            scenes,
            condition,
            embedder,
            format,
            out,
        } => commands::odd_eval(
            &ctx,
            &commands::OddEvalArgs {
                input: &input,
                trials: trials.as_deref(),
                per_keyword,
                scenes: scenes.as_deref(),
                condition: &condition,
                embedder,
                format,
                out: out.as_deref(),
            },
        ),
        Command::Iaa {
            choices,
            trials,
            manifest,
            ratings,
            categories,
            format,
            out,
        } => match (choices, ratings) {
            (Some(choices), None) => commands::iaa_choices(
                &ctx,
                &choices,
                trials.as_deref().expect("clap enforces --trials"),
                manifest.as_deref(),
                format,
                out.as_deref(),
            ),
            (None, Some(ratings)) => commands::iaa_ratings(&ctx, &ratings, categories, format, out.as_deref()),
            _ => Err(CliError::Usage("iaa needs either --choices with --trials, or --ratings".into())),
        },
        Command::Stats {
            judgments,
            manifest,
            format,
            out,
        } => commands::stats(&ctx, &judgments, manifest.as_deref(), format, out.as_deref()),
        Command::SampleTrials {
            input,
            per_keyword,
            keywords,
            out,
        } => commands::sample_trials(&ctx, &input, per_keyword, &keywords, &out),
        Command::BuildManifest {
            input,
            scenes,
            atomic,
            trials,
            annotators,
            out,
        } => commands::build_manifest(&ctx, &input, &scenes, &atomic, trials.as_deref(), &annotators, &out),
        Command::Serve {
            manifest,
            data_dir,
            addr,
            static_dir,
        } => commands::serve(&manifest, &data_dir, addr, static_dir.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) if outcome.failures.is_empty() => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{} failure(s):", outcome.failures.len());
            for f in &outcome.failures {
                eprintln!("  {f}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
