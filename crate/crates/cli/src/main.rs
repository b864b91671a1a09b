mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cwox", version, about = "Contrastive whole-output explanations")]
pub struct Cli {
    /// Classifier: `synthetic:<model.json>` or `remote:<url>`. Defaults to
    /// `remote:$CWOX_MODEL_URL` when that variable is set.
    #[arg(long, global = true)]
    pub oracle: Option<String>,

    /// Master seed; each randomized subsystem derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file or directory (per command).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify every PNG in a directory and write top-K label documents (JSONL).
    ExtractDocs(ExtractArgs),
    /// Build a label cluster tree from a documents file.
    ClusterBuild(ClusterArgs),
    /// Explain images and write one bundle directory per image.
    Explain(ExplainArgs),
    /// Score bundles of the same image with CAUC and CDROP.
    Evaluate(EvaluateArgs),
    /// Overlay heatmaps on their image.
    Render(RenderArgs),
    /// Write the built-in four-class synthetic scenario (model, image, tree).
    Scenario,
}

#[derive(Args, Debug, Clone)]
pub struct TopKArgs {
    #[arg(long, default_value_t = 5)]
    pub k_cap: usize,
    #[arg(long, default_value_t = 0.95)]
    pub mass: f64,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Directory of PNG images.
    #[arg(long)]
    pub images: PathBuf,
    #[command(flatten)]
    pub top: TopKArgs,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    /// Documents JSONL.
    #[arg(long)]
    pub docs: PathBuf,
    /// Minimum average NPMI for labels to share a level-1 node.
    #[arg(long, default_value_t = cwox_core::cooccur::DEFAULT_THETA)]
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScoreArg {
    Prob,
    Logit,
}

#[derive(Args, Debug, Clone)]
pub struct RiseArgs {
    #[arg(long, default_value_t = 4000)]
    pub rise_masks: usize,
    #[arg(long, default_value_t = 7)]
    pub rise_grid: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rise_keep_prob: f64,
    /// Overrides the seed derived from `--seed`.
    #[arg(long)]
    pub rise_seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ScoreArg::Prob)]
    pub rise_score: ScoreArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineArg {
    Zero,
    Mean,
    Color,
}

#[derive(Args, Debug, Clone)]
pub struct BaselineArgs {
    /// Fill for deleted or masked pixels.
    #[arg(long, value_enum, default_value_t = BaselineArg::Mean)]
    pub baseline: BaselineArg,
    /// Comma-separated channel values in [0, 1] for `--baseline color`.
    #[arg(long, value_delimiter = ',')]
    pub baseline_color: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    /// Input PNG images.
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    /// Cluster tree JSON (required for cwox2s).
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// cwox2s, swox, cwox1sA or cwox1sB.
    #[arg(long, default_value = "cwox2s")]
    pub method: String,
    /// `rise` or `remote:<name>` (e.g. `remote:gradcam`).
    #[arg(long, default_value = "rise")]
    pub explainer: String,
    /// JSON object passed to a remote explainer.
    #[arg(long, default_value = "{}")]
    pub explainer_params: String,
    #[command(flatten)]
    pub top: TopKArgs,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Subtract raw base maps instead of min-max normalized ones.
    #[arg(long)]
    pub no_normalize: bool,
    #[command(flatten)]
    pub rise: RiseArgs,
    #[command(flatten)]
    pub baseline: BaselineArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Bundle directories explaining the same image.
    #[arg(required = true)]
    pub bundles: Vec<PathBuf>,
    /// Image to evaluate on; defaults to the one recorded in the first manifest.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tau_frac: f64,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    /// Include raw deletion curves in the JSON report.
    #[arg(long)]
    pub curves: bool,
    #[command(flatten)]
    pub baseline: BaselineArgs,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Bundle directory; every map in it is rendered.
    #[arg(long, conflicts_with = "map")]
    pub bundle: Option<PathBuf>,
    /// A single NPY map.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long, default_value_t = cwox_core::render::DEFAULT_ALPHA)]
    pub alpha: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            let summary = serde_json::json!({ "failures": failures });
            eprintln!("{summary}");
            ExitCode::FAILURE
        }
        Err(e) => {
            let summary = serde_json::json!({ "error": format!("{e:#}") });
            eprintln!("{summary}");
            ExitCode::FAILURE
        }
    }
}
