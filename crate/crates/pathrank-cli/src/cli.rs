//! Argument surface. Values with domain-specific syntax (cost kinds,
//! strategies, embedding modes) stay `String` here and are parsed by the
//! command so bad values report through the normal error categories instead
//! of clap usage errors.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "pathrank",
    version,
    about = "Generate competitive-path training data, learn vertex embeddings, \
             train a bidirectional GRU path ranker, and evaluate it"
)]
pub struct Cli {
    /// Cap the worker thread pool (default: one per core)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic grid road network
    GenNetwork(GenNetworkArgs),
    /// Enumerate candidate paths for one source/dest query
    Paths(PathsArgs),
    /// Generate labeled training instances from trajectories
    GenData(GenDataArgs),
    /// Learn vertex embeddings from random walks
    Embed(EmbedArgs),
    /// Train the path-ranking regressor
    Train(TrainArgs),
    /// Rank candidate paths for a query with a trained model
    Rank(RankArgs),
    /// Score a model and the cost baselines on test trajectories
    Evaluate(EvaluateArgs),
    /// Train/evaluate a strategy x dim x alpha grid
    Sweep(SweepArgs),
    /// Replay a command from its run manifest
    Rerun(RerunArgs),
}

#[derive(Args)]
pub struct GenNetworkArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PathsArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub source: u32,
    #[arg(long)]
    pub dest: u32,
    /// topk | diversified | multicost
    #[arg(long, default_value = "topk")]
    pub strategy: String,
    /// distance | travel-time | fuel (ignored by multicost)
    #[arg(long, default_value = "distance")]
    pub cost: String,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.8)]
    pub delta: f64,
    #[arg(long, default_value_t = 200)]
    pub max_candidates: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Trajectory file to label; synthesized when omitted
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    /// Synthetic trajectory count (only without --trajectories)
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Cost the synthetic drivers prefer: distance | travel-time | fuel
    #[arg(long, default_value = "travel-time")]
    pub preference: String,
    /// Probability a synthetic trip takes the second-cheapest path
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    /// TkDI | TkTT | TkFC | D-TkDI | D-TkTT | D-TkFC | D-TkM
    #[arg(long, default_value = "D-TkM")]
    pub strategy: String,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.8)]
    pub delta: f64,
    #[arg(long, default_value_t = 200)]
    pub max_candidates: usize,
    /// train,val,test fractions, e.g. 0.7,0.1,0.2; single block when omitted
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base path; output files append .<tag>.trajectories.txt / .instances.txt
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub walks_per_vertex: usize,
    #[arg(long, default_value_t = 80)]
    pub walk_length: usize,
    /// Return bias: higher p discourages revisiting the previous vertex
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// In-out bias: higher q keeps walks local
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Bias steps by inverse edge distance instead of uniformly
    #[arg(long)]
    pub weighted: bool,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// key = value config file; flags and PATHRANK_* variables override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub train_instances: Option<PathBuf>,
    #[arg(long)]
    pub val_instances: Option<PathBuf>,
    /// Pretrained embedding file (frozen/trainable modes)
    #[arg(long)]
    pub embedding: Option<PathBuf>,
    /// random | frozen | trainable
    #[arg(long)]
    pub embedding_mode: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub z_max: Option<usize>,
    #[arg(long)]
    pub aux_tasks: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub checkpoint_out: Option<PathBuf>,
    /// Per-epoch train/val MSE log (CSV)
    #[arg(long)]
    pub log_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RankArgs {
    /// key = value config file; flags and PATHRANK_* variables override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub source: Option<u32>,
    #[arg(long)]
    pub dest: Option<u32>,
    /// Candidate generation strategy (TkDI .. D-TkM)
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub max_candidates: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Trained checkpoint; omit to score only the cost baselines
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.8)]
    pub delta: f64,
    #[arg(long, default_value_t = 200)]
    pub max_candidates: usize,
    /// scorer,metric,bucket,value lines
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    /// key = value config file with the strategies/dims/alphas matrix
    #[arg(long)]
    pub config: PathBuf,
    /// Results table (CSV); overrides the config `out` key
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
