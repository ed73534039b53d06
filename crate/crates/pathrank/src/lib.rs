//! Path ranking toolkit: generate competitive candidate paths from trajectory
//! data with diversified multi-cost top-k routing, learn road-network vertex
//! embeddings from biased random walks, and train a bidirectional GRU
//! regressor that scores how well a candidate matches a driver's actual path.

pub mod embedding;
pub mod error;
pub mod metrics;
pub mod model;
pub mod network;
pub mod pathfinding;
pub mod training;

pub use embedding::{generate_walks, train_skipgram, EmbeddingMatrix, SkipGramConfig, WalkConfig};
pub use error::{Error, Result};
pub use metrics::{
    evaluate, kendall_tau, mean_absolute_error, mean_absolute_relative_error, spearman_rho,
    CostBaseline, EvalCase, EvalReport, PathScorer, RankedList,
};
pub use model::{
    load_checkpoint, predict, predict_and_rank, save_checkpoint, train, EmbeddingMode, ModelParams,
    TrainConfig, TrainOutcome, TrainedModel,
};
pub use network::{grid_network, CostKind, Edge, RoadNetwork, VertexId};
pub use pathfinding::{
    diversified_top_k, multi_cost_diversified, shortest_path, top_k_paths, weighted_jaccard,
    DiversifiedOutcome, DiversifiedParams, Path, YenStream,
};
pub use training::{
    generate_instances, group_by_driver, make_synthetic_trajectories, read_instances,
    read_trajectories, split_dataset, write_instances, write_trajectories, AuxNormalizer,
    GeneratedInstances, Strategy, StrategyKind, SyntheticConfig, TrainingInstance, Trajectory,
};
