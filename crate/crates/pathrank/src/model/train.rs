use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::{derive_seed, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::metrics::PathScorer;
use crate::network::RoadNetwork;
use crate::pathfinding::Path;
use crate::training::{AuxNormalizer, Trajectory, TrainingInstance};

use super::forward::predict;
use super::loss::{batch_gradients, BatchItem, LossWeights};
use super::{EmbeddingInit, EmbeddingMode, ModelParams};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub dim: usize,
    /// Longest path (in vertices) the model accepts; shorter paths are
    /// zero-padded up to it.
    pub z_max: usize,
    /// Auxiliary cost-regression tasks, 0..=3, consuming the normalized
    /// (distance, travel_time, fuel) prefix.
    pub aux_tasks: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub embedding_mode: EmbeddingMode,
    pub seed: u64,
}

impl TrainConfig {
    /// Conventional starting point; callers override fields as needed.
    pub fn new(dim: usize, z_max: usize) -> Self {
        TrainConfig {
            dim,
            z_max,
            aux_tasks: 0,
            alpha: 0.0,
            lambda: 1e-4,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            embedding_mode: EmbeddingMode::RandomInit,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("dim must be >= 1"));
        }
        if self.z_max < 2 {
            return Err(Error::config("z_max must be >= 2"));
        }
        if self.aux_tasks > 3 {
            return Err(Error::config("aux_tasks must be <= 3"));
        }
        if self.alpha > 0.0 && self.aux_tasks == 0 {
            return Err(Error::config("alpha > 0 needs at least one auxiliary task"));
        }
        LossWeights { alpha: self.alpha, lambda: self.lambda }.validate()?;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// Adam with standard bias correction. One moment pair per model tensor,
/// aligned with `ModelParams::tensors()` order.
struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(params: &ModelParams) -> Self {
        let m = params.tensors().iter().map(|(_, t)| Array2::zeros(t.raw_dim())).collect();
        let v = params.tensors().iter().map(|(_, t)| Array2::zeros(t.raw_dim())).collect();
        Adam { m, v, t: 0 }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64, skip_embedding: bool) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (i, ((name, theta), (_, g))) in
            params.tensors_mut().into_iter().zip(grads.tensors()).enumerate()
        {
            if skip_embedding && name == "embedding" {
                continue;
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::azip!((m in m, v in v, theta in theta, &g in g) {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    /// Whether this epoch's parameters became the checkpoint.
    pub checkpointed: bool,
}

/// A trained regressor plus everything needed to score new paths: the
/// normalizer fitted on its training split and the embedding mode it was
/// trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub embedding_mode: EmbeddingMode,
    pub normalizer: AuxNormalizer,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: Vec<EpochStats>,
}

fn to_batch_items(
    instances: &[TrainingInstance],
    normalizer: &AuxNormalizer,
    aux_tasks: usize,
) -> Vec<BatchItem> {
    instances
        .iter()
        .map(|inst| BatchItem {
            path: inst.path.clone(),
            label: inst.label,
            aux_targets: normalizer.apply(inst.aux)[..aux_tasks].to_vec(),
        })
        .collect()
}

fn similarity_mse(params: &ModelParams, items: &[BatchItem]) -> Result<f64> {
    let mut total = 0.0;
    for item in items {
        let d = predict(params, &item.path)?.similarity - item.label;
        total += d * d;
    }
    Ok(total / items.len() as f64)
}

fn check_instances(
    which: &str,
    instances: &[TrainingInstance],
    cfg: &TrainConfig,
    vertex_count: usize,
) -> Result<()> {
    if instances.is_empty() {
        return Err(Error::validation(format!("{which} set is empty")));
    }
    for inst in instances {
        if inst.path.len() > cfg.z_max {
            return Err(Error::validation(format!(
                "{which} path visits {} vertices, over z_max {}; raise z_max",
                inst.path.len(),
                cfg.z_max
            )));
        }
        for v in inst.path.vertices() {
            if (v.0 as usize) >= vertex_count {
                return Err(Error::validation(format!(
                    "{which} path vertex {v} outside 0..{vertex_count}"
                )));
            }
        }
    }
    Ok(())
}

/// Mini-batch Adam over the multitask objective. Epoch order is reshuffled
/// from a per-epoch seed; after each epoch the full train and validation
/// similarity MSEs decide checkpointing: the checkpoint advances only when
/// the train MSE improves and, nested inside, the validation MSE improves
/// too. The returned model is the checkpoint, not the last epoch.
pub fn train(
    train_set: &[TrainingInstance],
    val_set: &[TrainingInstance],
    cfg: &TrainConfig,
    pretrained: Option<&EmbeddingMatrix>,
    vertex_count: usize,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_instances("train", train_set, cfg, vertex_count)?;
    check_instances("validation", val_set, cfg, vertex_count)?;
    let embedding_init = match (cfg.embedding_mode, pretrained) {
        (EmbeddingMode::RandomInit, None) => EmbeddingInit::Random,
        (EmbeddingMode::RandomInit, Some(_)) => {
            return Err(Error::config(
                "random-init mode must not be given a pretrained embedding",
            ))
        }
        (_, Some(table)) => EmbeddingInit::Pretrained(table),
        (mode, None) => {
            return Err(Error::config(format!(
                "embedding mode {mode:?} needs a pretrained embedding"
            )))
        }
    };
    let normalizer = AuxNormalizer::fit(train_set)?;
    let train_items = to_batch_items(train_set, &normalizer, cfg.aux_tasks);
    let val_items = to_batch_items(val_set, &normalizer, cfg.aux_tasks);

    let mut params = ModelParams::init(
        vertex_count,
        cfg.dim,
        cfg.z_max,
        cfg.aux_tasks,
        cfg.seed,
        embedding_init,
    )?;
    let mut checkpoint = params.clone();
    let mut best_train = f64::INFINITY;
    let mut best_val = f64::INFINITY;
    let mut adam = Adam::new(&params);
    let weights = LossWeights { alpha: cfg.alpha, lambda: cfg.lambda };
    let skip_embedding = cfg.embedding_mode.is_frozen();
    let mut log = Vec::with_capacity(cfg.max_epochs);

    let mut order: Vec<usize> = (0..train_items.len()).collect();
    let mut batch: Vec<BatchItem> = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64, 0x5348)); // "SH"
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_items[i].clone()));
            let (loss, grads) = batch_gradients(&params, &batch, weights)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    msg: format!("batch loss became {loss}"),
                });
            }
            adam.step(&mut params, &grads, cfg.learning_rate, skip_embedding);
        }
        let train_mse = similarity_mse(&params, &train_items)?;
        let val_mse = similarity_mse(&params, &val_items)?;
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::Diverged {
                epoch,
                msg: format!("epoch MSE became train={train_mse} val={val_mse}"),
            });
        }
        let mut checkpointed = false;
        if train_mse < best_train {
            best_train = train_mse;
            if val_mse < best_val {
                best_val = val_mse;
                checkpoint = params.clone();
                checkpointed = true;
            }
        }
        log.push(EpochStats { epoch, train_mse, val_mse, checkpointed });
    }

    Ok(TrainOutcome {
        model: TrainedModel {
            params: checkpoint,
            embedding_mode: cfg.embedding_mode,
            normalizer,
        },
        log,
    })
}

impl TrainedModel {
    pub fn predict_similarity(&self, path: &Path) -> Result<f64> {
        Ok(predict(&self.params, path)?.similarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    /// Index into the input candidate slice.
    pub index: usize,
    pub score: f64,
}

/// Score every candidate and order them best-first. Ties keep input order,
/// so the result is a deterministic function of (model, candidates).
pub fn predict_and_rank(model: &TrainedModel, candidates: &[Path]) -> Result<Vec<ScoredCandidate>> {
    if candidates.is_empty() {
        return Err(Error::validation("no candidates to rank"));
    }
    let mut scored: Vec<ScoredCandidate> = candidates
        .iter()
        .enumerate()
        .map(|(index, path)| {
            Ok(ScoredCandidate { index, score: model.predict_similarity(path)? })
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(scored)
}

impl PathScorer for TrainedModel {
    fn score(&self, _net: &RoadNetwork, _trajectory: &Trajectory, candidate: &Path) -> Result<f64> {
        self.predict_similarity(candidate)
    }

    fn is_similarity_estimate(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        format!(
            "bd-gru-{}d-{:?}{}",
            self.params.dim(),
            self.embedding_mode,
            if self.params.aux_tasks > 0 { "-multitask" } else { "" }
        )
    }
}
