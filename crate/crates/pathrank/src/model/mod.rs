//! Bidirectional GRU regressor over vertex-embedding sequences, trained with
//! hand-written reverse-mode gradients (the model is small and fixed, an
//! autodiff dependency would cost more than it saves).

mod checkpoint;
mod forward;
mod gru;
mod loss;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use forward::{predict, Prediction};
pub use gru::gru_cell;
pub use loss::{batch_gradients, loss_basic, loss_multitask, BatchItem, LossWeights};
pub use train::{
    predict_and_rank, train, EpochStats, ScoredCandidate, TrainConfig, TrainOutcome, TrainedModel,
};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{derive_seed, EmbeddingMatrix};
use crate::error::{Error, Result};

/// How the vertex-embedding table inside the model is produced and treated
/// during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingMode {
    /// Seeded random table, trained end to end.
    RandomInit,
    /// Pretrained table, never updated.
    PretrainedFrozen,
    /// Pretrained table, fine-tuned end to end.
    PretrainedTrainable,
}

impl EmbeddingMode {
    pub fn uses_pretrained(&self) -> bool {
        !matches!(self, EmbeddingMode::RandomInit)
    }

    pub fn is_frozen(&self) -> bool {
        matches!(self, EmbeddingMode::PretrainedFrozen)
    }
}

/// One GRU direction's parameters; all six matrices are dim x dim. The cell
/// has no bias terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruWeights {
    pub w_r: Array2<f64>,
    pub w_z: Array2<f64>,
    pub w_h: Array2<f64>,
    pub u_r: Array2<f64>,
    pub u_z: Array2<f64>,
    pub u_h: Array2<f64>,
}

impl GruWeights {
    fn uniform(dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let span = 1.0 / (dim as f64).sqrt();
        let mut mk = || {
            let mut a = Array2::zeros((dim, dim));
            for v in a.iter_mut() {
                *v = rng.gen_range(-span..span);
            }
            a
        };
        GruWeights { w_r: mk(), w_z: mk(), w_h: mk(), u_r: mk(), u_z: mk(), u_h: mk() }
    }

    fn zeros(dim: usize) -> Self {
        let mk = || Array2::zeros((dim, dim));
        GruWeights { w_r: mk(), w_z: mk(), w_h: mk(), u_r: mk(), u_z: mk(), u_h: mk() }
    }

    pub fn dim(&self) -> usize {
        self.w_r.nrows()
    }

    fn tensors(&self) -> [(&'static str, &Array2<f64>); 6] {
        [
            ("w_r", &self.w_r),
            ("w_z", &self.w_z),
            ("w_h", &self.w_h),
            ("u_r", &self.u_r),
            ("u_z", &self.u_z),
            ("u_h", &self.u_h),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut Array2<f64>); 6] {
        [
            ("w_r", &mut self.w_r),
            ("w_z", &mut self.w_z),
            ("w_h", &mut self.w_h),
            ("u_r", &mut self.u_r),
            ("u_z", &mut self.u_z),
            ("u_h", &mut self.u_h),
        ]
    }
}

/// Where the embedding table comes from at parameter-init time.
pub enum EmbeddingInit<'a> {
    Random,
    Pretrained(&'a EmbeddingMatrix),
}

/// All learnable tensors of the regressor. Feature layout feeding the head:
/// for each padded position j the forward state then the backward state, so
/// the head has z_max * 2 * dim input rows and 1 + aux_tasks output columns
/// (similarity first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub embedding: Array2<f64>,
    pub forward_gru: GruWeights,
    pub backward_gru: GruWeights,
    pub head: Array2<f64>,
    pub z_max: usize,
    pub aux_tasks: usize,
}

impl ModelParams {
    pub fn init(
        vertex_count: usize,
        dim: usize,
        z_max: usize,
        aux_tasks: usize,
        seed: u64,
        embedding: EmbeddingInit<'_>,
    ) -> Result<Self> {
        if vertex_count == 0 || dim == 0 {
            return Err(Error::config("vertex count and dim must be >= 1"));
        }
        if z_max < 2 {
            return Err(Error::config("z_max must be >= 2, paths have at least 2 vertices"));
        }
        if aux_tasks > 3 {
            return Err(Error::config(format!(
                "at most 3 auxiliary tasks (distance, travel_time, fuel), got {aux_tasks}"
            )));
        }
        // Each tensor group draws from its own derived stream so switching
        // the embedding source does not shift the GRU/head initialization.
        let embedding = match embedding {
            EmbeddingInit::Pretrained(table) => {
                if table.vertex_count() != vertex_count || table.dim() != dim {
                    return Err(Error::validation(format!(
                        "pretrained table is {}x{}, model wants {}x{}",
                        table.vertex_count(),
                        table.dim(),
                        vertex_count,
                        dim
                    )));
                }
                table.values().clone()
            }
            EmbeddingInit::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 0));
                let span = 0.5 / dim as f64;
                let mut a = Array2::zeros((vertex_count, dim));
                for v in a.iter_mut() {
                    *v = rng.gen_range(-span..span);
                }
                a
            }
        };
        let forward_gru =
            GruWeights::uniform(dim, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 1, 0)));
        let backward_gru =
            GruWeights::uniform(dim, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 2, 0)));
        let rows = z_max * 2 * dim;
        let cols = 1 + aux_tasks;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3, 0));
        let span = 1.0 / (rows as f64).sqrt();
        let mut head = Array2::zeros((rows, cols));
        for v in head.iter_mut() {
            *v = rng.gen_range(-span..span);
        }
        Ok(ModelParams { embedding, forward_gru, backward_gru, head, z_max, aux_tasks })
    }

    pub fn vertex_count(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn dim(&self) -> usize {
        self.embedding.ncols()
    }

    /// All 14 tensors in a fixed order; gradients, Adam moments and norm
    /// sums all align with this order.
    pub fn tensors(&self) -> Vec<(&'static str, &Array2<f64>)> {
        let mut out = Vec::with_capacity(14);
        out.push(("embedding", &self.embedding));
        for (name, t) in self.forward_gru.tensors() {
            out.push((fwd_name(name), t));
        }
        for (name, t) in self.backward_gru.tensors() {
            out.push((bwd_name(name), t));
        }
        out.push(("head", &self.head));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Array2<f64>)> {
        let mut out: Vec<(&'static str, &mut Array2<f64>)> = Vec::with_capacity(14);
        out.push(("embedding", &mut self.embedding));
        for (name, t) in self.forward_gru.tensors_mut() {
            out.push((fwd_name(name), t));
        }
        for (name, t) in self.backward_gru.tensors_mut() {
            out.push((bwd_name(name), t));
        }
        out.push(("head", &mut self.head));
        out
    }

    /// Same shapes, all zeros; the container gradients accumulate into.
    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            embedding: Array2::zeros(self.embedding.raw_dim()),
            forward_gru: GruWeights::zeros(self.dim()),
            backward_gru: GruWeights::zeros(self.dim()),
            head: Array2::zeros(self.head.raw_dim()),
            z_max: self.z_max,
            aux_tasks: self.aux_tasks,
        }
    }

    /// Squared L2 norm over every tensor. One flat accumulator in
    /// `tensors()` element order, so the value is reproducible.
    pub fn l2_norm_sq(&self) -> f64 {
        let mut total = 0.0;
        for (_, t) in self.tensors() {
            for v in t.iter() {
                total += v * v;
            }
        }
        total
    }
}

fn fwd_name(name: &'static str) -> &'static str {
    match name {
        "w_r" => "fwd.w_r",
        "w_z" => "fwd.w_z",
        "w_h" => "fwd.w_h",
        "u_r" => "fwd.u_r",
        "u_z" => "fwd.u_z",
        "u_h" => "fwd.u_h",
        _ => unreachable!(),
    }
}

fn bwd_name(name: &'static str) -> &'static str {
    match name {
        "w_r" => "bwd.w_r",
        "w_z" => "bwd.w_z",
        "w_h" => "bwd.w_h",
        "u_r" => "bwd.u_r",
        "u_z" => "bwd.u_z",
        "u_h" => "bwd.u_h",
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes_and_determinism() {
        let p = ModelParams::init(10, 4, 6, 2, 7, EmbeddingInit::Random).unwrap();
        assert_eq!(p.embedding.dim(), (10, 4));
        assert_eq!(p.forward_gru.w_r.dim(), (4, 4));
        assert_eq!(p.head.dim(), (6 * 8, 3));
        assert_eq!(p.tensors().len(), 14);
        let q = ModelParams::init(10, 4, 6, 2, 7, EmbeddingInit::Random).unwrap();
        assert_eq!(p, q);
        let r = ModelParams::init(10, 4, 6, 2, 8, EmbeddingInit::Random).unwrap();
        assert_ne!(p, r);
    }

    #[test]
    fn pretrained_init_copies_table_bit_for_bit() {
        let table = EmbeddingMatrix::new(Array2::from_shape_fn((5, 3), |(i, j)| {
            (i * 3 + j) as f64 * 0.25
        }))
        .unwrap();
        let p = ModelParams::init(5, 3, 4, 0, 1, EmbeddingInit::Pretrained(&table)).unwrap();
        assert_eq!(&p.embedding, table.values());
        // GRU weights must match the random-init run with the same seed
        let q = ModelParams::init(5, 3, 4, 0, 1, EmbeddingInit::Random).unwrap();
        assert_eq!(p.forward_gru, q.forward_gru);
        assert_eq!(p.backward_gru, q.backward_gru);
        assert_eq!(p.head, q.head);
        // dimension mismatch is rejected
        assert!(ModelParams::init(6, 3, 4, 0, 1, EmbeddingInit::Pretrained(&table)).is_err());
        assert!(ModelParams::init(5, 4, 4, 0, 1, EmbeddingInit::Pretrained(&table)).is_err());
    }

    #[test]
    fn init_rejects_bad_shapes() {
        assert!(ModelParams::init(0, 4, 6, 0, 0, EmbeddingInit::Random).is_err());
        assert!(ModelParams::init(10, 0, 6, 0, 0, EmbeddingInit::Random).is_err());
        assert!(ModelParams::init(10, 4, 1, 0, 0, EmbeddingInit::Random).is_err());
        assert!(ModelParams::init(10, 4, 6, 4, 0, EmbeddingInit::Random).is_err());
    }

    #[test]
    fn l2_norm_matches_direct_sum() {
        let p = ModelParams::init(6, 3, 4, 1, 3, EmbeddingInit::Random).unwrap();
        let mut by_hand = 0.0;
        for (_, t) in p.tensors() {
            for v in t.iter() {
                by_hand += v * v;
            }
        }
        assert_eq!(p.l2_norm_sq(), by_hand);
        assert_eq!(p.zeros_like().l2_norm_sq(), 0.0);
    }
}
