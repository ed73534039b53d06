use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::AuxNormalizer;

use super::{EmbeddingMode, ModelParams, TrainedModel};

/// Bump when the on-disk layout changes; loads refuse other versions instead
/// of misreading tensors.
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    vertex_count: usize,
    dim: usize,
    z_max: usize,
    aux_tasks: usize,
    embedding_mode: EmbeddingMode,
    normalizer: AuxNormalizer,
    params: ModelParams,
}

/// JSON checkpoint. serde_json prints f64 with shortest-round-trip
/// formatting, so save -> load reproduces every parameter bit for bit.
pub fn save_checkpoint<W: Write>(model: &TrainedModel, w: W) -> Result<()> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        vertex_count: model.params.vertex_count(),
        dim: model.params.dim(),
        z_max: model.params.z_max,
        aux_tasks: model.params.aux_tasks,
        embedding_mode: model.embedding_mode,
        normalizer: model.normalizer.clone(),
        params: model.params.clone(),
    };
    serde_json::to_writer(w, &file)
        .map_err(|e| Error::validation(format!("checkpoint encode failed: {e}")))
}

pub fn load_checkpoint<R: Read>(r: R) -> Result<TrainedModel> {
    let file: CheckpointFile = serde_json::from_reader(r)
        .map_err(|e| Error::parse(0, format!("checkpoint decode failed: {e}")))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::parse(
            0,
            format!(
                "checkpoint version {} unsupported, this build reads version {CHECKPOINT_VERSION}",
                file.version
            ),
        ));
    }
    let p = &file.params;
    if p.vertex_count() != file.vertex_count
        || p.dim() != file.dim
        || p.z_max != file.z_max
        || p.aux_tasks != file.aux_tasks
        || p.head.nrows() != p.z_max * 2 * p.dim()
        || p.head.ncols() != 1 + p.aux_tasks
        || p.forward_gru.dim() != p.dim()
        || p.backward_gru.dim() != p.dim()
    {
        return Err(Error::parse(0, "checkpoint header disagrees with tensor shapes"));
    }
    if p.tensors().iter().any(|(_, t)| t.iter().any(|v| !v.is_finite())) {
        return Err(Error::parse(0, "checkpoint contains non-finite parameters"));
    }
    Ok(TrainedModel {
        params: file.params,
        embedding_mode: file.embedding_mode,
        normalizer: file.normalizer,
    })
}
