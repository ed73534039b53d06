use ndarray::Array1;

use crate::error::{Error, Result};
use crate::pathfinding::Path;

use super::gru::{gru_step, gru_step_backward, GruStepCache};
use super::ModelParams;

/// Regressor output: the similarity estimate plus one value per auxiliary
/// cost task (normalized scale).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub similarity: f64,
    pub aux: Vec<f64>,
}

/// Everything the backward pass needs from one forward run.
pub(super) struct ForwardTrace {
    /// Embedding rows consumed per real (non-padding) position.
    vertex_rows: Vec<usize>,
    fwd_steps: Vec<GruStepCache>,
    bwd_steps: Vec<GruStepCache>,
    features: Array1<f64>,
}

fn check_path(params: &ModelParams, path: &Path) -> Result<()> {
    if path.len() > params.z_max {
        return Err(Error::validation(format!(
            "path visits {} vertices but the model was built for at most {}; retrain with a \
             larger z_max",
            path.len(),
            params.z_max
        )));
    }
    for v in path.vertices() {
        if (v.0 as usize) >= params.vertex_count() {
            return Err(Error::validation(format!(
                "vertex {v} outside the model's vertex table 0..{}",
                params.vertex_count()
            )));
        }
    }
    Ok(())
}

/// Run the bidirectional GRU over the zero-padded embedding sequence and
/// apply the linear head. Padding positions feed zero vectors but their
/// hidden states still reach the head, keeping the feature layout fixed.
pub(super) fn forward_traced(params: &ModelParams, path: &Path) -> Result<(Prediction, ForwardTrace)> {
    check_path(params, path)?;
    let m = params.dim();
    let z_max = params.z_max;
    let len = path.len();

    let x_at = |j: usize| -> Array1<f64> {
        if j < len {
            params.embedding.row(path.vertices()[j].0 as usize).to_owned()
        } else {
            Array1::zeros(m)
        }
    };

    let mut fwd_steps = Vec::with_capacity(z_max);
    let mut h = Array1::zeros(m);
    for j in 0..z_max {
        let step = gru_step(&params.forward_gru, x_at(j), h);
        h = step.h.clone();
        fwd_steps.push(step);
    }

    // Backward direction walks positions from the end; bwd_steps ends up
    // indexed by position j like fwd_steps.
    let mut bwd_steps: Vec<GruStepCache> = Vec::with_capacity(z_max);
    let mut h = Array1::zeros(m);
    for j in (0..z_max).rev() {
        let step = gru_step(&params.backward_gru, x_at(j), h);
        h = step.h.clone();
        bwd_steps.push(step);
    }
    bwd_steps.reverse();

    let mut features = Array1::zeros(z_max * 2 * m);
    for j in 0..z_max {
        features.slice_mut(ndarray::s![j * 2 * m..j * 2 * m + m]).assign(&fwd_steps[j].h);
        features
            .slice_mut(ndarray::s![j * 2 * m + m..(j + 1) * 2 * m])
            .assign(&bwd_steps[j].h);
    }
    let out = params.head.t().dot(&features);
    let prediction = Prediction { similarity: out[0], aux: out.iter().skip(1).copied().collect() };
    let trace = ForwardTrace {
        vertex_rows: path.vertices().iter().map(|v| v.0 as usize).collect(),
        fwd_steps,
        bwd_steps,
        features,
    };
    Ok((prediction, trace))
}

pub fn predict(params: &ModelParams, path: &Path) -> Result<Prediction> {
    forward_traced(params, path).map(|(p, _)| p)
}

/// Accumulate gradients of `dout . out` into `grads` given one traced
/// forward run. `dout` has one entry per head output.
pub(super) fn backward_traced(
    params: &ModelParams,
    trace: &ForwardTrace,
    dout: &Array1<f64>,
    grads: &mut ModelParams,
) {
    let m = params.dim();
    let z_max = params.z_max;

    // head: out = head^T f
    for (i, &fi) in trace.features.iter().enumerate() {
        if fi != 0.0 {
            grads.head.row_mut(i).scaled_add(fi, dout);
        }
    }
    let dfeatures: Array1<f64> = params.head.dot(dout);

    let mut dxs: Vec<Array1<f64>> = (0..z_max).map(|_| Array1::zeros(m)).collect();

    // forward direction: last step first
    let mut carry = Array1::zeros(m);
    for j in (0..z_max).rev() {
        let dh = &dfeatures.slice(ndarray::s![j * 2 * m..j * 2 * m + m]) + &carry;
        carry = gru_step_backward(
            &params.forward_gru,
            &mut grads.forward_gru,
            &trace.fwd_steps[j],
            &dh,
            &mut dxs[j],
        );
    }

    // backward direction processed positions z_max-1 .. 0, so its BPTT runs
    // j ascending with the carry flowing towards higher j.
    let mut carry = Array1::zeros(m);
    for (j, dx) in dxs.iter_mut().enumerate() {
        let dh = &dfeatures.slice(ndarray::s![j * 2 * m + m..(j + 1) * 2 * m]) + &carry;
        carry = gru_step_backward(
            &params.backward_gru,
            &mut grads.backward_gru,
            &trace.bwd_steps[j],
            &dh,
            dx,
        );
    }

    // embedding rows: padding positions used constant zeros, not table rows,
    // so only real positions feed back.
    for (j, &row) in trace.vertex_rows.iter().enumerate() {
        grads.embedding.row_mut(row).scaled_add(1.0, &dxs[j]);
    }
}

pub(super) fn zeros_dout(params: &ModelParams) -> Array1<f64> {
    Array1::zeros(1 + params.aux_tasks)
}
