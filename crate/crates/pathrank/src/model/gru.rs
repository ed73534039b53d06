use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

use super::GruWeights;

fn sigmoid_inplace(a: &mut Array1<f64>) {
    a.mapv_inplace(|x| 1.0 / (1.0 + (-x).exp()));
}

/// One gated recurrent unit step:
///   r = sigmoid(W_r x + U_r h_prev)
///   z = sigmoid(W_z x + U_z h_prev)
///   h~ = tanh(W_h x + U_h (r * h_prev))
///   h = z * h_prev + (1 - z) * h~
/// The update gate z weights the previous state, its complement the
/// candidate; no bias terms anywhere.
pub fn gru_cell(w: &GruWeights, x: &Array1<f64>, h_prev: &Array1<f64>) -> Result<Array1<f64>> {
    let dim = w.dim();
    if x.len() != dim || h_prev.len() != dim {
        return Err(Error::validation(format!(
            "gru cell of dim {dim} got x of len {} and h_prev of len {}",
            x.len(),
            h_prev.len()
        )));
    }
    Ok(gru_step(w, x.clone(), h_prev.clone()).h)
}

/// Intermediate values of one step, kept for the backward pass.
pub(super) struct GruStepCache {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub r: Array1<f64>,
    pub z: Array1<f64>,
    /// r * h_prev, the input U_h actually saw.
    pub rh: Array1<f64>,
    pub h_tilde: Array1<f64>,
    pub h: Array1<f64>,
}

pub(super) fn gru_step(w: &GruWeights, x: Array1<f64>, h_prev: Array1<f64>) -> GruStepCache {
    let mut r = w.w_r.dot(&x) + w.u_r.dot(&h_prev);
    sigmoid_inplace(&mut r);
    let mut z = w.w_z.dot(&x) + w.u_z.dot(&h_prev);
    sigmoid_inplace(&mut z);
    let rh = &r * &h_prev;
    let mut h_tilde = w.w_h.dot(&x) + w.u_h.dot(&rh);
    h_tilde.mapv_inplace(f64::tanh);
    let one_minus_z = z.mapv(|v| 1.0 - v);
    let h = &z * &h_prev + &(&one_minus_z * &h_tilde);
    GruStepCache { x, h_prev, r, z, rh, h_tilde, h }
}

/// rank-1 update: target += a (outer) b, skipping zero rows.
fn add_outer(target: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai != 0.0 {
            target.row_mut(i).scaled_add(ai, b);
        }
    }
}

/// Reverse one step. `dh` is the loss gradient w.r.t. this step's output h;
/// gradients for the six weight matrices accumulate into `grads`, the
/// gradient w.r.t. x accumulates into `dx`, and the gradient w.r.t. h_prev is
/// returned so the caller can chain it into the previous step.
pub(super) fn gru_step_backward(
    w: &GruWeights,
    grads: &mut GruWeights,
    cache: &GruStepCache,
    dh: &Array1<f64>,
    dx: &mut Array1<f64>,
) -> Array1<f64> {
    let GruStepCache { x, h_prev, r, z, rh, h_tilde, .. } = cache;

    // h = z*h_prev + (1-z)*h_tilde
    let dz = dh * &(h_prev - h_tilde);
    let dht = dh * &z.mapv(|v| 1.0 - v);
    let mut dh_prev = dh * z;

    // h_tilde = tanh(a_h), a_h = W_h x + U_h rh
    let da_h = &dht * &h_tilde.mapv(|v| 1.0 - v * v);
    add_outer(&mut grads.w_h, &da_h, x);
    add_outer(&mut grads.u_h, &da_h, rh);
    *dx += &w.w_h.t().dot(&da_h);
    let drh = w.u_h.t().dot(&da_h);

    // rh = r * h_prev
    let dr = &drh * h_prev;
    dh_prev += &(&drh * r);

    // r = sigmoid(a_r), a_r = W_r x + U_r h_prev
    let da_r = &dr * &(r * &r.mapv(|v| 1.0 - v));
    add_outer(&mut grads.w_r, &da_r, x);
    add_outer(&mut grads.u_r, &da_r, h_prev);
    *dx += &w.w_r.t().dot(&da_r);
    dh_prev += &w.u_r.t().dot(&da_r);

    // z = sigmoid(a_z), a_z = W_z x + U_z h_prev
    let da_z = &dz * &(z * &z.mapv(|v| 1.0 - v));
    add_outer(&mut grads.w_z, &da_z, x);
    add_outer(&mut grads.u_z, &da_z, h_prev);
    *dx += &w.w_z.t().dot(&da_z);
    dh_prev += &w.u_z.t().dot(&da_z);

    dh_prev
}
