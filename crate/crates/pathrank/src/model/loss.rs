use ndarray::Array1;

use crate::error::{Error, Result};
use crate::pathfinding::Path;

use super::forward::{backward_traced, forward_traced, zeros_dout};
use super::ModelParams;

/// One training example as the optimizer sees it: the label in [0, 1] and
/// already-normalized auxiliary targets, truncated to the model's task count.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub path: Path,
    pub label: f64,
    pub aux_targets: Vec<f64>,
}

/// Mixing and regularization constants of the training objective.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    /// Weight of the auxiliary term; 0 disables it, the similarity term gets
    /// 1 - alpha.
    pub alpha: f64,
    /// L2 coefficient over every learnable tensor.
    pub lambda: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

fn check_batch(params: &ModelParams, items: &[BatchItem], need_aux: bool) -> Result<()> {
    if items.is_empty() {
        return Err(Error::validation("loss over an empty batch"));
    }
    if need_aux {
        for item in items {
            if item.aux_targets.len() != params.aux_tasks {
                return Err(Error::validation(format!(
                    "item carries {} aux targets, model has {} tasks",
                    item.aux_targets.len(),
                    params.aux_tasks
                )));
            }
        }
    }
    Ok(())
}

/// Shared accumulation for both objectives. Returns (sim_sq_sum, aux_sq_sum)
/// where each is a plain sum of squared residuals over the batch; `alpha`
/// only scales these outside, so the basic loss is exactly the multitask
/// loss at alpha = 0.
fn residual_sums(params: &ModelParams, items: &[BatchItem], with_aux: bool) -> Result<(f64, f64)> {
    let mut sim_sq = 0.0;
    let mut aux_sq = 0.0;
    for item in items {
        let (pred, _) = forward_traced(params, &item.path)?;
        let d = pred.similarity - item.label;
        sim_sq += d * d;
        if with_aux {
            for (est, target) in pred.aux.iter().zip(&item.aux_targets) {
                let d = est - target;
                aux_sq += d * d;
            }
        }
    }
    Ok((sim_sq, aux_sq))
}

/// Mean squared similarity error plus lambda * ||params||^2. Agrees with
/// `loss_multitask` at alpha = 0 bit for bit: (1-0)*s + 0*a == s exactly for
/// the finite non-negative sums involved.
pub fn loss_basic(params: &ModelParams, items: &[BatchItem], lambda: f64) -> Result<f64> {
    LossWeights { alpha: 0.0, lambda }.validate()?;
    check_batch(params, items, false)?;
    let (sim_sq, _) = residual_sums(params, items, false)?;
    Ok(sim_sq / items.len() as f64 + lambda * params.l2_norm_sq())
}

/// (1/n) [ (1-alpha) sum (s_hat - s)^2 + alpha sum_i sum_k (y_hat - y)^2 ]
/// plus lambda * ||params||^2.
pub fn loss_multitask(
    params: &ModelParams,
    items: &[BatchItem],
    weights: LossWeights,
) -> Result<f64> {
    weights.validate()?;
    check_batch(params, items, true)?;
    let (sim_sq, aux_sq) = residual_sums(params, items, true)?;
    let n = items.len() as f64;
    Ok(((1.0 - weights.alpha) * sim_sq + weights.alpha * aux_sq) / n
        + weights.lambda * params.l2_norm_sq())
}

/// Loss and gradients of the multitask objective over one batch. Gradients
/// come back in a `ModelParams`-shaped container aligned with
/// [`ModelParams::tensors`]. `loss_basic` gradients are the alpha = 0 case.
pub fn batch_gradients(
    params: &ModelParams,
    items: &[BatchItem],
    weights: LossWeights,
) -> Result<(f64, ModelParams)> {
    weights.validate()?;
    check_batch(params, items, true)?;
    let n = items.len() as f64;
    let mut grads = params.zeros_like();
    let mut sim_sq = 0.0;
    let mut aux_sq = 0.0;
    for item in items {
        let (pred, trace) = forward_traced(params, &item.path)?;
        let mut dout: Array1<f64> = zeros_dout(params);
        let d = pred.similarity - item.label;
        sim_sq += d * d;
        dout[0] = 2.0 * (1.0 - weights.alpha) / n * d;
        for (k, (est, target)) in pred.aux.iter().zip(&item.aux_targets).enumerate() {
            let d = est - target;
            aux_sq += d * d;
            dout[1 + k] = 2.0 * weights.alpha / n * d;
        }
        backward_traced(params, &trace, &dout, &mut grads);
    }
    // d/dtheta lambda ||theta||^2 = 2 lambda theta
    if weights.lambda != 0.0 {
        for ((_, g), (_, t)) in grads.tensors_mut().into_iter().zip(params.tensors()) {
            g.scaled_add(2.0 * weights.lambda, t);
        }
    }
    let loss = ((1.0 - weights.alpha) * sim_sq + weights.alpha * aux_sq) / n
        + weights.lambda * params.l2_norm_sq();
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::{predict, EmbeddingInit};
    use crate::network::VertexId;

    fn path(ids: &[u32]) -> Path {
        Path::new(ids.iter().map(|&i| VertexId(i)).collect()).unwrap()
    }

    fn params(aux_tasks: usize) -> ModelParams {
        ModelParams::init(8, 3, 4, aux_tasks, 5, EmbeddingInit::Random).unwrap()
    }

    fn items(m: usize) -> Vec<BatchItem> {
        vec![
            BatchItem { path: path(&[0, 1, 2]), label: 0.9, aux_targets: vec![0.3; m] },
            BatchItem { path: path(&[0, 4]), label: 0.1, aux_targets: vec![-1.2; m] },
            BatchItem { path: path(&[5, 3, 2, 7]), label: 0.5, aux_targets: vec![0.0; m] },
        ]
    }

    #[test]
    fn basic_loss_matches_hand_computation() {
        let p = params(0);
        let batch = items(0);
        let mut expect = 0.0;
        for item in &batch {
            let d = predict(&p, &item.path).unwrap().similarity - item.label;
            expect += d * d;
        }
        expect /= batch.len() as f64;
        let got = loss_basic(&p, &batch, 0.0).unwrap();
        assert!((got - expect).abs() < 1e-15);
        let with_reg = loss_basic(&p, &batch, 0.01).unwrap();
        assert!((with_reg - (expect + 0.01 * p.l2_norm_sq())).abs() < 1e-15);
    }

    #[test]
    fn multitask_at_alpha_zero_is_bitwise_basic() {
        let p = params(2);
        let batch = items(2);
        for lambda in [0.0, 1e-4, 0.3] {
            let basic = loss_basic(&p, &batch, lambda).unwrap();
            let multi =
                loss_multitask(&p, &batch, LossWeights { alpha: 0.0, lambda }).unwrap();
            assert_eq!(basic.to_bits(), multi.to_bits());
        }
    }

    #[test]
    fn alpha_trades_terms_off() {
        let p = params(2);
        let batch = items(2);
        let w = |alpha| LossWeights { alpha, lambda: 0.0 };
        let l0 = loss_multitask(&p, &batch, w(0.0)).unwrap();
        let l1 = loss_multitask(&p, &batch, w(1.0)).unwrap();
        let lmid = loss_multitask(&p, &batch, w(0.4)).unwrap();
        assert!((lmid - (0.6 * l0 + 0.4 * l1)).abs() < 1e-12, "loss is affine in alpha");
    }

    #[test]
    fn loss_rejects_bad_inputs() {
        let p = params(2);
        assert!(loss_basic(&p, &[], 0.0).is_err());
        let wrong_aux =
            vec![BatchItem { path: path(&[0, 1]), label: 0.5, aux_targets: vec![0.0] }];
        assert!(
            loss_multitask(&p, &wrong_aux, LossWeights { alpha: 0.5, lambda: 0.0 }).is_err()
        );
        assert!(
            loss_multitask(&p, &items(2), LossWeights { alpha: 1.5, lambda: 0.0 }).is_err()
        );
        assert!(
            loss_multitask(&p, &items(2), LossWeights { alpha: 0.5, lambda: -1.0 }).is_err()
        );
    }

    #[test]
    fn gradient_loss_value_matches_loss_fn() {
        let p = params(2);
        let batch = items(2);
        let w = LossWeights { alpha: 0.3, lambda: 1e-3 };
        let (loss, grads) = batch_gradients(&p, &batch, w).unwrap();
        let direct = loss_multitask(&p, &batch, w).unwrap();
        assert!((loss - direct).abs() < 1e-15);
        // gradients are not all zero
        let total: f64 = grads.tensors().iter().map(|(_, t)| t.iter().map(|v| v.abs()).sum::<f64>()).sum();
        assert!(total > 0.0);
    }
}
