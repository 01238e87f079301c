//! Learnability smoke test: fit one attention layer to a fixed random
//! input-to-target regression by plain gradient descent.

use sqa_core::{
    sqa_backward, sqa_forward_cached, AttentionConfig, AttentionParams, SeededRng, Tensor,
};

use crate::error::{HarnessError, Result};

/// Sequence length of the fixed regression problem.
pub const TOY_TRAIN_SEQ_LEN: usize = 16;

/// Run `steps` of gradient descent at rate `lr` and return the per-step
/// mean-squared losses (loss is recorded before each update, so entry 0 is
/// the loss of the initial parameters). Deterministic per seed.
pub fn toy_train(
    cfg: &AttentionConfig,
    steps: usize,
    lr: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(HarnessError::Spec("steps must be >= 1".into()));
    }
    cfg.validate()?;
    let root = SeededRng::new(seed);
    let mut params: AttentionParams =
        AttentionParams::init(cfg, &mut root.fork(1))?;
    let n = TOY_TRAIN_SEQ_LEN;
    let x: Tensor = Tensor::seeded_uniform(vec![n, cfg.d_model], &mut root.fork(2), 1)?;
    let target: Tensor = Tensor::seeded_uniform(vec![n, cfg.d_model], &mut root.fork(3), 1)?;
    let count = (n * cfg.d_model) as f64;

    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let (y, cache) = sqa_forward_cached(&x, &params, cfg)?;
        let residual: Vec<f64> = y
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| a - b)
            .collect();
        let loss = residual.iter().map(|r| r * r).sum::<f64>() / count;
        if !loss.is_finite() {
            return Err(HarnessError::Diverged { step });
        }
        losses.push(loss);

        // d(mean squared error)/dy = 2 (y - target) / count.
        let dy = Tensor::from_vec(
            vec![n, cfg.d_model],
            residual.iter().map(|r| 2.0 * r / count).collect(),
        )?;
        let grads = sqa_backward(&cache, &params, cfg, &dy)?;
        params = AttentionParams {
            w_q: grads.dw_q.scale_add(-lr, &params.w_q)?,
            w_k: grads.dw_k.scale_add(-lr, &params.w_k)?,
            w_v: grads.dw_v.scale_add(-lr, &params.w_v)?,
            w_o: grads.dw_o.scale_add(-lr, &params.w_o)?,
        };
    }
    Ok(losses)
}
