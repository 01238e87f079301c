//! Closed-form FLOP and memory accounting for one forward pass.
//!
//! Conventions, fixed here and relied on by the tests:
//! - a multiply-add counts as 2 FLOPs;
//! - softmax costs [`SOFTMAX_FLOPS_PER_ELEMENT`] per computed element
//!   (exp, subtract-max, sum, divide, compare);
//! - the scale-by-1/sqrt(d) multiply is not counted (sub-percent term);
//! - `Dense` counting charges what a dense kernel executes: full `N x N`
//!   scores for unwindowed masks (causal positions are computed and then
//!   discarded by the sentinel), and a fixed `min(N, span)` row width for
//!   windowed masks. `Effective` charges only mask-allowed positions.

use serde::{Deserialize, Serialize};

use crate::attention::kv_cache_size;
use crate::config::{AttentionConfig, MaskMode};
use crate::error::{Error, Result};

/// Softmax cost constant per computed element.
pub const SOFTMAX_FLOPS_PER_ELEMENT: u64 = 5;

/// Which score positions to charge for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountingMode {
    /// What a dense (or fixed-width windowed) kernel actually executes.
    Dense,
    /// Only positions the mask allows.
    Effective,
}

/// Per-component floating-point-operation counts for one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopReport {
    pub qkv_projection_flops: u64,
    pub score_flops: u64,
    pub aggregation_flops: u64,
    pub output_projection_flops: u64,
    pub softmax_flops: u64,
    pub total: u64,
}

/// Dense-counting FLOP report (`CountingMode::Dense`).
pub fn attention_flops(cfg: &AttentionConfig, n: usize) -> Result<FlopReport> {
    attention_flops_with_mode(cfg, n, CountingMode::Dense)
}

pub fn attention_flops_with_mode(
    cfg: &AttentionConfig,
    n: usize,
    mode: CountingMode,
) -> Result<FlopReport> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("sequence length must be >= 1".into()));
    }
    let nn = n as u64;
    let d = cfg.d_head as u64;
    let dm = cfg.d_model as u64;
    let hq = cfg.h_q as u64;
    let hkv = cfg.h_kv as u64;
    let eff = cfg.effective_heads() as u64;

    let positions = score_positions(cfg.mask, n, mode);

    let qkv_projection_flops = 2 * nn * dm * (hq + 2 * hkv) * d;
    let score_flops = 2 * eff * positions * d;
    let aggregation_flops = 2 * eff * positions * d;
    let output_projection_flops = 2 * nn * (eff * d) * dm;
    let softmax_flops = SOFTMAX_FLOPS_PER_ELEMENT * eff * positions;
    let total = qkv_projection_flops
        + score_flops
        + aggregation_flops
        + output_projection_flops
        + softmax_flops;
    Ok(FlopReport {
        qkv_projection_flops,
        score_flops,
        aggregation_flops,
        output_projection_flops,
        softmax_flops,
        total,
    })
}

/// Number of charged score positions per head.
fn score_positions(mask: MaskMode, n: usize, mode: CountingMode) -> u64 {
    let nn = n as u64;
    match mode {
        CountingMode::Dense => match mask {
            MaskMode::None | MaskMode::Causal => nn * nn,
            windowed => nn * windowed.span(n) as u64,
        },
        CountingMode::Effective => match mask {
            MaskMode::None => nn * nn,
            MaskMode::Causal => nn * (nn + 1) / 2,
            MaskMode::Sliding(k) => {
                let half = k / 2;
                (0..n)
                    .map(|i| ((i + half).min(n - 1) - i.saturating_sub(half) + 1) as u64)
                    .sum()
            }
            MaskMode::CausalSliding(k) => {
                let kk = k.min(n) as u64;
                // Rows 0..k-1 ramp up, the rest see a full window.
                kk * (kk + 1) / 2 + (nn - kk) * kk
            }
        },
    }
}

/// Eq. of the family's headline claim: reducing query heads from `h` to
/// `h_q` shrinks the quadratic attention terms by exactly `h / h_q`.
pub fn theoretical_speedup(h: usize, h_q: usize) -> Result<f64> {
    if h == 0 || h_q == 0 {
        return Err(Error::InvalidArgument("head counts must be >= 1".into()));
    }
    if h_q > h {
        return Err(Error::InvalidArgument(format!(
            "H_q={h_q} must not exceed H={h}"
        )));
    }
    Ok(h as f64 / h_q as f64)
}

/// Byte-level memory footprint of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryReport {
    /// Key/value state for `n` tokens: `2 * n * h_kv * d_head * bytes`.
    pub kv_cache_bytes: u64,
    /// Live activations, assuming the per-head streaming schedule the
    /// forward pass uses (one head's `N x N` scores and weights at a time):
    /// projected q/k/v, the repeated side, one pair of score/weight
    /// buffers, the merged head outputs, and the final output.
    pub activation_bytes: u64,
}

pub fn memory_report(cfg: &AttentionConfig, n: usize, bytes_per_element: usize) -> Result<MemoryReport> {
    cfg.validate()?;
    if n == 0 || bytes_per_element == 0 {
        return Err(Error::InvalidArgument(
            "sequence length and element size must be >= 1".into(),
        ));
    }
    let nn = n as u64;
    let d = cfg.d_head as u64;
    let eff = cfg.effective_heads() as u64;
    let projected = nn * d * (cfg.h_q as u64 + 2 * cfg.h_kv as u64);
    let repeated = if cfg.is_reverse() {
        nn * eff * d
    } else {
        2 * nn * eff * d
    };
    let scores_and_weights = 2 * nn * nn;
    let outputs = nn * eff * d + nn * cfg.d_model as u64;
    let elements = projected + repeated + scores_and_weights + outputs;
    Ok(MemoryReport {
        kv_cache_bytes: kv_cache_size(cfg, n, bytes_per_element),
        activation_bytes: elements * bytes_per_element as u64,
    })
}
