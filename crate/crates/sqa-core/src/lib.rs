//! Attention-variant computation library.
//!
//! Implements the reduced-query-head attention family and its ancestors
//! (full multi-head, single-KV, grouped-KV) behind one configuration type,
//! with exact analytic backward passes, a closed-form FLOP/memory cost
//! model, and a deliberately slow scalar oracle for ground truth.
//!
//! Organization:
//! - [`tensor`]: dense row-major kernels (matmul, stable softmax, head
//!   reshaping, seeded init);
//! - [`config`]: the `(d_model, H, H_q, H_kv, d_head, mask)` tuple, variant
//!   taxonomy, and JSON wire format;
//! - [`attention`]: forward/backward passes, masks, head repetition,
//!   gradient checking, KV-cache sizing;
//! - [`oracle`]: scalar-loop reference forward and diff reporting;
//! - [`flops`]: FLOP and activation-memory accounting.

pub mod attention;
pub mod config;
pub mod error;
pub mod flops;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use attention::{
    attention_head, build_mask, grad_check, kv_cache_size, repeat_heads, repeat_heads_backward,
    sqa_backward, sqa_forward, sqa_forward_cached, AttentionParams, ForwardCache, Gradients,
};
pub use config::{AttentionConfig, MaskMode, VariantTag};
pub use error::{Error, Result};
pub use flops::{
    attention_flops, attention_flops_with_mode, memory_report, theoretical_speedup, CountingMode,
    FlopReport, MemoryReport, SOFTMAX_FLOPS_PER_ELEMENT,
};
pub use oracle::{count_scalar_muls, diff_report, naive_forward, DiffReport, OpCounts};
pub use rng::SeededRng;
pub use scalar::Scalar;
pub use tensor::{Tensor, MASK_SENTINEL};
