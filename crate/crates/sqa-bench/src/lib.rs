//! Shared fixtures for the criterion benches.

use sqa_core::{AttentionConfig, AttentionParams, SeededRng, Tensor};

pub const D_MODEL: usize = 256;
pub const H: usize = 16;

/// The standard comparison set at `d_model = 256`, `H = 16`.
pub fn variant_configs() -> Vec<(&'static str, AttentionConfig)> {
    vec![
        ("MHA", AttentionConfig::new(D_MODEL, H, 16, 16).unwrap()),
        ("GQA", AttentionConfig::new(D_MODEL, H, 16, 4).unwrap()),
        ("MQA", AttentionConfig::new(D_MODEL, H, 16, 1).unwrap()),
        ("sSQA", AttentionConfig::new(D_MODEL, H, 8, 8).unwrap()),
        ("SQA", AttentionConfig::new(D_MODEL, H, 8, 4).unwrap()),
        ("xSQA", AttentionConfig::new(D_MODEL, H, 4, 4).unwrap()),
    ]
}

/// Deterministic f32 input of shape `[n, D_MODEL]`.
pub fn seeded_input_f32(n: usize, seed: u64) -> Tensor<f32> {
    let x: Tensor<f64> =
        Tensor::seeded_uniform(vec![n, D_MODEL], &mut SeededRng::new(seed), 1).unwrap();
    x.cast()
}

/// Deterministic f32 parameters for a config.
pub fn seeded_params_f32(cfg: &AttentionConfig, seed: u64) -> AttentionParams<f32> {
    let p: AttentionParams = AttentionParams::init(cfg, &mut SeededRng::new(seed)).unwrap();
    p.cast()
}
