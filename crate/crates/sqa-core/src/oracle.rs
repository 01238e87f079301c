//! Deliberately slow reference implementation used as ground truth.
//!
//! Everything here is written with explicit scalar loops and direct group
//! indexing (no repetition tensors, no shared matmul/softmax kernels), so
//! agreement with the attention module is evidence rather than tautology.
//! The only shared code is the `Tensor` container itself. Always runs in
//! 64-bit precision and single-threaded.

use crate::config::{AttentionConfig, MaskMode};
use crate::error::{Error, Result};
use crate::flops::CountingMode;
use crate::tensor::{Tensor, MASK_SENTINEL};

/// Independent mask predicate (the attention module builds sentinel tensors
/// from its own copy of these rules).
fn allowed(mode: MaskMode, i: usize, j: usize) -> bool {
    match mode {
        MaskMode::None => true,
        MaskMode::Causal => j <= i,
        MaskMode::Sliding(k) => (j as i64 - i as i64).unsigned_abs() as usize <= k / 2,
        MaskMode::CausalSliding(k) => j <= i && j + k > i,
    }
}

/// Scalar-loop forward pass over the full variant family, including the
/// reverse regime and every mask mode.
pub fn naive_forward(
    x: &Tensor,
    params: &crate::attention::AttentionParams,
    cfg: &AttentionConfig,
) -> Result<Tensor> {
    cfg.validate()?;
    let n = match x.shape() {
        [n, dm] if *dm == cfg.d_model => *n,
        _ => {
            return Err(Error::InvalidShape {
                op: "naive_forward",
                detail: format!("input must be [N, {}]", cfg.d_model),
                shape: x.shape().to_vec(),
            })
        }
    };
    let dm = cfg.d_model;
    let d = cfg.d_head;
    let (hq, hkv) = (cfg.h_q, cfg.h_kv);
    let eff = cfg.effective_heads();
    let group = cfg.repetition_factor();
    let reverse = cfg.is_reverse();

    for (name, w, rows, cols) in [
        ("w_q", &params.w_q, dm, hq * d),
        ("w_k", &params.w_k, dm, hkv * d),
        ("w_v", &params.w_v, dm, hkv * d),
        ("w_o", &params.w_o, eff * d, dm),
    ] {
        if w.shape() != [rows, cols] {
            return Err(Error::InvalidShape {
                op: "naive_forward",
                detail: format!("{name} must be [{rows}, {cols}]"),
                shape: w.shape().to_vec(),
            });
        }
    }

    let xd = x.data();
    let wq = params.w_q.data();
    let wk = params.w_k.data();
    let wv = params.w_v.data();
    let wo = params.w_o.data();

    // Projections, elementwise.
    let mut q = vec![0.0f64; n * hq * d];
    for i in 0..n {
        for a in 0..hq * d {
            let mut s = 0.0;
            for m in 0..dm {
                s += xd[i * dm + m] * wq[m * (hq * d) + a];
            }
            q[i * hq * d + a] = s;
        }
    }
    let mut k = vec![0.0f64; n * hkv * d];
    let mut v = vec![0.0f64; n * hkv * d];
    for i in 0..n {
        for a in 0..hkv * d {
            let mut sk = 0.0;
            let mut sv = 0.0;
            for m in 0..dm {
                sk += xd[i * dm + m] * wk[m * (hkv * d) + a];
                sv += xd[i * dm + m] * wv[m * (hkv * d) + a];
            }
            k[i * hkv * d + a] = sk;
            v[i * hkv * d + a] = sv;
        }
    }

    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let mut concat = vec![0.0f64; n * eff * d];

    for he in 0..eff {
        // Which projected head feeds this effective head: in the normal
        // regime each group of `group` effective heads shares one kv head;
        // in reverse, each group shares one query head.
        let (q_src, kv_src) = if reverse {
            (he / group, he)
        } else {
            (he, he / group)
        };

        for i in 0..n {
            // Scores for row i, masked additively, then softmaxed in place.
            let mut scores = vec![0.0f64; n];
            let mut row_max = f64::NEG_INFINITY;
            for (j, slot) in scores.iter_mut().enumerate() {
                let mut dot = 0.0;
                for c in 0..d {
                    dot += q[i * hq * d + q_src * d + c] * k[j * hkv * d + kv_src * d + c];
                }
                let mut logit = dot * inv_sqrt_d;
                if !allowed(cfg.mask, i, j) {
                    logit += MASK_SENTINEL;
                }
                *slot = logit;
                if logit > row_max {
                    row_max = logit;
                }
            }
            if row_max <= MASK_SENTINEL * 0.5 {
                return Err(Error::FullyMaskedRow { row: i });
            }
            let mut sum = 0.0;
            for slot in scores.iter_mut() {
                *slot = (*slot - row_max).exp();
                sum += *slot;
            }
            for slot in scores.iter_mut() {
                *slot /= sum;
            }
            // Aggregate values.
            for c in 0..d {
                let mut acc = 0.0;
                for (j, w) in scores.iter().enumerate() {
                    acc += w * v[j * hkv * d + kv_src * d + c];
                }
                concat[i * eff * d + he * d + c] = acc;
            }
        }
    }

    // Output projection.
    let mut y = vec![0.0f64; n * dm];
    for i in 0..n {
        for m in 0..dm {
            let mut s = 0.0;
            for a in 0..eff * d {
                s += concat[i * eff * d + a] * wo[a * dm + m];
            }
            y[i * dm + m] = s;
        }
    }
    Tensor::from_vec(vec![n, dm], y)
}

/// Elementwise comparison summary of two equally shaped tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffReport {
    pub max_abs: f64,
    pub max_rel: f64,
    /// Flat row-major index where the largest absolute difference occurs.
    pub argmax: usize,
}

/// Relative differences use denominator `max(|a|, |b|, 1e-30)`.
pub fn diff_report(a: &Tensor, b: &Tensor) -> Result<DiffReport> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op: "diff_report",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let mut report = DiffReport {
        max_abs: 0.0,
        max_rel: 0.0,
        argmax: 0,
    };
    for (idx, (&x, &y)) in a.data().iter().zip(b.data()).enumerate() {
        let abs = (x - y).abs();
        let rel = abs / x.abs().max(y.abs()).max(1e-30);
        if abs > report.max_abs {
            report.max_abs = abs;
            report.argmax = idx;
        }
        if rel > report.max_rel {
            report.max_rel = rel;
        }
    }
    Ok(report)
}

/// Scalar multiply and softmax-element counts from one forward pass,
/// tallied by walking the kernel's loop structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts {
    pub qkv_projection_muls: u64,
    pub score_muls: u64,
    pub aggregation_muls: u64,
    pub output_projection_muls: u64,
    pub softmax_elements: u64,
}

/// Enumerate the multiplies an attention kernel performs at sequence length
/// `n`, by running the loops and counting rather than by closed form.
///
/// `Dense` counts what a dense kernel executes: every score position for
/// unwindowed masks (causal positions are computed, then discarded by the
/// sentinel), and a fixed `min(n, span)` row width for windowed masks (the
/// windowed-kernel convention: boundary rows are padded to full width).
/// `Effective` counts only positions the mask actually allows.
pub fn count_scalar_muls(cfg: &AttentionConfig, n: usize, mode: CountingMode) -> Result<OpCounts> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("sequence length must be >= 1".into()));
    }
    let d = cfg.d_head;
    let dm = cfg.d_model;
    let eff = cfg.effective_heads();
    let mut counts = OpCounts::default();

    for _i in 0..n {
        for _a in 0..cfg.h_q * d {
            for _m in 0..dm {
                counts.qkv_projection_muls += 1;
            }
        }
        for _a in 0..2 * cfg.h_kv * d {
            for _m in 0..dm {
                counts.qkv_projection_muls += 1;
            }
        }
    }

    for _he in 0..eff {
        for i in 0..n {
            let positions: Vec<usize> = match mode {
                CountingMode::Dense => match cfg.mask {
                    MaskMode::None | MaskMode::Causal => (0..n).collect(),
                    windowed => (0..windowed.span(n)).collect(),
                },
                CountingMode::Effective => (0..n).filter(|&j| allowed(cfg.mask, i, j)).collect(),
            };
            for _j in &positions {
                for _c in 0..d {
                    counts.score_muls += 1;
                }
                counts.softmax_elements += 1;
                for _c in 0..d {
                    counts.aggregation_muls += 1;
                }
            }
        }
    }

    for _i in 0..n {
        for _m in 0..dm {
            for _a in 0..eff * d {
                counts.output_projection_muls += 1;
            }
        }
    }

    Ok(counts)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::attention::AttentionParams;
    use crate::rng::SeededRng;

    #[test]
    fn single_position_without_mask_is_projected_value() {
        // Softmax of a 1x1 score matrix is 1, so the output is the value
        // projection row passed through w_o.
        let cfg = AttentionConfig::new(16, 4, 2, 1).unwrap();
        let params = AttentionParams::init(&cfg, &mut SeededRng::new(40)).unwrap();
        let x = Tensor::seeded_uniform(vec![1, 16], &mut SeededRng::new(41), 1).unwrap();
        let y = naive_forward(&x, &params, &cfg).unwrap();

        // v row through w_o, by hand: v has one kv head, repeated over the
        // two effective heads.
        let mut v = [0.0; 4];
        for a in 0..4 {
            for m in 0..16 {
                v[a] += x.data()[m] * params.w_v.data()[m * 4 + a];
            }
        }
        for m in 0..16 {
            let mut s = 0.0;
            for he in 0..2 {
                for c in 0..4 {
                    s += v[c] * params.w_o.data()[(he * 4 + c) * 16 + m];
                }
            }
            assert!((y.data()[m] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn diff_report_identical_tensors() {
        let a = Tensor::seeded_uniform(vec![3, 3], &mut SeededRng::new(50), 1).unwrap();
        let r = diff_report(&a, &a).unwrap();
        assert_eq!(r, DiffReport { max_abs: 0.0, max_rel: 0.0, argmax: 0 });
    }

    #[test]
    fn diff_report_locates_single_perturbation() {
        let a = Tensor::from_vec(vec![2, 3], vec![1.0; 6]).unwrap();
        let mut data = a.data().to_vec();
        data[4] += 1e-6;
        let b = Tensor::from_vec(vec![2, 3], data).unwrap();
        let r = diff_report(&a, &b).unwrap();
        assert_eq!(r.argmax, 4);
        assert!((r.max_abs - 1e-6).abs() < 1e-12);
        // Unit data: relative difference is about 1e-6 too.
        assert!((r.max_rel - 1e-6).abs() < 1e-9);
    }

    #[test]
    fn diff_report_rejects_shape_mismatch() {
        let a = Tensor::<f64>::zeros(vec![2, 2]).unwrap();
        let b = Tensor::<f64>::zeros(vec![4]).unwrap();
        assert!(diff_report(&a, &b).is_err());
    }

    #[test]
    fn census_dense_vs_effective_causal() {
        let cfg = AttentionConfig::new(16, 4, 4, 4)
            .unwrap()
            .with_mask(MaskMode::Causal)
            .unwrap();
        let dense = count_scalar_muls(&cfg, 8, CountingMode::Dense).unwrap();
        let eff = count_scalar_muls(&cfg, 8, CountingMode::Effective).unwrap();
        // Dense computes all 64 positions per head; effective only the
        // lower triangle (36 of them).
        assert_eq!(dense.softmax_elements, 4 * 64);
        assert_eq!(eff.softmax_elements, 4 * 36);
        assert_eq!(dense.qkv_projection_muls, eff.qkv_projection_muls);
    }
}
