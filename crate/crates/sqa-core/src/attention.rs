//! Reduced-query attention: projection, head repetition, masked scaled
//! dot-product attention, output projection, and the exact backward pass.
//!
//! One code path serves the whole variant family. Full multi-head, single
//! key/value head, and grouped key/value configurations are degenerate
//! settings of `(h_q, h_kv)`; the reverse regime (`h_q < h_kv`) repeats
//! query heads instead of key/value heads and runs over `h_kv` heads.

use crate::config::{AttentionConfig, MaskMode};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// The four projection matrices of one attention layer.
///
/// Shapes for a config: `w_q: d_model x (h_q*d_head)`,
/// `w_k`/`w_v`: `d_model x (h_kv*d_head)`,
/// `w_o`: `(effective_heads*d_head) x d_model`.
/// No bias terms anywhere; the layer is a pure composition of matrix
/// products, repetition, and row softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<S: Scalar = f64> {
    pub w_q: Tensor<S>,
    pub w_k: Tensor<S>,
    pub w_v: Tensor<S>,
    pub w_o: Tensor<S>,
}

impl<S: Scalar> AttentionParams<S> {
    /// Initialize all four matrices from one generator, each with
    /// `fan_in` equal to its input dimension. Draw order is
    /// `w_q, w_k, w_v, w_o`.
    pub fn init(cfg: &AttentionConfig, rng: &mut SeededRng) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_head;
        let (dm, hq, hkv, eff) = (cfg.d_model, cfg.h_q, cfg.h_kv, cfg.effective_heads());
        Ok(Self {
            w_q: Tensor::seeded_uniform(vec![dm, hq * d], rng, dm)?,
            w_k: Tensor::seeded_uniform(vec![dm, hkv * d], rng, dm)?,
            w_v: Tensor::seeded_uniform(vec![dm, hkv * d], rng, dm)?,
            w_o: Tensor::seeded_uniform(vec![eff * d, dm], rng, eff * d)?,
        })
    }

    pub fn check_shapes(&self, cfg: &AttentionConfig) -> Result<()> {
        let d = cfg.d_head;
        let want = [
            ("w_q", &self.w_q, [cfg.d_model, cfg.h_q * d]),
            ("w_k", &self.w_k, [cfg.d_model, cfg.h_kv * d]),
            ("w_v", &self.w_v, [cfg.d_model, cfg.h_kv * d]),
            ("w_o", &self.w_o, [cfg.effective_heads() * d, cfg.d_model]),
        ];
        for (name, tensor, shape) in want {
            if tensor.shape() != shape {
                return Err(Error::InvalidShape {
                    op: "check_shapes",
                    detail: format!("{name} must be {shape:?} for {cfg}"),
                    shape: tensor.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.w_q.len() + self.w_k.len() + self.w_v.len() + self.w_o.len()
    }

    pub fn cast<T: Scalar>(&self) -> AttentionParams<T> {
        AttentionParams {
            w_q: self.w_q.cast(),
            w_k: self.w_k.cast(),
            w_v: self.w_v.cast(),
            w_o: self.w_o.cast(),
        }
    }
}

/// Block repetition along the head axis, `[N,h_src,d] -> [N,target,d]`:
/// output head `j` is input head `j / (target/h_src)`, so consecutive
/// output heads share a source (the grouped-KV convention).
pub fn repeat_heads<S: Scalar>(t: &Tensor<S>, target: usize) -> Result<Tensor<S>> {
    if t.ndim() != 3 {
        return Err(Error::InvalidShape {
            op: "repeat_heads",
            detail: "expected a 3-D tensor".into(),
            shape: t.shape().to_vec(),
        });
    }
    let (n, h_src, d) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    if target == 0 || !target.is_multiple_of(h_src) {
        return Err(Error::InvalidShape {
            op: "repeat_heads",
            detail: format!("target {target} not a multiple of source head count {h_src}"),
            shape: t.shape().to_vec(),
        });
    }
    let group = target / h_src;
    let mut out = Vec::with_capacity(n * target * d);
    for i in 0..n {
        for j in 0..target {
            let base = (i * h_src + j / group) * d;
            out.extend_from_slice(&t.data()[base..base + d]);
        }
    }
    Tensor::from_vec(vec![n, target, d], out)
}

/// Adjoint of [`repeat_heads`]: gradients of the repeated copies are summed
/// back onto their source head. Conserves gradient mass exactly.
pub fn repeat_heads_backward<S: Scalar>(d_rep: &Tensor<S>, h_src: usize) -> Result<Tensor<S>> {
    if d_rep.ndim() != 3 {
        return Err(Error::InvalidShape {
            op: "repeat_heads_backward",
            detail: "expected a 3-D tensor".into(),
            shape: d_rep.shape().to_vec(),
        });
    }
    let (n, target, d) = (d_rep.shape()[0], d_rep.shape()[1], d_rep.shape()[2]);
    if h_src == 0 || target % h_src != 0 {
        return Err(Error::InvalidShape {
            op: "repeat_heads_backward",
            detail: format!("target {target} not a multiple of source head count {h_src}"),
            shape: d_rep.shape().to_vec(),
        });
    }
    let group = target / h_src;
    let mut out = vec![S::ZERO; n * h_src * d];
    for i in 0..n {
        for j in 0..target {
            let src = (i * h_src + j / group) * d;
            let rep = (i * target + j) * d;
            for c in 0..d {
                out[src + c] += d_rep.data()[rep + c];
            }
        }
    }
    Tensor::from_vec(vec![n, h_src, d], out)
}

fn mask_allows(mode: MaskMode, i: usize, j: usize) -> bool {
    match mode {
        MaskMode::None => true,
        MaskMode::Causal => j <= i,
        MaskMode::Sliding(k) => i.abs_diff(j) <= k / 2,
        MaskMode::CausalSliding(k) => j <= i && i - j < k,
    }
}

/// Additive `N x N` mask of zeros (allowed) and the sentinel (disallowed).
/// The diagonal is allowed in every mode, so no row is ever fully masked.
pub fn build_mask<S: Scalar>(mode: MaskMode, n: usize) -> Result<Tensor<S>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sequence length must be >= 1".into()));
    }
    if let Some(k) = mode.window() {
        if k == 0 {
            return Err(Error::InvalidArgument("window size must be >= 1".into()));
        }
    }
    let mut data = vec![S::ZERO; n * n];
    if mode != MaskMode::None {
        for i in 0..n {
            for j in 0..n {
                if !mask_allows(mode, i, j) {
                    data[i * n + j] = S::MASK_SENTINEL;
                }
            }
        }
    }
    Tensor::from_vec(vec![n, n], data)
}

/// Scaled dot-product attention for a single head:
/// `softmax_rows(q k^T / sqrt(d) + mask) v`.
pub fn attention_head<S: Scalar>(
    q: &Tensor<S>,
    k: &Tensor<S>,
    v: &Tensor<S>,
    mask: &Tensor<S>,
) -> Result<Tensor<S>> {
    let (logits, weights) = head_weights(q, k, v, mask)?;
    drop(logits);
    weights.matmul(v)
}

/// Masked logits and softmax weights for one head; shared by the plain and
/// cache-retaining forward paths so both compute bit-identical values.
fn head_weights<S: Scalar>(
    q: &Tensor<S>,
    k: &Tensor<S>,
    v: &Tensor<S>,
    mask: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>)> {
    if q.ndim() != 2 || k.shape() != q.shape() || v.shape() != q.shape() {
        return Err(Error::ShapeMismatch {
            op: "attention_head",
            lhs: q.shape().to_vec(),
            rhs: if k.shape() != q.shape() {
                k.shape().to_vec()
            } else {
                v.shape().to_vec()
            },
        });
    }
    let n = q.rows();
    if mask.shape() != [n, n] {
        return Err(Error::ShapeMismatch {
            op: "attention_head",
            lhs: vec![n, n],
            rhs: mask.shape().to_vec(),
        });
    }
    let scale = S::from_f64(1.0 / (q.cols() as f64).sqrt());
    let logits = q.matmul_nt(k)?.scale_add(scale, mask)?;
    let weights = logits.softmax_rows()?;
    Ok((logits, weights))
}

/// Intermediate values retained by a forward pass for the backward pass.
/// Per-head queries, keys and values are stored post-repetition.
#[derive(Debug, Clone)]
pub struct ForwardCache<S: Scalar = f64> {
    x: Tensor<S>,
    q_heads: Vec<Tensor<S>>,
    k_heads: Vec<Tensor<S>>,
    v_heads: Vec<Tensor<S>>,
    logits: Vec<Tensor<S>>,
    weights: Vec<Tensor<S>>,
    head_outputs: Vec<Tensor<S>>,
    merged: Tensor<S>,
}

impl<S: Scalar> ForwardCache<S> {
    pub fn seq_len(&self) -> usize {
        self.x.rows()
    }

    /// Softmax weights of head `h` (post-repetition indexing).
    pub fn weights(&self, h: usize) -> &Tensor<S> {
        &self.weights[h]
    }

    /// Masked score logits of head `h`.
    pub fn logits(&self, h: usize) -> &Tensor<S> {
        &self.logits[h]
    }
}

/// Gradients of `sum(y * dy)` with respect to the input and all four
/// projection matrices.
#[derive(Debug, Clone)]
pub struct Gradients<S: Scalar = f64> {
    pub dx: Tensor<S>,
    pub dw_q: Tensor<S>,
    pub dw_k: Tensor<S>,
    pub dw_v: Tensor<S>,
    pub dw_o: Tensor<S>,
}

/// Full layer forward pass; output shape is `[N, d_model]` for every valid
/// config.
pub fn sqa_forward<S: Scalar>(
    x: &Tensor<S>,
    params: &AttentionParams<S>,
    cfg: &AttentionConfig,
) -> Result<Tensor<S>> {
    Ok(forward_impl(x, params, cfg, false)?.0)
}

/// Forward pass retaining everything the backward pass needs.
pub fn sqa_forward_cached<S: Scalar>(
    x: &Tensor<S>,
    params: &AttentionParams<S>,
    cfg: &AttentionConfig,
) -> Result<(Tensor<S>, ForwardCache<S>)> {
    let (y, cache) = forward_impl(x, params, cfg, true)?;
    Ok((y, cache.expect("cache requested")))
}

fn forward_impl<S: Scalar>(
    x: &Tensor<S>,
    params: &AttentionParams<S>,
    cfg: &AttentionConfig,
    want_cache: bool,
) -> Result<(Tensor<S>, Option<ForwardCache<S>>)> {
    cfg.validate()?;
    params.check_shapes(cfg)?;
    if x.ndim() != 2 || x.cols() != cfg.d_model {
        return Err(Error::InvalidShape {
            op: "sqa_forward",
            detail: format!("input must be [N, {}]", cfg.d_model),
            shape: x.shape().to_vec(),
        });
    }
    let n = x.rows();
    let d = cfg.d_head;
    let eff = cfg.effective_heads();

    let q = x.matmul(&params.w_q)?.split_heads(cfg.h_q, d)?;
    let k = x.matmul(&params.w_k)?.split_heads(cfg.h_kv, d)?;
    let v = x.matmul(&params.w_v)?.split_heads(cfg.h_kv, d)?;

    // Match head counts by repeating the smaller side to `eff` heads.
    let (q, k, v) = if cfg.is_reverse() {
        (repeat_heads(&q, eff)?, k, v)
    } else {
        (q, repeat_heads(&k, eff)?, repeat_heads(&v, eff)?)
    };

    let mask = build_mask::<S>(cfg.mask, n)?;

    // Heads run one at a time so the N x N score buffers never coexist.
    let mut merged = vec![S::ZERO; n * eff * d];
    let mut cache = want_cache.then(|| ForwardCache {
        x: x.clone(),
        q_heads: Vec::with_capacity(eff),
        k_heads: Vec::with_capacity(eff),
        v_heads: Vec::with_capacity(eff),
        logits: Vec::with_capacity(eff),
        weights: Vec::with_capacity(eff),
        head_outputs: Vec::with_capacity(eff),
        merged: Tensor::zeros(vec![1]).expect("placeholder"),
    });

    for h in 0..eff {
        let q_h = extract_head(&q, h);
        let k_h = extract_head(&k, h);
        let v_h = extract_head(&v, h);
        let (logits, weights) = head_weights(&q_h, &k_h, &v_h, &mask)?;
        let out_h = weights.matmul(&v_h)?;
        for i in 0..n {
            let dst = (i * eff + h) * d;
            merged[dst..dst + d].copy_from_slice(out_h.row(i));
        }
        if let Some(c) = cache.as_mut() {
            c.q_heads.push(q_h);
            c.k_heads.push(k_h);
            c.v_heads.push(v_h);
            c.logits.push(logits);
            c.weights.push(weights);
            c.head_outputs.push(out_h);
        }
    }

    let merged = Tensor::from_vec(vec![n, eff, d], merged)?.merge_heads()?;
    let y = merged.matmul(&params.w_o)?;
    if let Some(c) = cache.as_mut() {
        c.merged = merged;
    }
    Ok((y, cache))
}

/// Exact analytic gradients of `sum(y * dy)` through the whole layer.
/// Repeated heads accumulate: the source-head gradient is the sum over its
/// copies.
pub fn sqa_backward<S: Scalar>(
    cache: &ForwardCache<S>,
    params: &AttentionParams<S>,
    cfg: &AttentionConfig,
    dy: &Tensor<S>,
) -> Result<Gradients<S>> {
    cfg.validate()?;
    params.check_shapes(cfg)?;
    let n = cache.seq_len();
    let d = cfg.d_head;
    let eff = cfg.effective_heads();
    if dy.shape() != [n, cfg.d_model] {
        return Err(Error::ShapeMismatch {
            op: "sqa_backward",
            lhs: vec![n, cfg.d_model],
            rhs: dy.shape().to_vec(),
        });
    }
    if cache.weights.len() != eff {
        return Err(Error::InvalidArgument(format!(
            "cache holds {} heads but config implies {eff}",
            cache.weights.len()
        )));
    }

    let scale = S::from_f64(1.0 / (d as f64).sqrt());

    // Output projection: y = merged w_o.
    let dw_o = cache.merged.matmul_tn(dy)?;
    let d_merged = dy.matmul_nt(&params.w_o)?;

    let mut dq_rep = vec![S::ZERO; n * eff * d];
    let mut dk_rep = vec![S::ZERO; n * eff * d];
    let mut dv_rep = vec![S::ZERO; n * eff * d];

    for h in 0..eff {
        // Slice this head's columns out of d_merged.
        let mut d_out = Vec::with_capacity(n * d);
        for i in 0..n {
            let base = i * eff * d + h * d;
            d_out.extend_from_slice(&d_merged.data()[base..base + d]);
        }
        let d_out = Tensor::from_vec(vec![n, d], d_out)?;

        let weights = &cache.weights[h];
        let dv_h = weights.matmul_tn(&d_out)?;
        let da_h = d_out.matmul_nt(&cache.v_heads[h])?;
        let ds_h = softmax_backward(weights, &da_h)?;
        let dq_h = ds_h.matmul(&cache.k_heads[h])?.scale(scale);
        let dk_h = ds_h.matmul_tn(&cache.q_heads[h])?.scale(scale);

        for i in 0..n {
            let dst = (i * eff + h) * d;
            dq_rep[dst..dst + d].copy_from_slice(dq_h.row(i));
            dk_rep[dst..dst + d].copy_from_slice(dk_h.row(i));
            dv_rep[dst..dst + d].copy_from_slice(dv_h.row(i));
        }
    }

    let dq_rep = Tensor::from_vec(vec![n, eff, d], dq_rep)?;
    let dk_rep = Tensor::from_vec(vec![n, eff, d], dk_rep)?;
    let dv_rep = Tensor::from_vec(vec![n, eff, d], dv_rep)?;

    // Undo the repetition by summing copies onto their source heads.
    let (dq3, dk3, dv3) = if cfg.is_reverse() {
        (repeat_heads_backward(&dq_rep, cfg.h_q)?, dk_rep, dv_rep)
    } else {
        (
            dq_rep,
            repeat_heads_backward(&dk_rep, cfg.h_kv)?,
            repeat_heads_backward(&dv_rep, cfg.h_kv)?,
        )
    };
    let dq_flat = dq3.merge_heads()?;
    let dk_flat = dk3.merge_heads()?;
    let dv_flat = dv3.merge_heads()?;

    let dw_q = cache.x.matmul_tn(&dq_flat)?;
    let dw_k = cache.x.matmul_tn(&dk_flat)?;
    let dw_v = cache.x.matmul_tn(&dv_flat)?;

    let dx = dq_flat
        .matmul_nt(&params.w_q)?
        .add(&dk_flat.matmul_nt(&params.w_k)?)?
        .add(&dv_flat.matmul_nt(&params.w_v)?)?;

    Ok(Gradients {
        dx,
        dw_q,
        dw_k,
        dw_v,
        dw_o,
    })
}

/// Row-wise softmax Jacobian-vector product:
/// `dS_ij = A_ij * (dA_ij - sum_j A_ij dA_ij)`.
fn softmax_backward<S: Scalar>(weights: &Tensor<S>, d_weights: &Tensor<S>) -> Result<Tensor<S>> {
    if weights.shape() != d_weights.shape() || weights.ndim() != 2 {
        return Err(Error::ShapeMismatch {
            op: "softmax_backward",
            lhs: weights.shape().to_vec(),
            rhs: d_weights.shape().to_vec(),
        });
    }
    let (m, p) = (weights.rows(), weights.cols());
    let mut out = vec![S::ZERO; m * p];
    for i in 0..m {
        let w = weights.row(i);
        let dw = d_weights.row(i);
        let mut dot = S::ZERO;
        for (a, b) in w.iter().zip(dw) {
            dot += *a * *b;
        }
        for (o, (a, b)) in out[i * p..(i + 1) * p].iter_mut().zip(w.iter().zip(dw)) {
            *o = *a * (*b - dot);
        }
    }
    Tensor::from_vec(vec![m, p], out)
}

/// Contiguous `[N, d]` copy of head `h` from a `[N, heads, d]` tensor.
fn extract_head<S: Scalar>(t: &Tensor<S>, h: usize) -> Tensor<S> {
    let (n, heads, d) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        let base = (i * heads + h) * d;
        out.extend_from_slice(&t.data()[base..base + d]);
    }
    Tensor::from_vec(vec![n, d], out).expect("head slice shape is valid")
}

/// Bytes of key/value state cached per layer for `n` decoded tokens:
/// `2 * n * h_kv * d_head * bytes_per_element`.
pub fn kv_cache_size(cfg: &AttentionConfig, n: usize, bytes_per_element: usize) -> u64 {
    2 * n as u64 * cfg.h_kv as u64 * cfg.d_head as u64 * bytes_per_element as u64
}

/// Maximum relative error between analytic gradients and central finite
/// differences of `sum(y * dy)`, taken over every input and parameter
/// coordinate.
///
/// Per-coordinate relative error is `|a - n| / max(|a|, |n|, 1e-3)`; the
/// floor means near-zero coordinates are compared at absolute scale 1e-3,
/// which keeps finite-difference round-off from masquerading as gradient
/// error while still catching any real defect (those show up at the scale
/// of the coordinate itself).
pub fn grad_check(cfg: &AttentionConfig, n: usize, seed: u64, eps: f64) -> Result<f64> {
    const REL_FLOOR: f64 = 1e-3;

    let mut rng = SeededRng::new(seed);
    let params: AttentionParams = AttentionParams::init(cfg, &mut rng)?;
    let x = Tensor::seeded_uniform(vec![n, cfg.d_model], &mut rng, 1)?;
    let dy = Tensor::seeded_uniform(vec![n, cfg.d_model], &mut rng, 1)?;

    let (_, cache) = sqa_forward_cached(&x, &params, cfg)?;
    let grads = sqa_backward(&cache, &params, cfg, &dy)?;

    let loss = |x: &Tensor, p: &AttentionParams| -> Result<f64> {
        let y = sqa_forward(x, p, cfg)?;
        Ok(y.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum())
    };

    let rel = |a: f64, num: f64| (a - num).abs() / a.abs().max(num.abs()).max(REL_FLOOR);

    let mut worst = 0.0f64;

    // Input coordinates.
    for idx in 0..x.len() {
        let bump = |delta: f64| -> Result<f64> {
            let mut data = x.data().to_vec();
            data[idx] += delta;
            loss(&Tensor::from_vec(x.shape().to_vec(), data)?, &params)
        };
        let numeric = (bump(eps)? - bump(-eps)?) / (2.0 * eps);
        worst = worst.max(rel(grads.dx.data()[idx], numeric));
    }

    // Parameter coordinates, one matrix at a time.
    for which in 0..4 {
        let (mat, grad) = match which {
            0 => (&params.w_q, &grads.dw_q),
            1 => (&params.w_k, &grads.dw_k),
            2 => (&params.w_v, &grads.dw_v),
            _ => (&params.w_o, &grads.dw_o),
        };
        for idx in 0..mat.len() {
            let bump = |delta: f64| -> Result<f64> {
                let mut data = mat.data().to_vec();
                data[idx] += delta;
                let perturbed = Tensor::from_vec(mat.shape().to_vec(), data)?;
                let p = AttentionParams {
                    w_q: if which == 0 { perturbed.clone() } else { params.w_q.clone() },
                    w_k: if which == 1 { perturbed.clone() } else { params.w_k.clone() },
                    w_v: if which == 2 { perturbed.clone() } else { params.w_v.clone() },
                    w_o: if which == 3 { perturbed.clone() } else { params.w_o.clone() },
                };
                loss(&x, &p)
            };
            let numeric = (bump(eps)? - bump(-eps)?) / (2.0 * eps);
            worst = worst.max(rel(grad.data()[idx], numeric));
        }
    }

    Ok(worst)
}
