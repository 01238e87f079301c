//! Self-validation suites: oracle equivalence, gradient checks, and FLOP
//! identities, with per-case pass/fail detail.
//!
//! The equivalence suite supports deliberate fault injection (`--inject-fault
//! softmax-sign`): the forward pass is rebuilt from the library's public
//! kernels with the score sign flipped before softmax. A healthy suite must
//! fail loudly under the fault; this is how the suite's own sensitivity is
//! exercised.

use std::fmt;
use std::str::FromStr;

use sqa_core::{
    attention_flops, attention_flops_with_mode, build_mask, count_scalar_muls, diff_report,
    grad_check, kv_cache_size, naive_forward, repeat_heads, sqa_forward, theoretical_speedup,
    AttentionConfig, AttentionParams, CountingMode, MaskMode, SeededRng, Tensor, VariantTag,
    SOFTMAX_FLOPS_PER_ELEMENT,
};

pub const EQUIVALENCE_REL_TOL: f64 = 1e-10;
pub const GRADIENT_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Equivalence,
    Gradients,
    Flops,
    All,
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "equivalence" => Ok(Suite::Equivalence),
            "gradients" => Ok(Suite::Gradients),
            "flops" => Ok(Suite::Flops),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite '{other}' (expected equivalence, gradients, flops or all)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaultInjection {
    #[default]
    None,
    /// Negate score logits before softmax in the checked forward pass.
    SoftmaxSign,
}

impl FromStr for FaultInjection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(FaultInjection::None),
            "softmax-sign" => Ok(FaultInjection::SoftmaxSign),
            other => Err(format!("unknown fault '{other}' (expected softmax-sign)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CaseResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub cases: Vec<CaseResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: String, passed: bool, detail: String) {
        self.cases.push(CaseResult {
            name,
            passed,
            detail,
        });
    }
}

pub fn run_check(suite: Suite, fault: FaultInjection) -> CheckReport {
    let mut report = CheckReport::default();
    if matches!(suite, Suite::Equivalence | Suite::All) {
        equivalence_suite(&mut report, fault);
    }
    if matches!(suite, Suite::Gradients | Suite::All) {
        gradient_suite(&mut report);
    }
    if matches!(suite, Suite::Flops | Suite::All) {
        flops_suite(&mut report);
    }
    report
}

fn reverse_cfg(d_model: usize, h: usize, h_q: usize, h_kv: usize) -> AttentionConfig {
    AttentionConfig {
        h_q,
        h_kv,
        allow_reverse: true,
        ..AttentionConfig::new(d_model, h, h, h).expect("valid base")
    }
}

/// Deterministic battery spanning every variant tag and mask mode;
/// at least fifty `(config, n, seed)` cases.
pub fn equivalence_cases() -> Vec<(AttentionConfig, usize, u64)> {
    let shapes = [
        AttentionConfig::new(16, 4, 4, 4).unwrap(),
        AttentionConfig::new(16, 4, 4, 1).unwrap(),
        AttentionConfig::new(16, 4, 4, 2).unwrap(),
        AttentionConfig::new(32, 8, 6, 2).unwrap(),
        AttentionConfig::new(32, 8, 4, 4).unwrap(),
        AttentionConfig::new(32, 8, 2, 2).unwrap(),
        reverse_cfg(16, 4, 2, 4),
        reverse_cfg(32, 8, 2, 8),
        AttentionConfig::new(24, 4, 2, 2).unwrap(),
        AttentionConfig::new(64, 8, 8, 8).unwrap(),
        AttentionConfig::new(48, 8, 4, 1).unwrap(),
        AttentionConfig::new(64, 16, 4, 2).unwrap(),
        AttentionConfig::new(40, 8, 4, 2).unwrap(),
        AttentionConfig::new(16, 2, 1, 1).unwrap(),
    ];
    let masks = [
        MaskMode::None,
        MaskMode::Causal,
        MaskMode::Sliding(3),
        MaskMode::CausalSliding(5),
    ];
    let mut cases = Vec::new();
    for (i, base) in shapes.iter().enumerate() {
        for (j, &mask) in masks.iter().enumerate() {
            let cfg = AttentionConfig { mask, ..*base };
            let n = 3 + (3 * i + 5 * j) % 10;
            cases.push((cfg, n, 0xC0DE + (i * masks.len() + j) as u64));
        }
    }
    cases
}

fn equivalence_suite(report: &mut CheckReport, fault: FaultInjection) {
    for (idx, (cfg, n, seed)) in equivalence_cases().into_iter().enumerate() {
        let tag = cfg.classify().expect("battery configs are valid");
        let name = format!("equivalence/{tag}/{}/n={n}#{idx}", cfg.mask);
        let outcome = (|| -> Result<(f64, usize), sqa_core::Error> {
            let params = AttentionParams::init(&cfg, &mut SeededRng::new(seed))?;
            let x: Tensor =
                Tensor::seeded_uniform(vec![n, cfg.d_model], &mut SeededRng::new(seed ^ 0xF0), 1)?;
            let fast = match fault {
                FaultInjection::None => sqa_forward(&x, &params, &cfg)?,
                FaultInjection::SoftmaxSign => mutated_forward(&x, &params, &cfg)?,
            };
            let slow = naive_forward(&x, &params, &cfg)?;
            let diff = diff_report(&fast, &slow)?;
            Ok((diff.max_rel, diff.argmax))
        })();
        match outcome {
            Ok((max_rel, argmax)) => report.push(
                name,
                max_rel <= EQUIVALENCE_REL_TOL,
                format!("max_rel={max_rel:.3e} argmax={argmax} tol={EQUIVALENCE_REL_TOL:.0e}"),
            ),
            Err(e) => report.push(name, false, format!("error: {e}")),
        }
    }
}

/// One representative config per variant tag for the gradient sweep.
pub fn gradient_cases() -> Vec<(VariantTag, AttentionConfig)> {
    vec![
        (VariantTag::Mha, AttentionConfig::new(16, 4, 4, 4).unwrap()),
        (VariantTag::Mqa, AttentionConfig::new(16, 4, 4, 1).unwrap()),
        (VariantTag::Gqa, AttentionConfig::new(16, 4, 4, 2).unwrap()),
        (VariantTag::Sqa, AttentionConfig::new(32, 8, 6, 2).unwrap()),
        (VariantTag::Ssqa, AttentionConfig::new(32, 8, 4, 4).unwrap()),
        (VariantTag::Xsqa, AttentionConfig::new(32, 8, 2, 2).unwrap()),
        (VariantTag::Rsqa, reverse_cfg(16, 4, 2, 4)),
    ]
}

fn gradient_suite(report: &mut CheckReport) {
    for (i, (tag, cfg)) in gradient_cases().into_iter().enumerate() {
        assert_eq!(cfg.classify().unwrap(), tag, "case table out of sync");
        let cfg = AttentionConfig {
            mask: if i % 2 == 0 { MaskMode::Causal } else { MaskMode::None },
            ..cfg
        };
        let name = format!("gradients/{tag}");
        match grad_check(&cfg, 5, 0xBEEF + i as u64, 1e-5) {
            Ok(err) => report.push(
                name,
                err <= GRADIENT_REL_TOL,
                format!("max_rel={err:.3e} tol={GRADIENT_REL_TOL:.0e}"),
            ),
            Err(e) => report.push(name, false, format!("error: {e}")),
        }
    }
}

fn flops_suite(report: &mut CheckReport) {
    // Head-count ratios are exact integer identities.
    for &(h, hq) in &[(16usize, 8usize), (16, 4), (32, 8), (8, 1)] {
        let d_model = 16 * h;
        let name = format!("flops/score-ratio/H={h},H_q={hq}");
        let outcome = (|| -> Result<bool, sqa_core::Error> {
            let mha = attention_flops(&AttentionConfig::new(d_model, h, h, h)?, 512)?;
            let sqa = attention_flops(&AttentionConfig::new(d_model, h, hq, hq)?, 512)?;
            let ratio = (h / hq) as u64;
            let exact = mha.score_flops == ratio * sqa.score_flops
                && mha.aggregation_flops == ratio * sqa.aggregation_flops
                && theoretical_speedup(h, hq)? == ratio as f64;
            Ok(exact)
        })();
        match outcome {
            Ok(ok) => report.push(name, ok, format!("expected exact ratio {}", h / hq)),
            Err(e) => report.push(name, false, format!("error: {e}")),
        }
    }

    // Closed form vs loop-enumerated multiply census.
    let census_shapes = [
        AttentionConfig::new(64, 4, 4, 2).unwrap(),
        AttentionConfig::new(64, 8, 4, 4).unwrap(),
        reverse_cfg(64, 8, 2, 8),
    ];
    let masks = [MaskMode::None, MaskMode::Causal, MaskMode::Sliding(3)];
    for base in census_shapes {
        for mask in masks {
            let cfg = AttentionConfig { mask, ..base };
            let tag = cfg.classify().unwrap();
            let name = format!("flops/census/{tag}/{mask}");
            let outcome = (|| -> Result<bool, sqa_core::Error> {
                for n in [1usize, 7, 16] {
                    for mode in [CountingMode::Dense, CountingMode::Effective] {
                        let model = attention_flops_with_mode(&cfg, n, mode)?;
                        let census = count_scalar_muls(&cfg, n, mode)?;
                        let ok = model.qkv_projection_flops == 2 * census.qkv_projection_muls
                            && model.score_flops == 2 * census.score_muls
                            && model.aggregation_flops == 2 * census.aggregation_muls
                            && model.output_projection_flops == 2 * census.output_projection_muls
                            && model.softmax_flops
                                == SOFTMAX_FLOPS_PER_ELEMENT * census.softmax_elements;
                        if !ok {
                            return Ok(false);
                        }
                    }
                }
                Ok(true)
            })();
            match outcome {
                Ok(ok) => report.push(name, ok, "model == enumerated counts, N in {1,7,16}".into()),
                Err(e) => report.push(name, false, format!("error: {e}")),
            }
        }
    }

    // KV-cache byte identities.
    let xsqa = AttentionConfig::new(512, 32, 8, 8).unwrap();
    let gqa = AttentionConfig::new(512, 32, 32, 8).unwrap();
    report.push(
        "flops/kv-parity/extreme-vs-grouped".into(),
        kv_cache_size(&xsqa, 4096, 2) == kv_cache_size(&gqa, 4096, 2),
        "8/8-of-32 must match 32/8 byte for byte".into(),
    );
    let mha = AttentionConfig::new(512, 32, 32, 32).unwrap();
    let mqa = AttentionConfig::new(512, 32, 32, 1).unwrap();
    report.push(
        "flops/kv-parity/single-head".into(),
        32 * kv_cache_size(&mqa, 4096, 2) == kv_cache_size(&mha, 4096, 2),
        "single shared head must be exactly 1/H of the baseline".into(),
    );
}

/// Forward pass rebuilt from public kernels with the injected defect:
/// logits are negated before softmax. Used only to prove the equivalence
/// suite notices a broken softmax.
fn mutated_forward(
    x: &Tensor,
    params: &AttentionParams,
    cfg: &AttentionConfig,
) -> sqa_core::Result<Tensor> {
    let d = cfg.d_head;
    let eff = cfg.effective_heads();
    let n = x.rows();
    let q = x.matmul(&params.w_q)?.split_heads(cfg.h_q, d)?;
    let k = x.matmul(&params.w_k)?.split_heads(cfg.h_kv, d)?;
    let v = x.matmul(&params.w_v)?.split_heads(cfg.h_kv, d)?;
    let (q, k, v) = if cfg.is_reverse() {
        (repeat_heads(&q, eff)?, k, v)
    } else {
        (q, repeat_heads(&k, eff)?, repeat_heads(&v, eff)?)
    };
    let mask = build_mask::<f64>(cfg.mask, n)?;
    let scale = 1.0 / (d as f64).sqrt();
    let mut merged = vec![0.0f64; n * eff * d];
    for h in 0..eff {
        let q_h = head_slice(&q, h);
        let k_h = head_slice(&k, h);
        let v_h = head_slice(&v, h);
        let logits = q_h.matmul_nt(&k_h)?.scale_add(scale, &mask)?;
        let weights = logits.scale(-1.0).softmax_rows()?; // the fault
        let out_h = weights.matmul(&v_h)?;
        for i in 0..n {
            let dst = (i * eff + h) * d;
            merged[dst..dst + d].copy_from_slice(out_h.row(i));
        }
    }
    Tensor::from_vec(vec![n, eff, d], merged)?
        .merge_heads()?
        .matmul(&params.w_o)
}

fn head_slice(t: &Tensor, h: usize) -> Tensor {
    let (n, heads, d) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        let base = (i * heads + h) * d;
        out.extend_from_slice(&t.data()[base..base + d]);
    }
    Tensor::from_vec(vec![n, d], out).expect("valid slice")
}
