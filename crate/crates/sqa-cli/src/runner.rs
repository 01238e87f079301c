//! Sweep executor: one seeded input per sequence length, shared across
//! variants; warmup passes untimed; a monotonic clock around the full layer
//! (projections through output projection). Cells run sequentially to avoid
//! timing interference; kernel-internal parallelism uses a pool of exactly
//! `spec.threads` workers.

use std::time::Instant;

use sqa_core::{
    attention_flops, memory_report, sqa_forward, AttentionConfig, AttentionParams, Scalar,
    SeededRng, Tensor, VariantTag,
};

use crate::benchspec::{BenchRecord, BenchSpec, Precision, RunMeta, SkippedCell};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub meta: RunMeta,
    pub records: Vec<BenchRecord>,
    pub skipped: Vec<SkippedCell>,
}

pub fn run_bench(spec: &BenchSpec) -> Result<BenchOutput> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| HarnessError::Spec(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(spec))
}

fn run_inner(spec: &BenchSpec) -> Result<BenchOutput> {
    let meta = RunMeta {
        threads: spec.threads,
        precision: spec.precision,
        seed: spec.seed,
        d_model: spec.configs[0].d_model,
        h_total: spec.configs[0].h_total,
    };
    let bytes_per_element = match spec.precision {
        Precision::F64 => 8,
        Precision::F32 => 4,
    };

    let root = SeededRng::new(spec.seed);

    // Parameters are seeded per config, independent of N.
    let mut params64: Vec<AttentionParams<f64>> = Vec::with_capacity(spec.configs.len());
    for (idx, cfg) in spec.configs.iter().enumerate() {
        let mut rng = root.fork(0x5EED_0000 + idx as u64);
        params64.push(AttentionParams::init(cfg, &mut rng)?);
    }

    let mut seq_lens = spec.seq_lens.clone();
    seq_lens.sort_unstable();
    seq_lens.dedup();

    let mut records = Vec::new();
    let mut skipped = Vec::new();

    for &n in &seq_lens {
        // One seeded input per N, reused by every variant for fairness.
        let mut input_rng = root.fork(0x1A_0000 ^ n as u64);
        let x64: Tensor<f64> =
            Tensor::seeded_uniform(vec![n, meta.d_model], &mut input_rng, 1)?;

        for (idx, cfg) in spec.configs.iter().enumerate() {
            let label = cfg.label();
            match estimate_bytes(cfg, n, bytes_per_element) {
                est if est > spec.memory_budget_bytes => {
                    skipped.push(SkippedCell {
                        label,
                        n,
                        reason: format!(
                            "estimated {est} bytes exceeds budget {}",
                            spec.memory_budget_bytes
                        ),
                    });
                    continue;
                }
                _ => {}
            }

            let times = match spec.precision {
                Precision::F64 => time_cell::<f64>(&x64, &params64[idx], cfg, spec)?,
                Precision::F32 => {
                    let x32 = x64.cast::<f32>();
                    let p32 = params64[idx].cast::<f32>();
                    time_cell::<f32>(&x32, &p32, cfg, spec)?
                }
            };
            let stats = Stats::of(&times);
            records.push(BenchRecord {
                label,
                tag: cfg.classify()?,
                config: *cfg,
                n,
                median_s: stats.median,
                mean_s: stats.mean,
                stddev_s: stats.stddev,
                min_s: stats.min,
                modeled_flops: attention_flops(cfg, n)?.total,
                speedup: 1.0, // filled in once the baseline cell is known
            });
        }
    }

    fill_speedups(&mut records, baseline_label(&spec.configs));
    records.sort_by(|a, b| (a.n, &a.label).cmp(&(b.n, &b.label)));
    Ok(BenchOutput {
        meta,
        records,
        skipped,
    })
}

/// The reference cell for the speedup column: a full-head config when the
/// sweep includes one, otherwise the first config listed.
pub fn baseline_label(configs: &[AttentionConfig]) -> String {
    configs
        .iter()
        .find(|c| matches!(c.classify(), Ok(VariantTag::Mha)))
        .unwrap_or(&configs[0])
        .label()
}

fn fill_speedups(records: &mut [BenchRecord], baseline: String) {
    let baseline_medians: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| r.label == baseline)
        .map(|r| (r.n, r.median_s))
        .collect();
    for rec in records.iter_mut() {
        if let Some(&(_, base)) = baseline_medians.iter().find(|(n, _)| *n == rec.n) {
            rec.speedup = base / rec.median_s;
        }
    }
}

/// Peak-resident estimate for one cell: parameters, input, activations
/// (per-head streaming), plus the additive mask buffer.
fn estimate_bytes(cfg: &AttentionConfig, n: usize, bytes_per_element: usize) -> u64 {
    let b = bytes_per_element as u64;
    let activations = memory_report(cfg, n, bytes_per_element)
        .map(|m| m.activation_bytes)
        .unwrap_or(u64::MAX);
    let mask = (n as u64) * (n as u64) * b;
    let d = cfg.d_head as u64;
    let params = (cfg.d_model as u64) * d * (cfg.h_q + 2 * cfg.h_kv) as u64
        + (cfg.effective_heads() as u64) * d * cfg.d_model as u64;
    let input = (n as u64) * cfg.d_model as u64;
    activations
        .saturating_add(mask)
        .saturating_add((params + input) * b)
}

fn time_cell<S: Scalar>(
    x: &Tensor<S>,
    params: &AttentionParams<S>,
    cfg: &AttentionConfig,
    spec: &BenchSpec,
) -> Result<Vec<f64>> {
    for _ in 0..spec.warmup {
        std::hint::black_box(sqa_forward(x, params, cfg)?);
    }
    let mut times = Vec::with_capacity(spec.repeats);
    for _ in 0..spec.repeats {
        let start = Instant::now();
        let y = sqa_forward(x, params, cfg)?;
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box(y);
    }
    Ok(times)
}

struct Stats {
    median: f64,
    mean: f64,
    stddev: f64,
    min: f64,
}

impl Stats {
    fn of(samples: &[f64]) -> Stats {
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
        let k = sorted.len();
        let median = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        let mean = sorted.iter().sum::<f64>() / k as f64;
        let var = sorted.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>()
            / (k.saturating_sub(1).max(1)) as f64;
        Stats {
            median,
            mean,
            stddev: var.sqrt(),
            min: sorted[0],
        }
    }
}
