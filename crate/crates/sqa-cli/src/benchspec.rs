//! Sweep description (JSON) and the per-cell result record.

use serde::{Deserialize, Serialize};
use sqa_core::{AttentionConfig, VariantTag};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    F32,
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::F64 => "f64",
            Precision::F32 => "f32",
        })
    }
}

/// One benchmark sweep: which variants, which sequence lengths, how many
/// timed repeats. All configs must share `d_model` and `H` so cells are
/// comparable.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub configs: Vec<AttentionConfig>,
    pub seq_lens: Vec<usize>,
    pub repeats: usize,
    pub warmup: usize,
    pub precision: Precision,
    pub seed: u64,
    pub threads: usize,
    pub memory_budget_bytes: u64,
}

pub const DEFAULT_MEMORY_BUDGET_BYTES: u64 = 3 << 30;

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Wire form; config objects use the library's own JSON schema.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    configs: Vec<serde_json::Value>,
    seq_lens: Vec<usize>,
    repeats: usize,
    #[serde(default = "default_warmup")]
    warmup: usize,
    #[serde(default = "default_precision")]
    precision: Precision,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_threads")]
    threads: usize,
    #[serde(default = "default_budget")]
    memory_budget_bytes: u64,
}

fn default_warmup() -> usize {
    1
}
fn default_precision() -> Precision {
    Precision::F32
}
fn default_seed() -> u64 {
    42
}
fn default_budget() -> u64 {
    DEFAULT_MEMORY_BUDGET_BYTES
}

impl BenchSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawSpec = serde_json::from_str(s)?;
        let configs = raw
            .configs
            .iter()
            .map(|v| AttentionConfig::from_json(&v.to_string()))
            .collect::<sqa_core::Result<Vec<_>>>()?;
        let spec = BenchSpec {
            configs,
            seq_lens: raw.seq_lens,
            repeats: raw.repeats,
            warmup: raw.warmup,
            precision: raw.precision,
            seed: raw.seed,
            threads: raw.threads,
            memory_budget_bytes: raw.memory_budget_bytes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() {
            return Err(HarnessError::Spec("at least one config required".into()));
        }
        if self.seq_lens.is_empty() || self.seq_lens.contains(&0) {
            return Err(HarnessError::Spec(
                "seq_lens must be non-empty and positive".into(),
            ));
        }
        if self.repeats < 3 {
            return Err(HarnessError::Spec(format!(
                "repeats must be >= 3 for stable statistics, got {}",
                self.repeats
            )));
        }
        if self.threads == 0 {
            return Err(HarnessError::Spec("threads must be >= 1".into()));
        }
        let (dm, h) = (self.configs[0].d_model, self.configs[0].h_total);
        for cfg in &self.configs {
            cfg.validate()?;
            if cfg.d_model != dm || cfg.h_total != h {
                return Err(HarnessError::Spec(format!(
                    "all configs must share d_model and H for a fair sweep; {cfg} differs from d_model={dm} H={h}"
                )));
            }
        }
        let mut labels = std::collections::BTreeSet::new();
        for cfg in &self.configs {
            if !labels.insert(cfg.label()) {
                return Err(HarnessError::Spec(format!(
                    "duplicate variant label '{}'; cells would collide",
                    cfg.label()
                )));
            }
        }
        Ok(())
    }
}

/// Fixed run-wide facts recorded with every output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMeta {
    pub threads: usize,
    pub precision: Precision,
    pub seed: u64,
    pub d_model: usize,
    pub h_total: usize,
}

/// Timing statistics for one `(variant, N)` cell. The median is the
/// headline statistic; it is robust to scheduler noise.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub label: String,
    pub tag: VariantTag,
    pub config: AttentionConfig,
    pub n: usize,
    pub median_s: f64,
    pub mean_s: f64,
    pub stddev_s: f64,
    pub min_s: f64,
    pub modeled_flops: u64,
    /// Baseline median divided by this cell's median; 1.0 for the baseline.
    pub speedup: f64,
}

/// A cell the sweep declined to run, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedCell {
    pub label: String,
    pub n: usize,
    pub reason: String,
}
