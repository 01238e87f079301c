//! Attention-layer configuration: head counts, mask mode, variant taxonomy,
//! and the JSON format consumed by the CLI.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which score positions a head may attend to.
///
/// Masking is additive: disallowed logits receive
/// [`crate::tensor::MASK_SENTINEL`] before softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    /// Every position attends to every position.
    None,
    /// Position `i` attends to `j <= i`.
    Causal,
    /// Bidirectional window: `|i - j| <= floor(k/2)`.
    Sliding(usize),
    /// Causal window: `i - k + 1 <= j <= i`.
    CausalSliding(usize),
}

impl MaskMode {
    pub fn window(&self) -> Option<usize> {
        match *self {
            MaskMode::Sliding(k) | MaskMode::CausalSliding(k) => Some(k),
            _ => None,
        }
    }

    /// Number of key positions a mid-sequence row may attend to, ignoring
    /// boundary clipping. For unwindowed modes this is the full length `n`.
    pub fn span(&self, n: usize) -> usize {
        match *self {
            MaskMode::None | MaskMode::Causal => n,
            MaskMode::Sliding(k) => (2 * (k / 2) + 1).min(n),
            MaskMode::CausalSliding(k) => k.min(n),
        }
    }

    pub fn is_causal(&self) -> bool {
        matches!(self, MaskMode::Causal | MaskMode::CausalSliding(_))
    }

    fn name(&self) -> &'static str {
        match self {
            MaskMode::None => "none",
            MaskMode::Causal => "causal",
            MaskMode::Sliding(_) => "sliding",
            MaskMode::CausalSliding(_) => "causal_sliding",
        }
    }
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskMode::Sliding(k) => write!(f, "sliding({k})"),
            MaskMode::CausalSliding(k) => write!(f, "causal_sliding({k})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Taxonomy of attention variants, a deterministic function of the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VariantTag {
    Mha,
    Mqa,
    Gqa,
    Sqa,
    Ssqa,
    Xsqa,
    Rsqa,
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VariantTag::Mha => "MHA",
            VariantTag::Mqa => "MQA",
            VariantTag::Gqa => "GQA",
            VariantTag::Sqa => "SQA",
            VariantTag::Ssqa => "sSQA",
            VariantTag::Xsqa => "xSQA",
            VariantTag::Rsqa => "rSQA",
        };
        f.write_str(s)
    }
}

/// The `(d_model, H, H_q, H_kv, d_head, mask)` tuple that defines a variant.
///
/// `h_total` is the head count of the comparable full multi-head baseline;
/// `h_q` and `h_kv` are the query and key/value head counts actually used.
/// `d_head` defaults to `d_model / h_total` so reduced-query layers also
/// carry fewer parameters than the baseline; an explicit override is
/// permitted for experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionConfig {
    pub d_model: usize,
    pub h_total: usize,
    pub h_q: usize,
    pub h_kv: usize,
    pub d_head: usize,
    pub mask: MaskMode,
    /// Permits `h_q < h_kv`, the reverse regime where queries are repeated.
    pub allow_reverse: bool,
}

impl AttentionConfig {
    /// Config with defaulted head dimension, no mask, reverse mode off.
    pub fn new(d_model: usize, h_total: usize, h_q: usize, h_kv: usize) -> Result<Self> {
        if h_total == 0 {
            return Err(Error::InvalidConfig("H must be >= 1".into()));
        }
        if !d_model.is_multiple_of(h_total) {
            return Err(Error::InvalidConfig(format!(
                "d_model {d_model} not divisible by H {h_total}; pass an explicit d_head"
            )));
        }
        let cfg = Self {
            d_model,
            h_total,
            h_q,
            h_kv,
            d_head: d_model / h_total,
            mask: MaskMode::None,
            allow_reverse: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mask(mut self, mask: MaskMode) -> Result<Self> {
        self.mask = mask;
        self.validate()?;
        Ok(self)
    }

    pub fn with_d_head(mut self, d_head: usize) -> Result<Self> {
        self.d_head = d_head;
        self.validate()?;
        Ok(self)
    }

    pub fn with_allow_reverse(mut self, allow: bool) -> Result<Self> {
        self.allow_reverse = allow;
        self.validate()?;
        Ok(self)
    }

    /// Check every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.h_total == 0 || self.d_head == 0 {
            return Err(Error::InvalidConfig(
                "d_model, H and d_head must be >= 1".into(),
            ));
        }
        if self.h_q == 0 || self.h_q > self.h_total {
            return Err(Error::InvalidConfig(format!(
                "H_q must satisfy 1 <= H_q <= H, got H_q={} H={}",
                self.h_q, self.h_total
            )));
        }
        if self.h_kv == 0 || self.h_kv > self.h_total {
            return Err(Error::InvalidConfig(format!(
                "H_kv must satisfy 1 <= H_kv <= H, got H_kv={} H={}",
                self.h_kv, self.h_total
            )));
        }
        if self.h_q >= self.h_kv {
            if !self.h_q.is_multiple_of(self.h_kv) {
                return Err(Error::InvalidConfig(format!(
                    "H_q={} not divisible by H_kv={}; repetition factor must be an integer",
                    self.h_q, self.h_kv
                )));
            }
        } else {
            if !self.allow_reverse {
                return Err(Error::InvalidConfig(format!(
                    "H_q={} < H_kv={} requires allow_reverse",
                    self.h_q, self.h_kv
                )));
            }
            if !self.h_kv.is_multiple_of(self.h_q) {
                return Err(Error::InvalidConfig(format!(
                    "reverse mode: H_kv={} not divisible by H_q={}",
                    self.h_kv, self.h_q
                )));
            }
        }
        if let Some(k) = self.mask.window() {
            if k == 0 {
                return Err(Error::InvalidConfig("window size must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// True when this config runs in the reverse regime (queries repeated).
    pub fn is_reverse(&self) -> bool {
        self.h_q < self.h_kv
    }

    /// Head count attention actually executes over: `h_q` normally,
    /// `h_kv` in reverse mode.
    pub fn effective_heads(&self) -> usize {
        if self.is_reverse() {
            self.h_kv
        } else {
            self.h_q
        }
    }

    /// How many times the smaller head set is repeated.
    pub fn repetition_factor(&self) -> usize {
        if self.is_reverse() {
            self.h_kv / self.h_q
        } else {
            self.h_q / self.h_kv
        }
    }

    /// Classify into the variant taxonomy. Precedence among the reduced-query
    /// shapes: reverse, then symmetric, then extreme, then plain.
    pub fn classify(&self) -> Result<VariantTag> {
        self.validate()?;
        let (h, hq, hkv) = (self.h_total, self.h_q, self.h_kv);
        let tag = if hq == h && hkv == h {
            VariantTag::Mha
        } else if hq == h && hkv == 1 {
            VariantTag::Mqa
        } else if hq == h {
            VariantTag::Gqa
        } else if hq < hkv {
            VariantTag::Rsqa
        } else if hq == hkv && 2 * hq == h {
            VariantTag::Ssqa
        } else if 4 * hq <= h {
            VariantTag::Xsqa
        } else {
            VariantTag::Sqa
        };
        Ok(tag)
    }

    /// Short label for tables and CSV: the variant tag, plus the mask when
    /// one is active, e.g. `MHA+sw128`.
    pub fn label(&self) -> String {
        let tag = self.classify().map(|t| t.to_string()).unwrap_or_default();
        match self.mask {
            MaskMode::None => tag,
            MaskMode::Causal => format!("{tag}+causal"),
            MaskMode::Sliding(k) => format!("{tag}+sw{k}"),
            MaskMode::CausalSliding(k) => format!("{tag}+csw{k}"),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&RawConfig::from(self)).expect("config serialization is infallible")
    }

    /// Parse the JSON object format: keys `d_model`, `H`, `H_q`, `H_kv`,
    /// optional `d_head`, `mask`, `window`, `allow_reverse`. Unknown keys
    /// are rejected.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(s)
            .map_err(|e| Error::InvalidConfig(format!("config JSON: {e}")))?;
        raw.resolve()
    }
}

impl fmt::Display for AttentionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "d_model={} H={} H_q={} H_kv={} d_head={} mask={}",
            self.d_model, self.h_total, self.h_q, self.h_kv, self.d_head, self.mask
        )
    }
}

/// Wire form of [`AttentionConfig`].
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    d_model: usize,
    #[serde(rename = "H")]
    h: usize,
    #[serde(rename = "H_q")]
    h_q: usize,
    #[serde(rename = "H_kv")]
    h_kv: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d_head: Option<usize>,
    #[serde(default = "default_mask_name")]
    mask: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_reverse: bool,
}

fn default_mask_name() -> String {
    "none".into()
}

impl From<&AttentionConfig> for RawConfig {
    fn from(cfg: &AttentionConfig) -> Self {
        RawConfig {
            d_model: cfg.d_model,
            h: cfg.h_total,
            h_q: cfg.h_q,
            h_kv: cfg.h_kv,
            d_head: Some(cfg.d_head),
            mask: cfg.mask.name().into(),
            window: cfg.mask.window(),
            allow_reverse: cfg.allow_reverse,
        }
    }
}

impl RawConfig {
    fn resolve(self) -> Result<AttentionConfig> {
        let mask = match (self.mask.as_str(), self.window) {
            ("none", None) => MaskMode::None,
            ("causal", None) => MaskMode::Causal,
            ("sliding", Some(k)) => MaskMode::Sliding(k),
            ("causal_sliding", Some(k)) => MaskMode::CausalSliding(k),
            ("sliding" | "causal_sliding", None) => {
                return Err(Error::InvalidConfig(format!(
                    "mask '{}' requires a window",
                    self.mask
                )))
            }
            (m @ ("none" | "causal"), Some(_)) => {
                return Err(Error::InvalidConfig(format!(
                    "mask '{m}' does not take a window"
                )))
            }
            (other, _) => {
                return Err(Error::InvalidConfig(format!("unknown mask mode '{other}'")))
            }
        };
        let d_head = match self.d_head {
            Some(d) => d,
            None => {
                if self.h == 0 || !self.d_model.is_multiple_of(self.h) {
                    return Err(Error::InvalidConfig(format!(
                        "d_model {} not divisible by H {}; pass an explicit d_head",
                        self.d_model, self.h
                    )));
                }
                self.d_model / self.h
            }
        };
        let cfg = AttentionConfig {
            d_model: self.d_model,
            h_total: self.h,
            h_q: self.h_q,
            h_kv: self.h_kv,
            d_head,
            mask,
            allow_reverse: self.allow_reverse,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(h: usize, hq: usize, hkv: usize) -> AttentionConfig {
        AttentionConfig::new(16 * h.max(1), h, hq, hkv).unwrap()
    }

    #[test]
    fn classification_table() {
        assert_eq!(cfg(16, 16, 16).classify().unwrap(), VariantTag::Mha);
        assert_eq!(cfg(16, 16, 1).classify().unwrap(), VariantTag::Mqa);
        assert_eq!(cfg(16, 16, 4).classify().unwrap(), VariantTag::Gqa);
        // Published reference shapes: 8/4 of 16 is plain SQA, 4/4 of 16 is
        // the extreme variant, 8/8 of 16 the symmetric one.
        assert_eq!(cfg(16, 8, 4).classify().unwrap(), VariantTag::Sqa);
        assert_eq!(cfg(16, 4, 4).classify().unwrap(), VariantTag::Xsqa);
        assert_eq!(cfg(16, 8, 8).classify().unwrap(), VariantTag::Ssqa);
        let rev = AttentionConfig::new(256, 16, 2, 4)
            .map(|c| c.with_allow_reverse(true).unwrap());
        assert!(rev.is_err()); // construction already rejects without the flag
        let rev = AttentionConfig {
            d_model: 256,
            h_total: 16,
            h_q: 2,
            h_kv: 4,
            d_head: 16,
            mask: MaskMode::None,
            allow_reverse: true,
        };
        assert_eq!(rev.classify().unwrap(), VariantTag::Rsqa);
    }

    #[test]
    fn light_reduction_gets_plain_tag() {
        // Three-quarter query count is representable and classifies as SQA.
        assert_eq!(cfg(16, 12, 4).classify().unwrap(), VariantTag::Sqa);
    }

    #[test]
    fn symmetric_takes_precedence_over_extreme() {
        // 2/2 of 4 is both h_q = h/2 = h_kv and h_q <= h/4 is false; for
        // h = 8, 2/2 satisfies the extreme bound but not symmetry.
        assert_eq!(cfg(8, 4, 4).classify().unwrap(), VariantTag::Ssqa);
        assert_eq!(cfg(8, 2, 2).classify().unwrap(), VariantTag::Xsqa);
    }

    #[test]
    fn invalid_ratios_rejected() {
        assert!(AttentionConfig::new(256, 16, 6, 4).is_err()); // 6 % 4 != 0
        assert!(AttentionConfig::new(256, 16, 0, 1).is_err());
        assert!(AttentionConfig::new(256, 16, 17, 1).is_err());
        assert!(AttentionConfig::new(256, 16, 4, 8).is_err()); // reverse without flag
        assert!(AttentionConfig::new(250, 16, 16, 16).is_err()); // d_model % H
    }

    #[test]
    fn reverse_requires_divisibility() {
        let bad = AttentionConfig {
            d_model: 256,
            h_total: 16,
            h_q: 3,
            h_kv: 7,
            d_head: 16,
            mask: MaskMode::None,
            allow_reverse: true,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = cfg(16, 8, 4).with_mask(MaskMode::CausalSliding(64)).unwrap();
        let json = c.to_json();
        let back = AttentionConfig::from_json(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn json_defaults_and_unknown_keys() {
        let c = AttentionConfig::from_json(
            r#"{"d_model":256,"H":16,"H_q":8,"H_kv":4}"#,
        )
        .unwrap();
        assert_eq!(c.d_head, 16);
        assert_eq!(c.mask, MaskMode::None);
        assert!(!c.allow_reverse);

        let err = AttentionConfig::from_json(
            r#"{"d_model":256,"H":16,"H_q":8,"H_kv":4,"bogus":1}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn json_mask_window_pairing() {
        assert!(AttentionConfig::from_json(
            r#"{"d_model":256,"H":16,"H_q":16,"H_kv":16,"mask":"sliding"}"#
        )
        .is_err());
        assert!(AttentionConfig::from_json(
            r#"{"d_model":256,"H":16,"H_q":16,"H_kv":16,"mask":"none","window":8}"#
        )
        .is_err());
        let ok = AttentionConfig::from_json(
            r#"{"d_model":256,"H":16,"H_q":16,"H_kv":16,"mask":"sliding","window":8}"#,
        )
        .unwrap();
        assert_eq!(ok.mask, MaskMode::Sliding(8));
        assert!(AttentionConfig::from_json(
            r#"{"d_model":256,"H":16,"H_q":16,"H_kv":16,"mask":"sliding","window":0}"#
        )
        .is_err());
    }

    #[test]
    fn span_accounts_for_short_sequences() {
        assert_eq!(MaskMode::Sliding(4).span(100), 5);
        assert_eq!(MaskMode::Sliding(4).span(3), 3);
        assert_eq!(MaskMode::CausalSliding(128).span(100), 100);
        assert_eq!(MaskMode::Causal.span(7), 7);
    }
}
