use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};

/// Architecture variant; everything except `Full` is an ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Full,
    /// A single aspect and no projection matrix.
    NoProjection,
    /// Behavior LSTM gates see only item and category embeddings.
    VanillaLstm,
    /// Attention scores ignore the preference query.
    VanillaAttention,
    /// A linear map of the concatenated preference and intent replaces the gate.
    ConcatFusion,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoProjection,
        Variant::VanillaLstm,
        Variant::VanillaAttention,
        Variant::ConcatFusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoProjection => "no-projection",
            Variant::VanillaLstm => "vanilla-lstm",
            Variant::VanillaAttention => "vanilla-attention",
            Variant::ConcatFusion => "concat-fusion",
        }
    }

    /// Row label used in ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "MAINT",
            Variant::NoProjection => "MAINT-MP",
            Variant::VanillaLstm => "MAINT-BLSTM",
            Variant::VanillaAttention => "MAINT-RAtt",
            Variant::ConcatFusion => "MAINT-MGFus",
        }
    }

    /// Short ablation code (`mp`, `blstm`, `ratt`, `mgfus`).
    pub fn code(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoProjection => "mp",
            Variant::VanillaLstm => "blstm",
            Variant::VanillaAttention => "ratt",
            Variant::ConcatFusion => "mgfus",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| t == v.name() || t == v.code() || t == v.label().to_ascii_lowercase())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant {s:?}; valid: full, no-projection (mp), vanilla-lstm (blstm), vanilla-attention (ratt), concat-fusion (mgfus)"
                ))
            })
    }
}

/// Which events a training prediction may see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeakageMode {
    /// Step `m` sees only events before the `(m+1)`-th target event.
    #[default]
    PrefixMasked,
    /// Every step sees the whole training sequence and the final preference
    /// state, as the learning loop is literally written. Leaks future events.
    Algorithm1Literal,
}

impl LeakageMode {
    pub fn name(self) -> &'static str {
        match self {
            LeakageMode::PrefixMasked => "prefix-masked",
            LeakageMode::Algorithm1Literal => "algorithm1-literal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "prefix-masked" => Ok(LeakageMode::PrefixMasked),
            "algorithm1-literal" => Ok(LeakageMode::Algorithm1Literal),
            other => Err(Error::Config(format!(
                "unknown leakage mode {other:?}; valid: prefix-masked, algorithm1-literal"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Embedding and hidden size `d`.
    pub dim: usize,
    /// Number of aspects `J`.
    pub aspects: usize,
    /// Weight of the category loss.
    pub gamma: f64,
    /// L2 coefficient.
    pub lambda: f64,
    pub dropout: f64,
    /// Most recent events fed to the model.
    pub max_len: usize,
    pub n_items: usize,
    pub n_categories: usize,
    pub n_behaviors: usize,
    pub n_buckets: usize,
    pub target_behavior: usize,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 64,
            aspects: 3,
            gamma: 1.0,
            lambda: 1e-5,
            dropout: 0.2,
            max_len: 20,
            n_items: 0,
            n_categories: 0,
            n_behaviors: 0,
            n_buckets: crate::data::DEFAULT_BOUNDARIES.len() + 2,
            target_behavior: 0,
            variant: Variant::Full,
        }
    }
}

impl ModelConfig {
    /// Aspect count actually built (the no-projection variant forces one).
    pub fn effective_aspects(&self) -> usize {
        match self.variant {
            Variant::NoProjection => 1,
            _ => self.aspects,
        }
    }

    /// Copy vocabulary sizes and the target behavior from a split.
    pub fn sized_for(mut self, split: &crate::data::DatasetSplit) -> Self {
        self.n_items = split.n_items;
        self.n_categories = split.n_categories;
        self.n_behaviors = split.n_behaviors;
        self.n_buckets = split.bucketizer.len();
        self.target_behavior = split.target_behavior;
        self
    }

    pub fn terminal_bucket(&self) -> usize {
        self.n_buckets - 1
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.dim == 0 {
            return fail("model.d must be at least 1".into());
        }
        if self.aspects == 0 {
            return fail("model.J must be at least 1".into());
        }
        if !(self.gamma >= 0.0) {
            return fail(format!("model.gamma must be non-negative, got {}", self.gamma));
        }
        if !(self.lambda >= 0.0) {
            return fail(format!("model.lambda must be non-negative, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("model.dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.max_len == 0 {
            return fail("model.max_len must be at least 1".into());
        }
        if self.n_items == 0 || self.n_categories == 0 || self.n_behaviors == 0 {
            return fail("vocabulary sizes must be positive".into());
        }
        if self.n_buckets < 2 {
            return fail("need at least one interval bucket plus the terminal bucket".into());
        }
        if self.target_behavior == 0 || self.target_behavior > self.n_behaviors {
            return fail(format!(
                "target behavior index {} outside 1..={}",
                self.target_behavior, self.n_behaviors
            ));
        }
        Ok(())
    }
}
