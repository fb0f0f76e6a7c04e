//! The recommender network.
//!
//! Per event, a shared embedding layer produces item `p`, category `q`,
//! behavior `r` and interval `s` vectors. Target events feed a standard LSTM
//! whose state is the stable preference; all events feed a behavior-enhanced
//! LSTM whose gates also see `r` and `s`. The preference is linearly projected
//! into `J` aspects, each of which guides an additive attention over the
//! behavior states to form an aspect intent. A sigmoid gate mixes preference
//! and intent per aspect, the mixed vectors are concatenated and projected to
//! the user representation, and two softmax heads score the next item and
//! next category.

mod config;
mod forward;
pub mod layers;
mod params;

pub use config::{LeakageMode, ModelConfig, Variant};
pub use forward::{AspectTrace, ForwardTrace, StepGraph, StepOutput, StepSpec};
pub use layers::{AspectOutput, EventEmbedding};
pub use params::{AspectParams, LstmParams, ParamIds};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::numerics::ParamStore;

/// A model instance: configuration, parameter values and the id map.
#[derive(Debug, Clone, PartialEq)]
pub struct Maint {
    config: ModelConfig,
    pub params: ParamStore,
    ids: ParamIds,
    item_mask: Vec<bool>,
    category_mask: Vec<bool>,
}

impl Maint {
    /// Build a model with freshly initialized parameters. The variant in
    /// `config` decides which parameters exist.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (params, ids) = params::init(&config, seed);
        Ok(Self::assemble(config, params, ids))
    }

    /// Rebuild a model around stored parameters, checking names and shapes.
    pub fn from_params(config: ModelConfig, stored: ParamStore) -> Result<Self> {
        config.validate()?;
        let (mut params, ids) = params::init(&config, 0);
        params.copy_values_from(&stored)?;
        for (dst, src) in params.iter_mut().zip(stored.iter()) {
            dst.adam_m = src.adam_m.clone();
            dst.adam_v = src.adam_v.clone();
            dst.step = src.step;
        }
        Ok(Self::assemble(config, params, ids))
    }

    fn assemble(config: ModelConfig, params: ParamStore, ids: ParamIds) -> Self {
        let mut item_mask = vec![true; config.n_items + 1];
        item_mask[0] = false;
        let mut category_mask = vec![true; config.n_categories + 1];
        category_mask[0] = false;
        Maint {
            config,
            params,
            ids,
            item_mask,
            category_mask,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn ids(&self) -> &ParamIds {
        &self.ids
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Ablation constructor: same as [`Maint::new`] with `config.variant` applied.
pub fn make_variant(config: ModelConfig, seed: u64) -> Result<Maint> {
    Maint::new(config, seed)
}
