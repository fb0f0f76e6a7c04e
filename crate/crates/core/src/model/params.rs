use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::{ModelConfig, Variant};
use crate::numerics::{ParamId, ParamStore, Tensor};
use crate::rng::{rng_for, Rng as ChaCha};

/// Gate weights of one LSTM. Each matrix multiplies the concatenation of the
/// gate inputs and the previous hidden state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LstmParams {
    pub w_input: ParamId,
    pub w_forget: ParamId,
    pub w_cell: ParamId,
    pub w_output: ParamId,
    pub b_input: ParamId,
    pub b_forget: ParamId,
    pub b_cell: ParamId,
    pub b_output: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AspectParams {
    pub projection: Option<ParamId>,
    pub query: Option<ParamId>,
    pub key: ParamId,
    pub attn_bias: ParamId,
    pub attn_vector: ParamId,
    pub value: ParamId,
    pub gate_weight: Option<ParamId>,
    pub gate_bias: Option<ParamId>,
    pub concat: Option<ParamId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamIds {
    pub item_embedding: ParamId,
    pub category_embedding: ParamId,
    pub behavior_embedding: ParamId,
    pub interval_embedding: ParamId,
    pub target_lstm: LstmParams,
    pub behavior_lstm: LstmParams,
    pub aspects: Vec<AspectParams>,
    pub output_projection: ParamId,
    pub item_head: ParamId,
    pub category_head: ParamId,
}

fn glorot(rng: &mut ChaCha, rows: usize, cols: usize) -> Tensor {
    let a = libm::sqrt(6.0 / (rows + cols) as f64);
    let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
    Tensor::from_vec(&[rows, cols], data).expect("shape matches data")
}

/// Glorot table whose padding row 0 is zero.
fn table(rng: &mut ChaCha, rows: usize, cols: usize, padded: bool) -> Tensor {
    let mut t = glorot(rng, rows, cols);
    if padded {
        t.row_mut(0).fill(0.0);
    }
    t
}

fn vector(rng: &mut ChaCha, n: usize) -> Tensor {
    let t = glorot(rng, 1, n);
    Tensor::vector(t.into_data())
}

fn lstm(
    store: &mut ParamStore,
    rng: &mut ChaCha,
    prefix: &str,
    d: usize,
    gate_in: usize,
    cell_in: usize,
) -> LstmParams {
    let mut forget_bias = Tensor::zeros(&[d]);
    forget_bias.fill(1.0);
    LstmParams {
        w_input: store.add(format!("{prefix}.w_input"), glorot(rng, d, gate_in)),
        w_forget: store.add(format!("{prefix}.w_forget"), glorot(rng, d, gate_in)),
        w_cell: store.add(format!("{prefix}.w_cell"), glorot(rng, d, cell_in)),
        w_output: store.add(format!("{prefix}.w_output"), glorot(rng, d, gate_in)),
        b_input: store.add(format!("{prefix}.b_input"), Tensor::zeros(&[d])),
        b_forget: store.add(format!("{prefix}.b_forget"), forget_bias),
        b_cell: store.add(format!("{prefix}.b_cell"), Tensor::zeros(&[d])),
        b_output: store.add(format!("{prefix}.b_output"), Tensor::zeros(&[d])),
    }
}

pub(crate) fn init(config: &ModelConfig, seed: u64) -> (ParamStore, ParamIds) {
    let d = config.dim;
    let j = config.effective_aspects();
    let mut rng = rng_for(seed, &[0x696e_6974]);
    let mut s = ParamStore::new();

    let item_embedding = s.add("item_embedding", table(&mut rng, config.n_items + 1, d, true));
    let category_embedding = s.add(
        "category_embedding",
        table(&mut rng, config.n_categories + 1, d, true),
    );
    let behavior_embedding = s.add(
        "behavior_embedding",
        table(&mut rng, config.n_behaviors + 1, d, true),
    );
    let interval_embedding = s.add(
        "interval_embedding",
        table(&mut rng, config.n_buckets, d, false),
    );

    let target_lstm = lstm(&mut s, &mut rng, "target_lstm", d, 3 * d, 3 * d);
    let gate_in = match config.variant {
        Variant::VanillaLstm => 3 * d,
        _ => 5 * d,
    };
    let behavior_lstm = lstm(&mut s, &mut rng, "behavior_lstm", d, gate_in, 3 * d);

    let mut aspects = Vec::with_capacity(j);
    for a in 0..j {
        let name = |part: &str| format!("aspect.{a}.{part}");
        let projection = (config.variant != Variant::NoProjection)
            .then(|| s.add(name("projection"), glorot(&mut rng, d, d)));
        let query = (config.variant != Variant::VanillaAttention)
            .then(|| s.add(name("query"), glorot(&mut rng, d, d)));
        let key = s.add(name("key"), glorot(&mut rng, d, d));
        let attn_bias = s.add(name("attn_bias"), Tensor::zeros(&[d]));
        let attn_vector = s.add(name("attn_vector"), vector(&mut rng, d));
        let value = s.add(name("value"), glorot(&mut rng, d, d));
        let (gate_weight, gate_bias, concat) = if config.variant == Variant::ConcatFusion {
            (None, None, Some(s.add(name("concat"), glorot(&mut rng, d, 2 * d))))
        } else {
            (
                Some(s.add(name("gate_weight"), vector(&mut rng, 2 * d))),
                Some(s.add(name("gate_bias"), Tensor::zeros(&[1]))),
                None,
            )
        };
        aspects.push(AspectParams {
            projection,
            query,
            key,
            attn_bias,
            attn_vector,
            value,
            gate_weight,
            gate_bias,
            concat,
        });
    }

    let output_projection = s.add("output_projection", glorot(&mut rng, d, j * d));
    let item_head = s.add("item_head", table(&mut rng, config.n_items + 1, d, true));
    let category_head = s.add(
        "category_head",
        table(&mut rng, config.n_categories + 1, d, true),
    );

    let ids = ParamIds {
        item_embedding,
        category_embedding,
        behavior_embedding,
        interval_embedding,
        target_lstm,
        behavior_lstm,
        aspects,
        output_projection,
        item_head,
        category_head,
    };
    (s, ids)
}
