use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::numeric::{xavier_init, ParamId, ParamStore, SparseMatrix, Tape, Var};
use crate::rng::mix_seed;

/// Three GCN layer weights, `d x h`, `h x h`, `h x h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    pub weights: [ParamId; 3],
    pub input_dim: usize,
    pub hidden: usize,
}

impl GcnParams {
    pub fn init(store: &mut ParamStore, input_dim: usize, hidden: usize, seed: u64, trainable: bool) -> Self {
        let dims = [(input_dim, hidden), (hidden, hidden), (hidden, hidden)];
        let weights = std::array::from_fn(|l| {
            let (r, c) = dims[l];
            store.add(format!("gcn.w{l}"), xavier_init(r, c, mix_seed(&[seed, 0x6c, l as u64])), trainable)
        });
        GcnParams {
            weights,
            input_dim,
            hidden,
        }
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.weights.to_vec()
    }
}

/// `Z = tanh(Â tanh(Â tanh(Â X W0) W1) W2)` with `Â` the self-looped,
/// symmetrically normalized adjacency.
pub fn gcn_forward(tape: &mut Tape, store: &ParamStore, a_hat: &Arc<SparseMatrix>, x: Var, p: &GcnParams) -> Result<Var> {
    let width = tape.value(x).cols();
    if width != p.input_dim {
        return Err(GapError::shape(
            "gcn_forward",
            format!("features have width {width}, first layer expects {}", p.input_dim),
        ));
    }
    let mut h = x;
    for &w in &p.weights {
        let ah = tape.sparse_matmul(a_hat, h)?;
        let wv = tape.param(store, w)?;
        let lin = tape.matmul(ah, wv)?;
        h = tape.tanh(lin)?;
    }
    Ok(h)
}
