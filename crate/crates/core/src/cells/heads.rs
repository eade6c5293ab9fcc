use crate::autodiff::{Embedding, Var};
use crate::error::{Error, Result};

use super::params::{BoundAttention, HeadKind};

/// Reduces per-step hidden states (`batch × hidden` each, in time order) to
/// `batch × classes` scores.
pub fn apply_head<'t>(
    kind: HeadKind,
    attention: Option<&BoundAttention<'t>>,
    w_out: Var<'t>,
    b_out: Var<'t>,
    hidden: &[Var<'t>],
    batch: usize,
) -> Result<Var<'t>> {
    let last = *hidden
        .last()
        .ok_or_else(|| Error::Contract("sequence must have at least one timestep".into()))?;
    let tape = last.tape();
    let rep = match kind {
        HeadKind::LastHidden => last,
        HeadKind::MaxPool => tape.max_many(hidden)?,
        HeadKind::MeanPool => tape.add_many(hidden)?.scale(1.0 / hidden.len() as f64)?,
        HeadKind::SelfAttention => {
            let a = attention.ok_or_else(|| Error::validation("self-attention head without attention weights"))?;
            let states = tape.concat_rows(hidden)?;
            let logits = states.matmul(a.w1.transpose()?)?.tanh()?.matmul(a.w2.transpose()?)?;
            tape.prefix_attention(logits, states, batch, hidden.len(), Embedding::Full)?
        }
    };
    rep.matmul(w_out)?.add_row_bias(b_out)
}
