//! Input-cell attention.
//!
//! At step `t` the cell sees `X_t = [x_1 … x_t]` (`t × N`) and forms
//! `A_t = softmax(W2 · tanh(W1 · X_tᵀ))` (`r × t`, one softmax per hop) and
//! `M_t = A_t · X_t` (`r × N`). The inner LSTM consumes `M_t` flattened
//! hop-major (full mode) or its mean over hops `m̃_t` (averaged mode).
//!
//! Two routes compute this. The literal one below builds the formula from
//! generic tape ops for a single sample and is used for inspection and
//! checking. [`BoundAttention::unroll`] runs the batched recurrence: since
//! column `s` of `W1 · X_tᵀ` depends only on `x_s`, the scoring network is
//! evaluated once per timestep and every `A_t` is a softmax over the first `t`
//! logits, recomputed from scratch at each step.

use crate::autodiff::{Embedding, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::lstm::{CellState, StepOutput};
use super::params::{AttentionParams, BoundAttention, BoundLstm, CellAttentionParams};

/// Attention weights and embeddings for one prefix `X_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput {
    /// `A_t`, `r × t`; each row sums to one.
    pub weights: Tensor,
    /// `M_t = A_t · X_t`, `r × N`.
    pub embedding: Tensor,
    /// `m̃_t`, the mean of `M_t` over hops (`1 × N`); averaged mode only.
    pub averaged: Option<Tensor>,
}

impl<'t> BoundAttention<'t> {
    /// Attention weights `A = softmax(W2 · tanh(W1 · Xᵀ))` for a `t × N` prefix.
    pub fn weights(&self, prefix: Var<'t>) -> Result<Var<'t>> {
        self.w2.matmul(self.w1.matmul(prefix.transpose()?)?.tanh()?)?.softmax_rows()
    }

    /// The inner-LSTM input produced by explicit weights `A` (`r × t`) over a
    /// `t × N` prefix: `A·X` flattened to `1 × r·N`, or its hop mean `1 × N`.
    pub fn embed_with(&self, weights: Var<'t>, prefix: Var<'t>, mode: Embedding) -> Result<Var<'t>> {
        let m = weights.matmul(prefix)?;
        let (r, n) = m.value().dims()?;
        match mode {
            Embedding::Full => m.reshape(1, r * n),
            Embedding::Averaged => {
                let mean = prefix.tape().constant(Tensor::full(1, r, 1.0 / r as f64))?;
                mean.matmul(m)
            }
        }
    }

    /// Batched input-cell recurrence over a time-major `(steps·batch) × N`
    /// input. When `partial` is `Some(k)`, only the last `k` steps attend and
    /// earlier steps feed `x_t` directly (averaged mode only).
    pub fn unroll(
        &self,
        inner: &BoundLstm<'t>,
        x: Var<'t>,
        batch: usize,
        hidden: usize,
        mode: Embedding,
        partial: Option<usize>,
    ) -> Result<Vec<Var<'t>>> {
        let tape = x.tape();
        let rows = x.value().rows();
        if batch == 0 || !rows.is_multiple_of(batch) {
            return Err(Error::Contract(format!("{rows} input rows do not split into batches of {batch}")));
        }
        if partial.is_some() && mode == Embedding::Full {
            return Err(Error::validation("partial input-cell attention needs the averaged embedding"));
        }
        let steps = rows / batch;
        let logits = x.matmul(self.w1.transpose()?)?.tanh()?.matmul(self.w2.transpose()?)?;
        let mut state = CellState::zeros(tape, batch, hidden)?;
        let mut hs = Vec::with_capacity(steps);
        for t in 0..steps {
            let attend = partial.is_none_or(|k| t + k >= steps);
            let input = if attend {
                tape.prefix_attention(logits, x, batch, t + 1, mode)?
            } else {
                x.slice_rows(t * batch, batch)?
            };
            state = inner.step(input, &state)?.state;
            hs.push(state.h);
        }
        Ok(hs)
    }
}

/// Computes `A_t`, `M_t` and (averaged mode) `m̃_t` for a `t × N` prefix.
pub fn attend(params: &AttentionParams, mode: Embedding, prefix: &Tensor) -> Result<AttentionOutput> {
    params.validate()?;
    let (t, n) = prefix.dims()?;
    if n != params.input_dim() {
        return Err(Error::shape("attend", prefix.shape(), &[t, params.input_dim()]));
    }
    let tape = Tape::new();
    let a = params.bind(&tape, false)?;
    let x = tape.constant(prefix.clone())?;
    let weights = a.weights(x)?;
    let m = weights.matmul(x)?;
    let averaged = match mode {
        Embedding::Full => None,
        Embedding::Averaged => Some(a.embed_with(weights, x, mode)?.value().clone()),
    };
    let weights = weights.value().clone();
    let embedding = m.value().clone();
    Ok(AttentionOutput {
        weights,
        embedding,
        averaged,
    })
}

/// One input-cell step over the prefix `x_1..x_t` (a `t × N` value).
pub fn cell_attention_step<'t>(
    attention: &BoundAttention<'t>,
    inner: &BoundLstm<'t>,
    mode: Embedding,
    prefix: Var<'t>,
    prev: &CellState<'t>,
) -> Result<StepOutput<'t>> {
    let weights = attention.weights(prefix)?;
    step_with_attention(attention, inner, mode, weights, prefix, prev)
}

/// One input-cell step with the attention weights supplied by the caller,
/// e.g. pinned to a single timestep.
pub fn step_with_attention<'t>(
    attention: &BoundAttention<'t>,
    inner: &BoundLstm<'t>,
    mode: Embedding,
    weights: Var<'t>,
    prefix: Var<'t>,
    prev: &CellState<'t>,
) -> Result<StepOutput<'t>> {
    let input = attention.embed_with(weights, prefix, mode)?;
    inner.step(input, prev)
}

/// Runs the literal single-sample recurrence over a `T × N` sequence and
/// returns every `A_t` with the final state. Slow (quadratic work in the
/// scoring network); meant for inspection and cross-checking.
pub fn trace_sequence(params: &CellAttentionParams, x: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
    params.validate()?;
    let (steps, n) = x.dims()?;
    if n != params.features() {
        return Err(Error::shape("trace_sequence", x.shape(), &[steps, params.features()]));
    }
    let tape = Tape::new();
    let att = params.attention.bind(&tape, false)?;
    let inner = params.inner.bind(&tape, false)?;
    let xv = tape.constant(x.clone())?;
    let mut state = CellState::zeros(&tape, 1, params.inner.hidden())?;
    let mut all = Vec::with_capacity(steps);
    for t in 1..=steps {
        let prefix = xv.slice_rows(0, t)?;
        let weights = att.weights(prefix)?;
        all.push(weights.value().clone());
        state = step_with_attention(&att, &inner, params.mode, weights, prefix, &state)?.state;
    }
    let h = state.h.value().clone();
    Ok((all, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(t: usize, n: usize) -> Tensor {
        Tensor::matrix(t, n, (0..t * n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect()).unwrap()
    }

    #[test]
    fn zero_scoring_weights_give_uniform_attention() {
        let p = AttentionParams::zeros(3, 4, 2);
        let x = seq(5, 3);
        let out = attend(&p, Embedding::Averaged, &x).unwrap();
        assert_eq!(out.weights.shape(), &[2, 5]);
        for &w in out.weights.data() {
            assert!((w - 0.2).abs() < 1e-15);
        }
        for j in 0..3 {
            let mean: f64 = (0..5).map(|s| x.get(s, j)).sum::<f64>() / 5.0;
            for k in 0..2 {
                assert!((out.embedding.get(k, j) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_timestep_copies_the_input() {
        let mut p = AttentionParams::zeros(3, 2, 4);
        p.w1 = Tensor::full(2, 3, 0.3);
        p.w2 = Tensor::full(4, 2, -1.1);
        let x = Tensor::row(vec![1.5, -2.0, 0.25]).unwrap();
        let out = attend(&p, Embedding::Averaged, &x).unwrap();
        assert_eq!(out.weights.data(), &[1.0; 4]);
        for k in 0..4 {
            assert_eq!(out.embedding.row_slice(k), x.data());
        }
        assert_eq!(out.averaged.unwrap().data(), x.data());
    }

    #[test]
    fn hop_mean_of_embedding() {
        let tape = Tape::new();
        let a = AttentionParams::zeros(2, 1, 2).bind(&tape, false).unwrap();
        // With A = I₂ and X = M the averaged embedding is the hop mean of M.
        let weights = tape.constant(Tensor::identity(2)).unwrap();
        let m = tape.constant(Tensor::from_rows(&[&[1.0, 3.0], &[3.0, 5.0]]).unwrap()).unwrap();
        let avg = a.embed_with(weights, m, Embedding::Averaged).unwrap();
        assert_eq!(avg.value().data(), &[2.0, 4.0]);
        let full = a.embed_with(weights, m, Embedding::Full).unwrap();
        assert_eq!(full.value().data(), &[1.0, 3.0, 3.0, 5.0]);
    }

    #[test]
    fn attend_rejects_wrong_width() {
        let p = AttentionParams::zeros(3, 2, 2);
        assert!(matches!(attend(&p, Embedding::Full, &seq(4, 2)), Err(Error::Shape { .. })));
    }
}
