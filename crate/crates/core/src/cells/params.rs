use crate::autodiff::{Embedding, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// LSTM gates in parameter declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];

    fn suffix(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Output => "o",
            Gate::Candidate => "c",
        }
    }
}

/// Weights of one LSTM cell. Inputs are row vectors, so a gate
/// pre-activation is `x·W_x + h·W_h + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `input_dim × hidden` per gate.
    pub w_x: [Tensor; 4],
    /// `hidden × hidden` per gate.
    pub w_h: [Tensor; 4],
    /// `1 × hidden` per gate.
    pub b: [Tensor; 4],
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            w_x: std::array::from_fn(|_| Tensor::zeros(input_dim, hidden)),
            w_h: std::array::from_fn(|_| Tensor::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| Tensor::zeros(1, hidden)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x[0].rows()
    }

    pub fn hidden(&self) -> usize {
        self.w_h[0].rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, h) = (self.input_dim(), self.hidden());
        for g in Gate::ALL {
            let i = g as usize;
            check_shape(&self.w_x[i], &[n, h], "W_x")?;
            check_shape(&self.w_h[i], &[h, h], "W_h")?;
            check_shape(&self.b[i], &[1, h], "b")?;
        }
        Ok(())
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.w_x.iter().chain(&self.w_h).chain(&self.b).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.w_x.iter_mut().chain(&mut self.w_h).chain(&mut self.b).collect()
    }

    fn names(prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        for kind in ["W_x", "W_h", "b_"] {
            for g in Gate::ALL {
                out.push(format!("{prefix}{kind}{}", g.suffix()));
            }
        }
        out
    }

    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool) -> Result<BoundLstm<'t>> {
        let v = |t: &Tensor| bind_one(tape, t, trainable);
        Ok(BoundLstm {
            w_x: [v(&self.w_x[0])?, v(&self.w_x[1])?, v(&self.w_x[2])?, v(&self.w_x[3])?],
            w_h: [v(&self.w_h[0])?, v(&self.w_h[1])?, v(&self.w_h[2])?, v(&self.w_h[3])?],
            b: [v(&self.b[0])?, v(&self.b[1])?, v(&self.b[2])?, v(&self.b[3])?],
        })
    }
}

/// Two-layer unbiased scoring network producing attention logits:
/// `W2 · tanh(W1 · Xᵀ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    /// `d_a × input_dim`.
    pub w1: Tensor,
    /// `hops × d_a`.
    pub w2: Tensor,
}

impl AttentionParams {
    pub fn zeros(input_dim: usize, attention_dim: usize, hops: usize) -> Self {
        AttentionParams {
            w1: Tensor::zeros(attention_dim, input_dim),
            w2: Tensor::zeros(hops, attention_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn attention_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hops(&self) -> usize {
        self.w2.rows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.w2.cols() != self.attention_dim() {
            return Err(Error::shape("attention W2", self.w2.shape(), self.w1.shape()));
        }
        Ok(())
    }

    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool) -> Result<BoundAttention<'t>> {
        Ok(BoundAttention {
            w1: bind_one(tape, &self.w1, trainable)?,
            w2: bind_one(tape, &self.w2, trainable)?,
        })
    }
}

/// Input-cell attention: an attention block over the inputs seen so far
/// feeding an inner LSTM.
#[derive(Clone, Debug, PartialEq)]
pub struct CellAttentionParams {
    pub attention: AttentionParams,
    pub inner: LstmParams,
    pub mode: Embedding,
}

impl CellAttentionParams {
    pub fn zeros(features: usize, hidden: usize, attention_dim: usize, hops: usize, mode: Embedding) -> Self {
        let input_dim = match mode {
            Embedding::Full => hops * features,
            Embedding::Averaged => features,
        };
        CellAttentionParams {
            attention: AttentionParams::zeros(features, attention_dim, hops),
            inner: LstmParams::zeros(input_dim, hidden),
            mode,
        }
    }

    pub fn features(&self) -> usize {
        self.attention.input_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.attention.validate()?;
        self.inner.validate()?;
        let expected = match self.mode {
            Embedding::Full => self.attention.hops() * self.features(),
            Embedding::Averaged => self.features(),
        };
        if self.inner.input_dim() != expected {
            return Err(Error::validation(format!(
                "inner LSTM input dim {} does not match {:?} embedding width {expected}",
                self.inner.input_dim(),
                self.mode
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeadKind {
    LastHidden,
    MaxPool,
    MeanPool,
    SelfAttention,
}

impl HeadKind {
    pub fn tag(self) -> u8 {
        match self {
            HeadKind::LastHidden => 0,
            HeadKind::MaxPool => 1,
            HeadKind::MeanPool => 2,
            HeadKind::SelfAttention => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => HeadKind::LastHidden,
            1 => HeadKind::MaxPool,
            2 => HeadKind::MeanPool,
            3 => HeadKind::SelfAttention,
            _ => return None,
        })
    }
}

/// Reduces the hidden-state sequence to one vector and maps it to class
/// scores with `rep·W_out + b_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHead {
    pub kind: HeadKind,
    /// Attention over hidden states; present only for [`HeadKind::SelfAttention`].
    pub attention: Option<AttentionParams>,
    /// `head_dim × classes`.
    pub w_out: Tensor,
    /// `1 × classes`.
    pub b_out: Tensor,
}

impl ClassifierHead {
    pub fn zeros(kind: HeadKind, hidden: usize, classes: usize, attention_dim: usize, hops: usize) -> Self {
        let (attention, dim) = match kind {
            HeadKind::SelfAttention => (Some(AttentionParams::zeros(hidden, attention_dim, hops)), hops * hidden),
            _ => (None, hidden),
        };
        ClassifierHead {
            kind,
            attention,
            w_out: Tensor::zeros(dim, classes),
            b_out: Tensor::zeros(1, classes),
        }
    }

    pub fn classes(&self) -> usize {
        self.w_out.cols()
    }

    pub fn validate(&self, hidden: usize) -> Result<()> {
        let dim = match (self.kind, &self.attention) {
            (HeadKind::SelfAttention, Some(a)) => {
                a.validate()?;
                if a.input_dim() != hidden {
                    return Err(Error::shape("self-attention W1", a.w1.shape(), &[a.attention_dim(), hidden]));
                }
                a.hops() * hidden
            }
            (HeadKind::SelfAttention, None) => {
                return Err(Error::validation("self-attention head without attention weights"))
            }
            (_, Some(_)) => return Err(Error::validation("pooling head carries attention weights")),
            (_, None) => hidden,
        };
        check_shape(&self.w_out, &[dim, self.classes()], "W_out")?;
        check_shape(&self.b_out, &[1, self.classes()], "b_out")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellParams {
    Lstm(LstmParams),
    InputCell(CellAttentionParams),
}

impl CellParams {
    pub fn lstm(&self) -> &LstmParams {
        match self {
            CellParams::Lstm(p) => p,
            CellParams::InputCell(p) => &p.inner,
        }
    }

    pub fn lstm_mut(&mut self) -> &mut LstmParams {
        match self {
            CellParams::Lstm(p) => p,
            CellParams::InputCell(p) => &mut p.inner,
        }
    }
}

/// Every trainable tensor of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub cell: CellParams,
    pub head: ClassifierHead,
}

impl ModelParams {
    /// All tensors in declaration order: cell input-attention `W1, W2` (when
    /// present), the LSTM's `W_x*`, `W_h*`, `b_*`, the head's attention
    /// `W1, W2` (when present), then `W_out, b_out`.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        if let CellParams::InputCell(p) = &self.cell {
            out.push(&p.attention.w1);
            out.push(&p.attention.w2);
        }
        out.extend(self.cell.lstm().tensors());
        if let Some(a) = &self.head.attention {
            out.push(&a.w1);
            out.push(&a.w2);
        }
        out.push(&self.head.w_out);
        out.push(&self.head.b_out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        match &mut self.cell {
            CellParams::InputCell(p) => {
                out.push(&mut p.attention.w1);
                out.push(&mut p.attention.w2);
                out.extend(p.inner.tensors_mut());
            }
            CellParams::Lstm(p) => out.extend(p.tensors_mut()),
        }
        if let Some(a) = &mut self.head.attention {
            out.push(&mut a.w1);
            out.push(&mut a.w2);
        }
        out.push(&mut self.head.w_out);
        out.push(&mut self.head.b_out);
        out
    }

    /// Human-readable names matching [`ModelParams::tensors`].
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        if matches!(self.cell, CellParams::InputCell(_)) {
            out.push("cell.W1".to_string());
            out.push("cell.W2".to_string());
        }
        out.extend(LstmParams::names("lstm."));
        if self.head.attention.is_some() {
            out.push("head.W1".to_string());
            out.push("head.W2".to_string());
        }
        out.push("head.W_out".to_string());
        out.push("head.b_out".to_string());
        out
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool) -> Result<BoundModel<'t>> {
        let (cell_attention, lstm) = match &self.cell {
            CellParams::Lstm(p) => (None, p.bind(tape, trainable)?),
            CellParams::InputCell(p) => (Some(p.attention.bind(tape, trainable)?), p.inner.bind(tape, trainable)?),
        };
        let head_attention = match &self.head.attention {
            Some(a) => Some(a.bind(tape, trainable)?),
            None => None,
        };
        Ok(BoundModel {
            cell_attention,
            lstm,
            head_attention,
            w_out: bind_one(tape, &self.head.w_out, trainable)?,
            b_out: bind_one(tape, &self.head.b_out, trainable)?,
        })
    }
}

fn bind_one<'t>(tape: &'t Tape, t: &Tensor, trainable: bool) -> Result<Var<'t>> {
    if trainable {
        tape.leaf(t.clone())
    } else {
        tape.constant(t.clone())
    }
}

fn check_shape(t: &Tensor, expected: &[usize], what: &'static str) -> Result<()> {
    if t.shape() != expected {
        return Err(Error::shape(what, t.shape(), expected));
    }
    Ok(())
}

#[derive(Clone, Copy)]
pub struct BoundLstm<'t> {
    pub w_x: [Var<'t>; 4],
    pub w_h: [Var<'t>; 4],
    pub b: [Var<'t>; 4],
}

#[derive(Clone, Copy)]
pub struct BoundAttention<'t> {
    pub w1: Var<'t>,
    pub w2: Var<'t>,
}

/// [`ModelParams`] recorded on a tape.
pub struct BoundModel<'t> {
    pub cell_attention: Option<BoundAttention<'t>>,
    pub lstm: BoundLstm<'t>,
    pub head_attention: Option<BoundAttention<'t>>,
    pub w_out: Var<'t>,
    pub b_out: Var<'t>,
}

impl<'t> BoundModel<'t> {
    /// Variables in the same order as [`ModelParams::tensors`].
    pub fn vars(&self) -> Vec<Var<'t>> {
        let mut out = Vec::new();
        if let Some(a) = &self.cell_attention {
            out.push(a.w1);
            out.push(a.w2);
        }
        out.extend(self.lstm.w_x);
        out.extend(self.lstm.w_h);
        out.extend(self.lstm.b);
        if let Some(a) = &self.head_attention {
            out.push(a.w1);
            out.push(a.w2);
        }
        out.push(self.w_out);
        out.push(self.b_out);
        out
    }
}
