use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::params::{BoundLstm, Gate, LstmParams};

/// Hidden and cell state, `batch × hidden` each.
#[derive(Clone, Copy, Debug)]
pub struct CellState<'t> {
    pub h: Var<'t>,
    pub c: Var<'t>,
}

impl<'t> CellState<'t> {
    pub fn zeros(tape: &'t Tape, batch: usize, hidden: usize) -> Result<Self> {
        Ok(CellState {
            h: tape.constant(Tensor::zeros(batch, hidden))?,
            c: tape.constant(Tensor::zeros(batch, hidden))?,
        })
    }
}

/// Gate activations of one step, kept for inspection.
#[derive(Clone, Copy, Debug)]
pub struct Gates<'t> {
    pub input: Var<'t>,
    pub forget: Var<'t>,
    pub output: Var<'t>,
    pub candidate: Var<'t>,
}

#[derive(Clone, Copy, Debug)]
pub struct StepOutput<'t> {
    pub state: CellState<'t>,
    pub gates: Gates<'t>,
}

impl<'t> BoundLstm<'t> {
    /// `x·W_x` for every gate.
    pub fn project(&self, x: Var<'t>) -> Result<[Var<'t>; 4]> {
        Ok([
            x.matmul(self.w_x[0])?,
            x.matmul(self.w_x[1])?,
            x.matmul(self.w_x[2])?,
            x.matmul(self.w_x[3])?,
        ])
    }

    /// One step given the input projections `x·W_x` of each gate.
    pub fn step_projected(&self, xw: [Var<'t>; 4], prev: &CellState<'t>) -> Result<StepOutput<'t>> {
        let pre = |g: Gate| -> Result<Var<'t>> {
            let i = g as usize;
            xw[i].add(prev.h.matmul(self.w_h[i])?)?.add_row_bias(self.b[i])
        };
        let input = pre(Gate::Input)?.sigmoid()?;
        let forget = pre(Gate::Forget)?.sigmoid()?;
        let output = pre(Gate::Output)?.sigmoid()?;
        let candidate = pre(Gate::Candidate)?.tanh()?;
        let c = forget.mul(prev.c)?.add(input.mul(candidate)?)?;
        let h = output.mul(c.tanh()?)?;
        Ok(StepOutput {
            state: CellState { h, c },
            gates: Gates {
                input,
                forget,
                output,
                candidate,
            },
        })
    }

    pub fn step(&self, x: Var<'t>, prev: &CellState<'t>) -> Result<StepOutput<'t>> {
        self.step_projected(self.project(x)?, prev)
    }

    /// Runs the cell over a time-major `(steps·batch) × input_dim` sequence
    /// from the zero state and returns every hidden state.
    pub fn unroll(&self, x: Var<'t>, batch: usize, hidden: usize) -> Result<Vec<Var<'t>>> {
        let tape = x.tape();
        let rows = x.value().rows();
        if batch == 0 || !rows.is_multiple_of(batch) {
            return Err(Error::Contract(format!("{rows} input rows do not split into batches of {batch}")));
        }
        let steps = rows / batch;
        let xw = self.project(x)?;
        let mut state = CellState::zeros(tape, batch, hidden)?;
        let mut hs = Vec::with_capacity(steps);
        for t in 0..steps {
            let slice = [
                xw[0].slice_rows(t * batch, batch)?,
                xw[1].slice_rows(t * batch, batch)?,
                xw[2].slice_rows(t * batch, batch)?,
                xw[3].slice_rows(t * batch, batch)?,
            ];
            state = self.step_projected(slice, &state)?.state;
            hs.push(state.h);
        }
        Ok(hs)
    }
}

/// Evaluates one LSTM step on plain tensors. `x` is `1 × input_dim`,
/// `h` and `c` are `1 × hidden`; returns the new `(h, c)`.
pub fn lstm_step(params: &LstmParams, x: &Tensor, h: &Tensor, c: &Tensor) -> Result<(Tensor, Tensor)> {
    params.validate()?;
    check_dims(x, params.input_dim(), "x")?;
    check_dims(h, params.hidden(), "h")?;
    check_dims(c, params.hidden(), "c")?;
    let tape = Tape::new();
    let p = params.bind(&tape, false)?;
    let prev = CellState {
        h: tape.constant(h.clone())?,
        c: tape.constant(c.clone())?,
    };
    let out = p.step(tape.constant(x.clone())?, &prev)?;
    let h = out.state.h.value().clone();
    let c = out.state.c.value().clone();
    Ok((h, c))
}

fn check_dims(t: &Tensor, width: usize, what: &'static str) -> Result<()> {
    let (r, c) = t.dims()?;
    if c != width {
        return Err(Error::shape(what, &[r, c], &[r, width]));
    }
    Ok(())
}
