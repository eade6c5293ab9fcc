use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Embedding, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::heads::apply_head;
use super::params::{BoundModel, CellAttentionParams, CellParams, ClassifierHead, HeadKind, LstmParams, ModelParams};

/// Which recurrent cell a model unrolls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    Lstm,
    /// Input-cell attention; `partial = Some(k)` attends only in the last
    /// `k` steps.
    InputCell { mode: Embedding, partial: Option<usize> },
}

/// A cell and head combination, named like `lstm`, `lstm-incell`,
/// `lstm-selfattn`, `lstm-incell-maxpool`, `lstm-incell-full` or
/// `lstm-incell-partial10`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Architecture {
    pub cell: CellKind,
    pub head: HeadKind,
}

impl Architecture {
    pub const LSTM: Architecture = Architecture {
        cell: CellKind::Lstm,
        head: HeadKind::LastHidden,
    };
    pub const INPUT_CELL: Architecture = Architecture {
        cell: CellKind::InputCell {
            mode: Embedding::Averaged,
            partial: None,
        },
        head: HeadKind::LastHidden,
    };
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("lstm")?;
        if let CellKind::InputCell { mode, partial } = self.cell {
            f.write_str("-incell")?;
            if mode == Embedding::Full {
                f.write_str("-full")?;
            }
            if let Some(k) = partial {
                write!(f, "-partial{k}")?;
            }
        }
        match self.head {
            HeadKind::LastHidden => Ok(()),
            HeadKind::MaxPool => f.write_str("-maxpool"),
            HeadKind::MeanPool => f.write_str("-meanpool"),
            HeadKind::SelfAttention => f.write_str("-selfattn"),
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation(format!("unknown model name {s:?}"));
        let mut parts = s.split('-');
        if parts.next() != Some("lstm") {
            return Err(bad());
        }
        let mut incell = false;
        let mut mode = Embedding::Averaged;
        let mut partial = None;
        let mut head = HeadKind::LastHidden;
        for part in parts {
            match part {
                "incell" if !incell => incell = true,
                "full" if incell => mode = Embedding::Full,
                "selfattn" => head = HeadKind::SelfAttention,
                "maxpool" => head = HeadKind::MaxPool,
                "meanpool" => head = HeadKind::MeanPool,
                p if incell && p.starts_with("partial") => {
                    let k = p["partial".len()..].trim_start_matches('(').trim_end_matches(')');
                    let k: usize = k.parse().map_err(|_| bad())?;
                    if k == 0 {
                        return Err(bad());
                    }
                    partial = Some(k);
                }
                _ => return Err(bad()),
            }
        }
        if partial.is_some() && mode == Embedding::Full {
            return Err(Error::validation(format!("{s:?}: partial attention needs the averaged embedding")));
        }
        let cell = if incell {
            CellKind::InputCell { mode, partial }
        } else {
            CellKind::Lstm
        };
        Ok(Architecture { cell, head })
    }
}

/// Dimensions and architecture of a classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub features: usize,
    /// Sequence length the model is trained for.
    pub steps: usize,
    pub hidden: usize,
    pub attention_dim: usize,
    pub hops: usize,
    pub classes: usize,
    pub arch: Architecture,
}

impl ModelSpec {
    /// Defaults: hidden 64, `d_a` 50, 10 hops.
    pub fn new(arch: Architecture, features: usize, steps: usize, classes: usize) -> Self {
        ModelSpec {
            features,
            steps,
            hidden: 64,
            attention_dim: 50,
            hops: 10,
            classes,
            arch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("features", self.features),
            ("steps", self.steps),
            ("hidden", self.hidden),
            ("attention_dim", self.attention_dim),
            ("hops", self.hops),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::validation(format!("{name} must be positive")));
            }
        }
        if self.classes < 2 {
            return Err(Error::validation("a classifier needs at least two classes"));
        }
        if let CellKind::InputCell {
            mode: Embedding::Full,
            partial: Some(_),
        } = self.arch.cell
        {
            return Err(Error::validation("partial input-cell attention needs the averaged embedding"));
        }
        Ok(())
    }

    /// All-zero parameters with this spec's shapes.
    pub fn zero_params(&self) -> ModelParams {
        let cell = match self.arch.cell {
            CellKind::Lstm => CellParams::Lstm(LstmParams::zeros(self.features, self.hidden)),
            CellKind::InputCell { mode, .. } => CellParams::InputCell(CellAttentionParams::zeros(
                self.features,
                self.hidden,
                self.attention_dim,
                self.hops,
                mode,
            )),
        };
        ModelParams {
            cell,
            head: ClassifierHead::zeros(self.arch.head, self.hidden, self.classes, self.attention_dim, self.hops),
        }
    }
}

/// Anything that maps a time-major batch to class scores.
pub trait ScoreModel: Sync {
    fn classes(&self) -> usize;

    fn features(&self) -> usize;

    /// `x` is `(steps·batch) × features`, row `s·batch + b` holding timestep
    /// `s` of sample `b`. Returns `batch × classes` raw scores.
    fn scores<'t>(&self, x: Var<'t>, batch: usize) -> Result<Var<'t>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: ModelParams,
}

impl Model {
    pub fn new(spec: ModelSpec, params: ModelParams) -> Result<Self> {
        spec.validate()?;
        let expected = spec.zero_params();
        let got = params.tensors();
        let want = expected.tensors();
        if got.len() != want.len() || matches!((&params.cell, &expected.cell), (CellParams::Lstm(_), CellParams::InputCell(_)) | (CellParams::InputCell(_), CellParams::Lstm(_))) {
            return Err(Error::validation(format!("parameters do not match architecture {}", spec.arch)));
        }
        if let (CellParams::InputCell(a), CellParams::InputCell(b)) = (&params.cell, &expected.cell) {
            if a.mode != b.mode {
                return Err(Error::validation("embedding mode differs from the spec"));
            }
        }
        if params.head.kind != spec.arch.head {
            return Err(Error::validation("head kind differs from the spec"));
        }
        for (g, w) in got.iter().zip(&want) {
            if g.shape() != w.shape() {
                return Err(Error::shape("model parameter", g.shape(), w.shape()));
            }
        }
        Ok(Model { spec, params })
    }

    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        let params = spec.zero_params();
        Model::new(spec, params)
    }

    /// Unrolls the cell over a time-major batch and applies the head.
    pub fn forward<'t>(&self, bound: &BoundModel<'t>, x: Var<'t>, batch: usize) -> Result<Forward<'t>> {
        let (rows, cols) = x.value().dims()?;
        if cols != self.spec.features {
            return Err(Error::shape("model input", &[rows, cols], &[rows, self.spec.features]));
        }
        if rows == 0 || batch == 0 {
            return Err(Error::Contract("empty input sequence".into()));
        }
        let hidden = match self.spec.arch.cell {
            CellKind::Lstm => bound.lstm.unroll(x, batch, self.spec.hidden)?,
            CellKind::InputCell { mode, partial } => {
                let att = bound
                    .cell_attention
                    .as_ref()
                    .ok_or_else(|| Error::validation("input-cell model without attention weights"))?;
                att.unroll(&bound.lstm, x, batch, self.spec.hidden, mode, partial)?
            }
        };
        let scores = apply_head(
            self.spec.arch.head,
            bound.head_attention.as_ref(),
            bound.w_out,
            bound.b_out,
            &hidden,
            batch,
        )?;
        Ok(Forward { scores, hidden })
    }

    /// Raw class scores for one `T × N` sequence.
    pub fn run_sequence(&self, x: &Tensor) -> Result<Vec<f64>> {
        let (t, _) = x.dims()?;
        if t == 0 {
            return Err(Error::Contract("sequence must have at least one timestep".into()));
        }
        let tape = Tape::new();
        let input = tape.constant(x.clone())?;
        let out = self.scores(input, 1)?;
        let scores = out.value().data().to_vec();
        Ok(scores)
    }

    /// Scores for many samples, evaluated in batches.
    pub fn predict(&self, samples: &[&Tensor]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(64) {
            let tape = Tape::new();
            let x = tape.constant(time_major(chunk)?)?;
            let s = self.scores(x, chunk.len())?;
            let s = s.value();
            out.extend(s.data().chunks(s.cols()).map(|r| r.to_vec()));
        }
        Ok(out)
    }
}

pub struct Forward<'t> {
    pub scores: Var<'t>,
    pub hidden: Vec<Var<'t>>,
}

impl ScoreModel for Model {
    fn classes(&self) -> usize {
        self.spec.classes
    }

    fn features(&self) -> usize {
        self.spec.features
    }

    fn scores<'t>(&self, x: Var<'t>, batch: usize) -> Result<Var<'t>> {
        let bound = self.params.bind(x.tape(), false)?;
        Ok(self.forward(&bound, x, batch)?.scores)
    }
}

/// Interleaves equally shaped `T × N` samples into a `(T·B) × N` time-major
/// matrix.
pub fn time_major(samples: &[&Tensor]) -> Result<Tensor> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Contract("empty batch".into()))?;
    let (t, n) = first.dims()?;
    let b = samples.len();
    let mut data = vec![0.0; t * b * n];
    for (j, s) in samples.iter().enumerate() {
        if s.shape() != [t, n] {
            return Err(Error::shape("batch", first.shape(), s.shape()));
        }
        for step in 0..t {
            data[(step * b + j) * n..(step * b + j + 1) * n].copy_from_slice(s.row_slice(step));
        }
    }
    Tensor::matrix(t * b, n, data)
}

/// Inverse of [`time_major`].
pub fn split_time_major(x: &Tensor, batch: usize) -> Result<Vec<Tensor>> {
    let (rows, n) = x.dims()?;
    if batch == 0 || rows % batch != 0 {
        return Err(Error::Contract(format!("{rows} rows do not split into batches of {batch}")));
    }
    let t = rows / batch;
    (0..batch)
        .map(|j| {
            let mut data = Vec::with_capacity(t * n);
            for step in 0..t {
                data.extend_from_slice(x.row_slice(step * batch + j));
            }
            Tensor::matrix(t, n, data)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture_names_round_trip() {
        for name in [
            "lstm",
            "lstm-incell",
            "lstm-incell-full",
            "lstm-selfattn",
            "lstm-maxpool",
            "lstm-meanpool",
            "lstm-incell-partial10",
            "lstm-incell-selfattn",
        ] {
            let a: Architecture = name.parse().unwrap();
            assert_eq!(a.to_string(), name);
        }
        let a: Architecture = "lstm-incell-partial(7)".parse().unwrap();
        assert_eq!(
            a.cell,
            CellKind::InputCell {
                mode: Embedding::Averaged,
                partial: Some(7)
            }
        );
        for bad in ["gru", "lstm-full", "lstm-incell-incell", "lstm-partial3", "lstm-incell-partial0", "lstm-bilstm"] {
            assert!(bad.parse::<Architecture>().is_err(), "{bad}");
        }
    }

    #[test]
    fn zero_model_scores_are_the_bias() {
        let mut spec = ModelSpec::new("lstm-incell-selfattn".parse().unwrap(), 3, 4, 2);
        spec.hidden = 5;
        spec.attention_dim = 2;
        spec.hops = 3;
        let mut model = Model::zeros(spec).unwrap();
        model.params.head.b_out = Tensor::row(vec![0.7, -1.3]).unwrap();
        let x = Tensor::matrix(4, 3, (0..12).map(|i| i as f64).collect()).unwrap();
        assert_eq!(model.run_sequence(&x).unwrap(), vec![0.7, -1.3]);
    }

    #[test]
    fn time_major_round_trip() {
        let a = Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = a.map(|v| -v);
        let tm = time_major(&[&a, &b]).unwrap();
        assert_eq!(tm.row_slice(1), &[-1.0, -2.0]);
        assert_eq!(tm.row_slice(2), &[3.0, 4.0]);
        let back = split_time_major(&tm, 2).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn rejects_mismatched_params() {
        let spec = ModelSpec::new(Architecture::LSTM, 3, 4, 2);
        let other = ModelSpec::new(Architecture::INPUT_CELL, 3, 4, 2);
        assert!(Model::new(spec, other.zero_params()).is_err());
        let mut wrong = ModelSpec { hidden: 7, ..spec }.zero_params();
        assert!(Model::new(spec, wrong.clone()).is_err());
        wrong = spec.zero_params();
        wrong.head.b_out = Tensor::zeros(1, 3);
        assert!(Model::new(spec, wrong).is_err());
    }
}
