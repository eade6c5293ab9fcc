//! Shared helpers for integration tests: a central finite-difference oracle,
//! random small models and an independent closed-form LSTM Jacobian.

#![allow(dead_code)]

use incell::autodiff::{Embedding, Tape};
use incell::cells::{Architecture, CellKind, HeadKind, LstmParams, Model, ModelSpec};
use incell::tensor::Tensor;
use incell::train::init_params;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Finite-difference step used throughout.
pub const FD_STEP: f64 = 1e-5;

/// `|a − b| / max(|a|, |b|, floor)`. The floor keeps entries that are zero up
/// to rounding from dominating the ratio.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest [`rel_err`] over paired slices.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| rel_err(x, y, floor)).fold(0.0, f64::max)
}

/// Central differences of `f` at every coordinate of `x`.
pub fn fd_gradient(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut g = Tensor::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + FD_STEP;
        let up = f(&probe);
        probe.data_mut()[i] = orig - FD_STEP;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        g.data_mut()[i] = (up - down) / (2.0 * FD_STEP);
    }
    g
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| r.gen_range(-scale..=scale)).collect()).unwrap()
}

/// Small model with every tensor drawn from `[−scale, scale]`.
pub fn random_model(arch: Architecture, features: usize, steps: usize, hidden: usize, seed: u64, scale: f64) -> Model {
    let mut spec = ModelSpec::new(arch, features, steps, 3);
    spec.hidden = hidden;
    spec.attention_dim = 3;
    spec.hops = 2;
    let mut params = init_params(&spec, seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v = r.gen_range(-scale..=scale);
        }
    }
    Model::new(spec, params).unwrap()
}

/// Mean cross-entropy of `model` on a time-major batch, evaluated with every
/// parameter held constant. Used as the scalar for finite differences.
pub fn loss_value(model: &Model, x: &Tensor, batch: usize, labels: &[usize]) -> f64 {
    let tape = Tape::new();
    let bound = model.params.bind(&tape, false).unwrap();
    let xv = tape.constant(x.clone()).unwrap();
    let scores = model.forward(&bound, xv, batch).unwrap().scores;
    let loss = tape.cross_entropy(scores, labels).unwrap();
    let v = loss.value().data()[0];
    v
}

/// Analytic gradients of [`loss_value`] w.r.t. the input and every parameter
/// tensor (in declaration order).
pub fn loss_gradients(model: &Model, x: &Tensor, batch: usize, labels: &[usize]) -> (Tensor, Vec<Tensor>) {
    let tape = Tape::new();
    let bound = model.params.bind(&tape, true).unwrap();
    let xv = tape.leaf(x.clone()).unwrap();
    let scores = model.forward(&bound, xv, batch).unwrap().scores;
    let loss = tape.cross_entropy(scores, labels).unwrap();
    let g = tape.backward(loss).unwrap();
    let params = bound.vars().into_iter().map(|v| g.wrt(v)).collect();
    (g.wrt(xv), params)
}

/// Worst relative error between analytic and finite-difference gradients of a
/// batch cross-entropy, over the input and all parameters.
pub fn model_gradient_error(model: &Model, x: &Tensor, batch: usize, labels: &[usize], floor: f64) -> f64 {
    let (gx, gp) = loss_gradients(model, x, batch, labels);
    let fx = fd_gradient(x, |p| loss_value(model, p, batch, labels));
    let mut worst = max_rel_err(gx.data(), fx.data(), floor);
    let n = model.params.tensors().len();
    for k in 0..n {
        let base = model.params.tensors()[k].clone();
        let fd = fd_gradient(&base, |p| {
            let mut m = model.clone();
            *m.params.tensors_mut()[k] = p.clone();
            loss_value(&m, x, batch, labels)
        });
        worst = worst.max(max_rel_err(gp[k].data(), fd.data(), floor));
    }
    worst
}

/// Every architecture family the gradient checks cover.
pub fn gradient_architectures() -> Vec<Architecture> {
    let ic = |mode, partial| CellKind::InputCell { mode, partial };
    let mut out = Vec::new();
    for head in [HeadKind::LastHidden, HeadKind::MaxPool, HeadKind::MeanPool, HeadKind::SelfAttention] {
        out.push(Architecture { cell: CellKind::Lstm, head });
        out.push(Architecture { cell: ic(Embedding::Averaged, None), head });
    }
    out.push(Architecture {
        cell: ic(Embedding::Full, None),
        head: HeadKind::LastHidden,
    });
    out.push(Architecture {
        cell: ic(Embedding::Averaged, Some(2)),
        head: HeadKind::LastHidden,
    });
    out
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Plain-loop LSTM step, written independently of the tape. Returns the gate
/// activations `(i, f, o, c̃)` and the new `(h, c)`.
pub struct ManualStep {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

pub fn manual_step(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> ManualStep {
    let hid = p.hidden();
    let pre = |k: usize, j: usize| -> f64 {
        let mut s = p.b[k].data()[j];
        for (a, &xa) in x.iter().enumerate() {
            s += xa * p.w_x[k].get(a, j);
        }
        for (a, &ha) in h.iter().enumerate() {
            s += ha * p.w_h[k].get(a, j);
        }
        s
    };
    let i: Vec<f64> = (0..hid).map(|j| sig(pre(0, j))).collect();
    let f: Vec<f64> = (0..hid).map(|j| sig(pre(1, j))).collect();
    let o: Vec<f64> = (0..hid).map(|j| sig(pre(2, j))).collect();
    let g: Vec<f64> = (0..hid).map(|j| pre(3, j).tanh()).collect();
    let c_new: Vec<f64> = (0..hid).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
    let h_new: Vec<f64> = (0..hid).map(|j| o[j] * c_new[j].tanh()).collect();
    ManualStep {
        i,
        f,
        o,
        g,
        h: h_new,
        c: c_new,
    }
}

/// Closed-form `∂h_t/∂h_{t−1}` (with `c_{t−1}` held fixed) as a `hidden ×
/// hidden` matrix `J[j][k] = ∂h_t[j]/∂h_{t−1}[k]`:
///
/// `tanh(c_t)·o(1−o)·W_ho + o(1−tanh²c_t)·(c_{t−1}·f(1−f)·W_hf + c̃·i(1−i)·W_hi + i(1−c̃²)·W_hc̃)`.
pub fn closed_form_jhh(p: &LstmParams, s: &ManualStep, c_prev: &[f64]) -> Vec<Vec<f64>> {
    let hid = p.hidden();
    (0..hid)
        .map(|j| {
            let tc = s.c[j].tanh();
            let dc = s.o[j] * (1.0 - tc * tc);
            (0..hid)
                .map(|k| {
                    let w = |g: usize| p.w_h[g].get(k, j);
                    tc * s.o[j] * (1.0 - s.o[j]) * w(2)
                        + dc * (c_prev[j] * s.f[j] * (1.0 - s.f[j]) * w(1)
                            + s.g[j] * s.i[j] * (1.0 - s.i[j]) * w(0)
                            + s.i[j] * (1.0 - s.g[j] * s.g[j]) * w(3))
                })
                .collect()
        })
        .collect()
}

/// Closed-form `∂h_t/∂c_{t−1}`, diagonal: `o(1−tanh²c_t)·f`.
pub fn closed_form_jhc(s: &ManualStep) -> Vec<f64> {
    (0..s.h.len())
        .map(|j| {
            let tc = s.c[j].tanh();
            s.o[j] * (1.0 - tc * tc) * s.f[j]
        })
        .collect()
}

pub fn random_lstm(r: &mut impl Rng, input: usize, hidden: usize, scale: f64) -> LstmParams {
    LstmParams {
        w_x: std::array::from_fn(|_| uniform(r, input, hidden, scale)),
        w_h: std::array::from_fn(|_| uniform(r, hidden, hidden, scale)),
        b: std::array::from_fn(|_| uniform(r, 1, hidden, scale)),
    }
}

/// `∂h_t/∂h_{t−1}` and `∂h_t/∂c_{t−1}` by reverse-mode differentiation, one
/// backward pass per output coordinate. Rows index `h_t`, columns the previous
/// state.
pub fn autodiff_jacobians(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    use incell::cells::CellState;
    let hid = p.hidden();
    let (mut jhh, mut jhc) = (Vec::new(), Vec::new());
    for j in 0..hid {
        let tape = Tape::new();
        let bound = p.bind(&tape, false).unwrap();
        let hv = tape.leaf(Tensor::row(h.to_vec()).unwrap()).unwrap();
        let cv = tape.leaf(Tensor::row(c.to_vec()).unwrap()).unwrap();
        let xv = tape.constant(Tensor::row(x.to_vec()).unwrap()).unwrap();
        let out = bound.step(xv, &CellState { h: hv, c: cv }).unwrap();
        let mut pick = Tensor::zeros(hid, 1);
        pick.set(j, 0, 1.0);
        let s = out.state.h.matmul(tape.constant(pick).unwrap()).unwrap();
        let g = tape.backward(s).unwrap();
        jhh.push(g.wrt(hv).into_data());
        jhc.push(g.wrt(cv).into_data());
    }
    (jhh, jhc)
}

/// Hand-evaluated `(reference mask, saliency, Σ|ref − R| / Σ ref)` triples.
pub fn euclidean_cases() -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    vec![
        (vec![1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0], 0.0),
        (vec![1.0, 1.0, 0.0, 1.0], vec![0.0; 4], 1.0),
        (vec![1.0, 0.0], vec![0.5, 0.5], 1.0),
        (vec![1.0, 1.0], vec![0.5, 2.0], 0.75),
        (vec![0.0, 1.0, 1.0, 0.0], vec![0.25, 1.0, 0.0, 0.0], 0.625),
        (vec![1.0], vec![3.0], 2.0),
        (vec![1.0, 1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0, 0.0], 0.25),
        (vec![0.0, 0.0, 1.0], vec![0.1, 0.2, 0.7], 0.6),
        (vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0], 2.0),
        (vec![1.0, 1.0, 0.0], vec![0.75, 1.25, 0.5], 0.5),
    ]
}

/// Hand-evaluated `(|X|, saliency, Σ min / Σ max)` triples.
pub fn jaccard_cases() -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    vec![
        (vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], 1.0),
        (vec![1.0, 1.0], vec![0.0, 0.0], 0.0),
        (vec![2.0, 0.0], vec![1.0, 1.0], 1.0 / 3.0),
        (vec![0.0, 0.0], vec![0.0, 0.0], 1.0),
        (vec![1.0, 2.0], vec![2.0, 1.0], 0.5),
        (vec![0.5, 0.5, 1.0], vec![1.0, 0.0, 1.0], 0.6),
        (vec![3.0], vec![1.0], 1.0 / 3.0),
        (vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 4.0], 0.0),
        (vec![2.0, 2.0, 2.0, 2.0], vec![1.0, 1.0, 1.0, 1.0], 0.5),
        (vec![0.25, 4.0], vec![1.0, 1.0], 0.25),
    ]
}
