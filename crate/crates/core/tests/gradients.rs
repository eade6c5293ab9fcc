//! Analytic gradients against central finite differences.

mod common;

use common::*;
use incell::autodiff::{softmax_rows, Tape, Var};
use incell::cells::{time_major, Architecture};
use incell::tensor::Tensor;
use incell::Error;
use proptest::prelude::*;

const OP_TOL: f64 = 1e-6;
const NET_TOL: f64 = 1e-4;

fn check_op(x: &Tensor, f: impl for<'t> Fn(&'t Tape, Var<'t>) -> Var<'t>) -> f64 {
    let tape = Tape::new();
    let v = tape.leaf(x.clone()).unwrap();
    let root = f(&tape, v);
    let g = tape.backward(root).unwrap().wrt(v);
    let fd = fd_gradient(x, |p| {
        let tape = Tape::new();
        let v = tape.constant(p.clone()).unwrap();
        let out = f(&tape, v).value().data()[0];
        out
    });
    max_rel_err(g.data(), fd.data(), 1e-8)
}

#[test]
fn matmul_gradient_matches_differences() {
    let mut r = rng(1);
    let a = uniform(&mut r, 3, 3, 2.0);
    let b = uniform(&mut r, 3, 3, 2.0);
    let err = check_op(&a, |t, v| v.matmul(t.constant(b.clone()).unwrap()).unwrap().sum().unwrap());
    assert!(err <= OP_TOL, "{err}");
    let err = check_op(&b, |t, v| t.constant(a.clone()).unwrap().matmul(v).unwrap().sum().unwrap());
    assert!(err <= OP_TOL, "{err}");
}

#[test]
fn elementwise_gradients_match_differences() {
    let mut r = rng(2);
    let x = uniform(&mut r, 3, 4, 2.0);
    let y = uniform(&mut r, 3, 4, 2.0);
    let cases: Vec<(&str, f64)> = vec![
        ("tanh", check_op(&x, |_, v| v.tanh().unwrap().sum().unwrap())),
        ("sigmoid", check_op(&x, |_, v| v.sigmoid().unwrap().sum().unwrap())),
        ("neg", check_op(&x, |_, v| v.neg().unwrap().mul(v).unwrap().sum().unwrap())),
        ("abs", check_op(&x, |_, v| v.abs().unwrap().mul(v).unwrap().sum().unwrap())),
        ("add", check_op(&x, |t, v| v.add(konst(t, &y)).unwrap().tanh().unwrap().sum().unwrap())),
        ("sub", check_op(&x, |t, v| konst(t, &y).sub(v).unwrap().tanh().unwrap().sum().unwrap())),
        ("mul", check_op(&x, |t, v| v.mul(konst(t, &y)).unwrap().tanh().unwrap().sum().unwrap())),
        ("scale", check_op(&x, |_, v| v.scale(-1.7).unwrap().tanh().unwrap().sum().unwrap())),
        (
            "row bias",
            check_op(&Tensor::row(vec![0.3, -1.2, 0.8, 1.9]).unwrap(), |t, b| {
                konst(t, &y).add_row_bias(b).unwrap().tanh().unwrap().sum().unwrap()
            }),
        ),
        ("transpose", check_op(&x, |t, v| v.transpose().unwrap().matmul(konst(t, &y)).unwrap().tanh().unwrap().sum().unwrap())),
        ("reshape", check_op(&x, |_, v| v.reshape(2, 6).unwrap().tanh().unwrap().sum().unwrap())),
        ("slice", check_op(&x, |_, v| v.slice_rows(1, 2).unwrap().tanh().unwrap().sum().unwrap())),
    ];
    for (name, err) in cases {
        assert!(err <= OP_TOL, "{name}: {err}");
    }
}

#[test]
fn softmax_jacobian_matches_differences() {
    let mut r = rng(3);
    let x = uniform(&mut r, 1, 5, 2.0);
    for j in 0..5 {
        let mut pick = Tensor::zeros(5, 1);
        pick.set(j, 0, 1.0);
        let err = check_op(&x, |t, v| v.softmax_rows().unwrap().matmul(t.constant(pick.clone()).unwrap()).unwrap());
        assert!(err <= OP_TOL, "row {j}: {err}");
    }
}

#[test]
fn many_input_ops_match_differences() {
    let mut r = rng(4);
    let a = uniform(&mut r, 2, 3, 2.0);
    let b = uniform(&mut r, 2, 3, 2.0);
    let cases = [
        check_op(&a, |t, v| {
            let w = t.constant(b.clone()).unwrap();
            t.concat_rows(&[v, w, v]).unwrap().tanh().unwrap().sum().unwrap()
        }),
        check_op(&a, |t, v| {
            let w = t.constant(b.clone()).unwrap();
            t.add_many(&[v, w, v.tanh().unwrap()]).unwrap().tanh().unwrap().sum().unwrap()
        }),
        check_op(&a, |t, v| {
            let w = t.constant(b.clone()).unwrap();
            t.max_many(&[v, w]).unwrap().tanh().unwrap().sum().unwrap()
        }),
        check_op(&a, |t, v| t.cross_entropy(v, &[2, 0]).unwrap()),
    ];
    for (k, err) in cases.into_iter().enumerate() {
        assert!(err <= OP_TOL, "case {k}: {err}");
    }
}

#[test]
fn backward_basics() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::row(vec![1.0, -2.0, 3.0]).unwrap()).unwrap();
    let g = tape.backward(x.scale(1.0).unwrap().sum().unwrap()).unwrap();
    assert_eq!(g.wrt(x).data(), &[1.0, 1.0, 1.0]);

    let w = Tensor::matrix(3, 1, vec![0.5, -4.0, 2.25]).unwrap();
    let tape = Tape::new();
    let x = tape.leaf(Tensor::row(vec![1.0, -2.0, 3.0]).unwrap()).unwrap();
    let root = x.matmul(tape.constant(w.clone()).unwrap()).unwrap();
    assert_eq!(tape.backward(root).unwrap().wrt(x).data(), w.data());

    let tape = Tape::new();
    let x = tape.leaf(Tensor::row(vec![1.0, 2.0]).unwrap()).unwrap();
    assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
}

#[test]
fn shared_node_gradients_add_up() {
    let x0 = Tensor::row(vec![0.4, -1.1]).unwrap();
    let single = |which: u8| {
        let tape = Tape::new();
        let x = tape.leaf(x0.clone()).unwrap();
        let root = if which == 0 { x.tanh() } else { x.sigmoid() };
        let root = root.unwrap().sum().unwrap();
        tape.backward(root).unwrap().wrt(x)
    };
    let tape = Tape::new();
    let x = tape.leaf(x0.clone()).unwrap();
    let both = x.tanh().unwrap().add(x.sigmoid().unwrap()).unwrap().sum().unwrap();
    let g = tape.backward(both).unwrap().wrt(x);
    let (a, b) = (single(0), single(1));
    for i in 0..2 {
        assert_eq!(g.data()[i], a.data()[i] + b.data()[i]);
    }
}

/// Unrolled 3-step standard LSTM, N = 4, h = 3: every parameter and input
/// gradient.
#[test]
fn three_step_lstm_matches_differences() {
    let model = random_model(Architecture::LSTM, 4, 3, 3, 11, 0.8);
    let mut r = rng(12);
    let xs = [uniform(&mut r, 3, 4, 2.0), uniform(&mut r, 3, 4, 2.0)];
    let x = time_major(&[&xs[0], &xs[1]]).unwrap();
    let err = model_gradient_error(&model, &x, 2, &[0, 2], 1e-7);
    assert!(err <= NET_TOL, "{err}");
}

#[test]
fn every_architecture_matches_differences() {
    for (k, arch) in gradient_architectures().into_iter().enumerate() {
        let model = random_model(arch, 5, 4, 4, 20 + k as u64, 0.8);
        let mut r = rng(40 + k as u64);
        let xs = [uniform(&mut r, 4, 5, 2.0), uniform(&mut r, 4, 5, 2.0), uniform(&mut r, 4, 5, 2.0)];
        let x = time_major(&[&xs[0], &xs[1], &xs[2]]).unwrap();
        let err = model_gradient_error(&model, &x, 3, &[1, 0, 2], 1e-7);
        assert!(err <= NET_TOL, "{arch}: {err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn softmax_rows_are_distributions(v in prop::collection::vec(-30.0f64..30.0, 1..24), cols in 1usize..6) {
        let rows = (v.len() / cols).max(1);
        let mut data = v.clone();
        data.resize(rows * cols, 0.5);
        let s = softmax_rows(&Tensor::matrix(rows, cols, data).unwrap()).unwrap();
        for r in 0..rows {
            let row = s.row_slice(r);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&p| p > 0.0 && p <= 1.0));
        }
    }

    #[test]
    fn composite_gradient_matches_differences(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let a = uniform(&mut r, 2, 3, 2.0);
        let w = uniform(&mut r, 3, 2, 2.0);
        let err = check_op(&a, |t, v| {
            let h = v.matmul(t.constant(w.clone()).unwrap()).unwrap().tanh().unwrap();
            let s = h.softmax_rows().unwrap().mul(h.sigmoid().unwrap()).unwrap();
            s.sub(h.abs().unwrap()).unwrap().sum().unwrap()
        });
        prop_assert!(err <= OP_TOL, "{}", err);
    }

    /// Small random instances of both cell types (N ≤ 6, h ≤ 5, T ≤ 6).
    #[test]
    fn random_small_networks_match_differences(
        seed in 0u64..10_000,
        n in 1usize..=6,
        h in 1usize..=5,
        t in 1usize..=6,
        incell in any::<bool>(),
    ) {
        let arch = if incell { Architecture::INPUT_CELL } else { Architecture::LSTM };
        let model = random_model(arch, n, t, h, seed, 0.8);
        let mut r = rng(seed + 1);
        let xs = [uniform(&mut r, t, n, 2.0), uniform(&mut r, t, n, 2.0)];
        let x = time_major(&[&xs[0], &xs[1]]).unwrap();
        let err = model_gradient_error(&model, &x, 2, &[2, 1], 1e-7);
        prop_assert!(err <= NET_TOL, "{}", err);
    }

    #[test]
    fn forward_is_bit_reproducible(seed in 0u64..10_000) {
        let model = random_model(Architecture::INPUT_CELL, 4, 5, 3, seed, 1.0);
        let x = uniform(&mut rng(seed), 5, 4, 2.0);
        prop_assert_eq!(model.run_sequence(&x).unwrap(), model.run_sequence(&x).unwrap());
    }
}

fn konst<'t>(t: &'t Tape, v: &Tensor) -> Var<'t> {
    t.constant(v.clone()).unwrap()
}
