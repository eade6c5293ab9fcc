//! `∂h_t/∂h_{t−1}` and `∂h_t/∂c_{t−1}` from the tape against their closed
//! forms.

mod common;

use common::*;
use rand::Rng;

const TOL: f64 = 1e-8;

fn instance(seed: u64) -> (incell::cells::LstmParams, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let n = r.gen_range(1..=6);
    let h = r.gen_range(1..=5);
    let p = random_lstm(&mut r, n, h, 1.0);
    let x = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
    let hp = (0..h).map(|_| r.gen_range(-1.0..1.0)).collect();
    let cp = (0..h).map(|_| r.gen_range(-2.0..2.0)).collect();
    (p, x, hp, cp)
}

#[test]
fn hidden_to_hidden_jacobian_matches_closed_form() {
    for seed in 0..100 {
        let (p, x, h, c) = instance(seed);
        let (jhh, _) = autodiff_jacobians(&p, &x, &h, &c);
        let oracle = closed_form_jhh(&p, &manual_step(&p, &x, &h, &c), &c);
        for (a, b) in jhh.iter().zip(&oracle) {
            let err = max_rel_err(a, b, 1e-12);
            assert!(err <= TOL, "seed {seed}: {err}");
        }
    }
}

#[test]
fn cell_to_hidden_jacobian_is_diagonal_closed_form() {
    for seed in 100..200 {
        let (p, x, h, c) = instance(seed);
        let (_, jhc) = autodiff_jacobians(&p, &x, &h, &c);
        let diag = closed_form_jhc(&manual_step(&p, &x, &h, &c));
        for (j, row) in jhc.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if j == k {
                    assert!(rel_err(v, diag[j], 1e-12) <= TOL, "seed {seed}");
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }
}

/// Collapsing the forget gate leaves only the short output/candidate routes,
/// and `∂h_t/∂c_{t−1}` vanishes.
#[test]
fn closed_forget_gate_cuts_the_cell_path() {
    let (mut p, x, h, c) = instance(7);
    let hid = p.hidden();
    p.b[1] = incell::Tensor::full(1, hid, -60.0);
    let (_, jhc) = autodiff_jacobians(&p, &x, &h, &c);
    assert!(jhc.iter().flatten().all(|v| v.abs() < 1e-20));
}
