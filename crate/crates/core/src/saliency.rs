//! Gradient saliency: `R^c = |∂S_c / ∂x|` for every cell of a sequence.

use std::io::{self, Write};

use crate::autodiff::Tape;
use crate::cells::{split_time_major, time_major, ScoreModel};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::argmax;

/// A nonnegative `T × N` map for one target class.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    pub values: Tensor,
    pub class: usize,
}

impl SaliencyMap {
    pub fn steps(&self) -> usize {
        self.values.rows()
    }

    /// Total saliency per timestep.
    pub fn time_profile(&self) -> Vec<f64> {
        (0..self.values.rows()).map(|t| self.values.row_slice(t).iter().sum()).collect()
    }

    /// Fraction of the total saliency in timesteps `[start, end)`, or `None`
    /// for an all-zero map.
    pub fn mass_fraction(&self, start: usize, end: usize) -> Option<f64> {
        let p = self.time_profile();
        let total: f64 = p.iter().sum();
        (total > 0.0).then(|| p[start.min(p.len())..end.min(p.len())].iter().sum::<f64>() / total)
    }

    /// CSV with one row per timestep, 9 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        for t in 0..self.values.rows() {
            let row: Vec<String> = self.values.row_slice(t).iter().map(|v| format!("{v:.8e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Binary 8-bit PGM with time on the vertical axis, each map divided by
    /// its own maximum. Returns that maximum (0 for an all-zero map, which
    /// is written black).
    pub fn write_pgm(&self, mut w: impl Write) -> io::Result<f64> {
        let (t, n) = (self.values.rows(), self.values.cols());
        let max = self.values.data().iter().cloned().fold(0.0, f64::max);
        write!(w, "P5\n{n} {t}\n255\n")?;
        let pixels: Vec<u8> = self
            .values
            .data()
            .iter()
            .map(|&v| if max > 0.0 { (v / max * 255.0).round() as u8 } else { 0 })
            .collect();
        w.write_all(&pixels)?;
        Ok(max)
    }
}

/// Signed input gradients `∂S_{c_b}/∂x_b` for a batch of samples, one
/// forward and one backward pass. The batch rows are independent, so the
/// gradient of `Σ_b S_{c_b}` with respect to sample `b` is exactly that
/// sample's gradient.
pub fn input_gradients(model: &impl ScoreModel, xs: &[&Tensor], classes: &[usize]) -> Result<Vec<Tensor>> {
    if xs.len() != classes.len() {
        return Err(Error::Contract(format!("{} samples but {} target classes", xs.len(), classes.len())));
    }
    let c = model.classes();
    if let Some(&bad) = classes.iter().find(|&&k| k >= c) {
        return Err(Error::Contract(format!("target class {bad} outside 0..{c}")));
    }
    let batch = xs.len();
    let tape = Tape::new();
    let x = tape.leaf(time_major(xs)?)?;
    let scores = model.scores(x, batch)?;
    let mut pick = Tensor::zeros(batch, c);
    for (b, &k) in classes.iter().enumerate() {
        pick.set(b, k, 1.0);
    }
    let root = scores.mul(tape.constant(pick)?)?.sum()?;
    let grads = tape.backward(root)?;
    let g = grads.wrt(x);
    let (rows, n) = g.dims()?;
    for r in 0..rows {
        if g.row_slice(r).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { timestep: r / batch });
        }
    }
    debug_assert_eq!(n, model.features());
    split_time_major(&g, batch)
}

/// Saliency map of class `class` for one `T × N` sample.
pub fn saliency_map(model: &impl ScoreModel, x: &Tensor, class: usize) -> Result<SaliencyMap> {
    let g = input_gradients(model, &[x], &[class])?.remove(0);
    Ok(SaliencyMap {
        values: g.map(f64::abs),
        class,
    })
}

/// Saliency maps for many samples, computed in batches of `batch`.
pub fn saliency_maps(model: &impl ScoreModel, xs: &[&Tensor], classes: &[usize], batch: usize) -> Result<Vec<SaliencyMap>> {
    if xs.len() != classes.len() {
        return Err(Error::Contract(format!("{} samples but {} target classes", xs.len(), classes.len())));
    }
    let mut out = Vec::with_capacity(xs.len());
    for (x, c) in xs.chunks(batch.max(1)).zip(classes.chunks(batch.max(1))) {
        for (g, &class) in input_gradients(model, x, c)?.into_iter().zip(c) {
            out.push(SaliencyMap {
                values: g.map(f64::abs),
                class,
            });
        }
    }
    Ok(out)
}

/// Per-timestep gradient norms `g_t = ‖∂S_c/∂x_t‖₂`.
pub fn decay_profile(model: &impl ScoreModel, x: &Tensor, class: usize) -> Result<Vec<f64>> {
    let g = input_gradients(model, &[x], &[class])?.remove(0);
    Ok(row_norms(&g))
}

pub fn row_norms(g: &Tensor) -> Vec<f64> {
    (0..g.rows())
        .map(|t| g.row_slice(t).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

/// A sample's prediction and the saliency map of the predicted class.
#[derive(Clone, Debug, PartialEq)]
pub struct Explained {
    pub predicted: usize,
    pub map: SaliencyMap,
    /// Per-timestep gradient norms of the same gradient.
    pub decay: Vec<f64>,
}

/// Predicts every sample and explains the predicted class.
pub fn explain(model: &impl ScoreModel, xs: &[&Tensor], batch: usize) -> Result<Vec<Explained>> {
    let mut out = Vec::with_capacity(xs.len());
    for chunk in xs.chunks(batch.max(1)) {
        let tape = Tape::new();
        let scores = model.scores(tape.constant(time_major(chunk)?)?, chunk.len())?;
        let pred: Vec<usize> = {
            let s = scores.value();
            s.data().chunks(s.cols()).map(argmax).collect()
        };
        for (g, &p) in input_gradients(model, chunk, &pred)?.into_iter().zip(&pred) {
            out.push(Explained {
                predicted: p,
                decay: row_norms(&g),
                map: SaliencyMap {
                    values: g.map(f64::abs),
                    class: p,
                },
            });
        }
    }
    Ok(out)
}
