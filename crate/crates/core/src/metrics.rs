//! Saliency quality metrics, time-bucket mass, feature-drop evaluation and
//! small summary statistics.

use rand::Rng;

use crate::cells::ScoreModel;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;
use crate::train::predictions;

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

/// Mask-normalised distance `Σ |ref_i − R_i| / Σ ref_i`.
///
/// This is an L1 distance: the per-cell `√((ref_i − R_i)²)` of the usual
/// "normalised Euclidean" formulation collapses to an absolute value, and it
/// is kept that way on purpose.
pub fn euclidean_distance(reference: &Tensor, saliency: &Tensor) -> Result<f64> {
    same_shape("euclidean_distance", reference, saliency)?;
    let mass: f64 = reference.data().iter().sum();
    if !(mass > 0.0) {
        return Err(Error::validation("reference mask has no important cells"));
    }
    let num: f64 = reference
        .data()
        .iter()
        .zip(saliency.data())
        .map(|(r, s)| ((r - s) * (r - s)).sqrt())
        .sum();
    Ok(num / mass)
}

/// Weighted Jaccard similarity `Σ min(a_i, b_i) / Σ max(a_i, b_i)` of two
/// nonnegative arrays; 1 when both are identically zero.
pub fn weighted_jaccard(x_abs: &Tensor, saliency: &Tensor) -> Result<f64> {
    same_shape("weighted_jaccard", x_abs, saliency)?;
    let (mut lo, mut hi) = (0.0, 0.0);
    for (&a, &b) in x_abs.data().iter().zip(saliency.data()) {
        if a < 0.0 || b < 0.0 {
            return Err(Error::validation("weighted Jaccard needs nonnegative inputs"));
        }
        lo += a.min(b);
        hi += a.max(b);
    }
    Ok(if hi == 0.0 { 1.0 } else { lo / hi })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BucketMass {
    /// Fraction of saliency per contiguous time bucket; sums to 1.
    pub mass: Vec<f64>,
    /// Set when the map was all zero and `mass` is uniform by convention.
    pub degenerate: bool,
}

/// Splits the `T` timesteps into `buckets` contiguous groups of `⌊T/buckets⌋`
/// steps (the last one absorbs the remainder) and reports each group's share
/// of the total saliency.
pub fn bucket_mass(saliency: &Tensor, buckets: usize) -> Result<BucketMass> {
    let (t, _) = saliency.dims()?;
    if buckets == 0 || buckets > t {
        return Err(Error::validation(format!("cannot split {t} timesteps into {buckets} buckets")));
    }
    let width = t / buckets;
    let mut mass = vec![0.0; buckets];
    for step in 0..t {
        let b = (step / width).min(buckets - 1);
        mass[b] += saliency.row_slice(step).iter().sum::<f64>();
    }
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(BucketMass { mass, degenerate: false })
    } else {
        Ok(BucketMass {
            mass: vec![1.0 / buckets as f64; buckets],
            degenerate: true,
        })
    }
}

/// Number of cells dropped at `percent`: `⌈percent/100 · cells⌉`.
pub fn drop_count(percent: f64, cells: usize) -> usize {
    ((percent / 100.0 * cells as f64).ceil() as usize).min(cells)
}

/// Cell indices ordered by decreasing saliency, ties by row-major position.
pub fn saliency_ranking(saliency: &Tensor) -> Vec<usize> {
    let v = saliency.data();
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

/// Copy of `x` with the top `percent`% most salient cells set to 0.
pub fn drop_top(x: &Tensor, saliency: &Tensor, percent: f64) -> Result<Tensor> {
    same_shape("drop_top", x, saliency)?;
    let mut out = x.clone();
    let k = drop_count(percent, x.len());
    for i in saliency_ranking(saliency).into_iter().take(k) {
        out.data_mut()[i] = 0.0;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropPoint {
    pub percent: f64,
    pub accuracy: f64,
}

/// Accuracy of `model` on `data` after dropping each sample's top-p% cells
/// ranked by `maps` (one per sample, possibly from another model), for every
/// `p` in `grid`.
pub fn feature_drop_eval(model: &impl ScoreModel, data: &Dataset, maps: &[Tensor], grid: &[f64]) -> Result<Vec<DropPoint>> {
    if grid.is_empty() {
        return Err(Error::validation("feature-drop grid is empty"));
    }
    if let Some(p) = grid.iter().find(|p| !(0.0..=100.0).contains(*p)) {
        return Err(Error::validation(format!("drop percentage {p} outside [0, 100]")));
    }
    if maps.len() != data.len() {
        return Err(Error::Contract(format!("{} saliency maps for {} samples", maps.len(), data.len())));
    }
    if data.is_empty() {
        return Err(Error::validation("feature-drop evaluation on an empty dataset"));
    }
    let ranks: Vec<Vec<usize>> = maps.iter().map(saliency_ranking).collect();
    grid.iter()
        .map(|&p| {
            let dropped = data
                .samples
                .iter()
                .zip(&ranks)
                .zip(maps)
                .map(|((s, r), m)| {
                    same_shape("feature_drop_eval", &s.x, m)?;
                    let mut x = s.x.clone();
                    for &i in r.iter().take(drop_count(p, x.len())) {
                        x.data_mut()[i] = 0.0;
                    }
                    Ok(x)
                })
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Tensor> = dropped.iter().collect();
            let pred = predictions(model, &refs)?;
            let hits = pred.iter().zip(&data.samples).filter(|(p, s)| **p == s.label).count();
            Ok(DropPoint {
                percent: p,
                accuracy: hits as f64 / data.len() as f64,
            })
        })
        .collect()
}

/// Uniform random maps shaped like the samples of `data`, a baseline ranking
/// for feature-drop curves.
pub fn random_maps(data: &Dataset, seed: u64) -> Vec<Tensor> {
    data.samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = rng::stream(seed, i as u64);
            let v = (0..s.x.len()).map(|_| r.gen::<f64>()).collect();
            Tensor::new(s.x.shape().to_vec(), v).expect("same shape as the sample")
        })
        .collect()
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile, `q ∈ [0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Interquartile range.
pub fn iqr(values: &[f64]) -> Option<f64> {
    Some(quantile(values, 0.75)? - quantile(values, 0.25)?)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Population standard deviation over the mean.
pub fn coefficient_of_variation(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some(var.sqrt() / m.abs())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, mb) = (mean(&ra)?, mean(&rb)?);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}
