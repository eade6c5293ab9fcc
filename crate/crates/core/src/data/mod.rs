//! Labelled time-series datasets.

pub mod icts;
pub mod mnist;
pub mod synthetic;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One `T × N` series with its class and, for synthetic data, the ground
/// truth importance mask (1 on box cells, 0 elsewhere).
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Tensor,
    pub label: usize,
    pub mask: Option<Tensor>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub steps: usize,
    pub features: usize,
    pub classes: usize,
}

impl Dataset {
    /// Checks that every sample matches the declared dimensions.
    pub fn new(samples: Vec<Sample>, steps: usize, features: usize, classes: usize) -> Result<Self> {
        if steps == 0 || features == 0 {
            return Err(Error::validation("dataset dimensions must be positive"));
        }
        if classes < 2 {
            return Err(Error::validation("a dataset needs at least two classes"));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.x.shape() != [steps, features] {
                return Err(Error::shape("dataset sample", s.x.shape(), &[steps, features]));
            }
            if let Some(m) = &s.mask {
                if m.shape() != s.x.shape() {
                    return Err(Error::shape("dataset mask", m.shape(), s.x.shape()));
                }
            }
            if s.label >= classes {
                return Err(Error::validation(format!("sample {i} has label {} of {classes} classes", s.label)));
            }
        }
        Ok(Dataset {
            samples,
            steps,
            features,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_masks(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.mask.is_some())
    }

    pub fn inputs(&self) -> Vec<&Tensor> {
        self.samples.iter().map(|s| &s.x).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Number of samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }
}

/// A train/test pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
}
