//! TOML configuration files. Every key is optional; command-line flags
//! override file values.
//!
//! ```toml
//! [experiment]
//! suite = "static-box"          # static-box | moving-box | decay | mnist | feature-drop
//! models = ["lstm", "lstm-incell"]
//! datasets = ["earlier", "latter"]   # box kinds, moving-<start>, or mnist
//! seeds = [0, 1, 2]
//! output = "runs/static"
//! heatmaps = 4
//! workers = 1
//! drop_grid = [0, 10, 20]
//!
//! [data]
//! steps = 100
//! features = 100
//! train = 1000
//! test = 300
//! amplitude = 1.0
//! tail = 0
//! mnist_dir = "data/mnist167"
//! cache_dir = "runs/cache"
//!
//! [model]
//! hidden = 64
//! attention_dim = 50
//! hops = 10
//!
//! [train]
//! optimizer = "adam"            # adam | sgd
//! learning_rate = 0.001
//! batch_size = 32
//! max_epochs = 200
//! patience = 10
//! min_delta = 0.0001
//! clip = 5.0                    # omit to disable
//! seed = 0
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiment::Settings;
use crate::train::TrainConfig;

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub suite: Option<String>,
    pub models: Option<Vec<String>>,
    pub datasets: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
    pub output: Option<PathBuf>,
    pub heatmaps: Option<usize>,
    pub workers: Option<usize>,
    pub drop_grid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub steps: Option<usize>,
    pub features: Option<usize>,
    pub train: Option<usize>,
    pub test: Option<usize>,
    pub amplitude: Option<f64>,
    pub tail: Option<usize>,
    pub mnist_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Option<usize>,
    pub attention_dim: Option<usize>,
    pub hops: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub optimizer: Option<String>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub min_delta: Option<f64>,
    pub clip: Option<f64>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }

    /// Overlays the `[train]` section on `base`.
    pub fn train_config(&self, mut base: TrainConfig) -> Result<TrainConfig> {
        let t = &self.train;
        if let Some(o) = &t.optimizer {
            base.optimizer = o.parse()?;
        }
        set(&mut base.learning_rate, t.learning_rate);
        set(&mut base.batch_size, t.batch_size);
        set(&mut base.max_epochs, t.max_epochs);
        set(&mut base.patience, t.patience);
        set(&mut base.min_delta, t.min_delta);
        set(&mut base.seed, t.seed);
        if t.clip.is_some() {
            base.clip = t.clip;
        }
        Ok(base)
    }

    /// Overlays the `[data]`, `[model]` and `[train]` sections and the
    /// numeric `[experiment]` keys on `base`.
    pub fn settings(&self, mut base: Settings) -> Result<Settings> {
        let d = &self.data;
        set(&mut base.steps, d.steps);
        set(&mut base.features, d.features);
        set(&mut base.train_size, d.train);
        set(&mut base.test_size, d.test);
        set(&mut base.amplitude, d.amplitude);
        set(&mut base.tail, d.tail);
        set(&mut base.mnist_dir, d.mnist_dir.clone());
        if d.cache_dir.is_some() {
            base.cache_dir = d.cache_dir.clone();
        }
        let m = &self.model;
        set(&mut base.hidden, m.hidden);
        set(&mut base.attention_dim, m.attention_dim);
        set(&mut base.hops, m.hops);
        let e = &self.experiment;
        set(&mut base.heatmaps, e.heatmaps);
        set(&mut base.workers, e.workers);
        set(&mut base.drop_grid, e.drop_grid.clone());
        base.train = self.train_config(base.train)?;
        Ok(base)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
