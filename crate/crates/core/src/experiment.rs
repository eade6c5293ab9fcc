//! Experiment suites: train every (dataset, model, seed) cell, explain the
//! test split and aggregate saliency metrics.
//!
//! Each cell is a pure function of its inputs, so cells run on a bounded
//! rayon pool and results are assembled in request order. Every seed feeds
//! both the dataset generator and the trainer of its cell.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::cells::{Architecture, ModelSpec};
use crate::data::synthetic::{self, BoxKind, DatasetConfig};
use crate::data::{icts, mnist, Dataset, Splits};
use crate::error::{Error, Result};
use crate::metrics::{self, DropPoint};
use crate::saliency::{explain, Explained};
use crate::train::{self, TrainConfig, TrainResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    StaticBox,
    MovingBox,
    Decay,
    Mnist,
    FeatureDrop,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "static-box" => Suite::StaticBox,
            "moving-box" => Suite::MovingBox,
            "decay" => Suite::Decay,
            "mnist" => Suite::Mnist,
            "feature-drop" => Suite::FeatureDrop,
            _ => return Err(Error::validation(format!("unknown suite {s:?}"))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::StaticBox => "static-box",
            Suite::MovingBox => "moving-box",
            Suite::Decay => "decay",
            Suite::Mnist => "mnist",
            Suite::FeatureDrop => "feature-drop",
        })
    }
}

/// Where a cell's data comes from.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    Box(BoxKind),
    /// MNIST digits 1, 6 and 7.
    Mnist,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Box(k) => k.fmt(f),
            Source::Mnist => f.write_str("mnist"),
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mnist" {
            Ok(Source::Mnist)
        } else {
            Ok(Source::Box(s.parse()?))
        }
    }
}

/// Everything except the suite, models, datasets and seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub steps: usize,
    pub features: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub amplitude: f64,
    pub tail: usize,
    pub hidden: usize,
    pub attention_dim: usize,
    pub hops: usize,
    /// Training options; the seed is replaced by each cell's seed.
    pub train: TrainConfig,
    pub mnist_dir: PathBuf,
    /// Directory for cached ICTS datasets.
    pub cache_dir: Option<PathBuf>,
    /// Heatmaps written per cell.
    pub heatmaps: usize,
    pub drop_grid: Vec<f64>,
    pub workers: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            steps: 100,
            features: 100,
            train_size: 1000,
            test_size: 300,
            amplitude: 1.0,
            tail: 0,
            hidden: 64,
            attention_dim: 50,
            hops: 10,
            train: TrainConfig::default(),
            mnist_dir: PathBuf::from("data/mnist167"),
            cache_dir: None,
            heatmaps: 4,
            drop_grid: vec![0.0, 5.0, 10.0, 20.0, 30.0, 50.0],
            workers: 1,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.workers == 0 {
            return Err(Error::validation("workers must be at least 1"));
        }
        for (name, v) in [("hidden", self.hidden), ("attention_dim", self.attention_dim), ("hops", self.hops)] {
            if v == 0 {
                return Err(Error::validation(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn dataset_config(&self, kind: BoxKind, seed: u64) -> DatasetConfig {
        DatasetConfig {
            steps: self.steps,
            features: self.features,
            train: self.train_size,
            test: self.test_size,
            amplitude: self.amplitude,
            tail: self.tail,
            ..DatasetConfig::new(kind, seed)
        }
    }

    pub fn model_spec(&self, arch: Architecture, data: &Dataset) -> ModelSpec {
        ModelSpec {
            hidden: self.hidden,
            attention_dim: self.attention_dim,
            hops: self.hops,
            ..ModelSpec::new(arch, data.features, data.steps, data.classes)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub suite: Suite,
    pub models: Vec<Architecture>,
    pub datasets: Vec<Source>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub settings: Settings,
}

impl ExperimentSpec {
    /// The suite's usual datasets and models with three seeds.
    pub fn defaults(suite: Suite, output: impl Into<PathBuf>) -> Self {
        let datasets = match suite {
            Suite::StaticBox => BoxKind::STATIC.iter().map(|&k| Source::Box(k)).collect(),
            Suite::MovingBox => BoxKind::MOVING_STARTS
                .iter()
                .map(|&start| Source::Box(BoxKind::Moving { start }))
                .collect(),
            Suite::Decay | Suite::FeatureDrop => vec![Source::Box(BoxKind::Earlier)],
            Suite::Mnist => vec![Source::Mnist],
        };
        ExperimentSpec {
            suite,
            models: vec![Architecture::LSTM, Architecture::INPUT_CELL],
            datasets,
            seeds: vec![0, 1, 2],
            output: output.into(),
            settings: Settings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::validation("an experiment needs at least one model"));
        }
        if self.datasets.is_empty() {
            return Err(Error::validation("an experiment needs at least one dataset"));
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("an experiment needs at least one seed"));
        }
        for d in &self.datasets {
            match (self.suite, d) {
                (Suite::Mnist, Source::Box(_)) => {
                    return Err(Error::validation("the mnist suite only runs on mnist"));
                }
                (Suite::MovingBox, Source::Box(BoxKind::Moving { .. })) => {}
                (Suite::MovingBox, _) => {
                    return Err(Error::validation("the moving-box suite needs moving-<start> datasets"));
                }
                (Suite::StaticBox | Suite::Decay | Suite::FeatureDrop, Source::Mnist) => {
                    return Err(Error::validation(format!("the {} suite runs on box datasets", self.suite)));
                }
                _ => {}
            }
            if let Source::Box(k) = d {
                self.settings.dataset_config(*k, 0).validate()?;
            }
        }
        if self.suite == Suite::FeatureDrop && self.settings.drop_grid.is_empty() {
            return Err(Error::validation("feature-drop grid is empty"));
        }
        self.settings.validate()
    }
}

/// Loads or generates the splits for one cell.
pub fn load_source(source: &Source, seed: u64, settings: &Settings) -> Result<Splits> {
    match source {
        Source::Mnist => mnist::load_dir(&settings.mnist_dir, &mnist::DEFAULT_DIGITS),
        Source::Box(kind) => {
            let config = settings.dataset_config(*kind, seed);
            match &settings.cache_dir {
                None => synthetic::generate(&config),
                Some(dir) => cached(&config, dir),
            }
        }
    }
}

fn cached(config: &DatasetConfig, dir: &Path) -> Result<Splits> {
    let key = icts::content_hash(format!("{config:?}").as_bytes());
    let stem = format!("{}-{}", config.kind, &key[..16]);
    let (train, test) = (dir.join(format!("{stem}-train.icts")), dir.join(format!("{stem}-test.icts")));
    if train.exists() && test.exists() {
        return Ok(Splits {
            train: icts::load(&train)?,
            test: icts::load(&test)?,
        });
    }
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let splits = synthetic::generate(config)?;
    icts::save(&splits.train, &train)?;
    icts::save(&splits.test, &test)?;
    Ok(splits)
}

/// A trained and explained (dataset, model, seed) cell.
#[derive(Clone, Debug)]
pub struct CellRun {
    pub source: Source,
    pub arch: Architecture,
    pub seed: u64,
    pub trained: TrainResult,
    pub test: Dataset,
    /// Saliency of the predicted class for every test sample.
    pub explained: Vec<Explained>,
}

/// Mean saliency metrics over the correctly classified test samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellMetrics {
    pub wjac: Option<f64>,
    pub euc: Option<f64>,
    pub acc: f64,
    pub explained: usize,
}

impl CellRun {
    pub fn train(source: &Source, arch: Architecture, seed: u64, settings: &Settings) -> Result<Self> {
        let data = load_source(source, seed, settings)?;
        Self::train_on(source.clone(), &data, arch, seed, settings)
    }

    pub fn train_on(source: Source, data: &Splits, arch: Architecture, seed: u64, settings: &Settings) -> Result<Self> {
        let spec = settings.model_spec(arch, &data.train);
        let config = TrainConfig { seed, ..settings.train };
        let trained = train::train(spec, data, &config)?;
        let explained = explain(&trained.model, &data.test.inputs(), 50)?;
        Ok(CellRun {
            source,
            arch,
            seed,
            trained,
            test: data.test.clone(),
            explained,
        })
    }

    /// Indices of correctly classified test samples.
    pub fn correct(&self) -> Vec<usize> {
        (0..self.test.len())
            .filter(|&i| self.explained[i].predicted == self.test.samples[i].label)
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct().len() as f64 / self.test.len() as f64
    }

    pub fn metrics(&self) -> Result<CellMetrics> {
        let correct = self.correct();
        let (mut wjac, mut euc) = (Vec::new(), Vec::new());
        for &i in &correct {
            let s = &self.test.samples[i];
            let r = &self.explained[i].map.values;
            wjac.push(metrics::weighted_jaccard(&s.x.map(f64::abs), r)?);
            if let Some(m) = &s.mask {
                euc.push(metrics::euclidean_distance(m, r)?);
            }
        }
        Ok(CellMetrics {
            wjac: metrics::mean(&wjac),
            euc: metrics::mean(&euc),
            acc: self.accuracy(),
            explained: correct.len(),
        })
    }

    /// Mean per-timestep gradient norm over correctly classified samples;
    /// `None` when no sample is classified correctly.
    pub fn mean_decay(&self) -> Option<Vec<f64>> {
        let correct = self.correct();
        let first = correct.first()?;
        let mut acc = vec![0.0; self.explained[*first].decay.len()];
        for &i in &correct {
            for (a, g) in acc.iter_mut().zip(&self.explained[i].decay) {
                *a += g;
            }
        }
        acc.iter_mut().for_each(|a| *a /= correct.len() as f64);
        Some(acc)
    }

    /// Median over correctly classified samples (optionally of one label) of
    /// the share of saliency in timesteps `[start, end)`.
    pub fn median_mass(&self, start: usize, end: usize, label: Option<usize>) -> Option<f64> {
        let v: Vec<f64> = self
            .correct()
            .into_iter()
            .filter(|&i| label.is_none_or(|l| self.test.samples[i].label == l))
            .filter_map(|i| self.explained[i].map.mass_fraction(start, end))
            .collect();
        metrics::median(&v)
    }

    /// Saliency maps of every test sample.
    pub fn maps(&self) -> Vec<crate::tensor::Tensor> {
        self.explained.iter().map(|e| e.map.values.clone()).collect()
    }
}

/// Ratio of mean gradient norm over the first half of the sequence to the
/// mean over the second half.
pub fn half_ratio(profile: &[f64]) -> Option<f64> {
    let h = profile.len() / 2;
    let first = metrics::mean(&profile[..h])?;
    let last = metrics::mean(&profile[h..])?;
    (last > 0.0).then(|| first / last)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub suite: Suite,
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    pub metrics: Option<CellMetrics>,
    /// `ok`, or why the row has no metrics.
    pub status: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRecord {
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    /// Empty when no test sample was classified correctly.
    pub profile: Vec<f64>,
    pub explained: usize,
}

impl DecayRecord {
    pub fn final_quarter_mass(&self) -> Option<f64> {
        let total: f64 = self.profile.iter().sum();
        let q = self.profile.len() * 3 / 4;
        (total > 0.0).then(|| self.profile[q..].iter().sum::<f64>() / total)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropCurve {
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    /// `self`, `random`, or `cross:<model>` when ranked by another model's
    /// saliency.
    pub condition: String,
    pub points: Vec<DropPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MassRecord {
    pub model: String,
    pub seed: u64,
    pub label: usize,
    pub samples: usize,
    /// Median share of saliency in the first half of the timesteps.
    pub early_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    pub sample: usize,
    pub label: usize,
    pub predicted: usize,
    pub map: crate::saliency::SaliencyMap,
}

impl Heatmap {
    pub fn relative_path(&self) -> PathBuf {
        PathBuf::from("heatmaps")
            .join(&self.dataset)
            .join(&self.model)
            .join(format!("seed{}-{:05}.pgm", self.seed, self.sample))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub decay: Vec<DecayRecord>,
    pub drops: Vec<DropCurve>,
    pub masses: Vec<MassRecord>,
    pub heatmaps: Vec<Heatmap>,
}

/// Runs a suite and returns its report without touching the file system
/// (apart from the dataset cache).
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.settings.workers)
        .build()
        .map_err(|e| Error::validation(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match spec.suite {
        Suite::FeatureDrop => run_feature_drop(spec),
        _ => run_cells(spec),
    })
}

fn jobs(spec: &ExperimentSpec) -> Vec<(Source, u64, Architecture)> {
    let mut out = Vec::new();
    for d in &spec.datasets {
        for &seed in &spec.seeds {
            for &m in &spec.models {
                out.push((d.clone(), seed, m));
            }
        }
    }
    out
}

fn run_cells(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let runs: Vec<(Source, u64, Architecture, Result<CellRun>)> = jobs(spec)
        .into_par_iter()
        .map(|(d, seed, m)| {
            let r = CellRun::train(&d, m, seed, &spec.settings);
            (d, seed, m, r)
        })
        .collect();
    let mut report = ExperimentReport::default();
    for (d, seed, m, run) in runs {
        let run = match run {
            Ok(r) => r,
            Err(Error::Divergence { last_finite_epoch }) => {
                report.rows.push(ReportRow {
                    suite: spec.suite,
                    dataset: d.to_string(),
                    model: m.to_string(),
                    seed,
                    metrics: None,
                    status: format!("diverged after epoch {last_finite_epoch}"),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        add_cell(&mut report, spec, &run)?;
    }
    Ok(report)
}

fn add_cell(report: &mut ExperimentReport, spec: &ExperimentSpec, run: &CellRun) -> Result<()> {
    let (dataset, model) = (run.source.to_string(), run.arch.to_string());
    let m = run.metrics()?;
    report.rows.push(ReportRow {
        suite: spec.suite,
        dataset: dataset.clone(),
        model: model.clone(),
        seed: run.seed,
        metrics: Some(m),
        status: if m.explained == 0 { "no correct samples".into() } else { "ok".into() },
    });
    report.decay.push(DecayRecord {
        dataset: dataset.clone(),
        model: model.clone(),
        seed: run.seed,
        profile: run.mean_decay().unwrap_or_default(),
        explained: m.explained,
    });
    let mut picks: Vec<usize> = Vec::new();
    if spec.suite == Suite::Mnist {
        let steps = run.test.steps;
        for label in 0..run.test.classes {
            let correct: Vec<usize> = run.correct().into_iter().filter(|&i| run.test.samples[i].label == label).collect();
            report.masses.push(MassRecord {
                model: model.clone(),
                seed: run.seed,
                label,
                samples: correct.len(),
                early_fraction: run.median_mass(0, steps / 2, Some(label)),
            });
            picks.extend((0..run.test.len()).filter(|&i| run.test.samples[i].label == label).take(spec.settings.heatmaps));
        }
    } else {
        picks.extend(0..spec.settings.heatmaps.min(run.test.len()));
    }
    for i in picks {
        report.heatmaps.push(Heatmap {
            dataset: dataset.clone(),
            model: model.clone(),
            seed: run.seed,
            sample: i,
            label: run.test.samples[i].label,
            predicted: run.explained[i].predicted,
            map: run.explained[i].map.clone(),
        });
    }
    Ok(())
}

fn run_feature_drop(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let mut groups = Vec::new();
    for d in &spec.datasets {
        for &seed in &spec.seeds {
            groups.push((d.clone(), seed));
        }
    }
    let runs: Vec<Result<(Source, u64, Vec<CellRun>)>> = groups
        .into_par_iter()
        .map(|(d, seed)| {
            let data = load_source(&d, seed, &spec.settings)?;
            let runs = spec
                .models
                .iter()
                .map(|&m| CellRun::train_on(d.clone(), &data, m, seed, &spec.settings))
                .collect::<Result<Vec<_>>>()?;
            Ok((d, seed, runs))
        })
        .collect();
    let mut report = ExperimentReport::default();
    for r in runs {
        let (d, seed, runs) = r?;
        let dataset = d.to_string();
        let maps: Vec<_> = runs.iter().map(CellRun::maps).collect();
        for (a, run) in runs.iter().enumerate() {
            add_cell(&mut report, spec, run)?;
            let model = &run.trained.model;
            let mut push = |condition: String, maps: &[crate::tensor::Tensor]| -> Result<()> {
                report.drops.push(DropCurve {
                    dataset: dataset.clone(),
                    model: run.arch.to_string(),
                    seed,
                    condition,
                    points: metrics::feature_drop_eval(model, &run.test, maps, &spec.settings.drop_grid)?,
                });
                Ok(())
            };
            push("self".into(), &maps[a])?;
            for (b, other) in runs.iter().enumerate() {
                if b != a {
                    push(format!("cross:{}", other.arch), &maps[b])?;
                }
            }
            push("random".into(), &metrics::random_maps(&run.test, seed))?;
        }
    }
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.9}"))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::file(path, e))
}

fn write_all(path: &Path, text: &str) -> Result<()> {
    create(path)?.write_all(text.as_bytes()).map_err(|e| Error::file(path, e))
}

impl ExperimentReport {
    /// `report.csv`: one row per (dataset, model, seed).
    pub fn report_csv(&self) -> String {
        let mut s = String::from("suite,dataset,model,seed,wjac,euc,acc,explained,status\n");
        for r in &self.rows {
            let m = r.metrics;
            s += &format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.suite,
                r.dataset,
                r.model,
                r.seed,
                opt(m.and_then(|m| m.wjac)),
                opt(m.and_then(|m| m.euc)),
                opt(m.map(|m| m.acc)),
                m.map_or(0, |m| m.explained),
                r.status
            );
        }
        s
    }

    /// Median and interquartile range over seeds per (dataset, model).
    pub fn summary_csv(&self) -> String {
        let mut groups: BTreeMap<(String, String), Vec<CellMetrics>> = BTreeMap::new();
        for r in &self.rows {
            if let Some(m) = r.metrics {
                groups.entry((r.dataset.clone(), r.model.clone())).or_default().push(m);
            }
        }
        let mut s = String::from("dataset,model,seeds,wjac_median,wjac_iqr,euc_median,euc_iqr,acc_median,acc_iqr\n");
        for ((d, m), v) in groups {
            let col = |f: &dyn Fn(&CellMetrics) -> Option<f64>| -> Vec<f64> { v.iter().filter_map(f).collect() };
            let (w, e, a) = (col(&|m| m.wjac), col(&|m| m.euc), col(&|m| Some(m.acc)));
            s += &format!(
                "{d},{m},{},{},{},{},{},{},{}\n",
                v.len(),
                opt(metrics::median(&w)),
                opt(metrics::iqr(&w)),
                opt(metrics::median(&e)),
                opt(metrics::iqr(&e)),
                opt(metrics::median(&a)),
                opt(metrics::iqr(&a))
            );
        }
        s
    }

    fn models(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.model) {
                seen.push(r.model.clone());
            }
        }
        seen
    }

    /// Writes every output of `suite` into `dir`.
    pub fn write(&self, suite: Suite, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        write_all(&dir.join("report.csv"), &self.report_csv())?;
        write_all(&dir.join("summary.csv"), &self.summary_csv())?;
        for model in self.models() {
            match suite {
                Suite::Decay => {
                    let mut s = String::from("dataset,seed,explained,t,gradient_norm\n");
                    for d in self.decay.iter().filter(|d| d.model == model) {
                        if d.profile.is_empty() {
                            s += &format!("{},{},0,,\n", d.dataset, d.seed);
                        }
                        for (t, g) in d.profile.iter().enumerate() {
                            s += &format!("{},{},{},{t},{g:.9e}\n", d.dataset, d.seed, d.explained);
                        }
                    }
                    write_all(&dir.join(format!("decay_{model}.csv")), &s)?;
                }
                Suite::MovingBox => {
                    let mut s = String::from("start,seed,wjac,euc,acc\n");
                    for r in self.rows.iter().filter(|r| r.model == model) {
                        let start = r.dataset.strip_prefix("moving-").unwrap_or(&r.dataset);
                        let m = r.metrics;
                        s += &format!(
                            "{start},{},{},{},{}\n",
                            r.seed,
                            opt(m.and_then(|m| m.wjac)),
                            opt(m.and_then(|m| m.euc)),
                            opt(m.map(|m| m.acc))
                        );
                    }
                    write_all(&dir.join(format!("moving_{model}.csv")), &s)?;
                }
                Suite::FeatureDrop => {
                    let mut s = String::from("dataset,seed,condition,percent,accuracy\n");
                    for c in self.drops.iter().filter(|c| c.model == model) {
                        for p in &c.points {
                            s += &format!("{},{},{},{},{:.9}\n", c.dataset, c.seed, c.condition, p.percent, p.accuracy);
                        }
                    }
                    write_all(&dir.join(format!("drop_{model}.csv")), &s)?;
                }
                Suite::Mnist | Suite::StaticBox => {}
            }
        }
        if suite == Suite::Mnist {
            let mut s = String::from("model,seed,label,samples,early_fraction\n");
            for m in &self.masses {
                s += &format!("{},{},{},{},{}\n", m.model, m.seed, m.label, m.samples, opt(m.early_fraction));
            }
            write_all(&dir.join("mnist_mass.csv"), &s)?;
        }
        let mut index = String::from("dataset,model,seed,sample,label,predicted,correct,scale,path\n");
        for h in &self.heatmaps {
            let rel = h.relative_path();
            let path = dir.join(&rel);
            let parent = path.parent().expect("heatmap paths have a parent");
            fs::create_dir_all(parent).map_err(|e| Error::file(parent, e))?;
            let mut bytes = Vec::new();
            let scale = h.map.write_pgm(&mut bytes)?;
            fs::write(&path, &bytes).map_err(|e| Error::file(&path, e))?;
            index += &format!(
                "{},{},{},{},{},{},{},{scale:.9e},{}\n",
                h.dataset,
                h.model,
                h.seed,
                h.sample,
                h.label,
                h.predicted,
                h.label == h.predicted,
                rel.display()
            );
        }
        write_all(&dir.join("heatmaps_index.csv"), &index)
    }
}
