use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use incell::cells::{Architecture, ModelSpec};
use incell::config::FileConfig;
use incell::data::synthetic::{generate_split, BoxKind, DatasetConfig};
use incell::data::{icts, Split, Splits};
use incell::error::{Error, Result};
use incell::experiment::{self, ExperimentSpec, Settings, Source, Suite};
use incell::saliency::explain;
use incell::train::{train_with, TrainConfig};
use incell::{checkpoint, metrics};

/// Input-cell attention LSTMs and gradient saliency for time series.
///
/// Exit codes: 0 success, 2 invalid input or configuration, 3 runtime or
/// numeric failure.
#[derive(Parser)]
#[command(name = "incell", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic box dataset as DIR/train.icts and DIR/test.icts.
    Generate(GenerateArgs),
    /// Train a model and write a checkpoint plus a CSV training log.
    Train(TrainArgs),
    /// Export saliency maps (CSV and PGM) for samples of a dataset.
    Saliency(SaliencyArgs),
    /// Accuracy, saliency metrics and optional feature-drop curve of a checkpoint.
    Evaluate(EvaluateArgs),
    /// Run an experiment suite described by a config file and flags.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// earlier, middle, latter, mixed, three-earlier, three-middle,
    /// three-latter or moving.
    #[arg(long)]
    kind: String,
    /// First timestep of a moving box.
    #[arg(long)]
    start: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// Pure-noise steps appended after the box region.
    #[arg(long)]
    tail: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Default)]
struct TrainingFlags {
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    attention_dim: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// lstm, lstm-incell, lstm-incell-full, lstm-incell-partial<k>,
    /// lstm-selfattn, lstm-maxpool, lstm-meanpool (suffixes combine).
    #[arg(long)]
    model: String,
    /// Directory holding train.icts and test.icts.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Training log; defaults to the checkpoint path with `.log.csv` appended.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainingFlags,
}

#[derive(Args)]
struct SaliencyArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// An ICTS dataset file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of leading samples to export; all when omitted.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// An ICTS dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Write the metric row here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated drop percentages; writes a feature-drop curve.
    #[arg(long, value_delimiter = ',')]
    drop_grid: Option<Vec<f64>>,
    /// Feature-drop curve output.
    #[arg(long)]
    drop_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment description.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainingFlags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = match &cli.command {
        Command::Generate(_) => "generate",
        Command::Train(_) => "train",
        Command::Saliency(_) => "saliency",
        Command::Evaluate(_) => "evaluate",
        Command::Experiment(_) => "experiment",
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Saliency(a) => saliency(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(a) => run_experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Validation(_) = e {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}\n\nFor more information, try '--help'.", sub.render_usage());
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    path.as_deref().map_or_else(|| Ok(FileConfig::default()), FileConfig::load)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let kind: BoxKind = match (a.kind.as_str(), a.start) {
        ("moving", Some(start)) => BoxKind::Moving { start },
        ("moving", None) => return Err(Error::Validation("--kind moving needs --start".into())),
        (k, None) => k.parse()?,
        (_, Some(_)) => return Err(Error::Validation("--start only applies to --kind moving".into())),
    };
    let settings = file_config(&a.config)?.settings(Settings::default())?;
    let mut config = DatasetConfig {
        seed: a.seed,
        ..settings.dataset_config(kind, a.seed)
    };
    let overrides = [
        (&mut config.train, a.train),
        (&mut config.test, a.test),
        (&mut config.steps, a.steps),
        (&mut config.features, a.features),
        (&mut config.tail, a.tail),
    ];
    for (slot, v) in overrides {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(v) = a.amplitude {
        config.amplitude = v;
    }
    config.validate()?;
    let train = generate_split(&config, Split::Train, config.train)?;
    let test = generate_split(&config, Split::Test, config.test)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::file(&a.out, e))?;
    for (name, data) in [("train.icts", &train), ("test.icts", &test)] {
        let hash = icts::save(data, &a.out.join(name))?;
        println!("{hash}  {}", a.out.join(name).display());
    }
    Ok(())
}

fn load_splits(dir: &Path) -> Result<Splits> {
    Ok(Splits {
        train: icts::load(&dir.join("train.icts"))?,
        test: icts::load(&dir.join("test.icts"))?,
    })
}

fn apply_flags(flags: &TrainingFlags, settings: &mut Settings) -> Result<()> {
    if let Some(o) = &flags.optimizer {
        settings.train.optimizer = o.parse()?;
    }
    let t = &mut settings.train;
    t.learning_rate = flags.learning_rate.unwrap_or(t.learning_rate);
    t.batch_size = flags.batch_size.unwrap_or(t.batch_size);
    t.max_epochs = flags.max_epochs.unwrap_or(t.max_epochs);
    t.patience = flags.patience.unwrap_or(t.patience);
    if flags.clip.is_some() {
        t.clip = flags.clip;
    }
    settings.hidden = flags.hidden.unwrap_or(settings.hidden);
    settings.attention_dim = flags.attention_dim.unwrap_or(settings.attention_dim);
    settings.hops = flags.hops.unwrap_or(settings.hops);
    settings.validate()
}

fn train(a: TrainArgs) -> Result<()> {
    let arch: Architecture = a.model.parse()?;
    let mut settings = file_config(&a.config)?.settings(Settings::default())?;
    apply_flags(&a.flags, &mut settings)?;
    let config = TrainConfig {
        seed: a.seed.unwrap_or(settings.train.seed),
        ..settings.train
    };
    let data = load_splits(&a.data)?;
    let spec: ModelSpec = settings.model_spec(arch, &data.train);
    spec.validate()?;
    let result = train_with(spec, &data, &config, |r| {
        eprintln!("epoch {:>3}  loss {:.6}  test acc {:.4}", r.epoch, r.train_loss, r.test_accuracy);
    })?;
    checkpoint::save(&result.model, &a.checkpoint)?;
    let log = a.log.unwrap_or_else(|| {
        let mut p = a.checkpoint.clone().into_os_string();
        p.push(".log.csv");
        p.into()
    });
    let mut f = fs::File::create(&log).map_err(|e| Error::file(&log, e))?;
    result.write_log(&mut f).map_err(|e| Error::file(&log, e))?;
    println!(
        "best test accuracy {:.4} at epoch {} of {}",
        result.test_accuracy, result.best_epoch, result.epochs_run
    );
    Ok(())
}

fn saliency(a: SaliencyArgs) -> Result<()> {
    let model = checkpoint::load(&a.checkpoint)?;
    let data = icts::load(&a.data)?;
    let n = a.samples.unwrap_or(data.len()).min(data.len());
    let inputs: Vec<_> = data.inputs().into_iter().take(n).collect();
    let explained = explain(&model, &inputs, 50)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::file(&a.out, e))?;
    let mut index = String::from("sample,label,target,predicted,correct,scale,csv,pgm\n");
    for (i, e) in explained.iter().enumerate() {
        let (csv, pgm) = (format!("{i:05}.csv"), format!("{i:05}.pgm"));
        let mut c = Vec::new();
        e.map.write_csv(&mut c)?;
        fs::write(a.out.join(&csv), c).map_err(|err| Error::file(a.out.join(&csv), err))?;
        let mut p = Vec::new();
        let scale = e.map.write_pgm(&mut p)?;
        fs::write(a.out.join(&pgm), p).map_err(|err| Error::file(a.out.join(&pgm), err))?;
        let label = data.samples[i].label;
        index += &format!(
            "{i},{label},{},{},{},{scale:.9e},{csv},{pgm}\n",
            e.map.class,
            e.predicted,
            label == e.predicted
        );
    }
    let path = a.out.join("index.csv");
    fs::write(&path, index).map_err(|e| Error::file(&path, e))?;
    println!("wrote {n} saliency maps to {}", a.out.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model = checkpoint::load(&a.checkpoint)?;
    let data = icts::load(&a.data)?;
    let run = experiment::CellRun {
        source: Source::Box(BoxKind::Earlier),
        arch: model.spec.arch,
        seed: 0,
        explained: explain(&model, &data.inputs(), 50)?,
        test: data,
        trained: incell::train::TrainResult {
            model,
            epochs_run: 0,
            best_epoch: 0,
            test_accuracy: f64::NAN,
            history: Vec::new(),
        },
    };
    let m = run.metrics()?;
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.9}"));
    let text = format!(
        "model,acc,wjac,euc,explained\n{},{:.9},{},{},{}\n",
        run.arch,
        m.acc,
        fmt(m.wjac),
        fmt(m.euc),
        m.explained
    );
    match &a.out {
        Some(p) => fs::write(p, &text).map_err(|e| Error::file(p, e))?,
        None => print!("{text}"),
    }
    if let Some(grid) = &a.drop_grid {
        let curve = metrics::feature_drop_eval(&run.trained.model, &run.test, &run.maps(), grid)?;
        let mut s = String::from("percent,accuracy\n");
        for p in curve {
            s += &format!("{},{:.9}\n", p.percent, p.accuracy);
        }
        match &a.drop_out {
            Some(p) => fs::write(p, &s).map_err(|e| Error::file(p, e))?,
            None => std::io::stdout().write_all(s.as_bytes())?,
        }
    }
    Ok(())
}

fn run_experiment(a: ExperimentArgs) -> Result<()> {
    let file = file_config(&a.config)?;
    let e = &file.experiment;
    let suite: Suite = a
        .suite
        .clone()
        .or_else(|| e.suite.clone())
        .ok_or_else(|| Error::Validation("no suite given (--suite or [experiment] suite)".into()))?
        .parse()?;
    let out = a
        .out
        .clone()
        .or_else(|| e.output.clone())
        .ok_or_else(|| Error::Validation("no output directory given (--out or [experiment] output)".into()))?;
    let mut spec = ExperimentSpec::defaults(suite, out);
    spec.settings = file.settings(Settings::default())?;
    if let Some(m) = a.models.clone().or_else(|| e.models.clone()) {
        spec.models = m.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(d) = a.datasets.clone().or_else(|| e.datasets.clone()) {
        spec.datasets = d.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(s) = a.seeds.clone().or_else(|| e.seeds.clone()) {
        spec.seeds = s;
    }
    spec.settings.workers = a.workers.unwrap_or(spec.settings.workers);
    spec.settings.train_size = a.train_size.unwrap_or(spec.settings.train_size);
    spec.settings.test_size = a.test_size.unwrap_or(spec.settings.test_size);
    if let Some(d) = a.mnist_dir {
        spec.settings.mnist_dir = d;
    }
    apply_flags(&a.flags, &mut spec.settings)?;
    spec.validate()?;
    let report = experiment::run(&spec)?;
    report.write(suite, &spec.output)?;
    print!("{}", report.summary_csv());
    Ok(())
}
