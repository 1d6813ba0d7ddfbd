//! The `wavemat` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data, file or
//! validation errors. When the `CI` environment variable is set, every
//! subcommand that draws random numbers requires `--seed`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wavemat_core::ablation::{ablation_pair, SceneSpec};
use wavemat_core::config::KvConfig;
use wavemat_core::experiment::{
    self, fit, row_label, run_experiment, AngleMode, ExperimentSpec, MaterialSet, ModelKind, ModelSettings,
    TrainedModel,
};
use wavemat_core::forest::ForestParams;
use wavemat_core::{metrics, simgen, split_by_repetition, Dataset};

use crate::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use crate::dataset_io::{meta_path, read_dataset, write_dataset};
use crate::reports;
use crate::run::{file_digest, load_config, RunDir};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "wavemat", version, about = "Material classification from full-waveform lidar returns")]
pub struct Cli {
    /// Key-value config file layered over the built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable. Explicit flags still win.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a capture protocol and write a dataset CSV.
    Generate(GenerateArgs),
    /// Train a model on the training repetitions of a dataset.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Evaluate(EvaluateArgs),
    /// Run the material-set x angle x model grid.
    Experiment(ExperimentArgs),
    /// Split-frequency importance of each waveform sample.
    Importance(ImportanceArgs),
    /// Segmentation with and without a material channel.
    Ablation(AblationArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Pair,
    AllMaterials,
    Colours,
}

impl From<Preset> for MaterialSet {
    fn from(p: Preset) -> Self {
        match p {
            Preset::Pair => MaterialSet::Pair,
            Preset::AllMaterials => MaterialSet::AllMaterials,
            Preset::Colours => MaterialSet::Colours,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Angles {
    Zero,
    All,
}

impl From<Angles> for AngleMode {
    fn from(a: Angles) -> Self {
        match a {
            Angles::Zero => AngleMode::Zero,
            Angles::All => AngleMode::All,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Rf,
    Tcn,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Rf => ModelKind::Rf,
            Model::Tcn => ModelKind::Tcn,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Test,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    Full,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub preset: Preset,
    #[arg(long, value_enum, default_value = "all")]
    pub angles: Angles,
    /// Protocol seed (config `protocol.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset CSV to write; the sidecar goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub model: Model,
    /// TCN iterations (config `tcn.iterations`).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Model seed (config `forest.seed` / `tcn.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Held-out repetitions, comma separated (config `experiment.test_reps`).
    #[arg(long, value_delimiter = ',')]
    pub test_reps: Option<Vec<u8>>,
    /// Reject yaws off the protocol grid.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: Split,
    #[arg(long, value_delimiter = ',')]
    pub test_reps: Option<Vec<u8>>,
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// Every set, angle mode and model (the default when no filter is given).
    #[arg(long, value_enum, conflicts_with_all = ["preset", "angles", "model"])]
    pub grid: Option<Grid>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, value_enum)]
    pub angles: Option<Angles>,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Base model seed for both models.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Datasets to pool, comma separated (config `experiment.dataset_seeds`).
    #[arg(long, value_delimiter = ',')]
    pub dataset_seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ImportanceArgs {
    /// Dataset to analyse; otherwise one is generated from the preset.
    #[arg(long, conflicts_with_all = ["preset", "angles"])]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, value_enum)]
    pub angles: Option<Angles>,
    /// Seed of the generated dataset; the forest seed is derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random-forest checkpoint to analyse instead of training one.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AblationArgs {
    /// First scene seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive scene seeds.
    #[arg(long, default_value_t = 10)]
    pub count: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn ci_mode() -> bool {
    std::env::var("CI").is_ok_and(|v| !v.is_empty() && v != "0" && v != "false")
}

fn need_seed(seed: Option<u64>) -> Result<()> {
    if seed.is_none() && ci_mode() {
        return Err(Error::Usage("--seed is required when CI is set".into()));
    }
    Ok(())
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 1;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run_from(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref(), &cli.set)?;
    match &cli.command {
        Command::Generate(a) => generate(a, &mut cfg, out),
        Command::Train(a) => train(a, &mut cfg, out),
        Command::Evaluate(a) => evaluate(a, &mut cfg, out),
        Command::Experiment(a) => run_grid(a, &mut cfg, out),
        Command::Importance(a) => importance(a, &mut cfg, out),
        Command::Ablation(a) => ablation(a, &mut cfg, out),
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn generate(a: &GenerateArgs, cfg: &mut KvConfig, out: &mut dyn Write) -> Result<()> {
    need_seed(a.seed)?;
    if let Some(s) = a.seed {
        cfg.set("protocol.seed", &s.to_string());
    }
    let settings = ModelSettings::from_config(cfg)?;
    let seed: u64 = cfg.require("protocol.seed")?;
    let data = simgen::generate_dataset(&settings.protocol(a.preset.into(), a.angles.into(), seed)?, &settings.sensor)?;
    write_dataset(&data, &a.out)?;
    say(out, format_args!("{} samples", data.len()))?;
    say(out, format_args!("dataset {}", a.out.display()))?;
    say(out, format_args!("meta {}", meta_path(&a.out).display()))
}

fn test_reps_flag(cfg: &mut KvConfig, reps: &Option<Vec<u8>>) {
    if let Some(r) = reps {
        cfg.set("experiment.test_reps", &list(r));
    }
}

fn split(data: &Dataset, which: Split, test_reps: &[u8]) -> Result<Dataset> {
    if which == Split::All {
        return Ok(data.clone());
    }
    let (train, test) = split_by_repetition(data, test_reps)?;
    Ok(if which == Split::Train { train } else { test })
}

fn train(a: &TrainArgs, cfg: &mut KvConfig, out: &mut dyn Write) -> Result<()> {
    need_seed(a.seed)?;
    if let Some(s) = a.seed {
        cfg.set("forest.seed", &s.to_string());
        cfg.set("tcn.seed", &s.to_string());
    }
    if let Some(n) = a.iterations {
        cfg.set("tcn.iterations", &n.to_string());
    }
    test_reps_flag(cfg, &a.test_reps);
    let settings = ModelSettings::from_config(cfg)?;
    let data = read_dataset(&a.data, a.strict)?;
    let (train, test) = split_by_repetition(&data, &settings.test_reps)?;
    let kind: ModelKind = a.model.into();
    let invocation = format!("train model={} data={}", kind.as_str(), file_digest(&a.data)?);
    let dir = RunDir::create(&a.out, "train", cfg, &invocation)?;
    let fitted = fit(kind, &train, &settings, data.seed())?;
    let ck = match fitted.model {
        TrainedModel::Forest(f) => Checkpoint::forest(f),
        TrainedModel::Tcn(m) => Checkpoint::tcn(m, data.class_table().to_vec()),
    };
    let ck_path = dir.file("model.ckpt");
    write_checkpoint(&ck, &ck_path)?;
    if kind == ModelKind::Tcn {
        dir.write("loss.log", &reports::loss_log(&fitted.losses))?;
    }
    let train_miou = ck.model.evaluate(&train)?.miou;
    let test_report = ck.model.evaluate(&test)?;
    let mut summary = reports::summary_csv("train", train.len(), train_miou);
    summary.push_str(reports::summary_csv("test", test.len(), test_report.miou).lines().nth(1).unwrap_or(""));
    summary.push('\n');
    dir.write("summary.csv", &summary)?;
    say(out, format_args!("train miou {train_miou}"))?;
    say(out, format_args!("test miou {}", test_report.miou))?;
    say(out, format_args!("checkpoint {}", ck_path.display()))?;
    say(out, format_args!("run_dir {}", dir.path.display()))
}

fn evaluate(a: &EvaluateArgs, cfg: &mut KvConfig, out: &mut dyn Write) -> Result<()> {
    test_reps_flag(cfg, &a.test_reps);
    let test_reps: Vec<u8> = cfg.list("experiment.test_reps")?.unwrap_or_else(|| vec![5]);
    let ck = read_checkpoint(&a.checkpoint)?;
    let data = read_dataset(&a.data, a.strict)?;
    if ck.class_table != data.class_table() {
        return Err(Error::Usage(format!(
            "class table of {} does not match {}",
            a.checkpoint.display(),
            a.data.display()
        )));
    }
    let part = split(&data, a.split, &test_reps)?;
    let preds = ck.model.predict_dataset(&part);
    let counts = metrics::confusion(&preds, &part.labels())?;
    let report = metrics::iou_report(&counts)?;
    let split_name = format!("{:?}", a.split).to_lowercase();
    let invocation = format!(
        "evaluate checkpoint={} data={} split={split_name}",
        file_digest(&a.checkpoint)?,
        file_digest(&a.data)?
    );
    let dir = RunDir::create(&a.out, "evaluate", cfg, &invocation)?;
    dir.write("per_class.csv", &reports::per_class_csv(&counts, &report, data.class_table()))?;
    dir.write("summary.csv", &reports::summary_csv(&split_name, part.len(), report.miou))?;
    say(out, format_args!("{split_name} miou {}", report.miou))?;
    say(out, format_args!("run_dir {}", dir.path.display()))
}

fn run_grid(a: &ExperimentArgs, cfg: &mut KvConfig, out: &mut dyn Write) -> Result<()> {
    need_seed(a.seed)?;
    if let Some(s) = a.seed {
        cfg.set("forest.seed", &s.to_string());
        cfg.set("tcn.seed", &s.to_string());
    }
    if let Some(s) = &a.dataset_seeds {
        cfg.set("experiment.dataset_seeds", &list(s));
    }
    if let Some(n) = a.iterations {
        cfg.set("tcn.iterations", &n.to_string());
    }
    let settings = ModelSettings::from_config(cfg)?;
    let sets: Vec<MaterialSet> = a.preset.map_or(MaterialSet::ALL.to_vec(), |p| vec![p.into()]);
    let angles: Vec<AngleMode> = a.angles.map_or(vec![AngleMode::Zero, AngleMode::All], |x| vec![x.into()]);
    let models: Vec<ModelKind> = a.model.map_or(vec![ModelKind::Rf, ModelKind::Tcn], |m| vec![m.into()]);
    let invocation = format!(
        "experiment sets={} angles={} models={}",
        list(&sets.iter().map(|s| s.as_str()).collect::<Vec<_>>()),
        list(&angles.iter().map(|s| s.as_str()).collect::<Vec<_>>()),
        list(&models.iter().map(|s| s.as_str()).collect::<Vec<_>>()),
    );
    let dir = RunDir::create(&a.out, "experiment", cfg, &invocation)?;
    let mut results = Vec::new();
    for &model in &models {
        for &set in &sets {
            for &ang in &angles {
                let t = Instant::now();
                let r = run_experiment(&ExperimentSpec {
                    set,
                    angles: ang,
                    model,
                    settings: settings.clone(),
                })?;
                say(
                    out,
                    format_args!("{:<24} {:.4}  ({:.1}s)", row_label(&r.row), r.row.miou, t.elapsed().as_secs_f64()),
                )?;
                results.push(r);
            }
        }
    }
    let rows: Vec<_> = results.iter().map(|r| r.row.clone()).collect();
    dir.write("results.csv", &reports::results_csv(&rows))?;
    dir.write("per_class.csv", &reports::experiment_classes_csv(&results))?;
    say(out, format_args!("run_dir {}", dir.path.display()))
}

fn importance(a: &ImportanceArgs, cfg: &mut KvConfig, out: &mut dyn Write) -> Result<()> {
    if a.checkpoint.is_none() {
        need_seed(a.seed)?;
    }
    let settings = ModelSettings::from_config(cfg)?;
    let data = match &a.data {
        Some(p) => read_dataset(p, false)?,
        None => {
            let set = a.preset.map_or(MaterialSet::AllMaterials, Into::into);
            let ang = a.angles.map_or(AngleMode::All, Into::into);
            let seed = a.seed.unwrap_or(settings.dataset_seeds[0]);
            simgen::generate_dataset(&settings.protocol(set, ang, seed)?, &settings.sensor)?
        }
    };
    let forest = match &a.checkpoint {
        Some(p) => match read_checkpoint(p)?.model {
            TrainedModel::Forest(f) => f,
            TrainedModel::Tcn(_) => return Err(Error::Usage("importance needs a random-forest checkpoint".into())),
        },
        None => match fit(ModelKind::Rf, &data, &settings, data.seed())?.model {
            TrainedModel::Forest(f) => f,
            TrainedModel::Tcn(_) => unreachable!(),
        },
    };
    let imp = experiment::importance_report(&forest)?;
    let digest = |p: &Option<PathBuf>| p.as_deref().map_or(Ok(String::new()), file_digest);
    let invocation = format!(
        "importance data={} preset={:?} angles={:?} seed={} checkpoint={}",
        digest(&a.data)?,
        a.preset,
        a.angles,
        data.seed(),
        digest(&a.checkpoint)?,
    );
    let dir = RunDir::create(&a.out, "importance", cfg, &invocation)?;
    dir.write("importance.csv", &reports::importance_csv(&imp))?;
    dir.write("waveforms.csv", &reports::mean_waveforms_csv(&simgen::class_mean_waveforms(&data)))?;
    let (arg, top) = imp.iter().fold((0, f64::MIN), |b, &(i, v)| if v > b.1 { (i, v) } else { b });
    let head = experiment::flat_head_len(&data, settings.sensor.baseline);
    let head_mass: f64 = imp[..head.min(imp.len())].iter().map(|(_, v)| v).sum();
    say(out, format_args!("argmax {arg} ({top})"))?;
    say(out, format_args!("flat head {head} samples, mass {head_mass}"))?;
    say(out, format_args!("run_dir {}", dir.path.display()))
}

fn ablation(a: &AblationArgs, cfg: &mut KvConfig, out: &mut dyn Write) -> Result<()> {
    need_seed(a.seed)?;
    if a.count == 0 {
        return Err(Error::Usage("--count must be at least 1".into()));
    }
    let spec = SceneSpec::from_config(cfg)?;
    let params = ForestParams::from_config(cfg, "ablation")?;
    let first = a.seed.unwrap_or(0);
    let mut rows = Vec::new();
    for seed in first..first + a.count {
        let (without, with) = ablation_pair(&spec, seed, &params)?;
        say(out, format_args!("seed {seed}: {without:.4} -> {with:.4}"))?;
        rows.push((seed, without, with));
    }
    let wins = rows.iter().filter(|(_, a, b)| b > a).count();
    let dir = RunDir::create(&a.out, "ablation", cfg, &format!("ablation seeds={first}+{}", a.count))?;
    dir.write("ablation.csv", &reports::ablation_csv(&rows))?;
    say(out, format_args!("material channel helped on {wins} of {} scenes", rows.len()))?;
    say(out, format_args!("run_dir {}", dir.path.display()))
}
