//! Command-line pipeline: split, train, evaluate, predict, recommend,
//! reproduce.
//!
//! Hyperparameters come from a flat `key = value` config file, command-line
//! flags (which override file keys), and per-task defaults, in that order of
//! precedence. Unknown config keys are rejected. Every run echoes its
//! effective configuration so results can be reproduced from the output
//! alone.
//!
//! Exit codes: 0 success, 1 runtime failure (io, data, numeric), 2 usage or
//! configuration error.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::baselines::{
    train_average, train_pop, train_svd_with, AverageKind, AverageModel, PopModel, SvdConfig,
    TrainedSvdModel,
};
use crate::dataset::{
    binarize, load_dataset, load_interactions, random_split, save_interactions, Dataset,
    DedupPolicy, Delimiter, SplitSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate_ranking, evaluate_ranking_with, evaluate_rating, mae, rmse, EvalReport,
};
use crate::model_io::{load_model, save_model, ModelFile, ModelMode};
use crate::ranking::{train_ranking_with, RankingConfig, TrainedRankingModel};
use crate::rating::{
    train_rating_with, ConfidenceKind, EpochStats, RatingConfig, TrainedRatingModel,
};

/// Top-level argument parser.
#[derive(Debug, Parser)]
#[command(
    name = "metricf",
    version,
    about = "Metric factorization recommender toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Randomly split an interaction file into train and test files.
    Split(SplitArgs),
    /// Train a model and persist it.
    Train(TrainArgs),
    /// Score a saved model against a held-out test file.
    Evaluate(EvaluateArgs),
    /// Predict one rating from raw user and item ids.
    Predict(PredictArgs),
    /// Print the top-n items for a user.
    Recommend(RecommendArgs),
    /// Rerun a benchmark recipe over five splits and report pass/fail.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Interaction file to split.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Where to write the training fraction.
    #[arg(long)]
    pub train_out: Option<PathBuf>,
    /// Where to write the held-out fraction.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Which of the seed's independent splits to produce.
    #[arg(long)]
    pub repeat: Option<u32>,
    #[arg(long)]
    pub delimiter: Option<String>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub dedup: Option<String>,
    /// Flat key = value file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// rating | ranking | svd | useravg | itemavg | pop
    #[arg(long)]
    pub task: Option<String>,
    /// Training interaction file.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Where to write the model.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub delimiter: Option<String>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub dedup: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Confidence shape for rating training: absolute | square | log
    #[arg(long)]
    pub g: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Norm-clipping radius.
    #[arg(long)]
    pub l: Option<f64>,
    #[arg(long)]
    pub drop_rate: Option<f64>,
    /// Target distance for unobserved pairs (ranking).
    #[arg(long)]
    pub a: Option<f64>,
    /// Target distance for observed pairs (ranking).
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub init_std: Option<f64>,
    /// Flat key = value file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// rating | ranking
    #[arg(long)]
    pub task: String,
    #[arg(long)]
    pub model: PathBuf,
    /// Training file the model was fit on; rebuilds the id maps.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Comma-separated ranking cutoffs.
    #[arg(long, default_value = "5,10")]
    pub cutoffs: String,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long, default_value = "auto")]
    pub delimiter: String,
    #[arg(long, default_value_t = 0.0)]
    pub r_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub r_max: f64,
    #[arg(long, default_value = "keep-last")]
    pub dedup: String,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Training file the model was fit on; rebuilds the id maps.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub user: String,
    #[arg(long)]
    pub item: String,
    #[arg(long, default_value = "auto")]
    pub delimiter: String,
    #[arg(long, default_value_t = 0.0)]
    pub r_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub r_max: f64,
    #[arg(long, default_value = "keep-last")]
    pub dedup: String,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Training file the model was fit on; rebuilds the id maps.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub user: String,
    #[arg(long, short = 'n', default_value_t = 10)]
    pub n: usize,
    /// Keep items the user already interacted with in the list.
    #[arg(long)]
    pub include_seen: bool,
    #[arg(long, default_value = "auto")]
    pub delimiter: String,
    #[arg(long, default_value = "keep-last")]
    pub dedup: String,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// ml100k-rating | filmtrust-ranking | custom
    #[arg(long)]
    pub recipe: Option<String>,
    /// Raw interaction file the recipe runs on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the aggregated report as JSON to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Flat key = value file; required for --recipe custom.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Flat string-to-string configuration, merged from a config file and flag
/// overrides.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parse a flat `key = value` file. '#' lines and blank lines are
    /// skipped; anything else must contain '='.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected key = value, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            values.insert(key.trim().to_owned(), value.trim().to_owned());
        }
        Ok(Self { values })
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.values.insert(key.to_owned(), value.to_string());
    }

    /// Flag override: only set when the flag was given.
    pub fn set_opt(&mut self, key: &str, value: &Option<impl Display>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    /// Reject keys outside the given vocabulary.
    pub fn check_allowed(&self, allowed: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "unknown config key {key:?} (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    /// Typed lookup; absent keys give None, malformed values an error.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad value {s:?} for key {key:?}"))),
        }
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| {
            Error::Config(format!(
                "missing required key {key:?} (flag --{})",
                key.replace('_', "-")
            ))
        })
    }
}

const SPLIT_KEYS: &[&str] = &[
    "input",
    "train_out",
    "test_out",
    "train_fraction",
    "seed",
    "repeat",
    "delimiter",
    "r_min",
    "r_max",
    "dedup",
];
const TRAIN_COMMON_KEYS: &[&str] = &[
    "task",
    "train",
    "model_out",
    "delimiter",
    "r_min",
    "r_max",
    "dedup",
];
const RATING_KEYS: &[&str] = &[
    "k",
    "eta",
    "alpha",
    "g",
    "lambda",
    "tau",
    "l",
    "drop_rate",
    "epochs",
    "batch_size",
    "seed",
    "init_std",
];
const RANKING_KEYS: &[&str] = &[
    "k",
    "eta",
    "alpha",
    "a",
    "z",
    "l",
    "drop_rate",
    "epochs",
    "batch_size",
    "seed",
    "init_std",
];
const SVD_KEYS: &[&str] = &[
    "k",
    "eta",
    "lambda",
    "epochs",
    "batch_size",
    "seed",
    "init_std",
];
const REPRODUCE_COMMON_KEYS: &[&str] = &[
    "recipe",
    "data",
    "seed",
    "json",
    "task",
    "train_fraction",
    "n_repeats",
    "cutoffs",
    "delimiter",
    "r_min",
    "r_max",
    "dedup",
];

/// What a model file is trained or evaluated as.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Rating,
    Ranking,
    Svd,
    UserAvg,
    ItemAvg,
    Pop,
}

impl Task {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rating" => Ok(Self::Rating),
            "ranking" => Ok(Self::Ranking),
            "svd" => Ok(Self::Svd),
            "useravg" => Ok(Self::UserAvg),
            "itemavg" => Ok(Self::ItemAvg),
            "pop" => Ok(Self::Pop),
            other => Err(Error::Config(format!(
                "unknown task {other:?} (expected rating, ranking, svd, useravg, itemavg, or pop)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Rating => "rating",
            Self::Ranking => "ranking",
            Self::Svd => "svd",
            Self::UserAvg => "useravg",
            Self::ItemAvg => "itemavg",
            Self::Pop => "pop",
        }
    }

    fn hyper_keys(&self) -> &'static [&'static str] {
        match self {
            Self::Rating => RATING_KEYS,
            Self::Ranking => RANKING_KEYS,
            Self::Svd => SVD_KEYS,
            _ => &[],
        }
    }
}

/// Options shared by every command that reads an interaction file.
#[derive(Debug, Clone)]
struct DataOpts {
    delimiter: Delimiter,
    delimiter_name: String,
    r_min: f64,
    r_max: f64,
    dedup: DedupPolicy,
    dedup_name: String,
}

impl DataOpts {
    fn from_config(rc: &RunConfig) -> Result<Self> {
        let delimiter_name = rc.get("delimiter").unwrap_or("auto").to_owned();
        let dedup_name = rc.get("dedup").unwrap_or("keep-last").to_owned();
        Ok(Self {
            delimiter: Delimiter::parse(&delimiter_name)?,
            delimiter_name,
            r_min: rc.parsed("r_min")?.unwrap_or(0.0),
            r_max: rc.parsed("r_max")?.unwrap_or(5.0),
            dedup: DedupPolicy::parse(&dedup_name)?,
            dedup_name,
        })
    }

    fn from_strings(delimiter: &str, r_min: f64, r_max: f64, dedup: &str) -> Result<Self> {
        Ok(Self {
            delimiter: Delimiter::parse(delimiter)?,
            delimiter_name: delimiter.to_owned(),
            r_min,
            r_max,
            dedup: DedupPolicy::parse(dedup)?,
            dedup_name: dedup.to_owned(),
        })
    }

    fn load(&self, path: &Path) -> Result<Dataset> {
        load_dataset(path, self.delimiter, self.r_min, self.r_max, self.dedup)
    }

    fn echo_into(&self, pairs: &mut BTreeMap<&'static str, String>) {
        pairs.insert("delimiter", self.delimiter_name.clone());
        pairs.insert("r_min", self.r_min.to_string());
        pairs.insert("r_max", self.r_max.to_string());
        pairs.insert("dedup", self.dedup_name.clone());
    }
}

fn rating_config_from(rc: &RunConfig) -> Result<RatingConfig> {
    let mut c = RatingConfig::default();
    if let Some(v) = rc.parsed("k")? {
        c.k = v;
    }
    if let Some(v) = rc.parsed("eta")? {
        c.eta = v;
    }
    if let Some(v) = rc.parsed("alpha")? {
        c.alpha = v;
    }
    if let Some(v) = rc.get("g") {
        c.g_kind = ConfidenceKind::parse(v)?;
    }
    if let Some(v) = rc.parsed("lambda")? {
        c.lambda = v;
    }
    if let Some(v) = rc.parsed("tau")? {
        c.tau = v;
    }
    if let Some(v) = rc.parsed("l")? {
        c.l = v;
    }
    if let Some(v) = rc.parsed("drop_rate")? {
        c.drop_rate = v;
    }
    if let Some(v) = rc.parsed("epochs")? {
        c.epochs = v;
    }
    if let Some(v) = rc.parsed("batch_size")? {
        c.batch_size = v;
    }
    if let Some(v) = rc.parsed("seed")? {
        c.seed = v;
    }
    if let Some(v) = rc.parsed("init_std")? {
        c.init_std = v;
    }
    c.validate()?;
    Ok(c)
}

fn ranking_config_from(rc: &RunConfig) -> Result<RankingConfig> {
    let mut c = RankingConfig::default();
    if let Some(v) = rc.parsed("k")? {
        c.k = v;
    }
    if let Some(v) = rc.parsed("eta")? {
        c.eta = v;
    }
    if let Some(v) = rc.parsed("alpha")? {
        c.alpha = v;
    }
    if let Some(v) = rc.parsed("a")? {
        c.a = v;
    }
    if let Some(v) = rc.parsed("z")? {
        c.z = v;
    }
    if let Some(v) = rc.parsed("l")? {
        c.l = v;
    }
    if let Some(v) = rc.parsed("drop_rate")? {
        c.drop_rate = v;
    }
    if let Some(v) = rc.parsed("epochs")? {
        c.epochs = v;
    }
    if let Some(v) = rc.parsed("batch_size")? {
        c.batch_size = v;
    }
    if let Some(v) = rc.parsed("seed")? {
        c.seed = v;
    }
    if let Some(v) = rc.parsed("init_std")? {
        c.init_std = v;
    }
    c.validate()?;
    Ok(c)
}

fn svd_config_from(rc: &RunConfig) -> Result<SvdConfig> {
    let mut c = SvdConfig::default();
    if let Some(v) = rc.parsed("k")? {
        c.k = v;
    }
    if let Some(v) = rc.parsed("eta")? {
        c.eta = v;
    }
    if let Some(v) = rc.parsed("lambda")? {
        c.lambda = v;
    }
    if let Some(v) = rc.parsed("epochs")? {
        c.epochs = v;
    }
    if let Some(v) = rc.parsed("batch_size")? {
        c.batch_size = v;
    }
    if let Some(v) = rc.parsed("seed")? {
        c.seed = v;
    }
    if let Some(v) = rc.parsed("init_std")? {
        c.init_std = v;
    }
    c.validate()?;
    Ok(c)
}

fn echo_rating_config(c: &RatingConfig, pairs: &mut BTreeMap<&'static str, String>) {
    pairs.insert("k", c.k.to_string());
    pairs.insert("eta", c.eta.to_string());
    pairs.insert("alpha", c.alpha.to_string());
    pairs.insert("g", c.g_kind.as_str().to_owned());
    pairs.insert("lambda", c.lambda.to_string());
    pairs.insert("tau", c.tau.to_string());
    pairs.insert("l", c.l.to_string());
    pairs.insert("drop_rate", c.drop_rate.to_string());
    pairs.insert("epochs", c.epochs.to_string());
    pairs.insert("batch_size", c.batch_size.to_string());
    pairs.insert("seed", c.seed.to_string());
    pairs.insert("init_std", c.init_std.to_string());
}

fn echo_ranking_config(c: &RankingConfig, pairs: &mut BTreeMap<&'static str, String>) {
    pairs.insert("k", c.k.to_string());
    pairs.insert("eta", c.eta.to_string());
    pairs.insert("alpha", c.alpha.to_string());
    pairs.insert("a", c.a.to_string());
    pairs.insert("z", c.z.to_string());
    pairs.insert("l", c.l.to_string());
    pairs.insert("drop_rate", c.drop_rate.to_string());
    pairs.insert("epochs", c.epochs.to_string());
    pairs.insert("batch_size", c.batch_size.to_string());
    pairs.insert("seed", c.seed.to_string());
    pairs.insert("init_std", c.init_std.to_string());
}

fn echo_svd_config(c: &SvdConfig, pairs: &mut BTreeMap<&'static str, String>) {
    pairs.insert("k", c.k.to_string());
    pairs.insert("eta", c.eta.to_string());
    pairs.insert("lambda", c.lambda.to_string());
    pairs.insert("epochs", c.epochs.to_string());
    pairs.insert("batch_size", c.batch_size.to_string());
    pairs.insert("seed", c.seed.to_string());
    pairs.insert("init_std", c.init_std.to_string());
}

fn print_config(pairs: &BTreeMap<&'static str, String>) {
    for (k, v) in pairs {
        println!("{k} = {v}");
    }
}

fn print_epoch(s: &EpochStats) {
    println!(
        "epoch {} loss {} rmse_train {}",
        s.epoch, s.loss, s.rmse_train
    );
}

fn parse_cutoffs(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let n: usize = part
            .parse()
            .map_err(|_| Error::Config(format!("bad cutoff {part:?} in {s:?}")))?;
        if n == 0 {
            return Err(Error::Config("cutoffs must be >= 1".into()));
        }
        out.push(n);
    }
    if out.is_empty() {
        return Err(Error::Config("at least one cutoff is required".into()));
    }
    Ok(out)
}

/// Seed of the model trained on repeat `repeat` of a split family, derived
/// so the five reproduce runs use distinct but reproducible seeds.
pub fn derive_train_seed(base: u64, repeat: u32) -> u64 {
    base.wrapping_add(1000).wrapping_add(repeat as u64)
}

/// Split, train a rating model, and score it on the held-out half.
pub fn run_rating_split(
    full: &Dataset,
    cfg: &RatingConfig,
    split: &SplitSpec,
    repeat: u32,
) -> Result<BTreeMap<String, f64>> {
    let (train, test) = random_split(full, split, repeat)?;
    let mut cfg = cfg.clone();
    cfg.seed = derive_train_seed(split.seed, repeat);
    let model = crate::rating::train_rating(&train, &cfg)?;
    evaluate_rating(&model, &test)
}

/// Split, train the inner-product baseline, and score it.
pub fn run_svd_split(
    full: &Dataset,
    cfg: &SvdConfig,
    split: &SplitSpec,
    repeat: u32,
) -> Result<BTreeMap<String, f64>> {
    let (train, test) = random_split(full, split, repeat)?;
    let mut cfg = cfg.clone();
    cfg.seed = derive_train_seed(split.seed, repeat);
    let model = crate::baselines::train_svd(&train, &cfg)?;
    crate::metrics::evaluate_rating_with(|u, i| model.predict_unchecked(u, i), &test)
}

/// Split a binarized dataset, train a ranking model, and score it.
pub fn run_ranking_split(
    full: &Dataset,
    cfg: &RankingConfig,
    split: &SplitSpec,
    repeat: u32,
    cutoffs: &[usize],
) -> Result<BTreeMap<String, f64>> {
    let (train, test) = random_split(full, split, repeat)?;
    let mut cfg = cfg.clone();
    cfg.seed = derive_train_seed(split.seed, repeat);
    let model = crate::ranking::train_ranking(&train, &cfg)?;
    evaluate_ranking(&model, &train, &test, cutoffs)
}

/// Split a binarized dataset and score the popularity baseline.
pub fn run_pop_split(
    full: &Dataset,
    split: &SplitSpec,
    repeat: u32,
    cutoffs: &[usize],
) -> Result<BTreeMap<String, f64>> {
    let (train, test) = random_split(full, split, repeat)?;
    let model = train_pop(&train)?;
    evaluate_ranking_with(|_, i| model.score_unchecked(i), &train, &test, cutoffs)
}

fn cmd_split(args: SplitArgs) -> Result<()> {
    let mut rc = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    rc.set_opt(
        "input",
        &args.input.as_ref().map(|p| p.display().to_string()),
    );
    rc.set_opt(
        "train_out",
        &args.train_out.as_ref().map(|p| p.display().to_string()),
    );
    rc.set_opt(
        "test_out",
        &args.test_out.as_ref().map(|p| p.display().to_string()),
    );
    rc.set_opt("train_fraction", &args.train_fraction);
    rc.set_opt("seed", &args.seed);
    rc.set_opt("repeat", &args.repeat);
    rc.set_opt("delimiter", &args.delimiter);
    rc.set_opt("r_min", &args.r_min);
    rc.set_opt("r_max", &args.r_max);
    rc.set_opt("dedup", &args.dedup);
    rc.check_allowed(SPLIT_KEYS)?;

    let opts = DataOpts::from_config(&rc)?;
    let input = PathBuf::from(rc.require("input")?);
    let train_out = PathBuf::from(rc.require("train_out")?);
    let test_out = PathBuf::from(rc.require("test_out")?);
    let spec = SplitSpec {
        train_fraction: rc.parsed("train_fraction")?.unwrap_or(0.9),
        seed: rc.parsed("seed")?.unwrap_or(42),
        n_repeats: 5,
    };
    let repeat: u32 = rc.parsed("repeat")?.unwrap_or(0);
    spec.validate()?;

    let mut pairs = BTreeMap::new();
    pairs.insert("input", input.display().to_string());
    pairs.insert("train_out", train_out.display().to_string());
    pairs.insert("test_out", test_out.display().to_string());
    pairs.insert("train_fraction", spec.train_fraction.to_string());
    pairs.insert("seed", spec.seed.to_string());
    pairs.insert("repeat", repeat.to_string());
    opts.echo_into(&mut pairs);
    print_config(&pairs);

    let full = opts.load(&input)?;
    let (train, test) = random_split(&full, &spec, repeat)?;
    save_interactions(&train, &train_out)?;
    save_interactions(&test, &test_out)?;
    println!(
        "train {} interactions -> {}",
        train.len(),
        train_out.display()
    );
    println!("test {} interactions -> {}", test.len(), test_out.display());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut rc = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    rc.set_opt("task", &args.task);
    rc.set_opt(
        "train",
        &args.train.as_ref().map(|p| p.display().to_string()),
    );
    rc.set_opt(
        "model_out",
        &args.model_out.as_ref().map(|p| p.display().to_string()),
    );
    rc.set_opt("delimiter", &args.delimiter);
    rc.set_opt("r_min", &args.r_min);
    rc.set_opt("r_max", &args.r_max);
    rc.set_opt("dedup", &args.dedup);
    rc.set_opt("k", &args.k);
    rc.set_opt("eta", &args.eta);
    rc.set_opt("alpha", &args.alpha);
    rc.set_opt("g", &args.g);
    rc.set_opt("lambda", &args.lambda);
    rc.set_opt("tau", &args.tau);
    rc.set_opt("l", &args.l);
    rc.set_opt("drop_rate", &args.drop_rate);
    rc.set_opt("a", &args.a);
    rc.set_opt("z", &args.z);
    rc.set_opt("epochs", &args.epochs);
    rc.set_opt("batch_size", &args.batch_size);
    rc.set_opt("seed", &args.seed);
    rc.set_opt("init_std", &args.init_std);

    let task = Task::parse(rc.require("task")?)?;
    let mut allowed: Vec<&str> = TRAIN_COMMON_KEYS.to_vec();
    allowed.extend_from_slice(task.hyper_keys());
    rc.check_allowed(&allowed)?;

    let opts = DataOpts::from_config(&rc)?;
    let train_path = PathBuf::from(rc.require("train")?);
    let model_out = PathBuf::from(rc.require("model_out")?);

    let mut pairs = BTreeMap::new();
    pairs.insert("task", task.as_str().to_owned());
    pairs.insert("train", train_path.display().to_string());
    pairs.insert("model_out", model_out.display().to_string());
    opts.echo_into(&mut pairs);

    // validate hyperparameters before touching the data
    enum Prepared {
        Rating(RatingConfig),
        Ranking(RankingConfig),
        Svd(SvdConfig),
        Plain,
    }
    let prepared = match task {
        Task::Rating => {
            let c = rating_config_from(&rc)?;
            echo_rating_config(&c, &mut pairs);
            Prepared::Rating(c)
        }
        Task::Ranking => {
            let c = ranking_config_from(&rc)?;
            echo_ranking_config(&c, &mut pairs);
            Prepared::Ranking(c)
        }
        Task::Svd => {
            let c = svd_config_from(&rc)?;
            echo_svd_config(&c, &mut pairs);
            Prepared::Svd(c)
        }
        Task::UserAvg | Task::ItemAvg | Task::Pop => Prepared::Plain,
    };
    print_config(&pairs);

    let data = opts.load(&train_path)?;
    let file = match prepared {
        Prepared::Rating(cfg) => {
            let model = train_rating_with(&data, &cfg, print_epoch)?;
            ModelFile::from_rating(&model)
        }
        Prepared::Ranking(cfg) => {
            let data = binarize(&data);
            let model = train_ranking_with(&data, &cfg, print_epoch)?;
            ModelFile::from_ranking(&model)
        }
        Prepared::Svd(cfg) => {
            let model = train_svd_with(&data, &cfg, print_epoch)?;
            ModelFile::from_svd(&model)
        }
        Prepared::Plain => match task {
            Task::UserAvg => ModelFile::from_average(&train_average(&data, AverageKind::User)?),
            Task::ItemAvg => ModelFile::from_average(&train_average(&data, AverageKind::Item)?),
            Task::Pop => ModelFile::from_pop(&train_pop(&binarize(&data))?),
            _ => unreachable!(),
        },
    };
    save_model(&model_out, &file)?;
    println!("model written to {}", model_out.display());
    Ok(())
}

/// Any rating-scale predictor loadable from a model file.
enum RatingPredictor {
    Metric(TrainedRatingModel),
    Svd(TrainedSvdModel),
    Avg(AverageModel),
}

impl RatingPredictor {
    fn from_file(file: ModelFile, train: &Dataset) -> Result<Self> {
        let users = train.users.clone();
        let items = train.items.clone();
        match file.mode {
            ModelMode::Rating => Ok(Self::Metric(file.into_rating_model(users, items)?)),
            ModelMode::Svd => Ok(Self::Svd(file.into_svd_model(users, items)?)),
            ModelMode::UserAvg | ModelMode::ItemAvg => {
                Ok(Self::Avg(file.into_average_model(users, items)?))
            }
            other => Err(Error::Config(format!(
                "model mode {} cannot serve the rating task",
                other.as_str()
            ))),
        }
    }

    fn predict(&self, u: usize, i: usize) -> f64 {
        match self {
            Self::Metric(m) => m.predict_rating_unchecked(u, i),
            Self::Svd(m) => m.predict_unchecked(u, i),
            Self::Avg(m) => m.predict_unchecked(u, i),
        }
    }
}

/// Any ranking scorer loadable from a model file (lower score = better).
enum RankScorer {
    Metric(TrainedRankingModel),
    Pop(PopModel),
}

impl RankScorer {
    fn from_file(file: ModelFile, train: &Dataset) -> Result<Self> {
        let users = train.users.clone();
        let items = train.items.clone();
        match file.mode {
            ModelMode::Ranking => Ok(Self::Metric(file.into_ranking_model(
                users,
                items,
                train.user_items(),
            )?)),
            ModelMode::Pop => Ok(Self::Pop(file.into_pop_model(
                users,
                items,
                train.user_items(),
            )?)),
            other => Err(Error::Config(format!(
                "model mode {} cannot serve the ranking task",
                other.as_str()
            ))),
        }
    }

    fn score(&self, u: usize, i: usize) -> f64 {
        match self {
            Self::Metric(m) => m.distance_unchecked(u, i),
            Self::Pop(m) => m.score_unchecked(i),
        }
    }
}

fn write_json(path: &Path, report: &EvalReport) -> Result<()> {
    let text = serde_json::to_string_pretty(&report.to_json())
        .map_err(|e| Error::Config(format!("json serialization failed: {e}")))?;
    fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let task = Task::parse(&args.task)?;
    let cutoffs = parse_cutoffs(&args.cutoffs)?;
    let opts = DataOpts::from_strings(&args.delimiter, args.r_min, args.r_max, &args.dedup)?;

    let mut pairs = BTreeMap::new();
    pairs.insert("task", task.as_str().to_owned());
    pairs.insert("model", args.model.display().to_string());
    pairs.insert("train", args.train.display().to_string());
    pairs.insert("test", args.test.display().to_string());
    pairs.insert("cutoffs", args.cutoffs.clone());
    opts.echo_into(&mut pairs);
    print_config(&pairs);

    let file = load_model(&args.model)?;
    let run = match task {
        Task::Rating => {
            let train = opts.load(&args.train)?;
            let predictor = RatingPredictor::from_file(file, &train)?;
            // score raw pairs so test users/items absent from training
            // still count, via the global-mean fallback
            let fallback = train.mean_value();
            let inters = load_interactions(&args.test, opts.delimiter)?;
            if inters.is_empty() {
                return Err(Error::Empty("test set"));
            }
            let mut unknown = 0usize;
            let mut pred = Vec::with_capacity(inters.len());
            let mut truth = Vec::with_capacity(inters.len());
            for inter in &inters {
                if inter.value < opts.r_min || inter.value > opts.r_max {
                    return Err(Error::ValueOutOfRange {
                        value: inter.value,
                        r_min: opts.r_min,
                        r_max: opts.r_max,
                    });
                }
                let p = match (
                    train.users.index_of(&inter.user),
                    train.items.index_of(&inter.item),
                ) {
                    (Some(u), Some(i)) => predictor.predict(u as usize, i as usize),
                    _ => {
                        unknown += 1;
                        fallback
                    }
                };
                pred.push(p);
                truth.push(inter.value);
            }
            if unknown > 0 {
                eprintln!(
                    "note: {unknown} test pairs involve users or items unseen in training; \
                     predicted as the global training mean"
                );
            }
            let mut run = BTreeMap::new();
            run.insert("rmse".to_owned(), rmse(&pred, &truth)?);
            run.insert("mae".to_owned(), mae(&pred, &truth)?);
            run
        }
        Task::Ranking => {
            let train = binarize(&opts.load(&args.train)?);
            let scorer = RankScorer::from_file(file, &train)?;
            let inters = load_interactions(&args.test, opts.delimiter)?;
            let mut dropped = 0usize;
            let mut triplets = Vec::with_capacity(inters.len());
            for inter in &inters {
                match (
                    train.users.index_of(&inter.user),
                    train.items.index_of(&inter.item),
                ) {
                    (Some(u), Some(i)) => triplets.push(crate::dataset::Triplet {
                        user: u,
                        item: i,
                        value: 1.0,
                    }),
                    _ => dropped += 1,
                }
            }
            if dropped > 0 {
                eprintln!(
                    "note: {dropped} test pairs involve users or items unseen in training; \
                     they cannot be ranked and were dropped"
                );
            }
            let test = Dataset {
                triplets,
                users: train.users.clone(),
                items: train.items.clone(),
                r_min: 0.0,
                r_max: 1.0,
            };
            evaluate_ranking_with(|u, i| scorer.score(u, i), &train, &test, &cutoffs)?
        }
        other => {
            return Err(Error::Config(format!(
                "evaluate supports tasks rating and ranking, not {}",
                other.as_str()
            )))
        }
    };

    let report = EvalReport::from_runs(std::slice::from_ref(&run), &cutoffs)?;
    print!("{}", report.text_table());
    if let Some(path) = &args.json {
        write_json(path, &report)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let opts = DataOpts::from_strings(&args.delimiter, args.r_min, args.r_max, &args.dedup)?;
    let train = opts.load(&args.train)?;
    let predictor = RatingPredictor::from_file(load_model(&args.model)?, &train)?;
    let u = train
        .users
        .index_of(&args.user)
        .ok_or_else(|| Error::UnknownId {
            kind: "user",
            id: args.user.clone(),
        })?;
    let i = train
        .items
        .index_of(&args.item)
        .ok_or_else(|| Error::UnknownId {
            kind: "item",
            id: args.item.clone(),
        })?;
    println!("{}", predictor.predict(u as usize, i as usize));
    Ok(())
}

fn cmd_recommend(args: RecommendArgs) -> Result<()> {
    let opts = DataOpts::from_strings(&args.delimiter, 0.0, f64::INFINITY, &args.dedup)?;
    let train = binarize(&opts.load(&args.train)?);
    let file = load_model(&args.model)?;
    if file.mode != ModelMode::Ranking {
        return Err(Error::Config(format!(
            "recommend requires a ranking model, got mode {}",
            file.mode.as_str()
        )));
    }
    let model =
        file.into_ranking_model(train.users.clone(), train.items.clone(), train.user_items())?;
    let ranked = model.recommend_by_raw(&args.user, args.n, !args.include_seen)?;
    for (rank, (item, dist)) in ranked.iter().enumerate() {
        println!("{}\t{}\t{}\t{}", args.user, item, rank + 1, dist);
    }
    Ok(())
}

/// Everything a reproduce run needs.
struct RecipePlan {
    name: String,
    task: Task,
    data_opts: DataOpts,
    split: SplitSpec,
    cutoffs: Vec<usize>,
    rating: RatingConfig,
    ranking: RankingConfig,
    svd: SvdConfig,
    /// (label, metric key, threshold) checked as mean >= threshold,
    /// or mean <= threshold when `upper` is true.
    checks: Vec<Check>,
    with_rating_baseline: bool,
    with_ranking_baseline: bool,
}

struct Check {
    metric: &'static str,
    threshold: f64,
    upper: bool,
    against_baseline: bool,
}

fn ml100k_plan(seed: u64) -> Result<RecipePlan> {
    Ok(RecipePlan {
        name: "ml100k-rating".into(),
        task: Task::Rating,
        data_opts: DataOpts::from_strings("auto", 1.0, 5.0, "keep-last")?,
        split: SplitSpec {
            train_fraction: 0.9,
            seed,
            n_repeats: 5,
        },
        cutoffs: vec![5, 10],
        rating: RatingConfig {
            seed,
            ..RatingConfig::default()
        },
        ranking: RankingConfig::default(),
        svd: SvdConfig {
            seed,
            ..SvdConfig::default()
        },
        checks: vec![
            Check {
                metric: "rmse",
                threshold: 0.905,
                upper: true,
                against_baseline: false,
            },
            Check {
                metric: "mae",
                threshold: 0.710,
                upper: true,
                against_baseline: false,
            },
            Check {
                metric: "rmse",
                threshold: 0.010,
                upper: false,
                against_baseline: true,
            },
        ],
        with_rating_baseline: true,
        with_ranking_baseline: false,
    })
}

fn filmtrust_plan(seed: u64) -> Result<RecipePlan> {
    Ok(RecipePlan {
        name: "filmtrust-ranking".into(),
        task: Task::Ranking,
        data_opts: DataOpts::from_strings("auto", 0.0, 5.0, "keep-last")?,
        split: SplitSpec {
            train_fraction: 0.8,
            seed,
            n_repeats: 5,
        },
        cutoffs: vec![5, 10],
        rating: RatingConfig::default(),
        ranking: RankingConfig {
            seed,
            ..RankingConfig::default()
        },
        svd: SvdConfig::default(),
        checks: vec![
            Check {
                metric: "ndcg",
                threshold: 0.680,
                upper: false,
                against_baseline: false,
            },
            Check {
                metric: "precision@10",
                threshold: 0.350,
                upper: false,
                against_baseline: false,
            },
            Check {
                metric: "recall@10",
                threshold: 0.640,
                upper: false,
                against_baseline: false,
            },
            Check {
                metric: "ndcg",
                threshold: 0.030,
                upper: false,
                against_baseline: true,
            },
        ],
        with_rating_baseline: false,
        with_ranking_baseline: true,
    })
}

fn custom_plan(rc: &RunConfig, seed: u64) -> Result<RecipePlan> {
    let task = Task::parse(rc.require("task")?)?;
    if task != Task::Rating && task != Task::Ranking {
        return Err(Error::Config(
            "custom recipes support tasks rating and ranking".into(),
        ));
    }
    let split = SplitSpec {
        train_fraction: rc.parsed("train_fraction")?.unwrap_or(0.8),
        seed,
        n_repeats: rc.parsed("n_repeats")?.unwrap_or(5),
    };
    split.validate()?;
    let cutoffs = parse_cutoffs(rc.get("cutoffs").unwrap_or("5,10"))?;
    Ok(RecipePlan {
        name: "custom".into(),
        task,
        data_opts: DataOpts::from_config(rc)?,
        split,
        cutoffs,
        rating: if task == Task::Rating {
            RatingConfig {
                seed,
                ..rating_config_from(rc)?
            }
        } else {
            RatingConfig::default()
        },
        ranking: if task == Task::Ranking {
            RankingConfig {
                seed,
                ..ranking_config_from(rc)?
            }
        } else {
            RankingConfig::default()
        },
        svd: SvdConfig::default(),
        checks: Vec::new(),
        with_rating_baseline: false,
        with_ranking_baseline: false,
    })
}

fn print_checks(plan: &RecipePlan, model: &EvalReport, baseline: Option<&EvalReport>) {
    for check in &plan.checks {
        let Some(mean) = model.mean(check.metric) else {
            continue;
        };
        let (value, wording) = if check.against_baseline {
            let Some(base) = baseline.and_then(|b| b.mean(check.metric)) else {
                continue;
            };
            // gap is "better than baseline by"; for error metrics lower is
            // better, so the sign flips
            let gap = if plan.task == Task::Rating {
                base - mean
            } else {
                mean - base
            };
            (gap, format!("{}_gap", check.metric))
        } else {
            (mean, check.metric.to_owned())
        };
        let ok = if check.against_baseline {
            value >= check.threshold
        } else if check.upper {
            value <= check.threshold
        } else {
            value >= check.threshold
        };
        let rel = if check.against_baseline || !check.upper {
            ">="
        } else {
            "<="
        };
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict} {wording} {value:.4} {rel} {}", check.threshold);
    }
}

fn cmd_reproduce(args: ReproduceArgs) -> Result<()> {
    let mut rc = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    rc.set_opt("recipe", &args.recipe);
    rc.set_opt("data", &args.data.as_ref().map(|p| p.display().to_string()));
    rc.set_opt("seed", &args.seed);
    rc.set_opt("json", &args.json.as_ref().map(|p| p.display().to_string()));

    let recipe = rc.require("recipe")?.to_owned();
    let seed: u64 = rc.parsed("seed")?.unwrap_or(42);
    let plan = match recipe.as_str() {
        "ml100k-rating" => {
            rc.check_allowed(&["recipe", "data", "seed", "json"])?;
            ml100k_plan(seed)?
        }
        "filmtrust-ranking" => {
            rc.check_allowed(&["recipe", "data", "seed", "json"])?;
            filmtrust_plan(seed)?
        }
        "custom" => {
            let mut allowed: Vec<&str> = REPRODUCE_COMMON_KEYS.to_vec();
            let task = Task::parse(rc.require("task")?)?;
            allowed.extend_from_slice(task.hyper_keys());
            rc.check_allowed(&allowed)?;
            custom_plan(&rc, seed)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown recipe {other:?} (expected ml100k-rating, filmtrust-ranking, or custom)"
            )))
        }
    };
    let data_path = PathBuf::from(rc.require("data")?);

    let mut pairs = BTreeMap::new();
    pairs.insert("recipe", plan.name.clone());
    pairs.insert("data", data_path.display().to_string());
    pairs.insert("seed", seed.to_string());
    pairs.insert("task", plan.task.as_str().to_owned());
    pairs.insert("train_fraction", plan.split.train_fraction.to_string());
    pairs.insert("n_repeats", plan.split.n_repeats.to_string());
    plan.data_opts.echo_into(&mut pairs);
    match plan.task {
        Task::Rating => echo_rating_config(&plan.rating, &mut pairs),
        Task::Ranking => {
            echo_ranking_config(&plan.ranking, &mut pairs);
            pairs.insert(
                "cutoffs",
                plan.cutoffs
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        _ => unreachable!("plans are rating or ranking"),
    }
    print_config(&pairs);

    let full = plan.data_opts.load(&data_path)?;
    eprintln!(
        "loaded {} interactions, {} users, {} items",
        full.len(),
        full.n_users(),
        full.n_items()
    );

    let started = Instant::now();
    let mut model_runs = Vec::new();
    let mut baseline_runs = Vec::new();
    match plan.task {
        Task::Rating => {
            for r in 0..plan.split.n_repeats {
                let t = Instant::now();
                model_runs.push(run_rating_split(&full, &plan.rating, &plan.split, r)?);
                eprintln!("split {r}: model done in {:.1}s", t.elapsed().as_secs_f64());
                if plan.with_rating_baseline {
                    let t = Instant::now();
                    baseline_runs.push(run_svd_split(&full, &plan.svd, &plan.split, r)?);
                    eprintln!(
                        "split {r}: baseline done in {:.1}s",
                        t.elapsed().as_secs_f64()
                    );
                }
            }
        }
        Task::Ranking => {
            let full = binarize(&full);
            for r in 0..plan.split.n_repeats {
                let t = Instant::now();
                model_runs.push(run_ranking_split(
                    &full,
                    &plan.ranking,
                    &plan.split,
                    r,
                    &plan.cutoffs,
                )?);
                eprintln!("split {r}: model done in {:.1}s", t.elapsed().as_secs_f64());
                if plan.with_ranking_baseline {
                    baseline_runs.push(run_pop_split(&full, &plan.split, r, &plan.cutoffs)?);
                }
            }
        }
        _ => unreachable!(),
    }
    eprintln!("all splits done in {:.1}s", started.elapsed().as_secs_f64());

    let report = EvalReport::from_runs(&model_runs, &plan.cutoffs)?;
    println!("model ({} splits):", report.n_repeats);
    print!("{}", report.text_table());
    let baseline = if baseline_runs.is_empty() {
        None
    } else {
        let b = EvalReport::from_runs(&baseline_runs, &plan.cutoffs)?;
        println!("baseline:");
        print!("{}", b.text_table());
        Some(b)
    };
    print_checks(&plan, &report, baseline.as_ref());
    if let Some(path) = &args.json {
        write_json(path, &report)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

/// Run one parsed command.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Split(args) => cmd_split(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Recommend(args) => cmd_recommend(args),
        Command::Reproduce(args) => cmd_reproduce(args),
    }
}

/// Parse the process arguments, run, and map errors to exit codes:
/// configuration/usage problems exit 2, runtime failures exit 1.
pub fn main_entry() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => std::process::ExitCode::from(2),
                _ => std::process::ExitCode::from(1),
            }
        }
    }
}
