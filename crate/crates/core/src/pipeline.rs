//! End-to-end runs: repeated structure search and parameter tuning per
//! cross-validation fold, ensemble construction over the saved final
//! populations, and aggregate reports.
//!
//! A training run writes one directory:
//!
//! ```text
//! <out>/config.json             resolved RunConfig
//! <out>/split_plan.json         fold assignments
//! <out>/train_summary.json      per-fold EvalResults and budget accounting
//! <out>/fold_NN/eval.json       train and test EvalResult of the fold
//! <out>/fold_NN/model_C/        one directory per trained tree model
//!     generations.jsonl, de_trace.jsonl, population.json, best_model.json
//! ```
//!
//! `model_0` is the only model for regression, time series and binary
//! classification; multi-class tasks train one one-vs-rest model per class.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{self, descale_output, CsvSchema, Dataset, FoldPair, SplitPlan, TaskKind};
use crate::de::{tune_tree, DeConfig, DeTraceRecord};
use crate::ensemble::{self, EnsembleBag, FeatureReport, FeatureThresholds, FitReport, OneHotEnsemble, WeightFitConfig};
use crate::error::{Error, Result};
use crate::metrics::{classify, EvalResult};
use crate::mogp::{GenerationRecord, MemberRecord, Mogp, MogpConfig, ObjectiveMode, RankedPopulation};
use crate::rng::{self, labels};
use crate::tree::NeuralTree;

/// Cross-validation protocol, written `kfold:K`, `5x2` or `holdout:F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CvProtocol {
    Kfold(usize),
    FiveByTwo,
    /// Leading fraction of rows used for training.
    Holdout(f64),
}

impl fmt::Display for CvProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvProtocol::Kfold(k) => write!(f, "kfold:{k}"),
            CvProtocol::FiveByTwo => write!(f, "5x2"),
            CvProtocol::Holdout(p) => write!(f, "holdout:{p}"),
        }
    }
}

impl FromStr for CvProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid CV protocol `{s}` (expected kfold:K, 5x2 or holdout:F)"));
        let s = s.trim();
        if s == "5x2" {
            return Ok(CvProtocol::FiveByTwo);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let cv = match kind {
            "kfold" => CvProtocol::Kfold(arg.parse().map_err(|_| bad())?),
            "holdout" => CvProtocol::Holdout(arg.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        cv.validate()?;
        Ok(cv)
    }
}

impl TryFrom<String> for CvProtocol {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CvProtocol> for String {
    fn from(cv: CvProtocol) -> String {
        cv.to_string()
    }
}

impl CvProtocol {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CvProtocol::Kfold(k) if k < 2 => Err(Error::Config(format!("kfold needs k >= 2, got {k}"))),
            CvProtocol::Holdout(f) if !(f > 0.0 && f < 1.0) => {
                Err(Error::Config(format!("holdout fraction {f} outside (0, 1)")))
            }
            _ => Ok(()),
        }
    }
}

/// Every setting of a run. The JSON form mirrors the field names; missing
/// fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub task: TaskKind,
    /// Target column of a CSV dataset; `None` selects the last column.
    pub target_column: Option<usize>,
    pub has_header: bool,
    pub delimiter: char,
    pub ignore_columns: Vec<usize>,
    /// Column holding the series of a time-series dataset.
    pub series_column: usize,
    pub lags: usize,
    pub horizon: usize,
    pub cv: CvProtocol,
    /// Stratify k-fold splits by class for classification tasks.
    pub stratify: bool,
    pub seed: u64,
    pub out: PathBuf,
    /// General repetitions `i_g`.
    pub general_repetitions: usize,
    pub mogp: MogpConfig,
    /// Parameter-tuning iterations `i_p`; each tuning call may spend
    /// `de_pop_size * param_iterations` evaluations.
    pub param_iterations: usize,
    pub de_pop_size: usize,
    pub de_cr: f64,
    pub de_f: f64,
    /// Number of lowest-error first-front members tuned per repetition.
    pub tune_top_q: usize,
    pub bag_size: usize,
    pub ensemble: WeightFitConfig,
    pub feature_thresholds: FeatureThresholds,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            task: TaskKind::Regression,
            target_column: None,
            has_header: true,
            delimiter: ',',
            ignore_columns: Vec::new(),
            series_column: 0,
            lags: 4,
            horizon: 1,
            cv: CvProtocol::Kfold(10),
            stratify: true,
            seed: 0,
            out: PathBuf::from("runs/latest"),
            general_repetitions: 3,
            mogp: MogpConfig::default(),
            param_iterations: 1000,
            de_pop_size: 50,
            de_cr: 0.9,
            de_f: 0.7,
            tune_top_q: 1,
            bag_size: 10,
            ensemble: WeightFitConfig::default(),
            feature_thresholds: FeatureThresholds::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Objective evaluations of one model's training:
    /// `pop + i_g * [(pop + pool) * i_s + q * de_pop * i_p]`.
    pub fn evaluation_budget(&self) -> u64 {
        let pop = self.mogp.pop_size as u64;
        let pool = self.mogp.pool_size() as u64;
        let per_rep = (pop + pool) * self.mogp.generations as u64
            + self.tune_top_q as u64 * self.de_pop_size as u64 * self.param_iterations as u64;
        pop + self.general_repetitions as u64 * per_rep
    }

    pub fn validate(&self) -> Result<()> {
        self.mogp.validate()?;
        self.cv.validate()?;
        if self.de_pop_size < 4 {
            return Err(Error::Config(format!("de_pop_size {} below 4", self.de_pop_size)));
        }
        if self.param_iterations == 0 {
            return Err(Error::Config("param_iterations must be positive".into()));
        }
        if self.tune_top_q == 0 || self.tune_top_q > self.mogp.pop_size {
            return Err(Error::Config(format!("tune_top_q {} not in 1..={}", self.tune_top_q, self.mogp.pop_size)));
        }
        if self.bag_size == 0 || self.bag_size > self.mogp.pop_size {
            return Err(Error::Config(format!("bag_size {} not in 1..={}", self.bag_size, self.mogp.pop_size)));
        }
        if self.lags == 0 || self.horizon == 0 {
            return Err(Error::Config("lags and horizon must be positive".into()));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Config(format!("delimiter {:?} is not ASCII", self.delimiter)));
        }
        Ok(())
    }

    fn de_config(&self, tree: &NeuralTree) -> DeConfig {
        DeConfig {
            pop_size: self.de_pop_size,
            cr: self.de_cr,
            f: self.de_f,
            max_generations: None,
            max_evaluations: Some(self.de_pop_size as u64 * self.param_iterations as u64),
            target: None,
            bounds: tree.encode_params().bounds(&self.mogp.tree),
        }
    }
}

/// Loads the configured dataset unscaled.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset given".into()))?;
    if cfg.task == TaskKind::Timeseries {
        let series = data::load_series(path, cfg.series_column, cfg.has_header)?;
        return data::lag_embed(&series, cfg.lags, cfg.horizon);
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let delimiter = cfg.delimiter as u8;
    let target_column = match cfg.target_column {
        Some(c) => c,
        None => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .delimiter(delimiter)
                .from_reader(bytes.as_slice());
            let first = reader
                .records()
                .next()
                .ok_or_else(|| Error::Empty(path.display().to_string()))?
                .map_err(|e| Error::Csv {
                    row: 1,
                    message: e.to_string(),
                })?;
            first.len().saturating_sub(1)
        }
    };
    let mut schema = CsvSchema::new(target_column, cfg.task)
        .with_header(cfg.has_header)
        .with_delimiter(delimiter);
    schema.ignore_columns = cfg.ignore_columns.clone();
    data::parse_csv(&bytes, &schema)
}

/// Split plan of the configured protocol over `ds`.
pub fn make_split_plan(cfg: &RunConfig, ds: &Dataset) -> Result<SplitPlan> {
    let seed = rng::derive_seed(cfg.seed, labels::SPLITS, 0);
    match cfg.cv {
        CvProtocol::Kfold(k) if cfg.stratify && cfg.task.is_classification() => {
            SplitPlan::kfold_stratified(&ds.labels(), k, seed)
        }
        CvProtocol::Kfold(k) => SplitPlan::kfold(ds.len(), k, seed),
        CvProtocol::FiveByTwo => SplitPlan::five_by_two(ds.len(), seed),
        CvProtocol::Holdout(f) => SplitPlan::holdout(ds.len(), f),
    }
}

/// Worker cap from `NT_THREADS`, else the available parallelism.
pub fn thread_cap() -> Result<usize> {
    match std::env::var("NT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("NT_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs `f(0..n)` on at most `threads` workers; results keep index order.
pub fn parallel_map<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = threads.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                slots.lock().expect("no worker panicked")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|v| v.expect("every index processed"))
        .collect()
}

/// One DE trace line, tagged with the repetition that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTraceLine {
    pub repetition: usize,
    /// Position of the tuned member among the first-front candidates.
    pub candidate: usize,
    #[serde(flatten)]
    pub record: DeTraceRecord,
}

/// Outcome of training one tree model on one training split.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub population: RankedPopulation,
    pub generations: Vec<GenerationRecord>,
    pub de_trace: Vec<TuneTraceLine>,
    pub evaluations: u64,
}

impl ModelRun {
    /// Lowest-error first-front member.
    pub fn best(&self) -> &NeuralTree {
        &self.population.members[self.population.best_error_index()].tree
    }
}

/// Repeated structure search and parameter tuning on `train`, drawing
/// from the streams of `stream_index`.
pub fn train_model(train: &Dataset, cfg: &RunConfig, stream_index: u64) -> Result<ModelRun> {
    let mut srng = rng::indexed_stream(cfg.seed, labels::STRUCTURE, stream_index);
    let mut trng = rng::indexed_stream(cfg.seed, labels::TUNER, stream_index);
    let mut mogp = Mogp::init(train, cfg.mogp.clone(), &mut srng)?;
    let mut tune_evaluations = 0u64;
    let mut de_trace = Vec::new();
    for repetition in 0..cfg.general_repetitions {
        mogp.run(cfg.mogp.generations, &mut srng)?;
        let candidates: Vec<usize> = mogp
            .population()
            .front1_by_error()
            .into_iter()
            .take(cfg.tune_top_q)
            .collect();
        let mut tuned = Vec::with_capacity(candidates.len());
        for (candidate, &idx) in candidates.iter().enumerate() {
            let tree = &mogp.population().members[idx].tree;
            let out = tune_tree(tree, train, &cfg.de_config(tree), &mut trng)?;
            tune_evaluations += out.evaluations;
            de_trace.extend(out.trace.into_iter().map(|record| TuneTraceLine {
                repetition,
                candidate,
                record,
            }));
            tuned.push((idx, out.tree, out.mse));
        }
        for (idx, tree, mse) in tuned {
            mogp.reinject(idx, tree, mse);
        }
    }
    let evaluations = mogp.evaluations() + tune_evaluations;
    let budget = cfg.evaluation_budget();
    if evaluations > budget {
        return Err(Error::BudgetExceeded {
            used: evaluations,
            budget,
        });
    }
    Ok(ModelRun {
        generations: mogp.log().to_vec(),
        population: mogp.into_population(),
        de_trace,
        evaluations,
    })
}

/// Per-fold entry of a training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Objective evaluations of each model.
    pub evaluations: Vec<u64>,
    pub train: EvalResult,
    pub test: EvalResult,
    /// Size of the best tree of each model.
    pub tree_size: Vec<usize>,
    pub diversity_index: Vec<usize>,
    /// Distinct input features used by the best trees.
    pub features: Vec<usize>,
    /// Mean tree size of each final population.
    pub population_mean_size: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub task: TaskKind,
    pub cv: CvProtocol,
    pub seed: u64,
    pub mode: ObjectiveMode,
    pub models_per_fold: usize,
    pub evaluation_budget: u64,
    pub folds: Vec<FoldSummary>,
    pub mean_test_mse: f64,
    pub mean_test_rmse: f64,
    pub mean_test_accuracy: Option<f64>,
}

/// Model count per fold: one per class for multi-class tasks.
fn model_count(ds: &Dataset) -> usize {
    if ds.task.is_classification() && ds.n_classes() > 2 {
        ds.n_classes()
    } else {
        1
    }
}

fn model_train_set(train: &Dataset, models: usize, c: usize) -> Dataset {
    if models > 1 {
        train.one_vs_rest(c)
    } else {
        train.clone()
    }
}

fn stream_index(fold: usize, model: usize) -> u64 {
    ((fold as u64) << 16) | model as u64
}

/// Scores of each model on `ds` (outer: models).
fn evaluate(ds: &Dataset, scores: &[Vec<f64>]) -> Result<EvalResult> {
    if !ds.task.is_classification() {
        let d: Vec<f64> = ds.targets().iter().map(|t| descale_output(*t, ds)).collect();
        let y: Vec<f64> = scores[0].iter().map(|v| descale_output(*v, ds)).collect();
        return EvalResult::regression(&d, &y);
    }
    let actual = ds.labels();
    if scores.len() == 1 {
        let predicted: Vec<usize> = scores[0].iter().map(|v| classify(&[*v])).collect();
        return EvalResult::classification(ds.targets(), &scores[0], &actual, &predicted);
    }
    // one-hot targets against per-class scores
    let n = ds.len();
    let mut d = Vec::with_capacity(n * scores.len());
    let mut y = Vec::with_capacity(n * scores.len());
    let mut predicted = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = scores.iter().map(|s| s[i]).collect();
        for (c, v) in row.iter().enumerate() {
            d.push(f64::from(actual[i] == c));
            y.push(*v);
        }
        predicted.push(classify(&row));
    }
    EvalResult::classification(&d, &y, &actual, &predicted)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(path, s)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    write(path, s)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::artifact(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::artifact(path, format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn fold_dir(run: &Path, fold: usize) -> PathBuf {
    run.join(format!("fold_{fold:02}"))
}

pub fn model_dir(run: &Path, fold: usize, model: usize) -> PathBuf {
    fold_dir(run, fold).join(format!("model_{model}"))
}

fn train_fold(cfg: &RunConfig, ds: &Dataset, fold: usize, pair: &FoldPair) -> Result<FoldSummary> {
    let train = ds.subset(&pair.train);
    let test = ds.subset(&pair.test);
    let models = model_count(ds);
    let mut summary = FoldSummary {
        fold,
        train_samples: train.len(),
        test_samples: test.len(),
        evaluations: Vec::new(),
        train: EvalResult::regression(&[0.0], &[0.0])?,
        test: EvalResult::regression(&[0.0], &[0.0])?,
        tree_size: Vec::new(),
        diversity_index: Vec::new(),
        features: Vec::new(),
        population_mean_size: Vec::new(),
    };
    let (mut train_scores, mut test_scores) = (Vec::new(), Vec::new());
    for c in 0..models {
        let set = model_train_set(&train, models, c);
        let run = train_model(&set, cfg, stream_index(fold, c))?;
        let dir = model_dir(&cfg.out, fold, c);
        write_jsonl(&dir.join("generations.jsonl"), &run.generations)?;
        write_jsonl(&dir.join("de_trace.jsonl"), &run.de_trace)?;
        write_json(&dir.join("population.json"), &run.population.to_records())?;
        let best = run.best();
        write(&dir.join("best_model.json"), best.to_json()? + "\n")?;
        train_scores.push(best.predict(&train)?);
        test_scores.push(best.predict(&test)?);
        summary.evaluations.push(run.evaluations);
        summary.tree_size.push(best.size());
        summary.diversity_index.push(best.diversity_index());
        summary.features.push(best.used_features().len());
        let pop = &run.population;
        summary
            .population_mean_size
            .push(pop.members.iter().map(|m| m.tree.size() as f64).sum::<f64>() / pop.len() as f64);
    }
    summary.train = evaluate(&train, &train_scores)?;
    summary.test = evaluate(&test, &test_scores)?;
    write_json(&fold_dir(&cfg.out, fold).join("eval.json"), &summary)?;
    Ok(summary)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    s / n.max(1) as f64
}

/// Trains and evaluates every fold, writing the run directory `cfg.out`.
pub fn run_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let threads = thread_cap()?;
    let mut cfg = cfg.clone();
    if let Some(p) = &cfg.dataset {
        cfg.dataset = Some(fs::canonicalize(p).map_err(|e| Error::io(p, e))?);
    }
    let ds = data::scale(&load_dataset(&cfg)?);
    let plan = make_split_plan(&cfg, &ds)?;
    let pairs = plan.pairs();
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write_json(&cfg.out.join("config.json"), &cfg)?;
    write(&cfg.out.join("split_plan.json"), plan.to_json()? + "\n")?;

    let results = parallel_map(pairs.len(), threads, |f| train_fold(&cfg, &ds, f, &pairs[f]));
    let folds = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = TrainSummary {
        task: cfg.task,
        cv: cfg.cv,
        seed: cfg.seed,
        mode: cfg.mogp.mode,
        models_per_fold: model_count(&ds),
        evaluation_budget: cfg.evaluation_budget(),
        mean_test_mse: mean(folds.iter().map(|f| f.test.mse)),
        mean_test_rmse: mean(folds.iter().map(|f| f.test.rmse)),
        mean_test_accuracy: cfg
            .task
            .is_classification()
            .then(|| mean(folds.iter().filter_map(|f| f.test.accuracy))),
        folds,
    };
    write_json(&cfg.out.join("train_summary.json"), &summary)?;
    Ok(summary)
}

/// Reads the configuration stored in a run directory.
pub fn load_run_config(run: &Path) -> Result<RunConfig> {
    read_json(&run.join("config.json"))
}

/// Reloads the final population of one trained model, checking every tree.
pub fn load_population(run: &Path, cfg: &RunConfig, fold: usize, model: usize, n_features: usize) -> Result<RankedPopulation> {
    let path = model_dir(run, fold, model).join("population.json");
    if !path.exists() {
        return Err(Error::artifact(&path, "population dump missing"));
    }
    let records: Vec<MemberRecord> = read_json(&path)?;
    if records.is_empty() {
        return Err(Error::artifact(&path, "empty population"));
    }
    for (i, r) in records.iter().enumerate() {
        r.tree
            .validate(&cfg.mogp.tree, Some(n_features))
            .map_err(|e| Error::artifact(&path, format!("member {i}: {e}")))?;
    }
    Ok(RankedPopulation::from_records(records, cfg.mogp.mode))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFoldSummary {
    pub fold: usize,
    /// Structural diversity of each bag.
    pub bag_diversity: Vec<f64>,
    /// Structural diversity of each full final population.
    pub population_diversity: Vec<f64>,
    pub fit: Vec<FitReport>,
    /// Every bag fits at least as well as its best member.
    pub no_regression: bool,
    pub test: EvalResult,
    pub features: FeatureReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub bag_size: usize,
    /// Data used to fit the weights.
    pub weights_fitted_on: String,
    pub folds: Vec<EnsembleFoldSummary>,
    pub mean_test_rmse: f64,
    pub mean_test_accuracy: Option<f64>,
}

fn ensemble_fold(run: &Path, cfg: &RunConfig, ds: &Dataset, fold: usize, pair: &FoldPair, m: usize) -> Result<EnsembleFoldSummary> {
    let train = ds.subset(&pair.train);
    let test = ds.subset(&pair.test);
    let models = model_count(ds);
    let dir = fold_dir(run, fold).join("ensemble");
    let mut bags = Vec::with_capacity(models);
    let mut out = EnsembleFoldSummary {
        fold,
        bag_diversity: Vec::new(),
        population_diversity: Vec::new(),
        fit: Vec::new(),
        no_regression: true,
        test: EvalResult::regression(&[0.0], &[0.0])?,
        features: ensemble::feature_report(&[], ds.n_features(), cfg.feature_thresholds),
    };
    for c in 0..models {
        let pop = load_population(run, cfg, fold, c, ds.n_features())?;
        let all: Vec<NeuralTree> = pop.members.iter().map(|mm| mm.tree.clone()).collect();
        out.population_diversity.push(ensemble::diversity(&all));
        let task = if models > 1 { TaskKind::Classification } else { cfg.task };
        let bag = EnsembleBag::new(ensemble::select_candidates(&pop, m)?, task)?;
        let set = model_train_set(&train, models, c);
        let mut rng = rng::indexed_stream(cfg.seed, labels::ENSEMBLE, stream_index(fold, c));
        let (fitted, report) = ensemble::fit_weights(&bag, &set, &cfg.ensemble, &mut rng)?;
        out.no_regression &= report.ensemble_error <= report.best_member_error + 1e-12;
        out.bag_diversity.push(fitted.diversity);
        write(&dir.join(format!("bag_{c}.json")), fitted.to_json()? + "\n")?;
        out.fit.push(report);
        bags.push(fitted);
    }
    out.test = if !ds.task.is_classification() {
        let d: Vec<f64> = test.targets().iter().map(|t| descale_output(*t, &test)).collect();
        EvalResult::regression(&d, &bags[0].predict(&test)?)?
    } else if models == 1 {
        let predicted: Vec<usize> = bags[0].predict(&test)?.iter().map(|v| *v as usize).collect();
        let scores = bags[0].scores(&test)?;
        EvalResult::classification(test.targets(), &scores, &test.labels(), &predicted)?
    } else {
        let scores: Vec<Vec<f64>> = bags.iter().map(|b| b.scores(&test)).collect::<Result<_>>()?;
        let mut r = evaluate(&test, &scores)?;
        let predicted = OneHotEnsemble { bags: bags.clone() }.predict(&test)?;
        let actual = test.labels();
        r.accuracy = Some(actual.iter().zip(&predicted).filter(|(a, p)| a == p).count() as f64 / actual.len().max(1) as f64);
        r
    };
    let members: Vec<NeuralTree> = bags.iter().flat_map(|b| b.models.iter().cloned()).collect();
    out.features = ensemble::feature_report(&members, ds.n_features(), cfg.feature_thresholds);
    write(&dir.join("features.csv"), out.features.to_csv())?;
    write_json(&dir.join("features.json"), &out.features.summary())?;
    write_json(&dir.join("fit.json"), &out.fit)?;
    write_json(&dir.join("eval.json"), &out.test)?;
    Ok(out)
}

/// Builds, fits and evaluates a bag of `bag_size` models (default from the
/// run's configuration) for every fold of the run in `run`.
pub fn run_ensemble(run: &Path, bag_size: Option<usize>) -> Result<EnsembleSummary> {
    let cfg = load_run_config(run)?;
    let m = bag_size.unwrap_or(cfg.bag_size);
    if m == 0 || m > cfg.mogp.pop_size {
        return Err(Error::Config(format!("bag size {m} not in 1..={}", cfg.mogp.pop_size)));
    }
    let threads = thread_cap()?;
    let ds = data::scale(&load_dataset(&cfg)?);
    let plan_path = run.join("split_plan.json");
    let plan = SplitPlan::from_json(&fs::read_to_string(&plan_path).map_err(|e| Error::io(&plan_path, e))?)
        .map_err(|e| Error::artifact(&plan_path, e))?;
    if plan.n_samples() != ds.len() {
        return Err(Error::artifact(&plan_path, "split plan does not match the dataset"));
    }
    let pairs = plan.pairs();
    let results = parallel_map(pairs.len(), threads, |f| ensemble_fold(run, &cfg, &ds, f, &pairs[f], m));
    let folds = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = EnsembleSummary {
        bag_size: m,
        weights_fitted_on: "train".into(),
        mean_test_rmse: mean(folds.iter().map(|f| f.test.rmse)),
        mean_test_accuracy: cfg
            .task
            .is_classification()
            .then(|| mean(folds.iter().filter_map(|f| f.test.accuracy))),
        folds,
    };
    write_json(&run.join("ensemble_summary.json"), &summary)?;
    Ok(summary)
}

/// Row counts of the files written by [`run_report`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub summary_rows: usize,
    pub pareto_rows: usize,
    pub trajectory_rows: usize,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

/// Aggregates run directories into `summary.csv` (per fold, best and mean
/// rows), `pareto.csv` (error, size, diversity index of every final
/// population member) and `trajectories.csv` (per-generation logs tagged
/// by objective mode) inside `out`.
pub fn run_report(runs: &[PathBuf], out: &Path) -> Result<ReportSummary> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no run directories given".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let summary_path = out.join("summary.csv");
    let pareto_path = out.join("pareto.csv");
    let traj_path = out.join("trajectories.csv");
    let mut summary = csv::Writer::from_path(&summary_path).map_err(|e| csv_error(&summary_path, e))?;
    let mut pareto = csv::Writer::from_path(&pareto_path).map_err(|e| csv_error(&pareto_path, e))?;
    let mut traj = csv::Writer::from_path(&traj_path).map_err(|e| csv_error(&traj_path, e))?;
    let header = [
        "run",
        "row",
        "train_mse",
        "test_mse",
        "train_rmse",
        "test_rmse",
        "train_accuracy",
        "test_accuracy",
        "tree_size",
        "features",
        "diversity_index",
        "ensemble_test_rmse",
        "ensemble_test_accuracy",
        "ensemble_diversity",
    ];
    summary.write_record(header).map_err(|e| csv_error(&summary_path, e))?;
    pareto
        .write_record(["run", "fold", "model", "error", "size", "diversity_index", "rank"])
        .map_err(|e| csv_error(&pareto_path, e))?;
    traj.write_record([
        "run",
        "mode",
        "fold",
        "model",
        "generation",
        "min_error",
        "mean_error",
        "mean_size",
        "front1_size",
        "mean_diversity_index",
        "evaluations",
    ])
    .map_err(|e| csv_error(&traj_path, e))?;
    let mut counts = ReportSummary {
        summary_rows: 0,
        pareto_rows: 0,
        trajectory_rows: 0,
    };
    for run in runs {
        let name = run.display().to_string();
        let cfg = load_run_config(run)?;
        let train: TrainSummary = read_json(&run.join("train_summary.json"))?;
        let ens_path = run.join("ensemble_summary.json");
        let ens: Option<EnsembleSummary> = if ens_path.exists() { Some(read_json(&ens_path)?) } else { None };
        let mode = match train.mode {
            ObjectiveMode::Multi => "multi",
            ObjectiveMode::Single => "single",
        };
        let mut rows: Vec<[f64; 12]> = Vec::new();
        for f in &train.folds {
            let e = ens.as_ref().and_then(|s| s.folds.iter().find(|x| x.fold == f.fold));
            let nan = f64::NAN;
            rows.push([
                f.train.mse,
                f.test.mse,
                f.train.rmse,
                f.test.rmse,
                f.train.accuracy.unwrap_or(nan),
                f.test.accuracy.unwrap_or(nan),
                mean(f.tree_size.iter().map(|v| *v as f64)),
                mean(f.features.iter().map(|v| *v as f64)),
                mean(f.diversity_index.iter().map(|v| *v as f64)),
                e.map_or(nan, |e| e.test.rmse),
                e.and_then(|e| e.test.accuracy).unwrap_or(nan),
                e.map_or(nan, |e| mean(e.bag_diversity.iter().copied())),
            ]);
            for c in 0..train.models_per_fold {
                let dir = model_dir(run, f.fold, c);
                let path = dir.join("population.json");
                let records: Vec<MemberRecord> = read_json(&path)?;
                for r in &records {
                    pareto
                        .write_record([
                            name.clone(),
                            f.fold.to_string(),
                            c.to_string(),
                            r.objectives.error.to_string(),
                            r.objectives.size.to_string(),
                            r.objectives.diversity_index().to_string(),
                            r.rank.to_string(),
                        ])
                        .map_err(|e| csv_error(&pareto_path, e))?;
                    counts.pareto_rows += 1;
                }
                let gens: Vec<GenerationRecord> = read_jsonl(&dir.join("generations.jsonl"))?;
                for g in gens {
                    traj.write_record([
                        name.clone(),
                        mode.to_string(),
                        f.fold.to_string(),
                        c.to_string(),
                        g.generation.to_string(),
                        g.min_error.to_string(),
                        g.mean_error.to_string(),
                        g.mean_size.to_string(),
                        g.front1_size.to_string(),
                        g.mean_diversity_index.to_string(),
                        g.evaluations.to_string(),
                    ])
                    .map_err(|e| csv_error(&traj_path, e))?;
                    counts.trajectory_rows += 1;
                }
            }
        }
        // best fold by test accuracy for classification, test RMSE otherwise
        let classification = cfg.task.is_classification();
        let best = (0..rows.len())
            .min_by(|&a, &b| {
                let key = |r: &[f64; 12]| if classification { -r[5] } else { r[3] };
                key(&rows[a]).total_cmp(&key(&rows[b]))
            })
            .ok_or_else(|| Error::artifact(run.join("train_summary.json"), "no folds"))?;
        let means: [f64; 12] = std::array::from_fn(|j| {
            let vals: Vec<f64> = rows.iter().map(|r| r[j]).filter(|v| !v.is_nan()).collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                mean(vals.into_iter())
            }
        });
        let labelled: Vec<(String, [f64; 12])> = train
            .folds
            .iter()
            .zip(&rows)
            .map(|(f, r)| (format!("fold_{:02}", f.fold), *r))
            .chain([("best".to_string(), rows[best]), ("mean".to_string(), means)])
            .collect();
        for (label, r) in labelled {
            let mut rec = vec![name.clone(), label];
            rec.extend(r.iter().map(|v| opt((!v.is_nan()).then_some(*v))));
            summary.write_record(&rec).map_err(|e| csv_error(&summary_path, e))?;
            counts.summary_rows += 1;
        }
    }
    summary.flush().map_err(|e| Error::io(&summary_path, e))?;
    pareto.flush().map_err(|e| Error::io(&pareto_path, e))?;
    traj.flush().map_err(|e| Error::io(&traj_path, e))?;
    Ok(counts)
}

/// Writes `n` Mackey-Glass samples as a one-column CSV with a `value`
/// header.
pub fn gen_mackey_glass(path: &Path, n: usize, seed: u64) -> Result<()> {
    let mut s = String::from("value\n");
    for v in data::mackey_glass(n, seed) {
        s.push_str(&format!("{v}\n"));
    }
    write(path, s)
}
