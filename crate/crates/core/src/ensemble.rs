//! Weighted ensembles of trees drawn from a final MOGP population, and
//! feature-usage reports over a bag.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{descale_output, Dataset, TaskKind};
use crate::de::{optimize_seeded, DeConfig};
use crate::error::{Error, Result};
use crate::metrics::classify;
use crate::mogp::RankedPopulation;
use crate::tree::{NeuralTree, Signature};

/// Selected models with normalized combination weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleBag {
    pub models: Vec<NeuralTree>,
    pub weights: Vec<f64>,
    pub task_kind: TaskKind,
    pub diversity: f64,
}

/// Number of structurally distinct models.
pub fn distinct_count(models: &[NeuralTree]) -> usize {
    models.iter().map(NeuralTree::signature).collect::<BTreeSet<Signature>>().len()
}

/// Fraction of structurally distinct models, `distinct / size`.
pub fn diversity(models: &[NeuralTree]) -> f64 {
    if models.is_empty() {
        return 0.0;
    }
    distinct_count(models) as f64 / models.len() as f64
}

/// Nonnegative weights scaled to sum to one; an all-zero (or invalid)
/// vector becomes uniform.
pub fn normalize_weights(raw: &[f64]) -> Vec<f64> {
    let clean: Vec<f64> = raw.iter().map(|w| if w.is_finite() && *w > 0.0 { *w } else { 0.0 }).collect();
    let sum: f64 = clean.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        clean.iter().map(|w| w / sum).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}

impl EnsembleBag {
    /// Bag with uniform weights.
    pub fn new(models: Vec<NeuralTree>, task_kind: TaskKind) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Empty("ensemble bag".into()));
        }
        let n = models.len();
        Ok(EnsembleBag {
            diversity: diversity(&models),
            weights: vec![1.0 / n as f64; n],
            models,
            task_kind,
        })
    }

    pub fn with_weights(mut self, raw: &[f64]) -> Result<Self> {
        if raw.len() != self.models.len() {
            return Err(Error::LengthMismatch {
                left: self.models.len(),
                right: raw.len(),
            });
        }
        self.weights = normalize_weights(raw);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Raw (scaled) outputs, one row per model.
    pub fn member_outputs(&self, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
        self.models.iter().map(|m| m.predict(ds)).collect()
    }

    /// Combined prediction for every row: a class id for classification,
    /// a descaled value otherwise.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let outputs = self.member_outputs(ds)?;
        let classes = ds.n_classes().max(2);
        Ok((0..ds.len())
            .map(|i| {
                let column: Vec<f64> = outputs.iter().map(|o| o[i]).collect();
                if self.task_kind.is_classification() {
                    vote_outputs(&self.weights, &column, classes) as f64
                } else {
                    descale_output(mean_outputs(&self.weights, &column), ds)
                }
            })
            .collect())
    }

    /// Weighted mean of the raw (scaled) member outputs for every row.
    pub fn scores(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let outputs = self.member_outputs(ds)?;
        Ok((0..ds.len())
            .map(|i| self.weights.iter().zip(&outputs).map(|(w, o)| w * o[i]).sum())
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let bag: EnsembleBag = serde_json::from_str(s)?;
        if bag.models.is_empty() || bag.models.len() != bag.weights.len() {
            return Err(Error::InvalidArgument("bag needs one weight per model".into()));
        }
        if bag.weights.iter().any(|w| w.is_nan() || *w < 0.0) || (bag.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("bag weights must be nonnegative and sum to 1".into()));
        }
        Ok(bag)
    }
}

/// Weighted majority vote over hard class predictions; ties go to the
/// lowest class id.
pub fn vote(bag: &EnsembleBag, row: &[f64], classes: usize) -> Result<usize> {
    let outputs: Vec<f64> = bag.models.iter().map(|m| m.eval(row)).collect::<Result<_>>()?;
    Ok(vote_outputs(&bag.weights, &outputs, classes))
}

fn vote_outputs(weights: &[f64], outputs: &[f64], classes: usize) -> usize {
    let mut mass = vec![0.0; classes.max(2)];
    for (w, o) in weights.iter().zip(outputs) {
        mass[classify(&[*o])] += w;
    }
    argmax_lowest(&mass)
}

fn argmax_lowest(mass: &[f64]) -> usize {
    let mut best = 0;
    for (c, m) in mass.iter().enumerate() {
        if *m > mass[best] {
            best = c;
        }
    }
    best
}

fn mean_outputs(weights: &[f64], outputs: &[f64]) -> f64 {
    weights.iter().zip(outputs).map(|(w, o)| w * o).sum()
}

/// Weighted mean of the descaled member outputs for one row.
pub fn mean_combine(bag: &EnsembleBag, row: &[f64], ds: &Dataset) -> Result<f64> {
    let outputs: Vec<f64> = bag.models.iter().map(|m| m.eval(row)).collect::<Result<_>>()?;
    Ok(bag
        .weights
        .iter()
        .zip(&outputs)
        .map(|(w, o)| w * descale_output(*o, ds))
        .sum())
}

/// Picks `m` candidates: fronts in rank order, each by ascending error,
/// taking members whose signature is new; remaining slots are filled with
/// the lowest-error leftovers.
pub fn select_candidates(pop: &RankedPopulation, m: usize) -> Result<Vec<NeuralTree>> {
    if m == 0 || m > pop.len() {
        return Err(Error::InvalidArgument(format!(
            "bag size {m} must be in 1..={}",
            pop.len()
        )));
    }
    let by_error = |idx: &mut Vec<usize>| {
        idx.sort_by(|&a, &b| {
            pop.members[a]
                .objectives
                .error
                .total_cmp(&pop.members[b].objectives.error)
                .then(a.cmp(&b))
        })
    };
    let mut seen = BTreeSet::new();
    let mut chosen = Vec::with_capacity(m);
    let mut leftovers = Vec::new();
    for mut front in pop.fronts() {
        by_error(&mut front);
        for i in front {
            if chosen.len() < m && seen.insert(pop.members[i].tree.signature()) {
                chosen.push(i);
            } else {
                leftovers.push(i);
            }
        }
    }
    by_error(&mut leftovers);
    chosen.extend(leftovers.into_iter().take(m - chosen.len()));
    Ok(chosen.into_iter().map(|i| pop.members[i].tree.clone()).collect())
}

/// Weight-fitting settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightFitConfig {
    pub pop_size: usize,
    pub max_evaluations: u64,
    pub cr: f64,
    pub f: f64,
}

impl Default for WeightFitConfig {
    fn default() -> Self {
        WeightFitConfig {
            pop_size: 100,
            max_evaluations: 300_000,
            cr: 0.9,
            f: 0.7,
        }
    }
}

/// Errors on the fitting split before and after weight search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub member_errors: Vec<f64>,
    pub best_member_error: f64,
    pub ensemble_error: f64,
    pub evaluations: u64,
}

/// Member predictions on the fitting split, row-major (`row * m + t`):
/// hard class votes for classification, raw outputs otherwise. Rows
/// sharing a vote pattern and label are stored once with a count.
struct FitTable {
    m: usize,
    classes: usize,
    classification: bool,
    samples: usize,
    targets: Vec<f64>,
    counts: Vec<f64>,
    cells: Vec<f64>,
}

impl FitTable {
    fn new(outputs: &[Vec<f64>], ds: &Dataset, task: TaskKind) -> Self {
        let m = outputs.len();
        let classification = task.is_classification();
        let mut table = FitTable {
            m,
            classes: ds.n_classes().max(2),
            classification,
            samples: ds.len(),
            targets: Vec::new(),
            counts: Vec::new(),
            cells: Vec::new(),
        };
        let mut seen: BTreeMap<(Vec<usize>, usize), usize> = BTreeMap::new();
        for (i, &y) in ds.targets().iter().enumerate() {
            if classification {
                let votes: Vec<usize> = outputs.iter().map(|o| classify(&[o[i]])).collect();
                let key = (votes, y as usize);
                if let Some(&k) = seen.get(&key) {
                    table.counts[k] += 1.0;
                    continue;
                }
                table.cells.extend(key.0.iter().map(|v| *v as f64));
                seen.insert(key, table.targets.len());
            } else {
                table.cells.extend(outputs.iter().map(|o| o[i]));
            }
            table.targets.push(y);
            table.counts.push(1.0);
        }
        table
    }

    /// Misclassification rate of the weighted vote, or MSE of the weighted
    /// mean against the scaled targets.
    fn error(&self, weights: &[f64], mass: &mut Vec<f64>) -> f64 {
        let mut total = 0.0;
        let rows = self.cells.chunks_exact(self.m).zip(&self.targets).zip(&self.counts);
        for ((row, &y), &count) in rows {
            total += if self.classification {
                mass.clear();
                mass.resize(self.classes, 0.0);
                for (w, c) in weights.iter().zip(row) {
                    mass[*c as usize] += w;
                }
                count * f64::from(argmax_lowest(mass) != y as usize)
            } else {
                let e = y - mean_outputs(weights, row);
                e * e
            };
        }
        total / self.samples as f64
    }
}

/// Fits the bag's weights on `fit` by DE over `[0, 1]^m` with post-hoc
/// normalization. The unit vectors and the uniform vector seed the search,
/// so the fitted error never exceeds the best member's.
pub fn fit_weights<R: Rng + ?Sized>(
    bag: &EnsembleBag,
    fit: &Dataset,
    cfg: &WeightFitConfig,
    rng: &mut R,
) -> Result<(EnsembleBag, FitReport)> {
    if fit.is_empty() {
        return Err(Error::Empty("ensemble fitting split".into()));
    }
    let m = bag.len();
    let table = FitTable::new(&bag.member_outputs(fit)?, fit, bag.task_kind);
    let mut mass = Vec::new();
    let member_errors: Vec<f64> = (0..m)
        .map(|t| {
            let mut e = vec![0.0; m];
            e[t] = 1.0;
            table.error(&e, &mut mass)
        })
        .collect();
    let best_member_error = member_errors.iter().copied().fold(f64::INFINITY, f64::min);
    if m == 1 {
        return Ok((
            bag.clone().with_weights(&[1.0])?,
            FitReport {
                ensemble_error: member_errors[0],
                member_errors,
                best_member_error,
                evaluations: 0,
            },
        ));
    }
    let mut seeds: Vec<Vec<f64>> = (0..m)
        .map(|t| {
            let mut e = vec![0.0; m];
            e[t] = 1.0;
            e
        })
        .collect();
    seeds.push(vec![1.0; m]);
    seeds.truncate(cfg.pop_size);
    let de_cfg = DeConfig {
        pop_size: cfg.pop_size,
        cr: cfg.cr,
        f: cfg.f,
        max_generations: None,
        max_evaluations: Some(cfg.max_evaluations),
        target: None,
        bounds: vec![(0.0, 1.0); m],
    };
    let mut buf = Vec::new();
    let objective = |raw: &[f64]| table.error(&normalize_weights(raw), &mut buf);
    let out = optimize_seeded(objective, &de_cfg, &seeds, rng)?;
    let fitted = bag.clone().with_weights(&out.best)?;
    let ensemble_error = table.error(&fitted.weights, &mut mass);
    Ok((
        fitted,
        FitReport {
            member_errors,
            best_member_error,
            ensemble_error,
            evaluations: out.evaluations,
        },
    ))
}

/// Multi-class ensemble: one binary bag per class (one-vs-rest targets);
/// the predicted class is the argmax of the per-class weighted mean output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEnsemble {
    pub bags: Vec<EnsembleBag>,
}

impl OneHotEnsemble {
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<usize>> {
        let per_class: Vec<Vec<f64>> = self
            .bags
            .iter()
            .map(|bag| {
                let outputs = bag.member_outputs(ds)?;
                Ok((0..ds.len())
                    .map(|i| mean_outputs(&bag.weights, &outputs.iter().map(|o| o[i]).collect::<Vec<_>>()))
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok((0..ds.len())
            .map(|i| classify(&per_class.iter().map(|c| c[i]).collect::<Vec<_>>()))
            .collect())
    }
}

/// Thresholds of the feature report, as fractions of the bag size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureThresholds {
    /// A feature used by at least `ceil(msf * m)` models is most frequent.
    pub msf: f64,
    /// A used feature in at most `floor(mif * m)` models is least frequent.
    pub mif: f64,
}

impl Default for FeatureThresholds {
    fn default() -> Self {
        FeatureThresholds { msf: 0.7, mif: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub tsf: usize,
    pub msf: Vec<usize>,
    pub mif: Vec<usize>,
    pub unused: Vec<usize>,
    /// Number of models using each feature, indexed by feature id.
    pub per_feature_counts: Vec<usize>,
}

/// Summary without the per-feature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub tsf: usize,
    pub msf: Vec<usize>,
    pub mif: Vec<usize>,
    pub unused: Vec<usize>,
}

pub fn feature_report(models: &[NeuralTree], n_features: usize, th: FeatureThresholds) -> FeatureReport {
    let mut counts = vec![0usize; n_features];
    for m in models {
        for f in m.used_features() {
            if f >= counts.len() {
                counts.resize(f + 1, 0);
            }
            counts[f] += 1;
        }
    }
    let size = models.len() as f64;
    let hi = (th.msf * size).ceil() as usize;
    let lo = (th.mif * size).floor() as usize;
    let ids = |pred: &dyn Fn(usize) -> bool| (0..counts.len()).filter(|&f| pred(counts[f])).collect::<Vec<_>>();
    FeatureReport {
        tsf: counts.iter().filter(|c| **c > 0).count(),
        msf: ids(&|c| c > 0 && c >= hi),
        mif: ids(&|c| c > 0 && c <= lo && c < hi),
        unused: ids(&|c| c == 0),
        per_feature_counts: counts,
    }
}

impl FeatureReport {
    pub fn summary(&self) -> FeatureSummary {
        FeatureSummary {
            tsf: self.tsf,
            msf: self.msf.clone(),
            mif: self.mif.clone(),
            unused: self.unused.clone(),
        }
    }

    /// `feature,count` table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("feature,count\n");
        for (f, c) in self.per_feature_counts.iter().enumerate() {
            s.push_str(&format!("{f},{c}\n"));
        }
        s
    }
}
