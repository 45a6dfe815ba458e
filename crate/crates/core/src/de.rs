//! Differential evolution (DE/rand-to-best/1/bin) for real-valued vectors,
//! used to tune the weights and activation arguments of a fixed tree.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tree::{NeuralTree, TreeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub pop_size: usize,
    /// Crossover rate.
    pub cr: f64,
    /// Mutation factor.
    pub f: f64,
    pub max_generations: Option<usize>,
    /// Hard cap on objective calls, initial population included.
    pub max_evaluations: Option<u64>,
    /// Stop once the best fitness is at or below this value.
    pub target: Option<f64>,
    /// Per-dimension search box; its length fixes the dimension.
    pub bounds: Vec<(f64, f64)>,
}

impl DeConfig {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        DeConfig {
            pop_size: 50,
            cr: 0.9,
            f: 0.7,
            max_generations: None,
            max_evaluations: Some(50_000),
            target: None,
            bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 4 {
            return Err(Error::Config(format!("DE population {} below 4", self.pop_size)));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return Err(Error::Config(format!("crossover rate {} outside [0, 1]", self.cr)));
        }
        if !(0.0..=2.0).contains(&self.f) {
            return Err(Error::Config(format!("mutation factor {} outside [0, 2]", self.f)));
        }
        if self.bounds.is_empty() {
            return Err(Error::Config("DE needs at least one dimension".into()));
        }
        if let Some((j, _)) = self
            .bounds
            .iter()
            .enumerate()
            .find(|(_, (lo, hi))| lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::Config(format!("bounds of dimension {j} are empty or infinite")));
        }
        if self.max_generations.is_none() && self.max_evaluations.is_none() && self.target.is_none() {
            return Err(Error::Config("DE has no stopping criterion".into()));
        }
        Ok(())
    }
}

/// Current DE population with its fitness values.
#[derive(Debug, Clone, PartialEq)]
pub struct DeState {
    pub vectors: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub best_index: usize,
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

fn clamp(v: f64, (lo, hi): (f64, f64)) -> f64 {
    v.clamp(lo, hi)
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

impl DeState {
    /// Initial population: `seeds` (clamped to the box) come first, the rest
    /// is uniform within the bounds. Costs `pop_size` evaluations.
    pub fn init<F, R>(objective: &mut F, cfg: &DeConfig, seeds: &[Vec<f64>], rng: &mut R) -> Result<Self>
    where
        F: FnMut(&[f64]) -> f64,
        R: Rng + ?Sized,
    {
        cfg.validate()?;
        if seeds.len() > cfg.pop_size {
            return Err(Error::InvalidArgument(format!(
                "{} seed vectors exceed DE population {}",
                seeds.len(),
                cfg.pop_size
            )));
        }
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(cfg.pop_size);
        for s in seeds {
            if s.len() != cfg.dim() {
                return Err(Error::ParamLength {
                    expected: cfg.dim(),
                    got: s.len(),
                });
            }
            vectors.push(s.iter().zip(&cfg.bounds).map(|(v, b)| clamp(*v, *b)).collect());
        }
        while vectors.len() < cfg.pop_size {
            vectors.push(cfg.bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect());
        }
        let fitness: Vec<f64> = vectors.iter().map(|v| sanitize(objective(v))).collect();
        Ok(DeState {
            best_index: argmin(&fitness),
            vectors,
            fitness,
        })
    }

    pub fn best(&self) -> (&[f64], f64) {
        (&self.vectors[self.best_index], self.fitness[self.best_index])
    }

    /// One synchronous generation: all trials are built from the current
    /// population, then each replaces its target on strict improvement.
    pub fn step<F, R>(&mut self, objective: &mut F, cfg: &DeConfig, rng: &mut R)
    where
        F: FnMut(&[f64]) -> f64,
        R: Rng + ?Sized,
    {
        let trials: Vec<Vec<f64>> = (0..self.vectors.len()).map(|i| de_trial(self, i, cfg, rng)).collect();
        for (i, trial) in trials.into_iter().enumerate() {
            let f = sanitize(objective(&trial));
            if de_select(self.fitness[i], f) {
                self.vectors[i] = trial;
                self.fitness[i] = f;
            }
        }
        self.best_index = argmin(&self.fitness);
    }
}

/// Trial vector for target `i`:
/// `v = x_r0 + F (x_best - x_r0) + F (x_r1 - x_r2)` with binomial crossover
/// against `x_i` (one forced index) and clamping to the box.
pub fn de_trial<R: Rng + ?Sized>(state: &DeState, i: usize, cfg: &DeConfig, rng: &mut R) -> Vec<f64> {
    let np = state.vectors.len();
    let mut pick = |taken: &[usize]| loop {
        let r = rng.random_range(0..np);
        if r != i && !taken.contains(&r) {
            return r;
        }
    };
    let r0 = pick(&[]);
    let r1 = pick(&[r0]);
    let r2 = pick(&[r0, r1]);
    let n = cfg.dim();
    let forced = rng.random_range(0..n);
    let (x0, x1, x2) = (&state.vectors[r0], &state.vectors[r1], &state.vectors[r2]);
    let best = &state.vectors[state.best_index];
    let target = &state.vectors[i];
    (0..n)
        .map(|j| {
            let u: f64 = rng.random();
            let v = if u < cfg.cr || j == forced {
                x0[j] + cfg.f * (best[j] - x0[j]) + cfg.f * (x1[j] - x2[j])
            } else {
                target[j]
            };
            clamp(v, cfg.bounds[j])
        })
        .collect()
}

/// Greedy selection: the trial wins only on strict improvement.
pub fn de_select(current_fitness: f64, trial_fitness: f64) -> bool {
    trial_fitness < current_fitness
}

/// Best fitness after one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeTraceRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeOutcome {
    pub best: Vec<f64>,
    pub fitness: f64,
    pub evaluations: u64,
    pub generations: usize,
    pub trace: Vec<DeTraceRecord>,
}

/// Minimizes `objective` within `cfg.bounds`.
pub fn optimize<F, R>(objective: F, cfg: &DeConfig, rng: &mut R) -> Result<DeOutcome>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    optimize_seeded(objective, cfg, &[], rng)
}

/// As [`optimize`], with `seeds` placed in the initial population.
pub fn optimize_seeded<F, R>(mut objective: F, cfg: &DeConfig, seeds: &[Vec<f64>], rng: &mut R) -> Result<DeOutcome>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut state = DeState::init(&mut objective, cfg, seeds, rng)?;
    let np = cfg.pop_size as u64;
    let mut evaluations = np;
    let mut generations = 0;
    let mut trace = Vec::new();
    let record = |state: &DeState, generation: usize, evaluations: u64| DeTraceRecord {
        generation,
        best_fitness: state.best().1,
        mean_fitness: state.fitness.iter().sum::<f64>() / state.fitness.len() as f64,
        evaluations,
    };
    trace.push(record(&state, 0, evaluations));
    loop {
        if cfg.max_generations.is_some_and(|g| generations >= g)
            || cfg.max_evaluations.is_some_and(|m| evaluations + np > m)
            || cfg.target.is_some_and(|t| state.best().1 <= t)
        {
            break;
        }
        state.step(&mut objective, cfg, rng);
        generations += 1;
        evaluations += np;
        trace.push(record(&state, generations, evaluations));
    }
    let (best, fitness) = state.best();
    Ok(DeOutcome {
        best: best.to_vec(),
        fitness,
        evaluations,
        generations,
        trace,
    })
}

/// Result of tuning one tree's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub tree: NeuralTree,
    pub mse: f64,
    pub evaluations: u64,
    pub trace: Vec<DeTraceRecord>,
}

/// DE settings for tuning: the search box comes from the tree's parameter
/// layout and the tree configuration.
pub fn tuning_config(
    tree: &NeuralTree,
    tree_cfg: &TreeConfig,
    pop_size: usize,
    max_evaluations: u64,
) -> DeConfig {
    DeConfig {
        pop_size,
        max_evaluations: Some(max_evaluations),
        ..DeConfig::new(tree.encode_params().bounds(tree_cfg))
    }
}

/// Tunes the parameters of `tree` on `train` by minimizing MSE. The tree's
/// current parameters seed the DE population, so the result never has a
/// higher training error than the input.
pub fn tune_tree<R: Rng + ?Sized>(
    tree: &NeuralTree,
    train: &Dataset,
    cfg: &DeConfig,
    rng: &mut R,
) -> Result<TuneOutcome> {
    let start = tree.encode_params();
    if cfg.dim() != start.len() {
        return Err(Error::ParamLength {
            expected: start.len(),
            got: cfg.dim(),
        });
    }
    // fail early on a feature mismatch rather than inside the objective
    tree.mse_on(train)?;
    let mut work = tree.clone();
    let objective = |v: &[f64]| {
        work.set_params(v).expect("dimension checked");
        work.mse_on(train).unwrap_or(f64::INFINITY)
    };
    let out = optimize_seeded(objective, cfg, &[start.values], rng)?;
    Ok(TuneOutcome {
        tree: tree.decode_params(&out.best)?,
        mse: out.fitness,
        evaluations: out.evaluations,
        trace: out.trace,
    })
}
