//! NSGA-II based multiobjective genetic programming over neural trees.
//!
//! Objectives are approximation error (MSE), tree size and diversity index,
//! all stored in minimization orientation (the diversity index is negated).

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tree::{
    random_computational, random_leaf, random_subtree, random_tree, repair_depth, NeuralTree, TreeConfig,
    TreeNode,
};

/// Fitness record of one tree, every component minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTriple {
    pub error: f64,
    pub size: f64,
    pub neg_diversity: f64,
}

impl ObjectiveTriple {
    pub fn new(error: f64, size: f64, neg_diversity: f64) -> Self {
        ObjectiveTriple {
            error,
            size,
            neg_diversity,
        }
    }

    /// Objectives of `tree` given its error.
    pub fn of(tree: &NeuralTree, error: f64) -> Self {
        let error = if error.is_finite() { error } else { f64::MAX };
        ObjectiveTriple {
            error,
            size: tree.size() as f64,
            neg_diversity: -(tree.diversity_index() as f64),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.error, self.size, self.neg_diversity]
    }

    pub fn diversity_index(&self) -> f64 {
        -self.neg_diversity
    }
}

/// Pareto dominance: no worse in every objective, better in at least one.
pub fn dominates(a: &ObjectiveTriple, b: &ObjectiveTriple) -> bool {
    let (a, b) = (a.as_array(), b.as_array());
    let mut strictly = false;
    for (x, y) in a.iter().zip(&b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fast nondominated sort. Fronts are returned best first, each holding
/// ascending member indices.
pub fn nondominated_sort(members: &[ObjectiveTriple]) -> Vec<Vec<usize>> {
    let n = members.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&members[i], &members[j]) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&members[j], &members[i]) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of one front. Boundary members of every
/// objective get `f64::INFINITY`; an objective with zero range adds nothing
/// to interior members.
pub fn crowding_distance(front: &[ObjectiveTriple]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for m in 0..3 {
        let value = |i: usize| front[i].as_array()[m];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| value(x).total_cmp(&value(y)).then(x.cmp(&y)));
        let (lo, hi) = (value(order[0]), value(order[n - 1]));
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 || !range.is_finite() {
            continue;
        }
        for w in 1..n - 1 {
            let i = order[w];
            if dist[i].is_finite() {
                dist[i] += (value(order[w + 1]) - value(order[w - 1])) / range;
            }
        }
    }
    dist
}

/// Which objectives drive ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Error, tree size, diversity index.
    #[default]
    Multi,
    /// Error only.
    Single,
}

impl ObjectiveMode {
    fn project(self, o: &ObjectiveTriple) -> ObjectiveTriple {
        match self {
            ObjectiveMode::Multi => *o,
            ObjectiveMode::Single => ObjectiveTriple::new(o.error, 0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub tree: NeuralTree,
    pub objectives: ObjectiveTriple,
}

/// Population annotated with front rank (1 = nondominated) and crowding.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPopulation {
    pub members: Vec<Member>,
    pub rank: Vec<usize>,
    pub crowding: Vec<f64>,
    pub mode: ObjectiveMode,
}

impl RankedPopulation {
    pub fn rank_members(members: Vec<Member>, mode: ObjectiveMode) -> Self {
        let projected: Vec<ObjectiveTriple> = members.iter().map(|m| mode.project(&m.objectives)).collect();
        let fronts = nondominated_sort(&projected);
        let mut rank = vec![0; members.len()];
        let mut crowding = vec![0.0; members.len()];
        for (f, front) in fronts.iter().enumerate() {
            let objs: Vec<ObjectiveTriple> = front.iter().map(|&i| projected[i]).collect();
            for (&i, d) in front.iter().zip(crowding_distance(&objs)) {
                rank[i] = f + 1;
                crowding[i] = d;
            }
        }
        RankedPopulation {
            members,
            rank,
            crowding,
            mode,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn objectives(&self) -> Vec<ObjectiveTriple> {
        self.members.iter().map(|m| m.objectives).collect()
    }

    /// Member indices grouped by rank, best front first.
    pub fn fronts(&self) -> Vec<Vec<usize>> {
        let max = self.rank.iter().copied().max().unwrap_or(0);
        (1..=max)
            .map(|r| (0..self.len()).filter(|&i| self.rank[i] == r).collect())
            .collect()
    }

    /// Crowded comparison: lower rank wins, then larger crowding distance.
    pub fn crowded_cmp(&self, a: usize, b: usize) -> Ordering {
        self.rank[a]
            .cmp(&self.rank[b])
            .then_with(|| self.crowding[b].total_cmp(&self.crowding[a]))
    }

    /// Lowest-error member of the first front (lowest index on ties).
    pub fn best_error_index(&self) -> usize {
        (0..self.len())
            .filter(|&i| self.rank[i] == 1)
            .min_by(|&a, &b| {
                self.members[a]
                    .objectives
                    .error
                    .total_cmp(&self.members[b].objectives.error)
                    .then(a.cmp(&b))
            })
            .expect("nonempty population")
    }

    /// First-front members by ascending error.
    pub fn front1_by_error(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.rank[i] == 1).collect();
        idx.sort_by(|&a, &b| {
            self.members[a]
                .objectives
                .error
                .total_cmp(&self.members[b].objectives.error)
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Tournament of `size` uniformly drawn members (with replacement); the
/// crowded-comparison winner is returned, exact ties settled by a coin.
pub fn tournament<R: Rng + ?Sized>(pop: &RankedPopulation, size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size.max(2) {
        let challenger = rng.random_range(0..pop.len());
        match pop.crowded_cmp(challenger, best) {
            Ordering::Less => best = challenger,
            Ordering::Equal => {
                if rng.random_bool(0.5) {
                    best = challenger;
                }
            }
            Ordering::Greater => {}
        }
    }
    best
}

pub fn binary_tournament<R: Rng + ?Sized>(pop: &RankedPopulation, rng: &mut R) -> usize {
    tournament(pop, 2, rng)
}

/// Swaps the subtrees at `path1` of `p1` and `path2` of `p2`, then converts
/// any computational node pushed below the depth limit into a random leaf.
pub fn crossover_at<R: Rng + ?Sized>(
    p1: &NeuralTree,
    p2: &NeuralTree,
    path1: &[usize],
    path2: &[usize],
    n_features: usize,
    cfg: &TreeConfig,
    rng: &mut R,
) -> Result<(NeuralTree, NeuralTree)> {
    if path1.is_empty() || path2.is_empty() {
        return Err(Error::InvalidArgument("crossover points must be non-root".into()));
    }
    let s1 = p1
        .node_at(path1)
        .ok_or_else(|| Error::InvalidArgument(format!("no node at {path1:?}")))?
        .clone();
    let s2 = p2
        .node_at(path2)
        .ok_or_else(|| Error::InvalidArgument(format!("no node at {path2:?}")))?
        .clone();
    let (mut c1, mut c2) = (p1.clone(), p2.clone());
    c1.replace_at(path1, s2)?;
    c2.replace_at(path2, s1)?;
    repair_depth(&mut c1, cfg.max_depth, n_features, rng);
    repair_depth(&mut c2, cfg.max_depth, n_features, rng);
    Ok((c1, c2))
}

/// Subtree crossover at one uniformly chosen non-root node of each parent.
pub fn crossover<R: Rng + ?Sized>(
    p1: &NeuralTree,
    p2: &NeuralTree,
    n_features: usize,
    cfg: &TreeConfig,
    rng: &mut R,
) -> (NeuralTree, NeuralTree) {
    let pick = |t: &NeuralTree, rng: &mut R| {
        let paths = t.node_paths();
        paths[rng.random_range(1..paths.len())].clone()
    };
    let a = pick(p1, rng);
    let b = pick(p2, rng);
    crossover_at(p1, p2, &a, &b, n_features, cfg, rng).expect("paths drawn from the parents")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MutationOp {
    /// One terminal replaced by a new terminal.
    ReplaceLeaf,
    /// Every terminal replaced by a new terminal.
    ReplaceAllLeaves,
    /// One node (terminal or computational) replaced by a random subtree.
    ReplaceSubtree,
    /// One terminal replaced by a random computational node.
    LeafToComputational,
}

impl MutationOp {
    pub const ALL: [MutationOp; 4] = [
        MutationOp::ReplaceLeaf,
        MutationOp::ReplaceAllLeaves,
        MutationOp::ReplaceSubtree,
        MutationOp::LeafToComputational,
    ];
}

/// Applies one uniformly chosen mutation operator.
pub fn mutate<R: Rng + ?Sized>(
    tree: &NeuralTree,
    n_features: usize,
    cfg: &TreeConfig,
    rng: &mut R,
) -> (NeuralTree, MutationOp) {
    let op = MutationOp::ALL[rng.random_range(0..4)];
    (mutate_with(op, tree, n_features, cfg, rng), op)
}

pub fn mutate_with<R: Rng + ?Sized>(
    op: MutationOp,
    tree: &NeuralTree,
    n_features: usize,
    cfg: &TreeConfig,
    rng: &mut R,
) -> NeuralTree {
    let mut out = tree.clone();
    let paths = tree.node_paths();
    let leaf_paths: Vec<&Vec<usize>> = paths
        .iter()
        .filter(|p| tree.node_at(p).is_some_and(TreeNode::is_leaf))
        .collect();
    match op {
        MutationOp::ReplaceLeaf => {
            let p = leaf_paths[rng.random_range(0..leaf_paths.len())];
            out.replace_at(p, random_leaf(n_features, rng)).expect("leaf path");
        }
        MutationOp::ReplaceAllLeaves => {
            for p in leaf_paths {
                out.replace_at(p, random_leaf(n_features, rng)).expect("leaf path");
            }
        }
        MutationOp::ReplaceSubtree => replace_subtree(&mut out, &paths, n_features, cfg, rng),
        MutationOp::LeafToComputational => {
            // the new node sits one layer below its parent
            let eligible: Vec<&&Vec<usize>> = leaf_paths.iter().filter(|p| p.len() < cfg.max_depth).collect();
            if eligible.is_empty() {
                replace_subtree(&mut out, &paths, n_features, cfg, rng);
            } else {
                let p = eligible[rng.random_range(0..eligible.len())];
                out.replace_at(p, random_computational(n_features, cfg, rng))
                    .expect("leaf path");
            }
        }
    }
    repair_depth(&mut out, cfg.max_depth, n_features, rng);
    out
}

fn replace_subtree<R: Rng + ?Sized>(
    out: &mut NeuralTree,
    paths: &[Vec<usize>],
    n_features: usize,
    cfg: &TreeConfig,
    rng: &mut R,
) {
    // nodes whose layer can host a computational node
    let eligible: Vec<&Vec<usize>> = paths.iter().filter(|p| p.len() < cfg.max_depth).collect();
    let p = eligible[rng.random_range(0..eligible.len())];
    let sub = random_subtree(p.len() + 1, n_features, cfg, rng);
    out.replace_at(p, sub).expect("path drawn from the tree");
}

/// MOGP settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MogpConfig {
    pub pop_size: usize,
    pub mating_fraction: f64,
    pub pm: f64,
    pub pc: f64,
    pub tournament_size: usize,
    /// Generations per structure-search phase (`i_s`).
    pub generations: usize,
    pub tree: TreeConfig,
    /// Mating pool drawn with replacement.
    pub pool_with_replacement: bool,
    pub mode: ObjectiveMode,
}

impl Default for MogpConfig {
    fn default() -> Self {
        MogpConfig {
            pop_size: 30,
            mating_fraction: 0.5,
            pm: 0.3,
            pc: 0.7,
            tournament_size: 2,
            generations: 30,
            tree: TreeConfig::default(),
            pool_with_replacement: true,
            mode: ObjectiveMode::Multi,
        }
    }
}

impl MogpConfig {
    /// Mating pool and offspring count, `round(pop_size * r)`.
    pub fn pool_size(&self) -> usize {
        (self.pop_size as f64 * self.mating_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        if self.pop_size <= 20 {
            return Err(Error::Config(format!("pop_size {} must exceed 20", self.pop_size)));
        }
        if !(0.0..=1.0).contains(&self.mating_fraction) {
            return Err(Error::Config("mating_fraction outside [0, 1]".into()));
        }
        if (self.pc - (1.0 - self.pm)).abs() > 1e-12 || !(0.0..=1.0).contains(&self.pm) {
            return Err(Error::Config(format!(
                "crossover probability {} must equal 1 - mutation probability {}",
                self.pc, self.pm
            )));
        }
        if self.tournament_size < 2 || self.tournament_size > self.pop_size {
            return Err(Error::Config(format!(
                "tournament size {} not in 2..={}",
                self.tournament_size, self.pop_size
            )));
        }
        if self.pool_size() < 2 {
            return Err(Error::Config("mating pool needs at least two members".into()));
        }
        Ok(())
    }
}

/// One line of the per-generation JSON log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub min_error: f64,
    pub mean_error: f64,
    pub mean_size: f64,
    pub front1_size: usize,
    pub mean_diversity_index: f64,
    pub evaluations: u64,
}

/// Stateful MOGP run whose population persists across structure-search
/// phases.
#[derive(Debug, Clone)]
pub struct Mogp<'a> {
    cfg: MogpConfig,
    train: &'a Dataset,
    population: RankedPopulation,
    evaluations: u64,
    generation: usize,
    log: Vec<GenerationRecord>,
}

impl<'a> Mogp<'a> {
    /// Random initial population, evaluated and ranked.
    pub fn init<R: Rng + ?Sized>(train: &'a Dataset, cfg: MogpConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() || train.n_features() == 0 {
            return Err(Error::Empty("training split".into()));
        }
        let trees: Vec<NeuralTree> = (0..cfg.pop_size)
            .map(|_| random_tree(train.n_features(), &cfg.tree, rng))
            .collect();
        let mut evaluations = 0;
        let members = evaluate_all(trees, train, &mut evaluations)?;
        let population = RankedPopulation::rank_members(members, cfg.mode);
        let mut run = Mogp {
            cfg,
            train,
            population,
            evaluations,
            generation: 0,
            log: Vec::new(),
        };
        run.record();
        Ok(run)
    }

    pub fn config(&self) -> &MogpConfig {
        &self.cfg
    }

    pub fn population(&self) -> &RankedPopulation {
        &self.population
    }

    pub fn into_population(self) -> RankedPopulation {
        self.population
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn log(&self) -> &[GenerationRecord] {
        &self.log
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// One generation: tournament mating pool, offspring by crossover and
    /// mutation, evaluation of `P + Q`, nondominated sorting and elitism.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let n_features = self.train.n_features();
        let pool = self.mating_pool(rng);
        let target = self.cfg.pool_size();
        let mut offspring: Vec<NeuralTree> = Vec::with_capacity(target + 1);
        while offspring.len() < target {
            let i = rng.random_range(0..pool.len());
            let mut j = rng.random_range(0..pool.len() - 1);
            if j >= i {
                j += 1;
            }
            let (p1, p2) = (&self.population.members[pool[i]].tree, &self.population.members[pool[j]].tree);
            let (mut c1, mut c2) = if rng.random_bool(self.cfg.pc) {
                crossover(p1, p2, n_features, &self.cfg.tree, rng)
            } else {
                (p1.clone(), p2.clone())
            };
            for c in [&mut c1, &mut c2] {
                if rng.random_bool(self.cfg.pm) {
                    *c = mutate(c, n_features, &self.cfg.tree, rng).0;
                }
            }
            offspring.push(c1);
            if offspring.len() < target {
                offspring.push(c2);
            }
        }

        let mut combined: Vec<NeuralTree> = self.population.members.iter().map(|m| m.tree.clone()).collect();
        combined.extend(offspring);
        let members = evaluate_all(combined, self.train, &mut self.evaluations)?;
        let ranked = RankedPopulation::rank_members(members, self.cfg.mode);
        let survivors = elitist_selection(&ranked, self.cfg.pop_size, rng);
        let members = survivors.into_iter().map(|i| ranked.members[i].clone()).collect();
        self.population = RankedPopulation::rank_members(members, self.cfg.mode);
        self.generation += 1;
        self.record();
        Ok(())
    }

    pub fn run<R: Rng + ?Sized>(&mut self, generations: usize, rng: &mut R) -> Result<()> {
        for _ in 0..generations {
            self.step(rng)?;
        }
        Ok(())
    }

    /// Replaces member `index` with a retuned tree whose error is already
    /// known, then re-ranks. No evaluation is counted.
    pub fn reinject(&mut self, index: usize, tree: NeuralTree, error: f64) {
        let mut members = std::mem::take(&mut self.population.members);
        members[index] = Member {
            objectives: ObjectiveTriple::of(&tree, error),
            tree,
        };
        self.population = RankedPopulation::rank_members(members, self.cfg.mode);
    }

    fn mating_pool<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let size = self.cfg.pool_size();
        if self.cfg.pool_with_replacement {
            return (0..size)
                .map(|_| tournament(&self.population, self.cfg.tournament_size, rng))
                .collect();
        }
        let mut remaining: Vec<usize> = (0..self.population.len()).collect();
        let mut pool = Vec::with_capacity(size);
        while pool.len() < size && !remaining.is_empty() {
            let mut best = rng.random_range(0..remaining.len());
            for _ in 1..self.cfg.tournament_size {
                let c = rng.random_range(0..remaining.len());
                match self.population.crowded_cmp(remaining[c], remaining[best]) {
                    Ordering::Less => best = c,
                    Ordering::Equal if rng.random_bool(0.5) => best = c,
                    _ => {}
                }
            }
            pool.push(remaining.swap_remove(best));
        }
        pool
    }

    fn record(&mut self) {
        let pop = &self.population;
        let n = pop.len() as f64;
        let errors = pop.members.iter().map(|m| m.objectives.error);
        self.log.push(GenerationRecord {
            generation: self.generation,
            min_error: errors.clone().fold(f64::INFINITY, f64::min),
            mean_error: errors.sum::<f64>() / n,
            mean_size: pop.members.iter().map(|m| m.objectives.size).sum::<f64>() / n,
            front1_size: pop.rank.iter().filter(|r| **r == 1).count(),
            mean_diversity_index: pop.members.iter().map(|m| m.objectives.diversity_index()).sum::<f64>() / n,
            evaluations: self.evaluations,
        });
    }
}

fn evaluate_all(trees: Vec<NeuralTree>, train: &Dataset, evaluations: &mut u64) -> Result<Vec<Member>> {
    trees
        .into_iter()
        .map(|tree| {
            let error = tree.mse_on(train)?;
            *evaluations += 1;
            Ok(Member {
                objectives: ObjectiveTriple::of(&tree, error),
                tree,
            })
        })
        .collect()
}

/// Indices of the `keep` best members by (rank, crowding); ties within the
/// last admitted front are broken uniformly at random.
pub fn elitist_selection<R: Rng + ?Sized>(pop: &RankedPopulation, keep: usize, rng: &mut R) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(keep);
    for mut front in pop.fronts() {
        if chosen.len() + front.len() <= keep {
            chosen.extend(front);
            continue;
        }
        front.shuffle(rng);
        front.sort_by(|&a, &b| pop.crowding[b].total_cmp(&pop.crowding[a]));
        chosen.extend(front.into_iter().take(keep - chosen.len()));
        break;
    }
    chosen
}

/// Final population and log of a complete structure search.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub population: RankedPopulation,
    pub log: Vec<GenerationRecord>,
    pub evaluations: u64,
}

/// Runs `cfg.generations` generations from a random population.
pub fn evolve<R: Rng + ?Sized>(train: &Dataset, cfg: &MogpConfig, rng: &mut R) -> Result<EvolveOutcome> {
    let mut run = Mogp::init(train, cfg.clone(), rng)?;
    run.run(cfg.generations, rng)?;
    Ok(EvolveOutcome {
        log: run.log.clone(),
        evaluations: run.evaluations,
        population: run.population,
    })
}

/// Same loop ranked on error alone.
pub fn evolve_single_objective<R: Rng + ?Sized>(
    train: &Dataset,
    cfg: &MogpConfig,
    rng: &mut R,
) -> Result<EvolveOutcome> {
    let cfg = MogpConfig {
        mode: ObjectiveMode::Single,
        ..cfg.clone()
    };
    evolve(train, &cfg, rng)
}

/// Dump entry for one member of a final population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub tree: NeuralTree,
    pub objectives: ObjectiveTriple,
    pub rank: usize,
    /// `None` stands for an infinite crowding distance.
    pub crowding: Option<f64>,
}

impl RankedPopulation {
    pub fn to_records(&self) -> Vec<MemberRecord> {
        self.members
            .iter()
            .enumerate()
            .map(|(i, m)| MemberRecord {
                tree: m.tree.clone(),
                objectives: m.objectives,
                rank: self.rank[i],
                crowding: self.crowding[i].is_finite().then_some(self.crowding[i]),
            })
            .collect()
    }

    /// Rebuilds a population from a dump, re-ranking from the objectives.
    pub fn from_records(records: Vec<MemberRecord>, mode: ObjectiveMode) -> Self {
        let members = records
            .into_iter()
            .map(|r| Member {
                tree: r.tree,
                objectives: r.objectives,
            })
            .collect();
        RankedPopulation::rank_members(members, mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TaskKind;
    use crate::rng;
    use crate::tree::Activation;
    use proptest::prelude::*;

    fn t(e: f64, s: f64, d: f64) -> ObjectiveTriple {
        ObjectiveTriple::new(e, s, d)
    }

    fn toy_data(n: usize, seed: u64) -> Dataset {
        let mut r = rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.random::<f64>()).collect()).collect();
        let targets = rows.iter().map(|x| 0.5 * x[0] + 0.3 * x[1] * x[2]).collect();
        Dataset::from_rows(rows, targets, TaskKind::Regression).unwrap()
    }

    /// Brute force: front f holds the members undominated once fronts < f
    /// are removed.
    fn brute_force_fronts(objs: &[ObjectiveTriple]) -> Vec<Vec<usize>> {
        let mut left: Vec<usize> = (0..objs.len()).collect();
        let mut fronts = Vec::new();
        while !left.is_empty() {
            let front: Vec<usize> = left
                .iter()
                .copied()
                .filter(|&i| !left.iter().any(|&j| dominates(&objs[j], &objs[i])))
                .collect();
            left.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&t(1.0, 1.0, -3.0), &t(2.0, 2.0, -3.0)));
        let a = t(1.0, 2.0, -1.0);
        assert!(!dominates(&a, &a));
        assert!(!dominates(&t(1.0, 3.0, -1.0), &t(2.0, 2.0, -1.0)));
        assert!(!dominates(&t(2.0, 2.0, -1.0), &t(1.0, 3.0, -1.0)));
    }

    #[test]
    fn sort_examples() {
        let objs = [t(1.0, 1.0, 0.0), t(2.0, 2.0, 0.0), t(1.0, 3.0, 0.0)];
        assert_eq!(nondominated_sort(&objs), vec![vec![0], vec![1, 2]]);
        let same = [t(1.0, 1.0, 1.0); 4];
        assert_eq!(nondominated_sort(&same), vec![vec![0, 1, 2, 3]]);
        let chain: Vec<ObjectiveTriple> = (0..5).rev().map(|i| t(i as f64, i as f64, i as f64)).collect();
        assert_eq!(
            nondominated_sort(&chain),
            vec![vec![4], vec![3], vec![2], vec![1], vec![0]]
        );
    }

    #[test]
    fn crowding_examples() {
        assert_eq!(crowding_distance(&[t(0.0, 0.0, 0.0), t(1.0, 1.0, 1.0)]), vec![f64::INFINITY; 2]);
        let line = [t(0.0, 5.0, -2.0), t(0.5, 5.0, -2.0), t(1.0, 5.0, -2.0)];
        let d = crowding_distance(&line);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert_eq!(d[1], 1.0);
        let same = [t(1.0, 1.0, 1.0); 5];
        let d = crowding_distance(&same);
        assert_eq!(d.iter().filter(|v| v.is_infinite()).count(), 2);
        assert_eq!(&d[1..4], &[0.0, 0.0, 0.0]);
    }

    fn ranked(ranks: Vec<usize>, crowding: Vec<f64>) -> RankedPopulation {
        let tree = crate::tree::random_tree(2, &TreeConfig::default(), &mut rng::seeded(0));
        let members = ranks
            .iter()
            .map(|_| Member {
                tree: tree.clone(),
                objectives: t(0.0, 0.0, 0.0),
            })
            .collect();
        RankedPopulation {
            members,
            rank: ranks,
            crowding,
            mode: ObjectiveMode::Multi,
        }
    }

    #[test]
    fn tournament_prefers_rank_then_crowding() {
        let mut r = rng::seeded(9);
        let pop = ranked(vec![1, 2], vec![0.1, 5.0]);
        for _ in 0..200 {
            let w = binary_tournament(&pop, &mut r);
            // only a (1, 1) draw of the worse member can make it win
            assert!(w == 0 || w == 1);
        }
        assert_eq!(pop.crowded_cmp(0, 1), Ordering::Less);
        let pop = ranked(vec![1, 1], vec![f64::INFINITY, 0.4]);
        assert_eq!(pop.crowded_cmp(0, 1), Ordering::Less);
    }

    #[test]
    fn tournament_coin_is_fair() {
        let pop = ranked(vec![1, 1], vec![0.3, 0.3]);
        let mut r = rng::seeded(31);
        let trials = 10_000;
        let wins = (0..trials).filter(|_| binary_tournament(&pop, &mut r) == 0).count();
        let sd = (trials as f64 * 0.25).sqrt();
        assert!((wins as f64 - trials as f64 / 2.0).abs() <= 5.0 * sd, "wins {wins}");
    }

    fn kinds_leaves(kind: Activation, ids: &[usize]) -> NeuralTree {
        NeuralTree::new(TreeNode::internal(
            kind,
            0.5,
            0.5,
            vec![1.0; ids.len()],
            ids.iter().map(|&i| TreeNode::leaf(i)).collect(),
        ))
        .unwrap()
    }

    #[test]
    fn crossover_swaps_leaves() {
        let cfg = TreeConfig::default();
        let p1 = kinds_leaves(Activation::Tanh, &[1, 1]);
        let p2 = kinds_leaves(Activation::Fermi, &[2, 2]);
        let mut r = rng::seeded(1);
        let (c1, c2) = crossover_at(&p1, &p2, &[0], &[1], 3, &cfg, &mut r).unwrap();
        assert_eq!(c1.used_features().into_iter().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(c2.used_features().into_iter().collect::<Vec<_>>(), vec![1, 2]);
        let (s1, s2) = crossover_at(&p1, &p1, &[1], &[1], 3, &cfg, &mut r).unwrap();
        assert_eq!((s1, s2), (p1.clone(), p1.clone()));
        assert!(crossover_at(&p1, &p2, &[], &[1], 3, &cfg, &mut r).is_err());
    }

    #[test]
    fn crossover_children_stay_legal() {
        let cfg = TreeConfig::default();
        let mut r = rng::seeded(123);
        for _ in 0..1000 {
            let a = random_tree(6, &cfg, &mut r);
            let b = random_tree(6, &cfg, &mut r);
            let (c1, c2) = crossover(&a, &b, 6, &cfg, &mut r);
            c1.validate(&cfg, Some(6)).unwrap();
            c2.validate(&cfg, Some(6)).unwrap();
        }
    }

    #[test]
    fn replace_all_leaves_keeps_internal_node() {
        let cfg = TreeConfig::default();
        let base = kinds_leaves(Activation::Gaussian, &[0, 0]);
        let mut r = rng::seeded(8);
        let m = mutate_with(MutationOp::ReplaceAllLeaves, &base, 50, &cfg, &mut r);
        assert_eq!(m.size(), 2);
        assert_eq!(m.encode_params(), base.encode_params());
        assert_eq!(m.activation_kinds(), base.activation_kinds());
        assert!(m.root().children().iter().all(TreeNode::is_leaf));
        assert_ne!(m, base, "with 50 features both leaves staying 0 is a 1/2500 event");
    }

    #[test]
    fn mutation_operator_frequencies_are_uniform() {
        let cfg = TreeConfig::default();
        let mut r = rng::seeded(4);
        let base = random_tree(5, &cfg, &mut r);
        let mut counts = std::collections::HashMap::new();
        let trials = 10_000;
        for _ in 0..trials {
            let (_, op) = mutate(&base, 5, &cfg, &mut r);
            *counts.entry(op).or_insert(0usize) += 1;
        }
        let sd = (trials as f64 * 0.25 * 0.75).sqrt();
        for op in MutationOp::ALL {
            let c = counts[&op] as f64;
            assert!((c - trials as f64 * 0.25).abs() <= 5.0 * sd, "{op:?}: {c}");
        }
    }

    #[test]
    fn structural_mutations_change_the_tree() {
        let cfg = TreeConfig::default();
        let mut r = rng::seeded(17);
        for _ in 0..500 {
            let base = random_tree(4, &cfg, &mut r);
            for op in [MutationOp::ReplaceSubtree, MutationOp::LeafToComputational] {
                let m = mutate_with(op, &base, 4, &cfg, &mut r);
                assert_ne!(m, base, "{op:?}");
                m.validate(&cfg, Some(4)).unwrap();
            }
        }
    }

    #[test]
    fn zero_generations_is_the_initial_population() {
        let ds = toy_data(40, 1);
        let cfg = MogpConfig {
            generations: 0,
            ..MogpConfig::default()
        };
        let out = evolve(&ds, &cfg, &mut rng::seeded(2)).unwrap();
        assert_eq!(out.population.len(), 30);
        assert_eq!(out.evaluations, 30);
        let again = Mogp::init(&ds, cfg, &mut rng::seeded(2)).unwrap();
        assert_eq!(again.population(), &out.population);
    }

    #[test]
    fn evolve_keeps_population_size_and_counts_evaluations() {
        let ds = toy_data(40, 2);
        let cfg = MogpConfig {
            generations: 10,
            ..MogpConfig::default()
        };
        let out = evolve(&ds, &cfg, &mut rng::seeded(3)).unwrap();
        assert_eq!(out.population.len(), 30);
        assert_eq!(out.evaluations, 30 + 10 * 45);
        assert_eq!(out.log.len(), 11);
        assert_eq!(out.log.last().unwrap().evaluations, out.evaluations);
    }

    #[test]
    fn single_objective_ranks_by_error() {
        let ds = toy_data(30, 5);
        let cfg = MogpConfig {
            generations: 3,
            ..MogpConfig::default()
        };
        let out = evolve_single_objective(&ds, &cfg, &mut rng::seeded(6)).unwrap();
        let pop = &out.population;
        for a in 0..pop.len() {
            for b in 0..pop.len() {
                let (ea, eb) = (pop.members[a].objectives.error, pop.members[b].objectives.error);
                if ea < eb {
                    assert!(pop.rank[a] < pop.rank[b]);
                }
            }
        }
    }

    #[test]
    fn elitism_is_monotone_and_trees_stay_legal() {
        let ds = toy_data(30, 7);
        for seed in 0..20 {
            let cfg = MogpConfig::default();
            let mut r = rng::seeded(seed);
            let mut run = Mogp::init(&ds, cfg.clone(), &mut r).unwrap();
            let front1_min = |p: &RankedPopulation, f: fn(&ObjectiveTriple) -> f64| {
                (0..p.len())
                    .filter(|&i| p.rank[i] == 1)
                    .map(|i| f(&p.members[i].objectives))
                    .fold(f64::INFINITY, f64::min)
            };
            let mut prev = (
                front1_min(run.population(), |o| o.error),
                front1_min(run.population(), |o| o.size),
            );
            for _ in 0..30 {
                run.step(&mut r).unwrap();
                let p = run.population();
                assert_eq!(p.len(), 30);
                for m in &p.members {
                    m.tree.validate(&cfg.tree, Some(3)).unwrap();
                }
                let now = (front1_min(p, |o| o.error), front1_min(p, |o| o.size));
                assert!(now.0 <= prev.0 && now.1 <= prev.1, "seed {seed}: {prev:?} -> {now:?}");
                prev = now;
            }
            let errs: Vec<f64> = run.log().iter().map(|g| g.min_error).collect();
            assert!(errs.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn ranked_population_invariants() {
        let ds = toy_data(30, 9);
        let out = evolve(&ds, &MogpConfig { generations: 5, ..MogpConfig::default() }, &mut rng::seeded(1)).unwrap();
        let p = &out.population;
        for i in 0..p.len() {
            for j in 0..p.len() {
                if dominates(&p.members[j].objectives, &p.members[i].objectives) {
                    assert!(p.rank[j] < p.rank[i]);
                }
            }
            assert!(p.crowding[i] >= 0.0);
        }
        let records = p.to_records();
        let back = RankedPopulation::from_records(
            serde_json::from_str(&serde_json::to_string(&records).unwrap()).unwrap(),
            ObjectiveMode::Multi,
        );
        assert_eq!(&back, p);
    }

    #[test]
    fn config_validation() {
        assert!(MogpConfig::default().validate().is_ok());
        assert_eq!(MogpConfig::default().pool_size(), 15);
        assert!(MogpConfig { pop_size: 20, ..MogpConfig::default() }.validate().is_err());
        assert!(MogpConfig { pc: 0.6, ..MogpConfig::default() }.validate().is_err());
        assert!(MogpConfig { tournament_size: 1, ..MogpConfig::default() }.validate().is_err());
    }

    #[test]
    fn pool_without_replacement_is_distinct() {
        let ds = toy_data(20, 3);
        let cfg = MogpConfig {
            pool_with_replacement: false,
            ..MogpConfig::default()
        };
        let mut r = rng::seeded(5);
        let run = Mogp::init(&ds, cfg, &mut r).unwrap();
        let mut pool = run.mating_pool(&mut r);
        assert_eq!(pool.len(), 15);
        pool.sort();
        pool.dedup();
        assert_eq!(pool.len(), 15);
    }

    fn arb_objs() -> impl Strategy<Value = Vec<ObjectiveTriple>> {
        prop::collection::vec((0u8..6, 0u8..6, 0u8..6), 1..50)
            .prop_map(|v| v.into_iter().map(|(a, b, c)| t(a as f64, b as f64, -(c as f64))).collect())
    }

    proptest! {
        #[test]
        fn sort_matches_brute_force(objs in arb_objs()) {
            prop_assert_eq!(nondominated_sort(&objs), brute_force_fronts(&objs));
        }

        #[test]
        fn dominance_is_a_strict_partial_order(a in (0u8..4, 0u8..4, 0u8..4), b in (0u8..4, 0u8..4, 0u8..4), c in (0u8..4, 0u8..4, 0u8..4)) {
            let f = |x: (u8, u8, u8)| t(x.0 as f64, x.1 as f64, x.2 as f64);
            let (a, b, c) = (f(a), f(b), f(c));
            prop_assert!(!dominates(&a, &a));
            prop_assert!(!(dominates(&a, &b) && dominates(&b, &a)));
            if dominates(&a, &b) && dominates(&b, &c) {
                prop_assert!(dominates(&a, &c));
            }
        }

        #[test]
        fn crowding_is_nonnegative(objs in arb_objs()) {
            prop_assert!(crowding_distance(&objs).iter().all(|d| *d >= 0.0));
        }
    }
}
