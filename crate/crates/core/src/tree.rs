//! Heterogeneous flexible neural trees: genotype, evaluation, structural
//! measures and the flat parameter encoding used by the tuner.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Smallest magnitude allowed for a denominator.
pub const DENOM_EPS: f64 = 1e-9;
/// Exponents are clamped to `[-EXP_CLAMP, EXP_CLAMP]`.
pub const EXP_CLAMP: f64 = 60.0;

#[inline]
fn guard(den: f64) -> f64 {
    if den.abs() < DENOM_EPS {
        if den < 0.0 {
            -DENOM_EPS
        } else {
            DENOM_EPS
        }
    } else {
        den
    }
}

#[inline]
fn exp_clamped(x: f64) -> f64 {
    x.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
}

/// Activation function of a computational node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Activation {
    Gaussian = 1,
    Tanh = 2,
    Fermi = 3,
    LinearFermi = 4,
    LinearTanh = 5,
    BipolarSigmoid = 6,
    UnipolarSigmoid = 7,
}

impl Activation {
    pub const ALL: [Activation; 7] = [
        Activation::Gaussian,
        Activation::Tanh,
        Activation::Fermi,
        Activation::LinearFermi,
        Activation::LinearTanh,
        Activation::BipolarSigmoid,
        Activation::UnipolarSigmoid,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Activation::ALL.get(usize::from(id).checked_sub(1)?).copied()
    }

    /// Number of adjustable arguments: `(a, b)`, `(a)` or none.
    pub fn arg_count(self) -> usize {
        match self {
            Activation::Gaussian | Activation::LinearFermi | Activation::LinearTanh => 2,
            Activation::BipolarSigmoid | Activation::UnipolarSigmoid => 1,
            Activation::Tanh | Activation::Fermi => 0,
        }
    }

    /// `phi(a, b, x)` for net excitation `x`.
    #[inline]
    pub fn apply(self, a: f64, b: f64, x: f64) -> f64 {
        match self {
            Activation::Gaussian => {
                let z = (x - a) / guard(b);
                exp_clamped(-(z * z))
            }
            Activation::Tanh => x.tanh(),
            Activation::Fermi => 1.0 / (1.0 + exp_clamped(-x)),
            Activation::LinearFermi => a / (1.0 + exp_clamped(-x)) + b,
            Activation::LinearTanh => a * x.tanh() + b,
            Activation::BipolarSigmoid => {
                let e = exp_clamped(-2.0 * x * a);
                (1.0 - e) / (guard(a) * (1.0 + e))
            }
            Activation::UnipolarSigmoid => {
                let a = a.abs();
                2.0 * a / (1.0 + exp_clamped(-2.0 * a * x))
            }
        }
    }
}

impl From<Activation> for u8 {
    fn from(a: Activation) -> u8 {
        a.id()
    }
}

impl TryFrom<u8> for Activation {
    type Error = String;

    fn try_from(id: u8) -> std::result::Result<Self, String> {
        Activation::from_id(id).ok_or_else(|| format!("activation kind {id} not in 1..=7"))
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// Tree node. Serialized as `{"feature": j}` or
/// `{"kind": k, "a": .., "b": .., "weights": [..], "children": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Leaf {
        feature: usize,
    },
    Internal {
        kind: Activation,
        a: f64,
        b: f64,
        weights: Vec<f64>,
        children: Vec<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf(feature: usize) -> Self {
        TreeNode::Leaf { feature }
    }

    pub fn internal(kind: Activation, a: f64, b: f64, weights: Vec<f64>, children: Vec<TreeNode>) -> Self {
        TreeNode::Internal {
            kind,
            a,
            b,
            weights,
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn children(&self) -> &[TreeNode] {
        match self {
            TreeNode::Leaf { .. } => &[],
            TreeNode::Internal { children, .. } => children,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(TreeNode::node_count).sum::<usize>()
    }

    pub fn internal_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { children, .. } => {
                1 + children.iter().map(TreeNode::internal_count).sum::<usize>()
            }
        }
    }

    /// Computational layers on the longest path (a leaf has depth 0).
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { children, .. } => {
                1 + children.iter().map(TreeNode::depth).max().unwrap_or(0)
            }
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { feature } => Some(*feature),
            TreeNode::Internal { children, .. } => children.iter().filter_map(TreeNode::max_feature).max(),
        }
    }

    #[inline]
    fn eval_unchecked(&self, row: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { feature } => row[*feature],
            TreeNode::Internal {
                kind,
                a,
                b,
                weights,
                children,
            } => {
                let o: f64 = weights
                    .iter()
                    .zip(children)
                    .map(|(w, c)| w * c.eval_unchecked(row))
                    .sum();
                kind.apply(*a, *b, o)
            }
        }
    }
}

/// Output of `node` on `row`: `phi(a, b, sum_j w_j z_j)` for computational
/// nodes, `row[feature]` for leaves.
pub fn eval_node(node: &TreeNode, row: &[f64]) -> Result<f64> {
    match node {
        TreeNode::Leaf { feature } => row.get(*feature).copied().ok_or(Error::FeatureOutOfRange {
            index: *feature,
            len: row.len(),
        }),
        TreeNode::Internal {
            kind,
            a,
            b,
            weights,
            children,
        } => {
            let mut o = 0.0;
            for (w, c) in weights.iter().zip(children) {
                o += w * eval_node(c, row)?;
            }
            Ok(kind.apply(*a, *b, o))
        }
    }
}

/// Growth limits and parameter boxes for trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Maximum computational layers (`td`).
    pub max_depth: usize,
    /// Maximum arguments of a computational node (`tn`).
    pub max_arity: usize,
    pub activations: Vec<Activation>,
    /// Probability that a child below the depth limit is grown as a leaf.
    pub grow_leaf_prob: f64,
    pub weight_range: (f64, f64),
    pub arg_range: (f64, f64),
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 4,
            max_arity: 5,
            activations: Activation::ALL.to_vec(),
            grow_leaf_prob: 0.5,
            weight_range: (-1.0, 1.0),
            arg_range: (0.0, 1.0),
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.max_arity < 2 {
            return Err(Error::Config("max_arity must be at least 2".into()));
        }
        if self.activations.is_empty() {
            return Err(Error::Config("activation set is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.grow_leaf_prob) {
            return Err(Error::Config("grow_leaf_prob outside [0, 1]".into()));
        }
        for (name, (lo, hi)) in [("weight_range", self.weight_range), ("arg_range", self.arg_range)] {
            if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                return Err(Error::Config(format!("{name} ({lo}, {hi}) is empty")));
            }
        }
        Ok(())
    }
}

/// Structural fingerprint used to decide whether two models are distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    pub size: usize,
    pub internal: usize,
    pub leaves: usize,
    pub features: BTreeSet<usize>,
    pub kinds: BTreeSet<Activation>,
}

/// Which parameter a slot of a [`ParamVector`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    Weight(usize),
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlot {
    /// Child-index path from the root to the owning computational node.
    pub path: Vec<usize>,
    pub kind: SlotKind,
}

/// Flat parameter vector: for every computational node in depth-first,
/// left-to-right order, its child weights followed by its active arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Vec<ParamSlot>,
}

impl ParamVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Search box of every slot.
    pub fn bounds(&self, cfg: &TreeConfig) -> Vec<(f64, f64)> {
        self.layout
            .iter()
            .map(|s| match s.kind {
                SlotKind::Weight(_) => cfg.weight_range,
                SlotKind::A | SlotKind::B => cfg.arg_range,
            })
            .collect()
    }
}

/// A neural tree. The root is always a computational node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeNode", into = "TreeNode")]
pub struct NeuralTree {
    root: TreeNode,
}

impl TryFrom<TreeNode> for NeuralTree {
    type Error = Error;

    fn try_from(root: TreeNode) -> Result<Self> {
        NeuralTree::new(root)
    }
}

impl From<NeuralTree> for TreeNode {
    fn from(t: NeuralTree) -> TreeNode {
        t.root
    }
}

impl NeuralTree {
    /// Wraps `root`, checking the arity/weight invariants of every node.
    pub fn new(root: TreeNode) -> Result<Self> {
        if root.is_leaf() {
            return Err(Error::InvalidTree("root must be a computational node".into()));
        }
        check_shape(&root)?;
        Ok(NeuralTree { root })
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn eval(&self, row: &[f64]) -> Result<f64> {
        eval_node(&self.root, row)
    }

    /// Outputs for every row of `ds`.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if let Some(m) = self.root.max_feature() {
            if m >= ds.n_features() {
                return Err(Error::FeatureOutOfRange {
                    index: m,
                    len: ds.n_features(),
                });
            }
        }
        Ok(ds.rows().map(|r| self.root.eval_unchecked(r)).collect())
    }

    /// Mean squared error against the (scaled) targets of `ds`.
    pub fn mse_on(&self, ds: &Dataset) -> Result<f64> {
        if ds.is_empty() {
            return Err(Error::Empty("dataset".into()));
        }
        if let Some(m) = self.root.max_feature() {
            if m >= ds.n_features() {
                return Err(Error::FeatureOutOfRange {
                    index: m,
                    len: ds.n_features(),
                });
            }
        }
        let sum: f64 = ds
            .rows()
            .zip(ds.targets())
            .map(|(r, &y)| {
                let e = y - self.root.eval_unchecked(r);
                e * e
            })
            .sum();
        let mse = sum / ds.len() as f64;
        Ok(if mse.is_finite() { mse } else { f64::MAX })
    }

    /// Node count excluding the root.
    pub fn size(&self) -> usize {
        self.root.node_count() - 1
    }

    pub fn internal_count(&self) -> usize {
        self.root.internal_count()
    }

    pub fn leaf_count(&self) -> usize {
        self.root.node_count() - self.root.internal_count()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn activation_kinds(&self) -> BTreeSet<Activation> {
        let mut out = BTreeSet::new();
        visit(&self.root, &mut |n| {
            if let TreeNode::Internal { kind, .. } = n {
                out.insert(*kind);
            }
        });
        out
    }

    /// Distinct activation kinds, root included.
    pub fn diversity_index(&self) -> usize {
        self.activation_kinds().len()
    }

    pub fn used_features(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        visit(&self.root, &mut |n| {
            if let TreeNode::Leaf { feature } = n {
                out.insert(*feature);
            }
        });
        out
    }

    pub fn signature(&self) -> Signature {
        Signature {
            size: self.size(),
            internal: self.internal_count(),
            leaves: self.leaf_count(),
            features: self.used_features(),
            kinds: self.activation_kinds(),
        }
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        visit(&self.root, &mut |node| {
            if let TreeNode::Internal { kind, weights, .. } = node {
                n += weights.len() + kind.arg_count();
            }
        });
        n
    }

    pub fn encode_params(&self) -> ParamVector {
        let mut pv = ParamVector {
            values: Vec::with_capacity(self.param_count()),
            layout: Vec::with_capacity(self.param_count()),
        };
        let mut path = Vec::new();
        encode_into(&self.root, &mut path, &mut pv);
        pv
    }

    /// Same topology with the slot values replaced from `values` in encode
    /// order.
    pub fn decode_params(&self, values: &[f64]) -> Result<NeuralTree> {
        let expected = self.param_count();
        if values.len() != expected {
            return Err(Error::ParamLength {
                expected,
                got: values.len(),
            });
        }
        let mut root = self.root.clone();
        let mut it = values.iter().copied();
        decode_into(&mut root, &mut it);
        Ok(NeuralTree { root })
    }

    /// Overwrites the slot values in place, in encode order.
    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if values.len() != expected {
            return Err(Error::ParamLength {
                expected,
                got: values.len(),
            });
        }
        decode_into(&mut self.root, &mut values.iter().copied());
        Ok(())
    }

    /// Preorder child-index paths of every node (the root is `[]`).
    pub fn node_paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        collect_paths(&self.root, &mut path, &mut out);
        out
    }

    pub fn node_at(&self, path: &[usize]) -> Option<&TreeNode> {
        path.iter()
            .try_fold(&self.root, |node, &i| node.children().get(i))
    }

    /// Replaces the subtree at `path`. Replacing the root requires a
    /// computational node.
    pub fn replace_at(&mut self, path: &[usize], node: TreeNode) -> Result<TreeNode> {
        if path.is_empty() && node.is_leaf() {
            return Err(Error::InvalidTree("root must be a computational node".into()));
        }
        let mut cur = &mut self.root;
        for &i in path {
            cur = match cur {
                TreeNode::Internal { children, .. } => children
                    .get_mut(i)
                    .ok_or_else(|| Error::InvalidTree(format!("no child {i} on path {path:?}")))?,
                TreeNode::Leaf { .. } => {
                    return Err(Error::InvalidTree(format!("path {path:?} passes through a leaf")))
                }
            };
        }
        Ok(std::mem::replace(cur, node))
    }

    pub(crate) fn root_mut(&mut self) -> &mut TreeNode {
        &mut self.root
    }

    /// Checks every invariant against `cfg` (and feature count when given).
    pub fn validate(&self, cfg: &TreeConfig, n_features: Option<usize>) -> Result<()> {
        check_shape(&self.root)?;
        if self.depth() > cfg.max_depth {
            return Err(Error::InvalidTree(format!(
                "depth {} exceeds {}",
                self.depth(),
                cfg.max_depth
            )));
        }
        let mut problem: Option<String> = None;
        let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        visit(&self.root, &mut |n| {
            if problem.is_some() {
                return;
            }
            match n {
                TreeNode::Leaf { feature } => {
                    if let Some(d) = n_features {
                        if *feature >= d {
                            problem = Some(format!("feature {feature} out of range for {d} features"));
                        }
                    }
                }
                TreeNode::Internal { a, b, weights, children, .. } => {
                    if children.len() > cfg.max_arity {
                        problem = Some(format!("arity {} exceeds {}", children.len(), cfg.max_arity));
                    } else if !within(*a, cfg.arg_range) || !within(*b, cfg.arg_range) {
                        problem = Some(format!("arguments ({a}, {b}) outside {:?}", cfg.arg_range));
                    } else if let Some(w) = weights.iter().find(|w| !within(**w, cfg.weight_range)) {
                        problem = Some(format!("weight {w} outside {:?}", cfg.weight_range));
                    }
                }
            }
        });
        problem.map_or(Ok(()), |p| Err(Error::InvalidTree(p)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn eval_tree(tree: &NeuralTree, row: &[f64]) -> Result<f64> {
    tree.eval(row)
}

pub fn tree_size(tree: &NeuralTree) -> usize {
    tree.size()
}

pub fn diversity_index(tree: &NeuralTree) -> usize {
    tree.diversity_index()
}

pub fn used_features(tree: &NeuralTree) -> BTreeSet<usize> {
    tree.used_features()
}

/// True iff none of the four distinctness conditions separates the trees:
/// size, (computational, leaf) counts, feature set and activation set.
pub fn tree_equal_signature(t1: &NeuralTree, t2: &NeuralTree) -> bool {
    t1.signature() == t2.signature()
}

fn check_shape(node: &TreeNode) -> Result<()> {
    if let TreeNode::Internal { weights, children, .. } = node {
        if children.len() < 2 {
            return Err(Error::InvalidTree(format!(
                "computational node with {} children",
                children.len()
            )));
        }
        if weights.len() != children.len() {
            return Err(Error::InvalidTree(format!(
                "{} weights for {} children",
                weights.len(),
                children.len()
            )));
        }
        children.iter().try_for_each(check_shape)?;
    }
    Ok(())
}

fn visit<'a>(node: &'a TreeNode, f: &mut impl FnMut(&'a TreeNode)) {
    f(node);
    for c in node.children() {
        visit(c, f);
    }
}

fn collect_paths(node: &TreeNode, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    out.push(path.clone());
    for (i, c) in node.children().iter().enumerate() {
        path.push(i);
        collect_paths(c, path, out);
        path.pop();
    }
}

fn encode_into(node: &TreeNode, path: &mut Vec<usize>, pv: &mut ParamVector) {
    if let TreeNode::Internal {
        kind,
        a,
        b,
        weights,
        children,
    } = node
    {
        for (j, w) in weights.iter().enumerate() {
            pv.values.push(*w);
            pv.layout.push(ParamSlot {
                path: path.clone(),
                kind: SlotKind::Weight(j),
            });
        }
        let args = [(*a, SlotKind::A), (*b, SlotKind::B)];
        for (v, slot) in args.into_iter().take(kind.arg_count()) {
            pv.values.push(v);
            pv.layout.push(ParamSlot {
                path: path.clone(),
                kind: slot,
            });
        }
        for (i, c) in children.iter().enumerate() {
            path.push(i);
            encode_into(c, path, pv);
            path.pop();
        }
    }
}

fn decode_into(node: &mut TreeNode, it: &mut impl Iterator<Item = f64>) {
    if let TreeNode::Internal {
        kind,
        a,
        b,
        weights,
        children,
    } = node
    {
        for w in weights.iter_mut() {
            *w = it.next().expect("length checked");
        }
        let n_args = kind.arg_count();
        if n_args >= 1 {
            *a = it.next().expect("length checked");
        }
        if n_args >= 2 {
            *b = it.next().expect("length checked");
        }
        for c in children.iter_mut() {
            decode_into(c, it);
        }
    }
}

pub fn random_leaf<R: Rng + ?Sized>(n_features: usize, rng: &mut R) -> TreeNode {
    TreeNode::Leaf {
        feature: rng.random_range(0..n_features),
    }
}

/// Computational node with `2..=tn` leaf children.
pub fn random_computational<R: Rng + ?Sized>(n_features: usize, cfg: &TreeConfig, rng: &mut R) -> TreeNode {
    grow(1, 1, n_features, cfg, rng)
}

/// Random computational subtree rooted at layer `level` (the root is layer 1).
pub fn random_subtree<R: Rng + ?Sized>(level: usize, n_features: usize, cfg: &TreeConfig, rng: &mut R) -> TreeNode {
    grow(level, cfg.max_depth, n_features, cfg, rng)
}

fn grow<R: Rng + ?Sized>(level: usize, max_depth: usize, n_features: usize, cfg: &TreeConfig, rng: &mut R) -> TreeNode {
    let kind = cfg.activations[rng.random_range(0..cfg.activations.len())];
    let arity = rng.random_range(2..=cfg.max_arity);
    let a = rng.random_range(cfg.arg_range.0..=cfg.arg_range.1);
    let b = rng.random_range(cfg.arg_range.0..=cfg.arg_range.1);
    let weights = (0..arity)
        .map(|_| rng.random_range(cfg.weight_range.0..=cfg.weight_range.1))
        .collect();
    let children = (0..arity)
        .map(|_| {
            if level >= max_depth || rng.random_bool(cfg.grow_leaf_prob) {
                random_leaf(n_features, rng)
            } else {
                grow(level + 1, max_depth, n_features, cfg, rng)
            }
        })
        .collect();
    TreeNode::Internal {
        kind,
        a,
        b,
        weights,
        children,
    }
}

/// Random legal tree over `n_features` inputs.
pub fn random_tree<R: Rng + ?Sized>(n_features: usize, cfg: &TreeConfig, rng: &mut R) -> NeuralTree {
    assert!(n_features >= 1, "trees need at least one input feature");
    NeuralTree {
        root: grow(1, cfg.max_depth, n_features, cfg, rng),
    }
}

/// Turns every computational node below layer `max_depth` into a random
/// leaf. Returns the number of nodes replaced.
pub fn repair_depth<R: Rng + ?Sized>(tree: &mut NeuralTree, max_depth: usize, n_features: usize, rng: &mut R) -> usize {
    fn walk<R: Rng + ?Sized>(node: &mut TreeNode, level: usize, max_depth: usize, n: usize, rng: &mut R) -> usize {
        if level > max_depth && !node.is_leaf() {
            *node = random_leaf(n, rng);
            return 1;
        }
        match node {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { children, .. } => children
                .iter_mut()
                .map(|c| walk(c, level + 1, max_depth, n, rng))
                .sum(),
        }
    }
    walk(tree.root_mut(), 1, max_depth, n_features, rng)
}
