//! Decision-tree induction for regression and classification.
//!
//! Leaves keep the indices of the training instances that reached them
//! together with the mean feature vector, the mean target (regression) or the
//! class frequency vector (classification). The attention layer consumes
//! these statistics directly.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Targets, Task};
use crate::error::{Error, Result};
use crate::rng;

/// Stopping rule for tree growth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthCondition {
    /// No leaf deeper than `d` (the root has depth 0).
    MaxDepth(usize),
    /// Every leaf holds at least `q` instances.
    MinLeaf(usize),
}

impl GrowthCondition {
    /// Shallow trees of depth at most 2.
    pub const CONDITION_1: GrowthCondition = GrowthCondition::MaxDepth(2);
    /// At least 10 instances per leaf.
    pub const CONDITION_2: GrowthCondition = GrowthCondition::MinLeaf(10);

    pub fn validate(self) -> Result<()> {
        match self {
            GrowthCondition::MaxDepth(0) | GrowthCondition::MinLeaf(0) => Err(Error::Config(
                format!("growth condition {self:?} must be at least 1"),
            )),
            _ => Ok(()),
        }
    }

    fn min_leaf(self) -> usize {
        match self {
            GrowthCondition::MinLeaf(q) => q,
            GrowthCondition::MaxDepth(_) => 1,
        }
    }

    fn max_depth(self) -> usize {
        match self {
            GrowthCondition::MaxDepth(d) => d,
            GrowthCondition::MinLeaf(_) => usize::MAX,
        }
    }
}

/// Accepts `1`, `2`, `depth:<d>` or `min-leaf:<q>`.
impl std::str::FromStr for GrowthCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parsed = match s.trim().to_ascii_lowercase().as_str() {
            "1" => Some(Self::CONDITION_1),
            "2" => Some(Self::CONDITION_2),
            other => other.split_once(':').and_then(|(kind, n)| {
                let n: usize = n.trim().parse().ok()?;
                match kind.trim() {
                    "depth" | "max-depth" | "max_depth" => Some(Self::MaxDepth(n)),
                    "min-leaf" | "min_leaf" | "leaf" => Some(Self::MinLeaf(n)),
                    _ => None,
                }
            }),
        };
        let c = parsed.ok_or_else(|| Error::Config(format!("unknown growth condition {s:?}")))?;
        c.validate()?;
        Ok(c)
    }
}

impl std::fmt::Display for GrowthCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::MaxDepth(d) => write!(f, "depth:{d}"),
            Self::MinLeaf(q) => write!(f, "min-leaf:{q}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitter {
    /// Exhaustive search over midpoints of sorted distinct values.
    Cart,
    /// One uniformly drawn threshold per candidate feature.
    Ert,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafValue {
    Mean(f64),
    Distribution(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafStats {
    /// Training indices (into the dataset the tree was fitted on) that fell
    /// into this leaf. Bootstrap duplicates are kept.
    pub members: Vec<usize>,
    pub mean_vector: Vec<f64>,
    pub value: LeafValue,
    pub depth: usize,
}

impl LeafStats {
    pub fn mean_target(&self) -> Option<f64> {
        match self.value {
            LeafValue::Mean(v) => Some(v),
            LeafValue::Distribution(_) => None,
        }
    }

    pub fn class_dist(&self) -> Option<&[f64]> {
        match &self.value {
            LeafValue::Mean(_) => None,
            LeafValue::Distribution(p) => Some(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Instances with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub condition: GrowthCondition,
    pub splitter: Splitter,
    pub max_features: usize,
}

/// Conventional feature-subsample size: ⌈m/3⌉ for regression, ⌈√m⌉ for
/// classification.
pub fn default_max_features(task: Task, m: usize) -> usize {
    let k = match task {
        Task::Regression => m.div_ceil(3),
        Task::Classification => (m as f64).sqrt().ceil() as usize,
    };
    k.clamp(1, m.max(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    leaves: Vec<LeafStats>,
    n_features: usize,
    task: Task,
    n_classes: usize,
    splitter: Splitter,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[LeafStats] {
        &self.leaves
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn splitter(&self) -> Splitter {
        self.splitter
    }

    pub fn depth(&self) -> usize {
        self.leaves.iter().map(|l| l.depth).max().unwrap_or(0)
    }

    /// Index of the leaf reached by `x`. `x` must have `n_features` finite
    /// entries; use [`Tree::route`] for a checked call.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut node = 0;
        loop {
            match self.nodes[node] {
                Node::Leaf(leaf) => return leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn route(&self, x: &[f64]) -> Result<&LeafStats> {
        check_input(x, self.n_features)?;
        Ok(&self.leaves[self.leaf_index(x)])
    }
}

pub(crate) fn check_input(x: &[f64], m: usize) -> Result<()> {
    if x.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: x.len(),
        });
    }
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    Ok(())
}

/// Grows one tree on `sample` (indices into `ds`, duplicates allowed).
pub fn fit_tree(ds: &Dataset, sample: &[usize], config: &TreeConfig, seed: u64) -> Result<Tree> {
    if sample.is_empty() {
        return Err(Error::InvalidDataset("empty training sample".into()));
    }
    config.condition.validate()?;
    let m = ds.n_features();
    if config.max_features == 0 || config.max_features > m {
        return Err(Error::Config(format!(
            "max_features must lie in [1, {m}], got {}",
            config.max_features
        )));
    }
    let mut builder = Builder {
        ds,
        config,
        rng: rng::rng(seed),
        nodes: Vec::new(),
        leaves: Vec::new(),
        target: TargetView::new(ds.targets()),
    };
    builder.grow(sample.to_vec());
    Ok(Tree {
        nodes: builder.nodes,
        leaves: builder.leaves,
        n_features: m,
        task: ds.task(),
        n_classes: ds.n_classes(),
        splitter: config.splitter,
    })
}

enum TargetView<'a> {
    Real(&'a [f64]),
    Class { labels: &'a [usize], n_classes: usize },
}

impl<'a> TargetView<'a> {
    fn new(t: &'a Targets) -> Self {
        match t {
            Targets::Regression(y) => TargetView::Real(y),
            Targets::Classification { labels, classes } => TargetView::Class {
                labels,
                n_classes: classes.len(),
            },
        }
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        match self {
            TargetView::Real(y) => idx.iter().all(|&i| y[i] == y[idx[0]]),
            TargetView::Class { labels, .. } => idx.iter().all(|&i| labels[i] == labels[idx[0]]),
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Lower impurity wins; ties go to the lower feature index, then the lower
    /// threshold.
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                (self.impurity, self.feature, self.threshold) < (o.impurity, o.feature, o.threshold)
            }
        }
    }
}

struct Builder<'a> {
    ds: &'a Dataset,
    config: &'a TreeConfig,
    rng: rng::Rng,
    nodes: Vec<Node>,
    leaves: Vec<LeafStats>,
    target: TargetView<'a>,
}

impl Builder<'_> {
    fn grow(&mut self, root: Vec<usize>) {
        // (node slot, members, depth)
        let mut stack = vec![(0usize, root, 0usize)];
        self.nodes.push(Node::Leaf(usize::MAX));
        while let Some((slot, idx, depth)) = stack.pop() {
            match self.best_split(&idx, depth) {
                Some(c) => {
                    let (left, right): (Vec<usize>, Vec<usize>) = idx
                        .iter()
                        .partition(|&&i| self.ds.row(i)[c.feature] <= c.threshold);
                    let l = self.nodes.len();
                    self.nodes.push(Node::Leaf(usize::MAX));
                    self.nodes.push(Node::Leaf(usize::MAX));
                    self.nodes[slot] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: l,
                        right: l + 1,
                    };
                    // Right is pushed first so the left subtree is built first.
                    stack.push((l + 1, right, depth + 1));
                    stack.push((l, left, depth + 1));
                }
                None => {
                    self.nodes[slot] = Node::Leaf(self.leaves.len());
                    let stats = self.leaf_stats(idx, depth);
                    self.leaves.push(stats);
                }
            }
        }
    }

    fn best_split(&mut self, idx: &[usize], depth: usize) -> Option<Candidate> {
        let q = self.config.condition.min_leaf();
        if depth >= self.config.condition.max_depth() || idx.len() < 2 * q.max(1) {
            return None;
        }
        if self.target.is_pure(idx) {
            return None;
        }
        let mut features: Vec<usize> = (0..self.ds.n_features()).collect();
        features.shuffle(&mut self.rng);

        let mut best: Option<Candidate> = None;
        let mut visited = 0;
        let mut column = Vec::with_capacity(idx.len());
        for f in features {
            if visited == self.config.max_features {
                break;
            }
            column.clear();
            column.extend(idx.iter().map(|&i| (self.ds.row(i)[f], i)));
            let (lo, hi) = column
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(v, _)| {
                    (lo.min(v), hi.max(v))
                });
            // Constant features do not count towards max_features.
            if lo == hi {
                continue;
            }
            visited += 1;
            let cand = match self.config.splitter {
                Splitter::Cart => self.cart_split(f, &mut column, q),
                Splitter::Ert => {
                    let u: f64 = self.rng.random();
                    let t = lo + u * (hi - lo);
                    self.threshold_split(f, &column, t, q)
                }
            };
            if let Some(c) = cand {
                if c.beats(&best) {
                    best = Some(c);
                }
            }
        }
        best
    }

    /// Scans all midpoints of `column` (value, index) for feature `f`.
    fn cart_split(&self, f: usize, column: &mut [(f64, usize)], q: usize) -> Option<Candidate> {
        column.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = column.len();
        let mut best: Option<Candidate> = None;
        let mut consider = |pos: usize, impurity: f64| {
            let (a, b) = (column[pos].0, column[pos + 1].0);
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            let c = Candidate {
                impurity,
                feature: f,
                threshold,
            };
            if c.beats(&best) {
                best = Some(c);
            }
        };
        match &self.target {
            TargetView::Real(y) => {
                let shift = y[column[0].1];
                let (tot, tot2) = column.iter().fold((0.0, 0.0), |(s, s2), &(_, i)| {
                    let v = y[i] - shift;
                    (s + v, s2 + v * v)
                });
                let (mut s, mut s2) = (0.0, 0.0);
                for pos in 0..n - 1 {
                    let v = y[column[pos].1] - shift;
                    s += v;
                    s2 += v * v;
                    let nl = pos + 1;
                    let nr = n - nl;
                    if column[pos].0 == column[pos + 1].0 || nl < q || nr < q {
                        continue;
                    }
                    let sse_l = s2 - s * s / nl as f64;
                    let sse_r = (tot2 - s2) - (tot - s) * (tot - s) / nr as f64;
                    consider(pos, sse_l + sse_r);
                }
            }
            TargetView::Class { labels, n_classes } => {
                let mut right = vec![0usize; *n_classes];
                for &(_, i) in column.iter() {
                    right[labels[i]] += 1;
                }
                let mut left = vec![0usize; *n_classes];
                for pos in 0..n - 1 {
                    let c = labels[column[pos].1];
                    left[c] += 1;
                    right[c] -= 1;
                    let nl = pos + 1;
                    let nr = n - nl;
                    if column[pos].0 == column[pos + 1].0 || nl < q || nr < q {
                        continue;
                    }
                    consider(pos, weighted_gini(&left, nl) + weighted_gini(&right, nr));
                }
            }
        }
        best
    }

    fn threshold_split(
        &self,
        f: usize,
        column: &[(f64, usize)],
        threshold: f64,
        q: usize,
    ) -> Option<Candidate> {
        let nl = column.iter().filter(|(v, _)| *v <= threshold).count();
        let nr = column.len() - nl;
        if nl < q.max(1) || nr < q.max(1) {
            return None;
        }
        let impurity = match &self.target {
            TargetView::Real(y) => {
                let mut acc = [(0.0, 0.0, 0usize); 2];
                let shift = y[column[0].1];
                for &(v, i) in column {
                    let side = usize::from(v > threshold);
                    let t = y[i] - shift;
                    acc[side].0 += t;
                    acc[side].1 += t * t;
                    acc[side].2 += 1;
                }
                acc.iter().map(|(s, s2, k)| s2 - s * s / *k as f64).sum()
            }
            TargetView::Class { labels, n_classes } => {
                let mut counts = [vec![0usize; *n_classes], vec![0usize; *n_classes]];
                for &(v, i) in column {
                    counts[usize::from(v > threshold)][labels[i]] += 1;
                }
                weighted_gini(&counts[0], nl) + weighted_gini(&counts[1], nr)
            }
        };
        Some(Candidate {
            impurity,
            feature: f,
            threshold,
        })
    }

    fn leaf_stats(&self, members: Vec<usize>, depth: usize) -> LeafStats {
        let m = self.ds.n_features();
        let k = members.len() as f64;
        let mut mean_vector = vec![0.0; m];
        for &i in &members {
            for (acc, v) in mean_vector.iter_mut().zip(self.ds.row(i)) {
                *acc += v;
            }
        }
        for v in &mut mean_vector {
            *v /= k;
        }
        let value = match &self.target {
            TargetView::Real(y) => LeafValue::Mean(members.iter().map(|&i| y[i]).sum::<f64>() / k),
            TargetView::Class { labels, n_classes } => {
                let mut counts = vec![0usize; *n_classes];
                for &i in &members {
                    counts[labels[i]] += 1;
                }
                LeafValue::Distribution(counts.iter().map(|&c| c as f64 / k).collect())
            }
        };
        LeafStats {
            members,
            mean_vector,
            value,
            depth,
        }
    }
}

/// `n · Gini(counts)`.
fn weighted_gini(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    n - counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n
}
