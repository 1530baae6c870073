//! Tree ensembles (bootstrap random forests and extremely randomized trees)
//! and the per-instance view the attention layer works on.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::rng;
use crate::tree::{check_input, default_max_features, fit_tree, GrowthCondition, Splitter, Tree, TreeConfig};

pub const FOREST_FORMAT: &str = "abrf-forest";
pub const FOREST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    /// CART trees on bootstrap samples.
    Rf,
    /// Random-threshold trees on the full sample.
    Ert,
}

impl std::str::FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" => Ok(Ensemble::Rf),
            "ert" => Ok(Ensemble::Ert),
            other => Err(Error::Config(format!("unknown ensemble {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub ensemble: Ensemble,
    pub condition: GrowthCondition,
    /// `None` selects [`default_max_features`].
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl ForestConfig {
    pub fn new(n_trees: usize, ensemble: Ensemble, condition: GrowthCondition, seed: u64) -> Self {
        Self {
            n_trees,
            ensemble,
            condition,
            max_features: None,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    format: String,
    version: u32,
    config: ForestConfig,
    task: Task,
    n_features: usize,
    n_classes: usize,
    trees: Vec<Tree>,
}

pub fn fit_forest(ds: &Dataset, config: &ForestConfig) -> Result<Forest> {
    if config.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    config.condition.validate()?;
    let n = ds.n_samples();
    let tree_config = TreeConfig {
        condition: config.condition,
        splitter: match config.ensemble {
            Ensemble::Rf => Splitter::Cart,
            Ensemble::Ert => Splitter::Ert,
        },
        max_features: config
            .max_features
            .unwrap_or_else(|| default_max_features(ds.task(), ds.n_features())),
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::rng(rng::derive(config.seed, k as u64));
            let sample = match config.ensemble {
                Ensemble::Rf => bootstrap(n, &mut rng),
                Ensemble::Ert => (0..n).collect(),
            };
            fit_tree(ds, &sample, &tree_config, rng.random())
        })
        .collect::<Result<Vec<_>>>()?;
    let forest = Forest {
        format: FOREST_FORMAT.into(),
        version: FOREST_VERSION,
        config: *config,
        task: ds.task(),
        n_features: ds.n_features(),
        n_classes: ds.n_classes(),
        trees,
    };
    debug_assert!(forest.check_growth().is_ok(), "{:?}", forest.check_growth());
    Ok(forest)
}

/// `n` draws with replacement from `0..n`, sorted.
pub fn bootstrap(n: usize, rng: &mut rng::Rng) -> Vec<usize> {
    let mut s: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    s.sort_unstable();
    s
}

#[derive(Clone, Debug, PartialEq)]
pub enum Prediction {
    Value(f64),
    Class { dist: Vec<f64>, label: usize },
}

impl Prediction {
    pub fn value(&self) -> Option<f64> {
        match self {
            Prediction::Value(v) => Some(*v),
            Prediction::Class { .. } => None,
        }
    }

    pub fn label(&self) -> Option<usize> {
        match self {
            Prediction::Value(_) => None,
            Prediction::Class { label, .. } => Some(*label),
        }
    }
}

/// Per-tree outputs for one leaf set: `B_k(x)` or `p_k(x)`.
#[derive(Clone, Debug, PartialEq)]
pub enum PanelValues {
    Regression(Vec<f64>),
    /// Row-major `T × C`.
    Classification { dists: Vec<f64>, n_classes: usize },
}

/// Everything the attention weights need about one instance: for each tree
/// the leaf mean vector `A_k(x)`, the squared distance to it, and the leaf
/// output.
#[derive(Clone, Debug, PartialEq)]
pub struct InstancePanel {
    /// `‖(x − A_k) ∘ z‖²`, or `‖x − A_k‖²` when no feature weights were given.
    pub distances: Vec<f64>,
    /// Row-major `T × m`.
    pub means: Vec<f64>,
    /// Row-major `T × m` of `(x − A_k)²`, for re-weighting features later.
    pub sq_deltas: Vec<f64>,
    pub values: PanelValues,
    pub n_features: usize,
}

impl InstancePanel {
    pub fn n_trees(&self) -> usize {
        self.distances.len()
    }

    pub fn mean_vector(&self, k: usize) -> &[f64] {
        &self.means[k * self.n_features..(k + 1) * self.n_features]
    }

    pub fn sq_delta(&self, k: usize) -> &[f64] {
        &self.sq_deltas[k * self.n_features..(k + 1) * self.n_features]
    }

    /// `‖(x − A_k) ∘ z‖²` for every tree.
    pub fn weighted_distances(&self, z: &[f64]) -> Vec<f64> {
        self.sq_deltas
            .chunks_exact(self.n_features)
            .map(|sq| weighted_sq_norm(sq, z))
            .collect()
    }

    pub fn tree_values(&self) -> Option<&[f64]> {
        match &self.values {
            PanelValues::Regression(b) => Some(b),
            PanelValues::Classification { .. } => None,
        }
    }

    pub fn class_dist(&self, k: usize) -> Option<&[f64]> {
        match &self.values {
            PanelValues::Regression(_) => None,
            PanelValues::Classification { dists, n_classes } => {
                Some(&dists[k * n_classes..(k + 1) * n_classes])
            }
        }
    }
}

pub(crate) fn weighted_sq_norm(sq_delta: &[f64], z: &[f64]) -> f64 {
    sq_delta.iter().zip(z).map(|(d, w)| d * w * w).sum()
}

impl Forest {
    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Builds a forest from already fitted trees, e.g. hand-made fixtures.
    pub fn from_trees(config: ForestConfig, trees: Vec<Tree>) -> Result<Self> {
        let first = trees
            .first()
            .ok_or_else(|| Error::Config("a forest needs at least one tree".into()))?;
        let (task, m, c) = (first.task(), first.n_features(), first.n_classes());
        if trees
            .iter()
            .any(|t| t.task() != task || t.n_features() != m || t.n_classes() != c)
        {
            return Err(Error::Config("trees disagree on task or dimensions".into()));
        }
        Ok(Self {
            format: FOREST_FORMAT.into(),
            version: FOREST_VERSION,
            config,
            task,
            n_features: m,
            n_classes: c,
            trees,
        })
    }

    pub fn panel(&self, x: &[f64], z: Option<&[f64]>) -> Result<InstancePanel> {
        check_input(x, self.n_features)?;
        if let Some(z) = z {
            if z.len() != self.n_features {
                return Err(Error::Dimension {
                    expected: self.n_features,
                    got: z.len(),
                });
            }
        }
        Ok(self.panel_unchecked(x, z))
    }

    pub(crate) fn panel_unchecked(&self, x: &[f64], z: Option<&[f64]>) -> InstancePanel {
        let t = self.trees.len();
        let m = self.n_features;
        let mut distances = Vec::with_capacity(t);
        let mut means = Vec::with_capacity(t * m);
        let mut sq_deltas = Vec::with_capacity(t * m);
        let mut reg = Vec::new();
        let mut cls = Vec::new();
        for tree in &self.trees {
            let leaf = &tree.leaves()[tree.leaf_index(x)];
            means.extend_from_slice(&leaf.mean_vector);
            let start = sq_deltas.len();
            sq_deltas.extend(x.iter().zip(&leaf.mean_vector).map(|(a, b)| (a - b) * (a - b)));
            let sq = &sq_deltas[start..];
            distances.push(match z {
                Some(z) => weighted_sq_norm(sq, z),
                None => sq.iter().sum(),
            });
            match &leaf.value {
                crate::tree::LeafValue::Mean(b) => reg.push(*b),
                crate::tree::LeafValue::Distribution(p) => cls.extend_from_slice(p),
            }
        }
        let values = match self.task {
            Task::Regression => PanelValues::Regression(reg),
            Task::Classification => PanelValues::Classification {
                dists: cls,
                n_classes: self.n_classes,
            },
        };
        InstancePanel {
            distances,
            means,
            sq_deltas,
            values,
            n_features: m,
        }
    }

    /// Panels for every row of `ds`.
    pub fn panels(&self, ds: &Dataset) -> Result<Vec<InstancePanel>> {
        if ds.n_features() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: ds.n_features(),
            });
        }
        Ok(ds.rows().map(|x| self.panel_unchecked(x, None)).collect())
    }

    /// Plain average of the tree outputs.
    pub fn predict_baseline(&self, x: &[f64]) -> Result<Prediction> {
        let p = self.panel(x, None)?;
        let uniform = vec![1.0 / self.n_trees() as f64; self.n_trees()];
        Ok(crate::attention::predict(&uniform, &p))
    }

    /// Verifies the growth condition on every leaf. A leaf may be smaller
    /// than the minimum size only when it is the root of a tree whose sample
    /// was already too small to split.
    pub fn check_growth(&self) -> Result<()> {
        for (k, tree) in self.trees.iter().enumerate() {
            let sample: usize = tree.leaves().iter().map(|l| l.members.len()).sum();
            for leaf in tree.leaves() {
                let ok = match self.config.condition {
                    GrowthCondition::MaxDepth(d) => leaf.depth <= d,
                    GrowthCondition::MinLeaf(q) => leaf.members.len() >= q.min(sample),
                };
                if !ok {
                    return Err(Error::InvalidDataset(format!(
                        "tree {k} has a leaf of depth {} with {} members under {}",
                        leaf.depth,
                        leaf.members.len(),
                        self.config.condition
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Forest = serde_json::from_str(s)?;
        if f.format != FOREST_FORMAT || f.version != FOREST_VERSION {
            return Err(Error::Config(format!(
                "unsupported forest document {} v{}",
                f.format, f.version
            )));
        }
        Ok(f)
    }
}
