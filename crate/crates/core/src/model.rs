//! Model variants on top of a fitted forest: how each one is trained and how
//! it turns an instance panel into tree weights.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::attention::{self, softmax_scores, AttentionParams, SoftmaxSign};
use crate::data::{Dataset, Targets, Task};
use crate::error::{Error, Result};
use crate::forest::{Forest, InstancePanel, PanelValues, Prediction};
use crate::metrics::{self, F1Average};
use crate::solver::gradient::{train_gradient, GradConfig, GradModel, TargetRef};
use crate::solver::lp::{solve_lp, LpInstance, LpOptions};
use crate::solver::qp::{gram_matrix, solve_qp_gram, QpGram, QpInstance, QpOptions, QpSolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "softmax")]
    Softmax,
    #[serde(rename = "abrf1-qp")]
    Abrf1Qp,
    #[serde(rename = "abrf1-lp")]
    Abrf1Lp,
    #[serde(rename = "abrf2")]
    Abrf2,
    #[serde(rename = "abrf3")]
    Abrf3,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Baseline,
        ModelKind::Softmax,
        ModelKind::Abrf1Qp,
        ModelKind::Abrf1Lp,
        ModelKind::Abrf2,
        ModelKind::Abrf3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Softmax => "softmax",
            ModelKind::Abrf1Qp => "abrf1-qp",
            ModelKind::Abrf1Lp => "abrf1-lp",
            ModelKind::Abrf2 => "abrf2",
            ModelKind::Abrf3 => "abrf3",
        }
    }

    /// Whether ε is a tuning parameter of this model.
    pub fn uses_epsilon(self) -> bool {
        matches!(self, ModelKind::Abrf1Qp | ModelKind::Abrf1Lp | ModelKind::Abrf3)
    }

    /// Whether τ is a tuning parameter of this model.
    pub fn uses_tau(self) -> bool {
        matches!(self, ModelKind::Softmax | ModelKind::Abrf1Qp | ModelKind::Abrf1Lp)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        let s = match s.as_str() {
            "rf" | "ert" => "baseline",
            "abrf1" | "abrf-1" => "abrf1-qp",
            "abrf-2" => "abrf2",
            "abrf-3" => "abrf3",
            other => other,
        };
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }
}

/// A forest's view of a dataset: one panel per instance plus the stacked
/// per-tree value matrix used by the contamination fits.
///
/// For classification every instance contributes `C` stacked rows, one per
/// class, holding `p_k(x, c)` against the one-hot target.
pub struct PanelSet {
    panels: Vec<InstancePanel>,
    targets: Targets,
    n_trees: usize,
    n_features: usize,
    /// Row-major `n' × T`.
    stacked: Vec<f64>,
    truth: Vec<f64>,
    gram: OnceLock<Vec<f64>>,
}

impl PanelSet {
    pub fn new(forest: &Forest, ds: &Dataset) -> Result<Self> {
        if ds.task() != forest.task() {
            return Err(Error::Config(format!(
                "dataset task {:?} does not match forest task {:?}",
                ds.task(),
                forest.task()
            )));
        }
        if forest.task() == Task::Classification && ds.n_classes() != forest.n_classes() {
            return Err(Error::Config(format!(
                "dataset has {} classes, forest was trained on {}",
                ds.n_classes(),
                forest.n_classes()
            )));
        }
        Self::from_panels(forest.panels(ds)?, ds.targets().clone())
    }

    pub fn from_panels(panels: Vec<InstancePanel>, targets: Targets) -> Result<Self> {
        let Some(first) = panels.first() else {
            return Err(Error::InvalidDataset("no instances".into()));
        };
        if targets.len() != panels.len() {
            return Err(Error::Dimension {
                expected: panels.len(),
                got: targets.len(),
            });
        }
        let t = first.n_trees();
        let m = first.n_features;
        let mut stacked = Vec::new();
        let mut truth = Vec::new();
        for (s, p) in panels.iter().enumerate() {
            if p.n_trees() != t || p.n_features != m {
                return Err(Error::Config("panels disagree on the forest shape".into()));
            }
            match (&targets, &p.values) {
                (Targets::Regression(y), PanelValues::Regression(b)) => {
                    stacked.extend_from_slice(b);
                    truth.push(y[s]);
                }
                (Targets::Classification { labels, .. }, PanelValues::Classification { dists, n_classes }) => {
                    for c in 0..*n_classes {
                        stacked.extend(dists.chunks_exact(*n_classes).map(|row| row[c]));
                        truth.push(if labels[s] == c { 1.0 } else { 0.0 });
                    }
                }
                _ => return Err(Error::Config("targets do not match the forest task".into())),
            }
        }
        Ok(Self {
            panels,
            targets,
            n_trees: t,
            n_features: m,
            stacked,
            truth,
            gram: OnceLock::new(),
        })
    }

    pub fn panels(&self) -> &[InstancePanel] {
        &self.panels
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn task(&self) -> Task {
        self.targets.task()
    }

    pub fn target_ref(&self) -> TargetRef<'_> {
        match &self.targets {
            Targets::Regression(y) => TargetRef::Regression(y),
            Targets::Classification { labels, classes } => TargetRef::Classification {
                labels,
                n_classes: classes.len(),
            },
        }
    }

    /// Stacked values `V` (row-major `n' × T`).
    pub fn stacked_values(&self) -> &[f64] {
        &self.stacked
    }

    /// `VᵀV`, computed on first use.
    pub fn gram(&self) -> &[f64] {
        self.gram.get_or_init(|| gram_matrix(&self.stacked, self.n_trees))
    }

    /// `Σ_k D_k(τ) V[s,k]` for every stacked row.
    pub fn softmax_fit(&self, tau: f64, sign: SoftmaxSign) -> Vec<f64> {
        let t = self.n_trees;
        let rows_per = self.stacked.len() / t / self.panels.len();
        let mut out = Vec::with_capacity(self.truth.len());
        for (s, p) in self.panels.iter().enumerate() {
            let d = softmax_scores(&p.distances, tau, sign);
            for r in 0..rows_per {
                let row = &self.stacked[(s * rows_per + r) * t..(s * rows_per + r + 1) * t];
                out.push(row.iter().zip(&d).map(|(a, b)| a * b).sum());
            }
        }
        out
    }

    /// Residual `r = h − (1 − ε) Σ_k D_k V[·,k]`.
    pub fn residual(&self, epsilon: f64, tau: f64, sign: SoftmaxSign) -> Vec<f64> {
        self.softmax_fit(tau, sign)
            .iter()
            .zip(&self.truth)
            .map(|(f, h)| h - (1.0 - epsilon) * f)
            .collect()
    }

    pub fn qp_instance(&self, epsilon: f64, tau: f64, sign: SoftmaxSign) -> Result<QpInstance> {
        QpInstance::new(self.stacked.clone(), self.residual(epsilon, tau, sign), self.n_trees, epsilon)
    }

    pub fn lp_instance(&self, epsilon: f64, tau: f64, sign: SoftmaxSign) -> Result<LpInstance> {
        LpInstance::new(self.residual(epsilon, tau, sign), self.stacked.clone(), self.n_trees, epsilon)
    }

    /// The quadratic program in Gram form, reusing the cached `VᵀV`.
    pub fn qp_gram(&self, epsilon: f64, tau: f64, sign: SoftmaxSign) -> QpGram {
        let t = self.n_trees;
        let r = self.residual(epsilon, tau, sign);
        let mut vtr = vec![0.0; t];
        for (row, rs) in self.stacked.chunks_exact(t).zip(&r) {
            for (acc, v) in vtr.iter_mut().zip(row) {
                *acc += v * rs;
            }
        }
        QpGram {
            gram: self.gram().to_vec(),
            vtr,
            rtr: r.iter().map(|v| v * v).sum(),
            n_trees: t,
            epsilon,
        }
    }
}

/// Least-squares contamination fit for either task; classification rows are
/// stacked over classes against one-hot targets.
pub fn solve_qp_contamination(
    set: &PanelSet,
    epsilon: f64,
    tau: f64,
    sign: SoftmaxSign,
    opts: &QpOptions,
) -> Result<QpSolution> {
    solve_qp_gram(&set.qp_gram(epsilon, tau, sign), opts)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub sign: SoftmaxSign,
    pub qp: QpOptions,
    pub lp_max_pivots: Option<usize>,
    pub grad: GradConfig,
    pub f1_average: F1Average,
}

/// Trains the parameters of `kind` for fixed `(ε, τ)`. Parameters a model
/// does not use are left uniform.
pub fn train_params(kind: ModelKind, set: &PanelSet, epsilon: f64, tau: f64, opts: &TrainOptions) -> Result<AttentionParams> {
    let mut params = AttentionParams::uniform(set.n_trees(), set.n_features());
    params.sign = opts.sign;
    match kind {
        ModelKind::Baseline => {}
        ModelKind::Softmax => params.tau = tau,
        ModelKind::Abrf1Qp => {
            params.epsilon = epsilon;
            params.tau = tau;
            params.w = solve_qp_contamination(set, epsilon, tau, opts.sign, &opts.qp)?.w;
        }
        ModelKind::Abrf1Lp => {
            params.epsilon = epsilon;
            params.tau = tau;
            let lp = LpOptions {
                max_pivots: opts.lp_max_pivots.unwrap_or(LpOptions::default().max_pivots),
            };
            params.w = solve_lp(&set.lp_instance(epsilon, tau, opts.sign)?, &lp)?.w;
        }
        ModelKind::Abrf2 => {
            params = train_gradient(set.panels(), set.target_ref(), &params, &opts.grad, GradModel::Abrf2)?.params;
        }
        ModelKind::Abrf3 => {
            params.epsilon = epsilon;
            params = train_gradient(set.panels(), set.target_ref(), &params, &opts.grad, GradModel::Abrf3)?.params;
        }
    }
    Ok(params)
}

/// Tree weights `α` for one instance.
pub fn attention_weights(kind: ModelKind, params: &AttentionParams, panel: &InstancePanel) -> Vec<f64> {
    let t = panel.n_trees();
    match kind {
        ModelKind::Baseline => vec![1.0 / t as f64; t],
        ModelKind::Softmax => softmax_scores(&panel.distances, params.tau, params.sign),
        ModelKind::Abrf1Qp | ModelKind::Abrf1Lp => attention::contaminate(
            &softmax_scores(&panel.distances, params.tau, params.sign),
            &params.w,
            params.epsilon,
        ),
        ModelKind::Abrf2 => attention::abrf2_weights(panel, &params.v, &params.z, params.sign),
        ModelKind::Abrf3 => attention::abrf3_weights(panel, params),
    }
}

pub fn predict_panels(kind: ModelKind, params: &AttentionParams, panels: &[InstancePanel]) -> Vec<Prediction> {
    panels
        .iter()
        .map(|p| attention::predict(&attention_weights(kind, params, p), p))
        .collect()
}

/// Selection metric: R² for regression, F1 for classification.
pub fn score(predictions: &[Prediction], targets: &Targets, average: F1Average) -> Result<f64> {
    match targets {
        Targets::Regression(y) => {
            let yhat: Vec<f64> = predictions.iter().map(|p| p.value().unwrap_or(f64::NAN)).collect();
            metrics::r2(y, &yhat)
        }
        Targets::Classification { labels, classes } => {
            let yhat: Vec<usize> = predictions.iter().map(|p| p.label().unwrap_or(usize::MAX)).collect();
            metrics::f1(labels, &yhat, classes.len(), average)
        }
    }
}

pub const WEIGHTS_FORMAT: &str = "abrf-weights";
pub const WEIGHTS_VERSION: u32 = 1;

/// Trained attention parameters, stored separately from the forest so they
/// can be retrained without touching the trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionModel {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub task: Task,
    pub n_trees: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Class names in label order, when known.
    #[serde(default)]
    pub classes: Vec<String>,
    pub params: AttentionParams,
}

impl AttentionModel {
    pub fn new(kind: ModelKind, forest: &Forest, params: AttentionParams) -> Result<Self> {
        params.validate(forest.n_trees(), forest.n_features())?;
        Ok(Self {
            format: WEIGHTS_FORMAT.into(),
            version: WEIGHTS_VERSION,
            kind,
            task: forest.task(),
            n_trees: forest.n_trees(),
            n_features: forest.n_features(),
            n_classes: forest.n_classes(),
            classes: Vec::new(),
            params,
        })
    }

    pub fn fit(kind: ModelKind, forest: &Forest, ds: &Dataset, epsilon: f64, tau: f64, opts: &TrainOptions) -> Result<Self> {
        let set = PanelSet::new(forest, ds)?;
        let mut model = Self::new(kind, forest, train_params(kind, &set, epsilon, tau, opts)?)?;
        if let Targets::Classification { classes, .. } = ds.targets() {
            model.classes = classes.clone();
        }
        Ok(model)
    }

    /// Checks that this model was trained against a forest of this shape.
    pub fn check_forest(&self, forest: &Forest) -> Result<()> {
        if self.task != forest.task()
            || self.n_trees != forest.n_trees()
            || self.n_features != forest.n_features()
            || self.n_classes != forest.n_classes()
        {
            return Err(Error::Config(format!(
                "weights were trained for {} trees × {} features ({:?}), forest has {} × {} ({:?})",
                self.n_trees,
                self.n_features,
                self.task,
                forest.n_trees(),
                forest.n_features(),
                forest.task()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, forest: &Forest, x: &[f64]) -> Result<Prediction> {
        self.check_forest(forest)?;
        let panel = forest.panel(x, None)?;
        Ok(attention::predict(&attention_weights(self.kind, &self.params, &panel), &panel))
    }

    pub fn predict_dataset(&self, forest: &Forest, ds: &Dataset) -> Result<Vec<Prediction>> {
        self.check_forest(forest)?;
        Ok(predict_panels(self.kind, &self.params, &forest.panels(ds)?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: AttentionModel = serde_json::from_str(s)?;
        if m.format != WEIGHTS_FORMAT || m.version != WEIGHTS_VERSION {
            return Err(Error::Config(format!("unsupported weights document {} v{}", m.format, m.version)));
        }
        m.params.validate(m.n_trees, m.n_features)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_friedman;
    use crate::data::FriedmanVariant;
    use crate::forest::{fit_forest, Ensemble, ForestConfig};
    use crate::tree::GrowthCondition;
    use approx::assert_abs_diff_eq;

    fn small_forest(task: Task) -> (Forest, Dataset) {
        let ds = match task {
            Task::Regression => gen_friedman(FriedmanVariant::One, 60, 0.5, 3).unwrap(),
            Task::Classification => {
                let full = crate::data::gen_tictactoe();
                full.subset(&(0..full.n_samples()).step_by(8).collect::<Vec<_>>())
            }
        };
        let cfg = ForestConfig::new(8, Ensemble::Rf, GrowthCondition::MinLeaf(5), 11);
        (fit_forest(&ds, &cfg).unwrap(), ds)
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!("ABRF1".parse::<ModelKind>().unwrap(), ModelKind::Abrf1Qp);
        assert!("abrf9".parse::<ModelKind>().is_err());
    }

    #[test]
    fn stacked_shape_for_classification() {
        let (forest, ds) = small_forest(Task::Classification);
        let sub = ds.subset(&[0, 1, 2, 3, 4]);
        let set = PanelSet::new(&forest, &sub).unwrap();
        let inst = set.qp_instance(0.5, 1.0, SoftmaxSign::Negative).unwrap();
        assert_eq!(inst.n_rows(), 5 * 2);
        assert_eq!(inst.n_trees, 8);
    }

    #[test]
    fn gram_form_matches_instance() {
        let (forest, ds) = small_forest(Task::Regression);
        let set = PanelSet::new(&forest, &ds).unwrap();
        let inst = set.qp_instance(0.4, 0.5, SoftmaxSign::Negative).unwrap();
        let gram = set.qp_gram(0.4, 0.5, SoftmaxSign::Negative);
        let w: Vec<f64> = (1..=8).map(|k| k as f64 / 36.0).collect();
        assert_abs_diff_eq!(inst.objective(&w), gram.objective(&w), epsilon = 1e-8 * inst.objective(&w));
    }

    #[test]
    fn zero_epsilon_qp_objective_is_softmax_loss() {
        let (forest, ds) = small_forest(Task::Classification);
        let set = PanelSet::new(&forest, &ds).unwrap();
        let sol = solve_qp_contamination(&set, 0.0, 1.0, SoftmaxSign::Negative, &QpOptions::default()).unwrap();
        assert!(sol.w.iter().all(|&v| v == 1.0 / 8.0));
        let Targets::Classification { labels, .. } = ds.targets() else { unreachable!() };
        let params = AttentionParams::uniform(8, ds.n_features());
        let loss: f64 = predict_panels(ModelKind::Softmax, &params, set.panels())
            .iter()
            .zip(labels)
            .map(|(p, &l)| match p {
                Prediction::Class { dist, .. } => dist
                    .iter()
                    .enumerate()
                    .map(|(c, v)| (v - if c == l { 1.0 } else { 0.0 }).powi(2))
                    .sum::<f64>(),
                Prediction::Value(_) => unreachable!(),
            })
            .sum();
        assert_abs_diff_eq!(sol.objective, loss, epsilon = 1e-9 * loss.max(1.0));
    }

    #[test]
    fn trained_params_are_valid_for_every_kind() {
        for task in [Task::Regression, Task::Classification] {
            let (forest, ds) = small_forest(task);
            let set = PanelSet::new(&forest, &ds).unwrap();
            let opts = TrainOptions {
                grad: GradConfig {
                    max_iters: 50,
                    ..GradConfig::default()
                },
                ..TrainOptions::default()
            };
            for kind in ModelKind::ALL {
                let params = train_params(kind, &set, 0.5, 1.0, &opts).unwrap();
                params.validate(8, ds.n_features()).unwrap();
                for p in set.panels().iter().take(10) {
                    let a = attention_weights(kind, &params, p);
                    assert!(attention::on_simplex(&a, 1e-9), "{kind}");
                }
            }
        }
    }

    #[test]
    fn model_json_round_trip_and_shape_check() {
        let (forest, ds) = small_forest(Task::Regression);
        let model = AttentionModel::fit(ModelKind::Abrf1Qp, &forest, &ds, 0.5, 1.0, &TrainOptions::default()).unwrap();
        let back = AttentionModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        let a = model.predict_dataset(&forest, &ds).unwrap();
        let b = back.predict_dataset(&forest, &ds).unwrap();
        assert_eq!(a, b);

        let (other, _) = small_forest(Task::Classification);
        assert!(model.check_forest(&other).is_err());
        assert!(model.predict(&forest, &[0.0; 3]).is_err());
    }
}
